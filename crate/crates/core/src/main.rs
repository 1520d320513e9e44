fn main() {
    fracture2d::cli::main_with_exit()
}
