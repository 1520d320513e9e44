//! Material data and the cohesive bond force law.
//!
//! All quantities are SI: density in kg/m³, moduli in N/m², fracture energy
//! in J/m². The model is plane strain throughout.
//!
//! The bond potential is a double well in the weighted stretch
//! `r = sqrt(|ξ|) s`,
//!
//! ```text
//! g(r) = C (1 - exp(-β r²)),
//! ```
//!
//! so the bond force `g'(r) = 2 C β r exp(-β r²)` is linear for small
//! stretch, peaks at the critical value `r_c = sqrt(1/(2β))` and softens
//! beyond it — bonds never break explicitly, they just stop carrying load.
//! `C` and `β` are calibrated so that, in the small-stretch limit, the
//! nonlocal model reproduces the requested engineering constants and the
//! energy dissipated per unit crack area equals `gc`.

use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MaterialError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("poisson ratio must lie in (0, 0.5), got {0}")]
    PoissonOutOfRange(f64),
}

/// Calibrated material. Construct with [`Material::calibrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Material {
    /// Mass density [kg/m³].
    pub rho: f64,
    /// Young's modulus [N/m²].
    pub young: f64,
    /// Poisson ratio.
    pub nu: f64,
    /// Critical energy release rate [J/m²].
    pub gc: f64,
    /// Cohesive well depth `C = π gc / 4`.
    pub c: f64,
    /// Cohesive decay rate `β`.
    pub beta: f64,
    /// Critical weighted stretch `r_c = sqrt(1/(2β))`; the bond force peaks
    /// here and bonds stretched further are considered broken.
    pub r_crit: f64,
    /// First Lamé parameter (plane strain) [N/m²].
    pub lambda: f64,
    /// Shear modulus [N/m²].
    pub mu: f64,
}

impl Material {
    /// Calibrates the cohesive constants from engineering constants.
    ///
    /// The bond-based model carries a fixed effective Poisson ratio of 1/3 in
    /// plane strain; other values are accepted (the continuum solver uses
    /// them exactly) but make the two models inconsistent — see
    /// [`Material::is_bond_consistent`].
    pub fn calibrate(rho: f64, young: f64, nu: f64, gc: f64) -> Result<Self, MaterialError> {
        for (name, value) in [("rho", rho), ("young", young), ("gc", gc)] {
            if !(value > 0.0) {
                return Err(MaterialError::NonPositive { name, value });
            }
        }
        if !(nu > 0.0 && nu < 0.5) {
            return Err(MaterialError::PoissonOutOfRange(nu));
        }
        let c = PI * gc / 4.0;
        let beta = 4.0 * young * nu / (c * (1.0 - nu) * (1.0 - 2.0 * nu));
        let r_crit = (0.5 / beta).sqrt();
        let lambda = young * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mu = young / (2.0 * (1.0 + nu));
        Ok(Self { rho, young, nu, gc, c, beta, r_crit, lambda, mu })
    }

    /// Whether the Poisson ratio matches the value the bond-based model
    /// actually produces (1/3 in plane strain).
    pub fn is_bond_consistent(&self) -> bool {
        (self.nu - 1.0 / 3.0).abs() < 1e-12
    }

    /// Cohesive potential `g(r) = C (1 - exp(-β r²))`.
    #[inline]
    pub fn g(&self, r: f64) -> f64 {
        self.c * (1.0 - (-self.beta * r * r).exp())
    }

    /// Derivative `g'(r) = 2 C β r exp(-β r²)`.
    #[inline]
    pub fn g_prime(&self, r: f64) -> f64 {
        2.0 * self.c * self.beta * r * (-self.beta * r * r).exp()
    }

    /// Magnitude (signed by `stretch`) of the pair force density between two
    /// points at reference distance `xi_norm` for a horizon `delta`,
    ///
    /// ```text
    /// f = 2 / (π δ³ sqrt(|ξ|)) · g'( sqrt(|ξ|) s ).
    /// ```
    ///
    /// The force acts along the reference bond direction; positive values
    /// attract (tension). Units are force per squared volume, so summing
    /// `f · V_j` over neighbours and multiplying by `V_i`-normalized mass
    /// yields accelerations.
    #[inline]
    pub fn pair_force_density(&self, xi_norm: f64, stretch: f64, delta: f64) -> f64 {
        let sq = xi_norm.sqrt();
        2.0 * self.g_prime(sq * stretch) / (PI * delta.powi(3) * sq)
    }

    /// Small-stretch bond stiffness: `pair_force_density ≈ stiffness · s`.
    #[inline]
    pub fn linear_bond_stiffness(&self, delta: f64) -> f64 {
        4.0 * self.c * self.beta / (PI * delta.powi(3))
    }

    /// Conservative stable time step estimate for the explicit dynamics,
    /// `dt_crit = (δ/2) sqrt(ρ / (C β))`, from the linearized bond stiffness
    /// integrated over the horizon disc.
    pub fn stable_dt(&self, delta: f64) -> f64 {
        0.5 * delta * (self.rho / (self.c * self.beta)).sqrt()
    }

    /// Plane-strain effective modulus `E / (1 - ν²)`.
    pub fn young_plane_strain(&self) -> f64 {
        self.young / (1.0 - self.nu * self.nu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // The reference parameter set used across the test suite.
    pub(crate) fn reference() -> Material {
        Material::calibrate(1200.0, 3.25e9, 1.0 / 3.0, 500.0).unwrap()
    }

    #[test]
    fn calibration_matches_closed_forms() {
        let m = reference();
        // c = π gc / 4 must round to exactly 125 π in f64.
        assert_eq!(m.c, PI * 125.0);
        // β = 16 E ν / (π gc (1-ν)(1-2ν)) = 1.56e8 / π for these inputs.
        let beta_exact = 1.56e8 / PI;
        assert!((m.beta - beta_exact).abs() <= 1e-9 * beta_exact);
        let r_exact = (0.5 * PI / 1.56e8).sqrt();
        assert!((m.r_crit - r_exact).abs() <= 1e-9 * r_exact);
        // Lamé constants, plane strain.
        assert!((m.mu - 1.21875e9).abs() < 1.0);
        assert!((m.lambda - 2.4375e9).abs() < 1.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            Material::calibrate(0.0, 1.0, 0.3, 1.0),
            Err(MaterialError::NonPositive { name: "rho", .. })
        ));
        assert!(matches!(
            Material::calibrate(1.0, -2.0, 0.3, 1.0),
            Err(MaterialError::NonPositive { name: "young", .. })
        ));
        assert!(matches!(
            Material::calibrate(1.0, 1.0, 0.3, f64::NAN),
            Err(MaterialError::NonPositive { name: "gc", .. })
        ));
        assert_eq!(
            Material::calibrate(1.0, 1.0, 0.5, 1.0),
            Err(MaterialError::PoissonOutOfRange(0.5))
        );
        assert_eq!(
            Material::calibrate(1.0, 1.0, -0.1, 1.0),
            Err(MaterialError::PoissonOutOfRange(-0.1))
        );
    }

    #[test]
    fn force_peaks_at_critical_stretch() {
        let m = reference();
        let r = m.r_crit;
        assert!(m.g_prime(0.999 * r) < m.g_prime(r));
        assert!(m.g_prime(1.001 * r) < m.g_prime(r));
        // Analytic peak value: g'(r_c) = 2 C β r_c e^{-1/2}.
        let peak = 2.0 * m.c * m.beta * r * (-0.5f64).exp();
        assert!((m.g_prime(r) - peak).abs() < 1e-9 * peak);
    }

    #[test]
    fn pair_force_is_odd_and_linear_for_small_stretch() {
        let m = reference();
        let (xi, delta) = (1.3e-3, 2e-3);
        for s in [1e-9, 1e-7, 1e-6] {
            let f = m.pair_force_density(xi, s, delta);
            assert_eq!(m.pair_force_density(xi, -s, delta), -f);
            let lin = m.linear_bond_stiffness(delta) * s;
            assert!((f - lin).abs() <= 1e-3 * lin, "s={s}: {f} vs {lin}");
        }
    }

    #[test]
    fn stable_dt_reference_value() {
        let m = reference();
        // C β = 125π · 1.56e8/π = 1.95e10 exactly, so the δ=0.002 estimate is
        // 0.001 · sqrt(1200 / 1.95e10).
        let expected = 0.001 * (1200.0f64 / 1.95e10).sqrt();
        let dt = m.stable_dt(0.002);
        assert!((dt - expected).abs() < 1e-12 * expected);
        assert!((dt - 2.48e-7).abs() < 0.01e-7);
    }

    proptest! {
        #[test]
        fn g_prime_is_derivative_of_g(r in 0.0f64..5e-4) {
            let m = reference();
            let h = 1e-10;
            let fd = (m.g(r + h) - m.g(r - h)) / (2.0 * h);
            let an = m.g_prime(r);
            let scale = m.c * m.beta * m.r_crit; // magnitude of g' near its peak
            prop_assert!((fd - an).abs() < 1e-5 * scale, "r={r}: fd={fd} an={an}");
        }

        #[test]
        fn potential_monotone_and_bounded(r in 0.0f64..1e-2) {
            let m = reference();
            prop_assert!(m.g(r) >= 0.0);
            prop_assert!(m.g(r) <= m.c);
            prop_assert!(m.g_prime(r) >= 0.0);
        }
    }
}
