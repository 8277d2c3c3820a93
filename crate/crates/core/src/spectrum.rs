//! Energy spectrum models and the discrete wavenumber sequence.
//!
//! The working model is the von Karman-Pao spectrum
//!
//! ```text
//! E(k) = alpha * u'^2/ke * (k/ke)^4 / [1 + (k/ke)^2]^(17/6) * exp(-2 (k/k_eta)^2)
//! ```
//!
//! with `alpha = 55/(9 sqrt(pi)) * Gamma(5/6)/Gamma(1/3)`. The analytic
//! `alpha` normalizes the integral only in the limit `k_eta >> ke`; where
//! exact energy accounting is required (mode weights) the model is rescaled
//! so that `int_0^inf E = k_t` holds to quadrature accuracy, and the
//! rescale factor is kept on the model.

use crate::error::{Error, Result};
use statrs::function::gamma::gamma;

/// Relative tolerance used by [`SpectrumModel::tke_integral`].
pub const QUADRATURE_REL_TOL: f64 = 1e-6;

/// `alpha = 55/(9 sqrt(pi)) * Gamma(5/6) / Gamma(1/3) ~ 1.453`.
pub fn alpha_constant() -> f64 {
    55.0 / (9.0 * std::f64::consts::PI.sqrt()) * gamma(5.0 / 6.0) / gamma(1.0 / 3.0)
}

/// Wavenumber of the most energetic eddies for integral length scale `L`:
/// `ke = sqrt(pi) * Gamma(5/6)/Gamma(1/3) / L ~ 0.746834 / L`.
pub fn ke_isotropic(length_scale: f64) -> Result<f64> {
    if length_scale <= 0.0 {
        return Err(Error::invalid("L", "integral length scale must be > 0"));
    }
    Ok(std::f64::consts::PI.sqrt() * gamma(5.0 / 6.0) / gamma(1.0 / 3.0) / length_scale)
}

/// Wall-limited `ke`: energetic eddies may not exceed twice the wall
/// distance, so `ke = max(ke_isotropic(L), pi / d_w)`.
pub fn ke_wall(length_scale: f64, wall_distance: f64) -> Result<f64> {
    if wall_distance <= 0.0 {
        return Err(Error::invalid("d_w", "wall distance must be > 0"));
    }
    Ok(ke_isotropic(length_scale)?.max(std::f64::consts::PI / wall_distance))
}

/// Kolmogorov wavenumber `k_eta = eps^(1/4) nu^(-3/4)`.
pub fn kolmogorov_wavenumber(eps: f64, nu: f64) -> Result<f64> {
    if eps <= 0.0 {
        return Err(Error::invalid("eps", "dissipation rate must be > 0"));
    }
    if nu <= 0.0 {
        return Err(Error::invalid("nu", "kinematic viscosity must be > 0"));
    }
    Ok(eps.powf(0.25) * nu.powf(-0.75))
}

/// Parameterized energy spectrum.
#[derive(Debug, Clone, Copy)]
pub struct SpectrumModel {
    /// RMS velocity, `u'^2 = 2 k_t / 3`.
    pub u_prime: f64,
    pub k_e: f64,
    pub k_eta: f64,
    pub alpha: f64,
    /// Multiplicative correction making `int E = k_t` exact; 1 for the raw model.
    pub rescale: f64,
}

impl SpectrumModel {
    /// Raw von Karman-Pao model (`rescale = 1`).
    pub fn von_karman_pao(u_prime: f64, k_e: f64, k_eta: f64) -> Result<Self> {
        if u_prime < 0.0 {
            return Err(Error::invalid("u_prime", "rms velocity must be >= 0"));
        }
        if k_e <= 0.0 || k_eta <= 0.0 {
            return Err(Error::invalid("k_e/k_eta", "wavenumbers must be > 0"));
        }
        Ok(Self {
            u_prime,
            k_e,
            k_eta,
            alpha: alpha_constant(),
            rescale: 1.0,
        })
    }

    /// Model built from turbulent kinetic energy via isotropy `u'^2 = 2 k_t / 3`.
    pub fn from_tke(k_t: f64, k_e: f64, k_eta: f64) -> Result<Self> {
        if k_t < 0.0 {
            return Err(Error::invalid("k_t", "turbulent kinetic energy must be >= 0"));
        }
        Self::von_karman_pao((2.0 * k_t / 3.0).sqrt(), k_e, k_eta)
    }

    /// Target kinetic energy, `k_t = (3/2) u'^2`.
    pub fn tke(&self) -> f64 {
        1.5 * self.u_prime * self.u_prime
    }

    /// Copy of the model rescaled so the quadrature of `E` equals `k_t`.
    pub fn normalized(&self) -> Self {
        let mut out = *self;
        out.rescale = 1.0;
        if self.u_prime == 0.0 {
            return out;
        }
        let total = out
            .tke_integral(0.0, 100.0 * self.k_eta)
            .expect("normalization integral over a valid interval");
        out.rescale = self.tke() / total;
        out
    }

    /// Spectral energy density at wavenumber `k >= 0`.
    pub fn evaluate(&self, k: f64) -> f64 {
        if k <= 0.0 {
            return 0.0;
        }
        let x = k / self.k_e;
        let shape = x.powi(4) / (1.0 + x * x).powf(17.0 / 6.0);
        let cutoff = (-2.0 * (k / self.k_eta).powi(2)).exp();
        self.rescale * self.alpha * self.u_prime * self.u_prime / self.k_e * shape * cutoff
    }

    /// Adaptive quadrature of `E` over `[k_lo, k_hi]`, relative tolerance
    /// [`QUADRATURE_REL_TOL`].
    pub fn tke_integral(&self, k_lo: f64, k_hi: f64) -> Result<f64> {
        if !(k_lo >= 0.0 && k_hi >= k_lo) || !k_lo.is_finite() || !k_hi.is_finite() {
            return Err(Error::invalid(
                "k_lo/k_hi",
                format!("invalid integration interval [{k_lo}, {k_hi}]"),
            ));
        }
        if k_hi == k_lo || self.u_prime == 0.0 {
            return Ok(0.0);
        }
        // Pre-split at the spectral landmarks so the adaptive pass never
        // steps over the peak or the dissipation knee.
        let mut anchors = vec![k_lo, k_hi];
        for a in [
            0.1 * self.k_e,
            0.5 * self.k_e,
            self.k_e,
            2.0 * self.k_e,
            4.0 * self.k_e,
            10.0 * self.k_e,
            0.5 * self.k_eta,
            self.k_eta,
            2.0 * self.k_eta,
            4.0 * self.k_eta,
        ] {
            if a > k_lo && a < k_hi {
                anchors.push(a);
            }
        }
        anchors.sort_by(f64::total_cmp);
        let coarse: f64 = anchors
            .windows(2)
            .map(|w| simpson(&|k| self.evaluate(k), w[0], w[1]))
            .sum();
        let abs_tol = QUADRATURE_REL_TOL * coarse.abs().max(1e-300);
        let total = anchors
            .windows(2)
            .map(|w| {
                adaptive_simpson(
                    &|k| self.evaluate(k),
                    w[0],
                    w[1],
                    abs_tol * (w[1] - w[0]) / (k_hi - k_lo),
                    40,
                )
            })
            .sum();
        Ok(total)
    }
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let whole = simpson(f, a, b);
    let m = 0.5 * (a + b);
    let left = simpson(f, a, m);
    let right = simpson(f, m, b);
    let refined = left + right;
    if depth == 0 || (refined - whole).abs() <= 15.0 * tol {
        refined + (refined - whole) / 15.0
    } else {
        adaptive_simpson(f, a, m, 0.5 * tol, depth - 1)
            + adaptive_simpson(f, m, b, 0.5 * tol, depth - 1)
    }
}

/// Log-spaced shell magnitudes `l_n = exp(ln k_start + n d_k)`, `n = 0..=m`,
/// with forward-difference spacings (the last spacing is extrapolated
/// geometrically, which is the same expression).
#[derive(Debug, Clone, PartialEq)]
pub struct WavenumberSequence {
    magnitudes: Vec<f64>,
    deltas: Vec<f64>,
}

impl WavenumberSequence {
    pub fn log_spaced(k_start: f64, d_k: f64, m: usize) -> Result<Self> {
        if k_start <= 0.0 {
            return Err(Error::invalid("k_start", "first wavenumber must be > 0"));
        }
        if d_k <= 0.0 {
            return Err(Error::invalid("d_k", "log spacing must be > 0"));
        }
        let ln_start = k_start.ln();
        let magnitudes: Vec<f64> = (0..=m).map(|n| (ln_start + n as f64 * d_k).exp()).collect();
        let growth = d_k.exp() - 1.0;
        let deltas: Vec<f64> = magnitudes
            .iter()
            .enumerate()
            .map(|(n, &l)| {
                if n + 1 < magnitudes.len() {
                    magnitudes[n + 1] - l
                } else {
                    l * growth
                }
            })
            .collect();
        Ok(Self { magnitudes, deltas })
    }

    /// Sequence restricted to magnitudes `<= cap` (at least one is kept).
    pub fn capped(&self, cap: f64) -> Self {
        let keep = self
            .magnitudes
            .iter()
            .take_while(|&&l| l <= cap)
            .count()
            .max(1);
        Self {
            magnitudes: self.magnitudes[..keep].to_vec(),
            deltas: self.deltas[..keep].to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.magnitudes.is_empty()
    }

    pub fn magnitude(&self, shell: usize) -> f64 {
        self.magnitudes[shell]
    }

    pub fn delta(&self, shell: usize) -> f64 {
        self.deltas[shell]
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.magnitudes
            .iter()
            .zip(&self.deltas)
            .enumerate()
            .map(|(i, (&l, &dl))| (i, l, dl))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    /// Independent Gamma oracle: Lanczos approximation (g = 7, n = 9).
    fn lanczos_gamma(x: f64) -> f64 {
        const G: [f64; 9] = [
            0.999_999_999_999_809_93,
            676.520_368_121_885_1,
            -1_259.139_216_722_402_8,
            771.323_428_777_653_13,
            -176.615_029_162_140_6,
            12.507_343_278_686_905,
            -0.138_571_095_265_720_12,
            9.984_369_578_019_572e-6,
            1.505_632_735_149_311_6e-7,
        ];
        if x < 0.5 {
            std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * lanczos_gamma(1.0 - x))
        } else {
            let x = x - 1.0;
            let mut a = G[0];
            let t = x + 7.5;
            for (i, &g) in G.iter().enumerate().skip(1) {
                a += g / (x + i as f64);
            }
            (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
        }
    }

    #[test]
    fn alpha_matches_paper_value() {
        let a = alpha_constant();
        assert!((a - 1.453).abs() < 1e-3, "alpha = {a}");
        assert!(a > 0.0);
    }

    #[test]
    fn alpha_matches_independent_gamma_oracle() {
        let oracle =
            55.0 / (9.0 * std::f64::consts::PI.sqrt()) * lanczos_gamma(5.0 / 6.0)
                / lanczos_gamma(1.0 / 3.0);
        assert_relative_eq!(alpha_constant(), oracle, max_relative = 1e-6);
    }

    #[test]
    fn ke_isotropic_matches_paper_value() {
        assert_abs_diff_eq!(ke_isotropic(1.0).unwrap(), 0.746834, epsilon = 1e-5);
        assert_relative_eq!(
            ke_isotropic(2.0).unwrap(),
            0.5 * ke_isotropic(1.0).unwrap(),
            max_relative = 1e-14
        );
        assert!(ke_isotropic(0.0).is_err());
        assert!(ke_isotropic(-1.0).is_err());
    }

    #[test]
    fn ke_isotropic_for_hit_inputs() {
        // k_t = 0.5, eps = 0.0849 => u' = sqrt(1/3), L = u'^3 / eps.
        let u = (1.0f64 / 3.0).sqrt();
        let length = u.powi(3) / 0.0849;
        let ke = ke_isotropic(length).unwrap();
        assert_relative_eq!(ke, 0.746834 / length, max_relative = 1e-5);
        assert_abs_diff_eq!(ke, 0.329_47, epsilon = 1e-4);
    }

    #[test]
    fn ke_wall_limits_and_crossover() {
        let length = 0.7;
        let iso = ke_isotropic(length).unwrap();
        // Far wall: isotropic value.
        assert_relative_eq!(ke_wall(length, 1e9).unwrap(), iso, max_relative = 1e-12);
        // Near wall: pi / d_w dominates.
        let d = 1e-4;
        assert_relative_eq!(
            ke_wall(length, d).unwrap(),
            std::f64::consts::PI / d,
            max_relative = 1e-12
        );
        // Crossover where the branches meet.
        let crossover = std::f64::consts::PI / iso;
        assert_relative_eq!(
            ke_wall(length, crossover).unwrap(),
            iso,
            max_relative = 1e-12
        );
        assert!(ke_wall(length, crossover * 0.99).unwrap() > iso);
        assert!(ke_wall(length, 0.0).is_err());
    }

    #[test]
    fn kolmogorov_wavenumber_values() {
        assert_abs_diff_eq!(kolmogorov_wavenumber(1.0, 1.0).unwrap(), 1.0);
        // Fig-4-style inputs; frozen from direct arithmetic.
        assert_relative_eq!(
            kolmogorov_wavenumber(0.0849, 7e-4).unwrap(),
            125.43,
            max_relative = 1e-4
        );
        assert_relative_eq!(
            kolmogorov_wavenumber(2.0, 4.0).unwrap(),
            kolmogorov_wavenumber(2.0, 1.0).unwrap() / 4.0f64.powf(0.75),
            max_relative = 1e-12
        );
        assert!(kolmogorov_wavenumber(0.0, 1.0).is_err());
        assert!(kolmogorov_wavenumber(1.0, 0.0).is_err());
    }

    #[test]
    fn evaluate_shape() {
        let model = SpectrumModel::from_tke(0.5, 0.33, 1e4).unwrap();
        assert_eq!(model.evaluate(0.0), 0.0);
        assert!(model.evaluate(1e6) < 1e-300);
        // Peak at sqrt(12/5) * ke when the cutoff is negligible.
        let mut best = (0.0, 0.0);
        let mut k = 0.01;
        while k < 3.0 {
            let e = model.evaluate(k);
            if e > best.1 {
                best = (k, e);
            }
            k += 1e-4;
        }
        assert_relative_eq!(best.0, (12.0f64 / 5.0).sqrt() * 0.33, max_relative = 1e-3);
    }

    #[test]
    fn tke_integral_recovers_kt() {
        // The raw analytic alpha under-integrates once the exp cutoff is
        // active (the loss scales as (k_e/k_eta)^(2/3)); energy accounting
        // uses the rescaled model.
        let model = SpectrumModel::from_tke(0.5, 0.33, 125.43).unwrap().normalized();
        let total = model.tke_integral(0.0, 100.0 * model.k_eta).unwrap();
        assert!((total - 0.5).abs() / 0.5 < 0.01, "integral = {total}");
        // Degenerate interval.
        assert_eq!(model.tke_integral(0.7, 0.7).unwrap(), 0.0);
        // Additivity.
        let full = model.tke_integral(0.0, 10.0).unwrap();
        let split = model.tke_integral(0.0, 0.9).unwrap() + model.tke_integral(0.9, 10.0).unwrap();
        assert_relative_eq!(full, split, max_relative = 1e-5);
        assert!(model.tke_integral(2.0, 1.0).is_err());
    }

    #[test]
    fn normalized_model_is_exact() {
        // Strong cutoff: k_eta only 5x k_e, raw alpha under-integrates.
        let model = SpectrumModel::from_tke(1.2, 2.0, 10.0).unwrap();
        let raw = model.tke_integral(0.0, 100.0 * model.k_eta).unwrap();
        assert!(raw < model.tke());
        let normalized = model.normalized();
        let total = normalized.tke_integral(0.0, 100.0 * model.k_eta).unwrap();
        assert_relative_eq!(total, model.tke(), max_relative = 1e-4);
    }

    #[test]
    fn zero_energy_model_is_identically_zero() {
        let model = SpectrumModel::from_tke(0.0, 1.0, 10.0).unwrap().normalized();
        assert_eq!(model.evaluate(1.0), 0.0);
        assert_eq!(model.tke_integral(0.0, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn sequence_anchors() {
        let seq = WavenumberSequence::log_spaced(0.3, 0.2, 14).unwrap();
        assert_eq!(seq.len(), 15);
        assert_abs_diff_eq!(seq.magnitude(0), 0.3, epsilon = 1e-15);
        for n in 0..14 {
            assert_relative_eq!(
                seq.magnitude(n + 1) / seq.magnitude(n),
                (0.2f64).exp(),
                max_relative = 1e-12
            );
            assert_relative_eq!(
                seq.delta(n),
                seq.magnitude(n + 1) - seq.magnitude(n),
                max_relative = 1e-12
            );
        }
        // Last delta extrapolated geometrically.
        assert_relative_eq!(
            seq.delta(14),
            seq.magnitude(14) * ((0.2f64).exp() - 1.0),
            max_relative = 1e-12
        );
    }

    #[test]
    fn sequence_single_magnitude() {
        let seq = WavenumberSequence::log_spaced(0.7, 0.3, 0).unwrap();
        assert_eq!(seq.len(), 1);
        assert_abs_diff_eq!(seq.magnitude(0), 0.7, epsilon = 1e-15);
        assert!(seq.delta(0) > 0.0);
    }

    #[test]
    fn sequence_rejects_bad_parameters() {
        assert!(WavenumberSequence::log_spaced(0.0, 0.2, 5).is_err());
        assert!(WavenumberSequence::log_spaced(0.3, 0.0, 5).is_err());
        assert!(WavenumberSequence::log_spaced(-1.0, 0.2, 5).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn normalization_within_one_percent(
            u_prime in 0.1f64..3.0,
            k_e in 0.05f64..5.0,
            ratio in 50.0f64..500.0,
        ) {
            let model = SpectrumModel::von_karman_pao(u_prime, k_e, ratio * k_e)
                .unwrap()
                .normalized();
            let total = model.tke_integral(0.0, 100.0 * model.k_eta).unwrap();
            let kt = model.tke();
            prop_assert!(total >= 0.99 * kt && total <= 1.01 * kt);
        }

        #[test]
        fn spectrum_nonnegative_and_wall_floor(
            k in 0.0f64..100.0,
            length in 0.01f64..10.0,
            d_w in 1e-3f64..1e3,
        ) {
            let model = SpectrumModel::from_tke(0.5, 0.33, 30.0).unwrap();
            prop_assert!(model.evaluate(k) >= 0.0);
            prop_assert!(ke_wall(length, d_w).unwrap() >= ke_isotropic(length).unwrap());
        }

        #[test]
        fn sequence_strictly_increasing(
            k_start in 0.01f64..2.0,
            d_k in 0.01f64..0.8,
            m in 0usize..40,
        ) {
            let seq = WavenumberSequence::log_spaced(k_start, d_k, m).unwrap();
            for n in 0..seq.len() {
                prop_assert!(seq.delta(n) > 0.0);
                if n + 1 < seq.len() {
                    prop_assert!(seq.magnitude(n + 1) > seq.magnitude(n));
                }
            }
        }
    }

    #[test]
    fn monotone_tail_beyond_ten_ke() {
        let model = SpectrumModel::from_tke(0.5, 0.33, 125.43).unwrap();
        let mut prev = model.evaluate(10.0 * model.k_e);
        for i in 1..=100 {
            let k = 10.0 * model.k_e + i as f64 * 0.5;
            let next = model.evaluate(k);
            assert!(next < prev);
            prev = next;
        }
    }
}
