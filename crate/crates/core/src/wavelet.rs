//! Mother wavelet and the tensor-product spatial basis.
//!
//! The 1D mother wavelet is the Mexican hat
//! `psi(x) = (1 - x^2) exp(-x^2 / 2)`, chosen for its closed-form
//! derivative and Fourier transform. A 3D basis element is the product
//! `psi(kx/k0 (x-xp)) psi(ky/k0 (y-yp)) psi(kz/k0 (z-zp))`, where `k0`
//! is the wavenumber at which the Fourier magnitude of `psi` peaks; the
//! scaling puts the dominant wavenumber of the element at `|k|`.

use crate::error::{Error, Result};
use std::sync::OnceLock;

/// Supported 1D mother wavelets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum WaveletKind {
    MexicanHat,
}

/// Mother wavelet with its cached spectral peak wavenumber.
#[derive(Debug, Clone, Copy)]
pub struct MotherWavelet {
    pub kind: WaveletKind,
    /// Peak of |F{psi}|, computed numerically at construction.
    pub k0: f64,
}

impl MotherWavelet {
    pub fn new(kind: WaveletKind) -> Result<Self> {
        let k0 = peak_wavenumber(kind)?;
        Ok(Self { kind, k0 })
    }

    pub fn mexican_hat() -> Self {
        Self::new(WaveletKind::MexicanHat).expect("mexican hat is always supported")
    }

    #[inline]
    pub fn psi(&self, x: f64) -> f64 {
        psi(self.kind, x)
    }

    #[inline]
    pub fn psi_prime(&self, x: f64) -> f64 {
        psi_prime(self.kind, x)
    }

    /// Radius `s` such that `|psi(u)| < delta` for every `|u| > s`.
    pub fn tail_radius(&self, delta: f64) -> Result<f64> {
        tail_radius(self.kind, delta)
    }
}

/// Mexican hat value. Total function; no special cases.
#[inline]
pub fn psi(kind: WaveletKind, x: f64) -> f64 {
    match kind {
        WaveletKind::MexicanHat => (1.0 - x * x) * (-0.5 * x * x).exp(),
    }
}

/// Analytic derivative `psi'(x) = (x^3 - 3x) exp(-x^2/2)`.
#[inline]
pub fn psi_prime(kind: WaveletKind, x: f64) -> f64 {
    match kind {
        WaveletKind::MexicanHat => (x * x * x - 3.0 * x) * (-0.5 * x * x).exp(),
    }
}

/// Fourier magnitude of `psi` at wavenumber `k`, by quadrature.
///
/// `psi` is even, so the transform is real: `2 * int_0^R psi(x) cos(kx) dx`.
fn fourier_magnitude(kind: WaveletKind, k: f64) -> f64 {
    const R: f64 = 9.0;
    const N: usize = 4096;
    let h = R / N as f64;
    // Composite Simpson on [0, R].
    let mut acc = psi(kind, 0.0) + psi(kind, R) * (k * R).cos();
    for i in 1..N {
        let x = i as f64 * h;
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * psi(kind, x) * (k * x).cos();
    }
    (2.0 * acc * h / 3.0).abs()
}

/// Wavenumber at which `|F{psi}|` peaks, via golden-section search.
///
/// Cached per kind; the Mexican-hat value is `sqrt(2)` analytically and
/// the numeric result is used so the pipeline stays correct for future
/// wavelet kinds.
pub fn peak_wavenumber(kind: WaveletKind) -> Result<f64> {
    static MEXICAN_HAT_K0: OnceLock<f64> = OnceLock::new();
    match kind {
        WaveletKind::MexicanHat => Ok(*MEXICAN_HAT_K0.get_or_init(|| {
            golden_section_max(|k| fourier_magnitude(kind, k), 1e-3, 6.0, 1e-10)
        })),
    }
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// 1D envelope radius: smallest `s` with `|psi(u)| < delta` for all `|u| > s`.
///
/// For the Mexican hat, `|psi|` on the tail beyond `sqrt(3)` (the negative
/// lobe extremum, amplitude ~0.44626) decreases monotonically, so bisection
/// applies there. For thresholds above the lobe amplitude the crossing sits
/// on the initial descent from `psi(0) = 1`.
pub fn tail_radius(kind: WaveletKind, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(
            "delta",
            format!("support threshold must lie in (0, 1), got {delta}"),
        ));
    }
    let lobe = psi(kind, 3f64.sqrt()).abs();
    let (mut lo, mut hi) = if delta <= lobe {
        let mut hi = 3f64.sqrt();
        while psi(kind, hi).abs() > delta {
            hi += 1.0;
        }
        (hi - 1.0, hi)
    } else {
        (0.0, 1.0)
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if psi(kind, mid).abs() > delta {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One tensor-product basis element: wavevector, center and the mother
/// wavelet peak `k0` used for scaling.
#[derive(Debug, Clone, Copy)]
pub struct TensorBasisSpec {
    pub wavevector: [f64; 3],
    pub center: [f64; 3],
    pub k0: f64,
}

impl TensorBasisSpec {
    pub fn new(wavevector: [f64; 3], center: [f64; 3], k0: f64) -> Self {
        Self {
            wavevector,
            center,
            k0,
        }
    }
}

/// `Psi_k(x - xp)` as the product of three scaled 1D evaluations.
pub fn basis3d(kind: WaveletKind, spec: &TensorBasisSpec, x: [f64; 3]) -> f64 {
    let mut value = 1.0;
    for i in 0..3 {
        let u = spec.wavevector[i] / spec.k0 * (x[i] - spec.center[i]);
        value *= psi(kind, u);
    }
    value
}

/// Analytic gradient of [`basis3d`]; chain-rule factor `k_i/k0` per axis.
pub fn basis3d_gradient(kind: WaveletKind, spec: &TensorBasisSpec, x: [f64; 3]) -> [f64; 3] {
    let mut values = [0.0; 3];
    let mut derivs = [0.0; 3];
    for i in 0..3 {
        let a = spec.wavevector[i] / spec.k0;
        let u = a * (x[i] - spec.center[i]);
        values[i] = psi(kind, u);
        derivs[i] = a * psi_prime(kind, u);
    }
    [
        derivs[0] * values[1] * values[2],
        values[0] * derivs[1] * values[2],
        values[0] * values[1] * derivs[2],
    ]
}

/// Space-time basis: spatial product times the temporal envelope
/// `psi(omega_k/k0 * t - phi_p)`.
pub fn basis4d(
    kind: WaveletKind,
    spec: &TensorBasisSpec,
    x: [f64; 3],
    omega_k: f64,
    phi_p: f64,
    t: f64,
) -> f64 {
    basis3d(kind, spec, x) * psi(kind, omega_k / spec.k0 * t - phi_p)
}

/// `int_{-s}^{s} psi(u)^2 du`, closed form via the even Gaussian moments
/// `I_n(s) = int_{-s}^{s} u^{2n} e^{-u^2} du`.
pub fn psi_sq_integral(kind: WaveletKind, s: f64) -> f64 {
    match kind {
        WaveletKind::MexicanHat => {
            // psi^2 = (1 - 2u^2 + u^4) e^{-u^2}
            let i = gaussian_even_moments(s);
            i[0] - 2.0 * i[1] + i[2]
        }
    }
}

/// `int_{-s}^{s} psi'(u)^2 du`.
pub fn psi_prime_sq_integral(kind: WaveletKind, s: f64) -> f64 {
    match kind {
        WaveletKind::MexicanHat => {
            // psi'^2 = (u^6 - 6u^4 + 9u^2) e^{-u^2}
            let i = gaussian_even_moments(s);
            i[3] - 6.0 * i[2] + 9.0 * i[1]
        }
    }
}

/// `I_n(s) = int_{-s}^{s} u^{2n} e^{-u^2} du` for `n = 0..=3`, by the
/// recurrence `I_n = ((2n-1) I_{n-1} - 2 s^{2n-1} e^{-s^2}) / 2`.
fn gaussian_even_moments(s: f64) -> [f64; 4] {
    let mut i = [0.0; 4];
    i[0] = std::f64::consts::PI.sqrt() * statrs::function::erf::erf(s);
    let e = (-s * s).exp();
    for n in 1..4 {
        i[n] = ((2 * n - 1) as f64 * i[n - 1] - 2.0 * s.powi(2 * n as i32 - 1) * e) / 2.0;
    }
    i
}

/// Per-axis half-widths of the region where the element exceeds `delta`
/// in each 1D factor: `r_i = s(delta) * k0 / |k_i|`.
pub fn effective_support(
    kind: WaveletKind,
    spec: &TensorBasisSpec,
    delta: f64,
) -> Result<[f64; 3]> {
    let s = tail_radius(kind, delta)?;
    Ok(support_halfwidths(s, spec.k0, &spec.wavevector))
}

/// Half-widths from a precomputed 1D tail radius.
#[inline]
pub fn support_halfwidths(tail_radius: f64, k0: f64, wavevector: &[f64; 3]) -> [f64; 3] {
    [
        tail_radius * k0 / wavevector[0].abs(),
        tail_radius * k0 / wavevector[1].abs(),
        tail_radius * k0 / wavevector[2].abs(),
    ]
}
