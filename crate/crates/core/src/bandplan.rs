//! Spatial-spectral energy bookkeeping and the scale-reduction plan.
//!
//! Each wall-normal location carries its own spectrum `E(k, y)` built from
//! the local TKE, dissipation rate and the wall-limited energetic
//! wavenumber. The plan keeps, per location, the narrowest contiguous
//! wavenumber interval around the spectral peak that holds a `1 - e`
//! share of the local kinetic energy; shells outside the interval are
//! dropped at generation time.

use crate::error::{Error, Result};
use crate::profile::RansProfile;
use crate::spectrum::{ke_wall, kolmogorov_wavenumber, SpectrumModel, WavenumberSequence};
use std::io::Write;

/// Smallest TKE treated as turbulent; below it no spectrum is built.
const TKE_FLOOR: f64 = 1e-12;

/// Local spectrum model at height `y`: von Karman-Pao from `k_t(y)`,
/// `eps(y)` and the wall-modified `k_e(y)`, rescaled to integrate to
/// `k_t(y)` exactly. Wall distance is measured to the nearer profile end.
///
/// Returns `None` where the profile carries no energy.
pub fn local_spectrum(profile: &RansProfile, nu: f64, y: f64) -> Result<Option<SpectrumModel>> {
    if nu <= 0.0 {
        return Err(Error::invalid("nu", "kinematic viscosity must be > 0"));
    }
    let sample = profile.sample(y);
    let k_t = sample.tke();
    if k_t <= TKE_FLOOR || sample.eps <= 0.0 {
        return Ok(None);
    }
    let u_prime = (2.0 * k_t / 3.0).sqrt();
    let length = u_prime.powi(3) / sample.eps;
    let (lo, hi) = profile.y_range();
    let d_w = (y - lo).min(hi - y).max(1e-12);
    let k_e = ke_wall(length, d_w)?;
    let k_eta = kolmogorov_wavenumber(sample.eps, nu)?;
    Ok(Some(
        SpectrumModel::von_karman_pao(u_prime, k_e, k_eta)?.normalized(),
    ))
}

/// `E(k, y)`: the local spectrum evaluated at `k`.
pub fn spatial_spectral_energy(profile: &RansProfile, nu: f64, k: f64, y: f64) -> Result<f64> {
    let (lo, hi) = profile.y_range();
    if y < lo || y > hi {
        return Err(Error::invalid("y", format!("outside profile range [{lo}, {hi}]")));
    }
    Ok(match local_spectrum(profile, nu, y)? {
        Some(model) => model.evaluate(k),
        None => 0.0,
    })
}

/// Fraction of the local kinetic energy resolvable below `k_n`.
pub fn reconstruction_ratio(profile: &RansProfile, nu: f64, y: f64, k_n: f64) -> Result<f64> {
    if k_n < 0.0 {
        return Err(Error::invalid("k_N", "Nyquist wavenumber must be >= 0"));
    }
    let Some(model) = local_spectrum(profile, nu, y)? else {
        return Ok(1.0);
    };
    if k_n == 0.0 {
        return Ok(0.0);
    }
    let hi = k_n.min(100.0 * model.k_eta);
    Ok((model.tke_integral(0.0, hi)? / model.tke()).min(1.0))
}

/// Binned cache of local spectra, used in the per-mode weight loop.
pub struct LocalSpectra {
    y0: f64,
    dy: f64,
    bins: Vec<Option<SpectrumModel>>,
}

impl LocalSpectra {
    pub fn build(profile: &RansProfile, nu: f64, n_bins: usize) -> Result<Self> {
        let (lo, hi) = profile.y_range();
        let dy = (hi - lo) / n_bins as f64;
        let bins = (0..n_bins)
            .map(|i| local_spectrum(profile, nu, lo + (i as f64 + 0.5) * dy))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { y0: lo, dy, bins })
    }

    /// Model of the bin containing `y` (clamped to the profile range).
    pub fn at(&self, y: f64) -> Option<&SpectrumModel> {
        let i = (((y - self.y0) / self.dy).floor() as i64)
            .clamp(0, self.bins.len() as i64 - 1) as usize;
        self.bins[i].as_ref()
    }
}

/// Retained wavenumber interval per profile location.
#[derive(Debug, Clone)]
pub struct BandPlan {
    ys: Vec<f64>,
    gamma1: Vec<f64>,
    gamma2: Vec<f64>,
    captured: Vec<f64>,
    e_budget: f64,
}

impl BandPlan {
    pub fn e_budget(&self) -> f64 {
        self.e_budget
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        (0..self.ys.len()).map(move |i| (self.ys[i], self.gamma1[i], self.gamma2[i], self.captured[i]))
    }

    /// Band of the nearest profile row.
    pub fn band_at(&self, y: f64) -> (f64, f64) {
        let i = match self.ys.binary_search_by(|v| v.total_cmp(&y)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i >= self.ys.len() => self.ys.len() - 1,
            Err(i) => {
                if (y - self.ys[i - 1]).abs() <= (self.ys[i] - y).abs() {
                    i - 1
                } else {
                    i
                }
            }
        };
        (self.gamma1[i], self.gamma2[i])
    }

    pub fn captured_at(&self, y: f64) -> f64 {
        let (g1, _) = self.band_at(y);
        let i = self.gamma1.iter().position(|&g| g == g1).unwrap_or(0);
        self.captured[i]
    }

    /// True when every location captured at least `1 - e`.
    pub fn satisfies_budget(&self) -> bool {
        self.captured.iter().all(|&c| c >= 1.0 - self.e_budget - 1e-9)
    }

    /// Shell magnitudes of `sequence` inside the band at `y`.
    pub fn shells_in_band(&self, sequence: &WavenumberSequence, y: f64) -> Vec<usize> {
        let (g1, g2) = self.band_at(y);
        sequence
            .iter()
            .filter(|(_, l, _)| *l >= g1 && *l <= g2)
            .map(|(i, _, _)| i)
            .collect()
    }

    /// CSV rows `y,gamma1,gamma2,captured_fraction`.
    pub fn write_csv(&self, mut writer: impl Write) -> Result<()> {
        writeln!(writer, "y,gamma1,gamma2,captured_fraction")?;
        for (y, g1, g2, c) in self.rows() {
            writeln!(writer, "{y},{g1},{g2},{c}")?;
        }
        Ok(())
    }
}

/// Builds the retained band per profile row: the narrowest contiguous
/// interval around the spectral peak holding `(1 - e) k_t`, expanded
/// greedily toward the side with the larger marginal energy, with bounds
/// snapped outward to sequence magnitudes.
pub fn cutoff_bounds(
    profile: &RansProfile,
    nu: f64,
    e: f64,
    sequence: &WavenumberSequence,
) -> Result<BandPlan> {
    if !(0.0..1.0).contains(&e) {
        return Err(Error::invalid("e", "energy-loss budget must lie in [0, 1)"));
    }
    if sequence.is_empty() {
        return Err(Error::invalid("sequence", "no wavenumber shells"));
    }
    let edges = sequence.magnitudes();
    let last = edges.len() - 1;
    let mut ys = Vec::with_capacity(profile.len());
    let mut gamma1 = Vec::with_capacity(profile.len());
    let mut gamma2 = Vec::with_capacity(profile.len());
    let mut captured = Vec::with_capacity(profile.len());

    for &y in profile.ys() {
        ys.push(y);
        let Some(model) = local_spectrum(profile, nu, y)? else {
            gamma1.push(edges[0]);
            gamma2.push(edges[0]);
            captured.push(1.0);
            continue;
        };
        let k_t = model.tke();
        let target = (1.0 - e) * k_t;
        // Segment energies between consecutive magnitudes.
        let segments: Vec<f64> = (0..last)
            .map(|n| model.tke_integral(edges[n], edges[n + 1]))
            .collect::<Result<_>>()?;
        if e == 0.0 {
            // A zero budget keeps the whole resolved band outright; the
            // greedy expansion would otherwise stop on quadrature noise.
            gamma1.push(edges[0]);
            gamma2.push(edges[last]);
            captured.push(segments.iter().sum::<f64>() / k_t);
            continue;
        }
        // Peak of the von Karman-Pao shape sits at sqrt(12/5) k_e.
        let peak = ((12.0f64 / 5.0).sqrt() * model.k_e).clamp(edges[0], edges[last]);
        let mut i = edges.iter().rposition(|&l| l <= peak).unwrap_or(0);
        let mut j = edges.iter().position(|&l| l >= peak).unwrap_or(last);
        let mut current: f64 = segments[i..j].iter().sum();
        while current < target && (i > 0 || j < last) {
            let left = if i > 0 { segments[i - 1] } else { f64::NEG_INFINITY };
            let right = if j < last { segments[j] } else { f64::NEG_INFINITY };
            if left >= right {
                i -= 1;
                current += segments[i];
            } else {
                current += segments[j];
                j += 1;
            }
        }
        gamma1.push(edges[i]);
        gamma2.push(edges[j]);
        captured.push(current / k_t);
    }

    Ok(BandPlan {
        ys,
        gamma1,
        gamma2,
        captured,
        e_budget: e,
    })
}
