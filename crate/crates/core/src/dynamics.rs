//! Time advancement with scale separation.
//!
//! Shells below the cutoff `k_c = 2 k_e` are "large": their centers ride
//! the mean flow plus a frozen Gaussian advective velocity drawn once per
//! mode. Smaller scales are swept by the mean flow plus the large-scale
//! velocity itself, and additionally carry a temporal wavelet envelope
//! with a random frequency tied to the inertial-range timescale
//! `eps^(1/3) |k|^(2/3)`.

use crate::domain::{BoundaryKind, DomainSpec};
use crate::error::{Error, Result};
use crate::field::{FieldGrid, GridSpec};
use crate::profile::RansProfile;
use crate::rng::{stream_seed, substream, DrawKind};
use crate::sampler::{ModeSet, Variant};
use crate::spectrum::WavenumberSequence;
use crate::synthesis::{velocity_v_at, SpatialIndex};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Large/small scale cutoff `k_c = 2 k_e`.
pub fn cutoff_wavenumber(k_e: f64) -> Result<f64> {
    if k_e <= 0.0 {
        return Err(Error::invalid("k_e", "energetic wavenumber must be > 0"));
    }
    Ok(2.0 * k_e)
}

/// Exhaustive, disjoint partition of shell indices at `k_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSplit {
    pub k_c: f64,
    pub large_shells: Vec<usize>,
    pub small_shells: Vec<usize>,
}

impl ScaleSplit {
    pub fn new(sequence: &WavenumberSequence, k_c: f64) -> Self {
        let mut large = Vec::new();
        let mut small = Vec::new();
        for (i, l, _) in sequence.iter() {
            if l <= k_c {
                large.push(i);
            } else {
                small.push(i);
            }
        }
        Self {
            k_c,
            large_shells: large,
            small_shells: small,
        }
    }

    pub fn is_large(&self, shell: usize) -> bool {
        self.large_shells.binary_search(&shell).is_ok()
    }
}

/// Gaussian advective velocity with per-component variance
/// `E dl / (2 k_t) * <u_i u_i>` (no summation).
pub fn sample_advection_velocity(
    energy_density: f64,
    dl: f64,
    k_t: f64,
    r_diag: [f64; 3],
    rng: &mut impl Rng,
) -> Result<[f64; 3]> {
    if energy_density < 0.0 || dl < 0.0 || r_diag.iter().any(|&v| v < 0.0) {
        return Err(Error::invalid("variance", "negative variance inputs"));
    }
    if energy_density == 0.0 {
        return Ok([0.0; 3]);
    }
    if k_t <= 0.0 {
        return Err(Error::invalid("k_t", "positive TKE required"));
    }
    let scale = energy_density * dl / (2.0 * k_t);
    let mut w = [0.0; 3];
    for i in 0..3 {
        let sigma = (scale * r_diag[i]).sqrt();
        let g: f64 = rng.sample(StandardNormal);
        w[i] = sigma * g;
    }
    Ok(w)
}

/// Mean of the frequency distribution, `eps^(1/3) |k|^(2/3)`.
pub fn frequency_mean(k: [f64; 3], eps: f64) -> f64 {
    let norm = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
    eps.max(0.0).cbrt() * norm.powf(2.0 / 3.0)
}

/// Random temporal frequency: normal with mean and standard deviation both
/// `eps^(1/3) |k|^(2/3)`, resampled to the positive half-line.
pub fn sample_frequency(k: [f64; 3], eps: f64, rng: &mut impl Rng) -> f64 {
    let m = frequency_mean(k, eps);
    if m == 0.0 {
        return 0.0;
    }
    loop {
        let g: f64 = rng.sample(StandardNormal);
        let omega = m + m * g;
        if omega > 0.0 {
            return omega;
        }
    }
}

/// Random phase, uniform over the 1D effective-support interval
/// `[-s(delta), s(delta)]` in the dimensionless envelope argument.
pub fn sample_phase(tail_radius: f64, rng: &mut impl Rng) -> f64 {
    rng.gen_range(-tail_radius..tail_radius)
}

/// Per-mode advection state: current center plus the frozen draw `W_k`
/// (zero for small-scale modes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvectionState {
    pub center: [f64; 3],
    pub w: [f64; 3],
}

/// Explicit Euler step for a large-scale mode: `x += (U(x) + W) dt`.
pub fn advance_large(
    state: &mut AdvectionState,
    mean_velocity: [f64; 3],
    dt: f64,
) {
    for i in 0..3 {
        state.center[i] += (mean_velocity[i] + state.w[i]) * dt;
    }
}

/// Explicit Euler step for a small-scale mode: `x += (U(x) + u_l(x)) dt`.
pub fn advance_small(
    state: &mut AdvectionState,
    mean_velocity: [f64; 3],
    large_scale_velocity: [f64; 3],
    dt: f64,
) {
    for i in 0..3 {
        state.center[i] += (mean_velocity[i] + large_scale_velocity[i]) * dt;
    }
}

/// Wraps periodic axes and reflects off no-slip exclusion bounds so the
/// support keeps clear of walls; open axes drift freely.
pub fn apply_boundary(center: &mut [f64; 3], support: [f64; 3], domain: &DomainSpec) {
    for axis in 0..3 {
        if domain.is_periodic(axis) {
            let period = domain.extent(axis);
            center[axis] = (center[axis] - domain.min[axis]).rem_euclid(period) + domain.min[axis];
            continue;
        }
        let noslip_lo = domain.faces[axis][0] == BoundaryKind::NoSlip;
        let noslip_hi = domain.faces[axis][1] == BoundaryKind::NoSlip;
        if !noslip_lo && !noslip_hi {
            continue;
        }
        let lo = domain.min[axis] + support[axis];
        let hi = domain.max[axis] - support[axis];
        if noslip_lo && noslip_hi {
            if lo >= hi {
                continue;
            }
            // Elastic reflection into [lo, hi].
            let span = hi - lo;
            let mut t = (center[axis] - lo).rem_euclid(2.0 * span);
            if t > span {
                t = 2.0 * span - t;
            }
            center[axis] = lo + t;
        } else if noslip_lo && center[axis] < lo {
            center[axis] = 2.0 * lo - center[axis];
        } else if noslip_hi && center[axis] > hi {
            center[axis] = 2.0 * hi - center[axis];
        }
    }
}

/// Mean velocity field sampled during advection.
pub enum MeanField<'a> {
    Uniform([f64; 3]),
    Profile { profile: &'a RansProfile, axis: usize },
}

impl<'a> MeanField<'a> {
    pub fn at(&self, x: [f64; 3]) -> [f64; 3] {
        match self {
            Self::Uniform(u) => *u,
            Self::Profile { profile, axis } => profile.mean_velocity(x[*axis]),
        }
    }
}

/// Redraw policy for the large-scale advective velocity `W_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WPolicy {
    /// One draw per mode, held for the whole run.
    Frozen,
    /// Independent draw every step.
    Redraw,
    /// No random advection.
    Off,
}

/// Statistics needed to size the advective velocity draws.
pub enum AdvectionStats<'a> {
    Isotropic { k_t: f64 },
    Profile { profile: &'a RansProfile, axis: usize },
}

impl<'a> AdvectionStats<'a> {
    fn at(&self, x: [f64; 3]) -> ([f64; 3], f64) {
        match self {
            Self::Isotropic { k_t } => ([2.0 * k_t / 3.0; 3], *k_t),
            Self::Profile { profile, axis } => {
                let s = profile.sample(x[*axis]);
                let c = s.stress.components();
                ([c[0], c[1], c[2]], s.tke())
            }
        }
    }
}

/// Time-advancement scene.
pub struct Scene<'a> {
    pub mean: MeanField<'a>,
    pub stats: AdvectionStats<'a>,
    pub dt: f64,
    pub n_steps: usize,
    pub w_policy: WPolicy,
    /// Grid used to cache the large-scale advecting field per step; `None`
    /// evaluates it exactly at every small-scale center.
    pub ul_grid: Option<[usize; 3]>,
}

/// Scale-separated mode advection. The mode set is advanced in place;
/// weights are never modified, only centers move and time accumulates.
pub struct Evolution<'a> {
    set: ModeSet,
    scene: Scene<'a>,
    split: ScaleSplit,
    /// Frozen `W_k` per mode (zeros for small scales or `Off`).
    w_draws: Vec<[f64; 3]>,
    step: usize,
}

impl<'a> Evolution<'a> {
    pub fn new(set: ModeSet, scene: Scene<'a>, k_c: f64) -> Result<Self> {
        if scene.dt <= 0.0 {
            return Err(Error::invalid("dt", "time step must be > 0"));
        }
        let split = ScaleSplit::new(set.sequence(), k_c);
        let mut evo = Self {
            set,
            scene,
            split,
            w_draws: Vec::new(),
            step: 0,
        };
        evo.w_draws = evo.draw_w(0);
        Ok(evo)
    }

    fn draw_w(&self, step: usize) -> Vec<[f64; 3]> {
        let seed = match self.scene.w_policy {
            WPolicy::Off => return vec![[0.0; 3]; self.set.modes().len()],
            WPolicy::Frozen => self.set.seed(),
            WPolicy::Redraw => stream_seed(
                self.set.seed(),
                step as u64,
                0,
                DrawKind::AdvectionVelocity,
            ),
        };
        let kt_floor = 1e-300;
        self.set
            .modes()
            .iter()
            .enumerate()
            .map(|(idx, mode)| {
                if !self.split.is_large(mode.shell as usize) {
                    return [0.0; 3];
                }
                let (r_diag, k_t) = self.scene.stats.at(mode.center);
                // E dl / (2 k_t) = advect_weight^2 * c_l / k_t
                let c_l = self.set.shell_coefficients()[mode.shell as usize].unwrap_or(0.0);
                let scale = mode.advect_weight * mode.advect_weight * c_l / k_t.max(kt_floor);
                let mut rng = substream(
                    seed,
                    mode.shell as u64,
                    idx as u64,
                    DrawKind::AdvectionVelocity,
                );
                let mut w = [0.0; 3];
                for i in 0..3 {
                    let g: f64 = rng.sample(StandardNormal);
                    w[i] = (scale * r_diag[i]).max(0.0).sqrt() * g;
                }
                w
            })
            .collect()
    }

    pub fn modes(&self) -> &ModeSet {
        &self.set
    }

    pub fn into_modes(self) -> ModeSet {
        self.set
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    /// Large-shell subset with solenoidal weights, used as the advecting
    /// field for smaller scales (divergence-free regardless of variant).
    fn large_subset(&self) -> ModeSet {
        let mut large = self.set.clone();
        let keep: Vec<bool> = self
            .set
            .modes()
            .iter()
            .map(|m| self.split.is_large(m.shell as usize))
            .collect();
        let mut modes = Vec::new();
        for (mode, keep) in self.set.modes().iter().zip(keep) {
            if keep {
                let mut m = mode.clone();
                m.weight = m.advect_weight;
                m.temporal = None;
                modes.push(m);
            }
        }
        large.replace_modes(modes, Variant::Solenoidal);
        large
    }

    /// One explicit Euler step.
    pub fn advance(&mut self) -> Result<()> {
        let t = self.set.time();
        let dt = self.scene.dt;
        if self.scene.w_policy == WPolicy::Redraw {
            self.w_draws = self.draw_w(self.step);
        }

        // Large-scale advecting velocity, sampled before anything moves.
        let large = self.large_subset();
        enum Advector {
            Grid(FieldGrid),
            Exact(SpatialIndex),
        }
        let advector = match self.scene.ul_grid {
            Some(dims) => {
                let spec = GridSpec::covering(large.domain(), dims)?;
                Advector::Grid(crate::synthesis::evaluate_grid(
                    &large,
                    &spec,
                    Variant::Solenoidal,
                    None,
                )?)
            }
            None => Advector::Exact(SpatialIndex::build(&large)?),
        };
        let u_l = |x: [f64; 3]| -> [f64; 3] {
            match &advector {
                Advector::Grid(field) => field.sample_trilinear(x),
                Advector::Exact(index) => velocity_v_at(&large, index, x, t),
            }
        };

        let domain = *self.set.domain();
        let mean = &self.scene.mean;
        let split = &self.split;
        let w_draws = &self.w_draws;
        let updated: Vec<[f64; 3]> = self
            .set
            .modes()
            .par_iter()
            .enumerate()
            .map(|(idx, mode)| {
                let mut state = AdvectionState {
                    center: mode.center,
                    w: w_draws[idx],
                };
                let u_mean = mean.at(state.center);
                if split.is_large(mode.shell as usize) {
                    advance_large(&mut state, u_mean, dt);
                } else {
                    let sweep = u_l(state.center);
                    advance_small(&mut state, u_mean, sweep, dt);
                }
                apply_boundary(&mut state.center, mode.support, &domain);
                state.center
            })
            .collect();
        for (mode, center) in self.set.modes_mut().iter_mut().zip(updated) {
            mode.center = center;
        }
        self.set.set_time(t + dt);
        self.step += 1;
        Ok(())
    }

    /// Runs `n_steps` and collects a snapshot after each step (plus the
    /// initial state), for small mode sets.
    pub fn run_collect(mut self) -> Result<Vec<ModeSet>> {
        let mut out = vec![self.set.clone()];
        for _ in 0..self.scene.n_steps {
            self.advance()?;
            out.push(self.set.clone());
        }
        Ok(out)
    }

    /// Advances `n_steps`, recording the raw curl velocity at each probe
    /// after every step. Returns one time series per probe.
    pub fn record_probes(&mut self, probes: &[[f64; 3]], n_steps: usize) -> Result<ProbeSeries> {
        let mut series = vec![Vec::with_capacity(n_steps); probes.len()];
        for _ in 0..n_steps {
            self.advance()?;
            let t = self.set.time();
            // Per-probe cover lists, then parallel evaluation per probe;
            // each probe sums its modes in ascending order.
            let mut cover: Vec<Vec<u32>> = vec![Vec::new(); probes.len()];
            let entries = self.set.image_entries()?;
            for (id, entry) in entries.iter().enumerate() {
                let support = self.set.modes()[entry.mode as usize].support;
                for (p, probe) in probes.iter().enumerate() {
                    if (0..3).all(|a| (probe[a] - entry.center[a]).abs() <= support[a]) {
                        cover[p].push(id as u32);
                    }
                }
            }
            let samples: Vec<[f64; 3]> = probes
                .par_iter()
                .zip(cover.par_iter())
                .map(|(probe, ids)| {
                    let mut v = [0.0; 3];
                    for &id in ids {
                        let entry = entries[id as usize];
                        let mode = &self.set.modes()[entry.mode as usize];
                        let shifted = [
                            probe[0] - (entry.center[0] - mode.center[0]),
                            probe[1] - (entry.center[1] - mode.center[1]),
                            probe[2] - (entry.center[2] - mode.center[2]),
                        ];
                        let dv = crate::synthesis::curl_mode_at(&self.set, mode, shifted, t);
                        v[0] += dv[0];
                        v[1] += dv[1];
                        v[2] += dv[2];
                    }
                    v
                })
                .collect();
            for (p, v) in samples.into_iter().enumerate() {
                series[p].push(v);
            }
        }
        Ok(ProbeSeries {
            dt: self.scene.dt,
            series,
        })
    }
}

/// Velocity time series at fixed probes with uniform sampling interval.
#[derive(Debug, Clone)]
pub struct ProbeSeries {
    pub dt: f64,
    /// One vector series per probe.
    pub series: Vec<Vec<[f64; 3]>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand_chacha::rand_core::SeedableRng;

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn cutoff_doubles_ke() {
        assert_abs_diff_eq!(cutoff_wavenumber(0.746834).unwrap(), 1.493668);
        assert_abs_diff_eq!(cutoff_wavenumber(1.0).unwrap(), 2.0);
        assert!(cutoff_wavenumber(2.0).unwrap() > cutoff_wavenumber(1.0).unwrap());
        assert!(cutoff_wavenumber(0.0).is_err());
    }

    #[test]
    fn scale_partition_is_exhaustive_and_disjoint() {
        let seq = WavenumberSequence::log_spaced(0.5, 0.25, 12).unwrap();
        for k_c in [0.1, 1.0, 2.3, 100.0] {
            let split = ScaleSplit::new(&seq, k_c);
            let mut all: Vec<usize> = split
                .large_shells
                .iter()
                .chain(split.small_shells.iter())
                .copied()
                .collect();
            all.sort_unstable();
            assert_eq!(all, (0..seq.len()).collect::<Vec<_>>());
            for shell in &split.large_shells {
                assert!(seq.magnitude(*shell) <= k_c);
            }
            for shell in &split.small_shells {
                assert!(seq.magnitude(*shell) > k_c);
            }
        }
    }

    #[test]
    fn advection_velocity_statistics() {
        let mut r = rng(1);
        assert_eq!(
            sample_advection_velocity(0.0, 0.1, 1.0, [1.0; 3], &mut r).unwrap(),
            [0.0; 3]
        );
        assert!(sample_advection_velocity(1.0, 0.1, 1.0, [-1.0, 1.0, 1.0], &mut r).is_err());

        // Isotropic: per-component variance E dl / (2 k_t) * (2 k_t / 3).
        let (e, dl, kt) = (0.8, 0.3, 1.5);
        let iso = [2.0 * kt / 3.0; 3];
        let n = 100_000;
        let mut var = [0.0f64; 3];
        for _ in 0..n {
            let w = sample_advection_velocity(e, dl, kt, iso, &mut r).unwrap();
            for i in 0..3 {
                var[i] += w[i] * w[i];
            }
        }
        let expected = e * dl / (2.0 * kt) * (2.0 * kt / 3.0);
        // Var of the variance estimator is 2 sigma^4 / n.
        let bound = 3.0 * (2.0f64 / n as f64).sqrt() * expected;
        for v in var {
            assert!((v / n as f64 - expected).abs() < bound);
        }

        // Anisotropic: x-variance 4x the y-variance.
        let aniso = [4.0 * kt / 3.0, kt / 3.0, kt / 3.0];
        let mut var = [0.0f64; 3];
        for _ in 0..n {
            let w = sample_advection_velocity(e, dl, kt, aniso, &mut r).unwrap();
            for i in 0..3 {
                var[i] += w[i] * w[i];
            }
        }
        assert_relative_eq!(var[0] / var[1], 4.0, max_relative = 0.1);
    }

    #[test]
    fn euler_steps_are_exact_for_constant_fields() {
        let mut s = AdvectionState {
            center: [1.0, 2.0, 3.0],
            w: [0.0; 3],
        };
        advance_large(&mut s, [0.0; 3], 0.5);
        assert_eq!(s.center, [1.0, 2.0, 3.0]);
        advance_large(&mut s, [1.0, 0.0, 0.0], 0.5);
        assert_eq!(s.center, [1.5, 2.0, 3.0]);

        // Two half steps equal one full step for constant velocity.
        let mut a = AdvectionState {
            center: [0.1, 0.2, 0.3],
            w: [0.2, -0.1, 0.4],
        };
        let mut b = a;
        advance_large(&mut a, [0.5, 0.6, 0.7], 1.0);
        advance_large(&mut b, [0.5, 0.6, 0.7], 0.5);
        advance_large(&mut b, [0.5, 0.6, 0.7], 0.5);
        for i in 0..3 {
            assert_abs_diff_eq!(a.center[i], b.center[i], epsilon = 1e-15);
        }

        // Small-scale step reduces to mean-only when u_l = 0.
        let mut s = AdvectionState {
            center: [0.0; 3],
            w: [0.0; 3],
        };
        advance_small(&mut s, [1.0, 0.0, 0.0], [0.0; 3], 0.25);
        assert_eq!(s.center, [0.25, 0.0, 0.0]);
        advance_small(&mut s, [0.0; 3], [0.0, 2.0, 0.0], 0.25);
        assert_eq!(s.center, [0.25, 0.5, 0.0]);
    }

    #[test]
    fn frequency_distribution() {
        let mut r = rng(2);
        assert_eq!(sample_frequency([1.0, 0.0, 0.0], 0.0, &mut r), 0.0);

        let k = [1.0, 2.0, 2.0];
        let eps = 0.7;
        let m = frequency_mean(k, eps);
        assert_relative_eq!(m, eps.cbrt() * 3.0f64.powf(2.0 / 3.0), max_relative = 1e-12);
        // Doubling |k| multiplies the mean parameter by 2^(2/3).
        assert_relative_eq!(
            frequency_mean([2.0, 4.0, 4.0], eps) / m,
            2.0f64.powf(2.0 / 3.0),
            max_relative = 1e-12
        );

        // Sample mean matches the positive-truncated normal with mu = sigma:
        // E[X | X > 0] = mu (1 + phi(-1) / (1 - Phi(-1))).
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let w = sample_frequency(k, eps, &mut r);
            assert!(w > 0.0);
            sum += w;
            sum_sq += w * w;
        }
        let phi = (-0.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let cap = 0.841_344_746_068_543; // Phi(1)
        let expected = m * (1.0 + phi / cap);
        let sample_mean = sum / n as f64;
        let sample_sd = (sum_sq / n as f64 - sample_mean * sample_mean).sqrt();
        assert!(
            (sample_mean - expected).abs() < 3.0 * sample_sd / (n as f64).sqrt(),
            "mean {sample_mean} vs {expected}"
        );
    }

    #[test]
    fn phase_is_uniform_over_the_support_interval() {
        let mut r = rng(3);
        let s = 5.8877;
        let n = 100_000;
        let bins = 32;
        let mut hist = vec![0usize; bins];
        for _ in 0..n {
            let phi = sample_phase(s, &mut r);
            assert!((-s..s).contains(&phi));
            let b = (((phi + s) / (2.0 * s)) * bins as f64) as usize;
            hist[b.min(bins - 1)] += 1;
        }
        let expected = n as f64 / bins as f64;
        let chi2: f64 = hist
            .iter()
            .map(|&h| (h as f64 - expected).powi(2) / expected)
            .sum();
        // chi-square 99th percentile with 31 dof.
        assert!(chi2 < 52.19, "chi2 = {chi2}");
    }

    #[test]
    fn boundary_application() {
        let domain = DomainSpec::with_axis_kinds(
            [0.0; 3],
            [4.0, 2.0, 4.0],
            [
                BoundaryKind::Periodic,
                BoundaryKind::NoSlip,
                BoundaryKind::Open,
            ],
        )
        .unwrap();
        let support = [0.5, 0.25, 0.5];
        let mut c = [4.5, 1.0, 1.0];
        apply_boundary(&mut c, support, &domain);
        assert_abs_diff_eq!(c[0], 0.5);
        // Reflection off the no-slip exclusion zone.
        let mut c = [1.0, 0.1, 1.0];
        apply_boundary(&mut c, support, &domain);
        assert_abs_diff_eq!(c[1], 0.4); // reflected about lo = 0.25
        // Open axis drifts freely.
        let mut c = [1.0, 1.0, 9.0];
        apply_boundary(&mut c, support, &domain);
        assert_abs_diff_eq!(c[2], 9.0);
    }
}
