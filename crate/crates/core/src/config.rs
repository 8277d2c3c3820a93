//! Run configuration: TOML schema, validation, canonical hashing, and
//! assembly of generator setups.
//!
//! Unknown keys are rejected; every range violation names the offending
//! field. A config round-trips losslessly through serialize/parse, and
//! its FNV-1a hash of the canonical serialization is recorded in field
//! sidecars for provenance.

use crate::bandplan::BandPlan;
use crate::domain::{BoundaryKind, DomainSpec};
use crate::dynamics::cutoff_wavenumber;
use crate::error::{Error, Result};
use crate::field::GridSpec;
use crate::profile::RansProfile;
use crate::sampler::{EnergySource, GeneratorSetup, NoSlipPolicy, TemporalSetup, Variant};
use crate::spectrum::{ke_isotropic, kolmogorov_wavenumber, SpectrumModel, WavenumberSequence};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub domain: DomainConfig,
    pub grid: GridConfig,
    /// Homogeneous isotropic turbulence parameters; mutually exclusive
    /// with `[profile]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<HitConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileConfig>,
    pub modes: ModesConfig,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub boundary: BoundaryConfig,
    /// Sampling pad on open faces, as a fraction of the axis extent.
    #[serde(default = "default_open_pad")]
    pub open_pad: f64,
}

fn default_open_pad() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    pub x: AxisBoundary,
    pub y: AxisBoundary,
    pub z: AxisBoundary,
}

/// Either one kind for both faces or a `[low, high]` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisBoundary {
    Same(BoundaryKind),
    Pair([BoundaryKind; 2]),
}

impl AxisBoundary {
    fn faces(&self) -> [BoundaryKind; 2] {
        match self {
            AxisBoundary::Same(k) => [*k, *k],
            AxisBoundary::Pair(p) => *p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dims: [usize; 3],
    /// Evaluation box; defaults to the domain box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HitConfig {
    pub k_t: f64,
    pub eps: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub path: String,
    pub nu: f64,
    /// Wall-normal axis the profile runs along.
    #[serde(default = "default_wall_axis")]
    pub wall_axis: usize,
    /// Apply the scale-reduction band plan at generation time.
    #[serde(default)]
    pub scale_reduction: bool,
}

fn default_wall_axis() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModesConfig {
    pub k_start: f64,
    pub d_k: f64,
    /// Number of shell magnitudes.
    pub shells: usize,
    pub variant: Variant,
    #[serde(default = "default_floor_frac")]
    pub floor_frac: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_cl_samples")]
    pub cl_samples: usize,
    /// Energy-loss budget `e` of the scale-reduction plan.
    #[serde(default = "default_band_budget")]
    pub band_budget: f64,
    #[serde(default = "default_noslip_policy")]
    pub noslip_policy: NoSlipPolicy,
    #[serde(default = "default_noslip_retries")]
    pub noslip_retries: usize,
    #[serde(default = "default_noslip_fit_fraction")]
    pub noslip_fit_fraction: f64,
    #[serde(default = "default_max_modes")]
    pub max_modes: u64,
}

fn default_floor_frac() -> f64 {
    0.05
}

fn default_delta() -> f64 {
    1e-6
}

fn default_cl_samples() -> usize {
    4096
}

fn default_band_budget() -> f64 {
    0.01
}

fn default_noslip_policy() -> NoSlipPolicy {
    NoSlipPolicy::Resample
}

fn default_noslip_retries() -> usize {
    64
}

fn default_noslip_fit_fraction() -> f64 {
    1.0
}

fn default_max_modes() -> u64 {
    100_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub w_policy: crate::dynamics::WPolicy,
    /// Attach the temporal wavelet envelope to small-scale modes.
    pub envelope: bool,
    /// Probe lattice dims for `evolve` recording.
    pub probes: [usize; 3],
    /// Grid caching the large-scale advecting field; empty = exact.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ul_grid: Option<[usize; 3]>,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            n_steps: 0,
            w_policy: crate::dynamics::WPolicy::Frozen,
            envelope: false,
            probes: [4, 4, 4],
            ul_grid: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
}

impl GeneratorConfig {
    /// Parses and validates a TOML document.
    pub fn parse(text: &str) -> Result<Self> {
        let config: GeneratorConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// FNV-1a 64 of the canonical serialized config.
    pub fn hash(&self) -> u64 {
        fnv1a64(self.to_toml().as_bytes())
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, name: &'static str, reason: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(name, reason))
            }
        };
        check(
            self.spectrum.is_some() != self.profile.is_some(),
            "spectrum/profile",
            "exactly one of [spectrum] and [profile] must be present",
        )?;
        if let Some(hit) = &self.spectrum {
            check(hit.k_t >= 0.0, "k_t", "must be >= 0")?;
            check(hit.eps > 0.0, "eps", "must be > 0")?;
            check(hit.nu > 0.0, "nu", "must be > 0")?;
        }
        if let Some(p) = &self.profile {
            check(p.nu > 0.0, "nu", "must be > 0")?;
            check(p.wall_axis < 3, "wall_axis", "must be 0, 1 or 2")?;
        }
        let m = &self.modes;
        check(m.k_start > 0.0, "k_start", "must be > 0")?;
        check(m.d_k > 0.0, "d_k", "must be > 0")?;
        check(m.shells >= 1, "shells", "must be >= 1")?;
        check(
            (0.0..1.0 / 3f64.sqrt()).contains(&m.floor_frac),
            "floor_frac",
            "must lie in [0, 1/sqrt(3))",
        )?;
        check(m.delta > 0.0 && m.delta < 1.0, "delta", "must lie in (0, 1)")?;
        check(m.cl_samples >= 100, "cl_samples", "must be >= 100")?;
        check(
            (0.0..1.0).contains(&m.band_budget),
            "band_budget",
            "must lie in [0, 1)",
        )?;
        check(m.noslip_retries >= 1, "noslip_retries", "must be >= 1")?;
        check(
            m.noslip_fit_fraction > 0.0 && m.noslip_fit_fraction <= 1.0,
            "noslip_fit_fraction",
            "must lie in (0, 1]",
        )?;
        check(self.dynamics.dt > 0.0, "dt", "must be > 0")?;
        check(
            self.domain.open_pad >= 0.0,
            "open_pad",
            "must be >= 0",
        )?;
        check(
            self.dynamics.probes.iter().all(|&p| p >= 1),
            "probes",
            "each probe dimension must be >= 1",
        )?;
        self.domain_spec()?;
        let domain = self.domain_spec()?;
        self.grid_spec(&domain)?;
        Ok(())
    }

    pub fn domain_spec(&self) -> Result<DomainSpec> {
        DomainSpec::new(
            self.domain.min,
            self.domain.max,
            [
                self.domain.boundary.x.faces(),
                self.domain.boundary.y.faces(),
                self.domain.boundary.z.faces(),
            ],
        )
    }

    pub fn grid_spec(&self, domain: &DomainSpec) -> Result<GridSpec> {
        let min = self.grid.min.unwrap_or(domain.min);
        let max = self.grid.max.unwrap_or(domain.max);
        GridSpec::over_box(domain, self.grid.dims, min, max)
    }

    pub fn sequence(&self) -> Result<WavenumberSequence> {
        WavenumberSequence::log_spaced(self.modes.k_start, self.modes.d_k, self.modes.shells - 1)
    }

    /// Normalized spectrum model of an HIT config.
    pub fn hit_model(&self) -> Result<SpectrumModel> {
        let hit = self
            .spectrum
            .as_ref()
            .ok_or_else(|| Error::Config("not an HIT config".into()))?;
        let u_prime = (2.0 * hit.k_t / 3.0).sqrt();
        let length = u_prime.powi(3) / hit.eps;
        let k_e = ke_isotropic(length)?;
        let k_eta = kolmogorov_wavenumber(hit.eps, hit.nu)?;
        Ok(SpectrumModel::from_tke(hit.k_t, k_e, k_eta)?.normalized())
    }

    fn common_setup<'a>(&self, energy: EnergySource<'a>) -> Result<GeneratorSetup<'a>> {
        let mut setup = GeneratorSetup::new(
            self.domain_spec()?,
            self.sequence()?,
            self.modes.variant,
            energy,
            self.run.seed,
        );
        setup.floor_frac = self.modes.floor_frac;
        setup.delta = self.modes.delta;
        setup.cl_samples = self.modes.cl_samples;
        setup.open_pad = self.domain.open_pad;
        setup.noslip_policy = self.modes.noslip_policy;
        setup.noslip_retries = self.modes.noslip_retries;
        setup.noslip_fit_fraction = self.modes.noslip_fit_fraction;
        setup.max_modes = self.modes.max_modes;
        Ok(setup)
    }

    /// Generator setup for the HIT case.
    pub fn hit_setup(&self) -> Result<GeneratorSetup<'static>> {
        let hit = self
            .spectrum
            .as_ref()
            .ok_or_else(|| Error::Config("not an HIT config".into()))?;
        let model = self.hit_model()?;
        let k_e = model.k_e;
        let mut setup = self.common_setup(EnergySource::Isotropic {
            model,
            eps: hit.eps,
        })?;
        if self.dynamics.envelope {
            setup.temporal = Some(TemporalSetup {
                k_c: cutoff_wavenumber(k_e)?,
            });
        }
        Ok(setup)
    }

    /// Generator setup for the channel case; the profile and optional plan
    /// are held by the caller.
    pub fn channel_setup<'a>(
        &self,
        profile: &'a RansProfile,
        plan: Option<&'a BandPlan>,
    ) -> Result<GeneratorSetup<'a>> {
        let pc = self
            .profile
            .as_ref()
            .ok_or_else(|| Error::Config("not a profile config".into()))?;
        let mut setup = self.common_setup(EnergySource::Profile {
            profile,
            nu: pc.nu,
        })?;
        setup.wall_axis = pc.wall_axis;
        setup.band_plan = plan;
        if self.dynamics.envelope {
            let (lo, hi) = profile.y_range();
            let mid = 0.5 * (lo + hi);
            if let Some(model) = crate::bandplan::local_spectrum(profile, pc.nu, mid)? {
                setup.temporal = Some(TemporalSetup {
                    k_c: cutoff_wavenumber(model.k_e)?,
                });
            }
        }
        Ok(setup)
    }

    /// Probe lattice placed on interior fractions of the grid box.
    pub fn probe_positions(&self, grid: &GridSpec) -> Vec<[f64; 3]> {
        let dims = self.dynamics.probes;
        let mut out = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for iz in 0..dims[2] {
            for iy in 0..dims[1] {
                for ix in 0..dims[0] {
                    let f = |i: usize, n: usize, axis: usize| {
                        grid.min[axis]
                            + (i as f64 + 0.5) / n as f64 * (grid.max[axis] - grid.min[axis])
                    };
                    out.push([f(ix, dims[0], 0), f(iy, dims[1], 1), f(iz, dims[2], 2)]);
                }
            }
        }
        out
    }
}

/// FNV-1a 64-bit hash.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
