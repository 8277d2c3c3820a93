//! Wall-normal RANS statistics: mean velocity, Reynolds stress tensor and
//! dissipation rate on a 1D profile, plus the synthetic channel fixture.
//!
//! Profiles are ingested from CSV with header
//! `y,U,V,W,uu,vv,ww,uv,uw,vw,eps` (`uw`, `vw` optional, defaulting to 0).
//! Queries between samples interpolate linearly; queries beyond the ends
//! extrapolate with the nearest value.

use crate::error::{Error, Result};
use crate::synthesis::ReynoldsTensor;
use std::io::Read;
use std::path::Path;

/// Interpolated state at one wall-normal location.
#[derive(Debug, Clone, Copy)]
pub struct ProfileSample {
    pub mean_velocity: [f64; 3],
    pub stress: ReynoldsTensor,
    pub eps: f64,
}

impl ProfileSample {
    pub fn tke(&self) -> f64 {
        self.stress.tke()
    }
}

/// 1D wall-normal profile.
#[derive(Debug, Clone)]
pub struct RansProfile {
    ys: Vec<f64>,
    mean_velocity: Vec<[f64; 3]>,
    /// Components ordered `uu, vv, ww, uv, uw, vw`.
    stress: Vec<[f64; 6]>,
    eps: Vec<f64>,
}

impl RansProfile {
    pub fn new(
        ys: Vec<f64>,
        mean_velocity: Vec<[f64; 3]>,
        stress: Vec<[f64; 6]>,
        eps: Vec<f64>,
    ) -> Result<Self> {
        let n = ys.len();
        if n < 2 {
            return Err(Error::Profile("profile needs at least two rows".into()));
        }
        if mean_velocity.len() != n || stress.len() != n || eps.len() != n {
            return Err(Error::Profile("column length mismatch".into()));
        }
        for w in ys.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Profile(format!(
                    "y must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        for (row, (&e, s)) in eps.iter().zip(&stress).enumerate() {
            if e < 0.0 || !e.is_finite() {
                return Err(Error::Profile(format!(
                    "row {row}: dissipation rate must be finite and >= 0"
                )));
            }
            ReynoldsTensor::new(*s)
                .validated()
                .map_err(|err| Error::Profile(format!("row {row}: {err}")))?;
        }
        Ok(Self {
            ys,
            mean_velocity,
            stress,
            eps,
        })
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn y_range(&self) -> (f64, f64) {
        (self.ys[0], *self.ys.last().unwrap())
    }

    /// Linear interpolation with constant extrapolation beyond the ends.
    pub fn sample(&self, y: f64) -> ProfileSample {
        let (i, t) = self.locate(y);
        let lerp = |a: f64, b: f64| a + t * (b - a);
        let j = (i + 1).min(self.ys.len() - 1);
        let mut stress = [0.0; 6];
        for c in 0..6 {
            stress[c] = lerp(self.stress[i][c], self.stress[j][c]);
        }
        let mut mean = [0.0; 3];
        for c in 0..3 {
            mean[c] = lerp(self.mean_velocity[i][c], self.mean_velocity[j][c]);
        }
        ProfileSample {
            mean_velocity: mean,
            stress: ReynoldsTensor::new(stress),
            eps: lerp(self.eps[i], self.eps[j]),
        }
    }

    pub fn tke(&self, y: f64) -> f64 {
        self.sample(y).tke()
    }

    pub fn eps(&self, y: f64) -> f64 {
        let (i, t) = self.locate(y);
        let j = (i + 1).min(self.ys.len() - 1);
        self.eps[i] + t * (self.eps[j] - self.eps[i])
    }

    pub fn mean_velocity(&self, y: f64) -> [f64; 3] {
        self.sample(y).mean_velocity
    }

    fn locate(&self, y: f64) -> (usize, f64) {
        if y <= self.ys[0] {
            return (0, 0.0);
        }
        let last = self.ys.len() - 1;
        if y >= self.ys[last] {
            return (last, 0.0);
        }
        let i = match self.ys.binary_search_by(|v| v.total_cmp(&y)) {
            Ok(exact) => return (exact, 0.0),
            Err(upper) => upper - 1,
        };
        let t = (y - self.ys[i]) / (self.ys[i + 1] - self.ys[i]);
        (i, t)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::read(file)
    }

    pub fn read(reader: impl Read) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = csv
            .headers()
            .map_err(|e| Error::Profile(format!("bad header: {e}")))?
            .clone();
        let required = ["y", "U", "V", "W", "uu", "vv", "ww", "uv", "eps"];
        let mut col = std::collections::HashMap::new();
        for (idx, name) in headers.iter().enumerate() {
            col.insert(name.to_string(), idx);
        }
        for name in required {
            if !col.contains_key(name) {
                return Err(Error::Profile(format!("missing column `{name}`")));
            }
        }
        let get = |record: &csv::StringRecord, name: &str, row: usize| -> Result<f64> {
            match col.get(name) {
                None => Ok(0.0), // optional uw/vw
                Some(&idx) => record
                    .get(idx)
                    .ok_or_else(|| Error::Profile(format!("row {row}: short record")))?
                    .parse::<f64>()
                    .map_err(|_| Error::Profile(format!("row {row}: bad number in `{name}`"))),
            }
        };
        let mut ys = Vec::new();
        let mut mean = Vec::new();
        let mut stress = Vec::new();
        let mut eps = Vec::new();
        for (row, record) in csv.records().enumerate() {
            let record = record.map_err(|e| Error::Profile(format!("row {row}: {e}")))?;
            ys.push(get(&record, "y", row)?);
            mean.push([
                get(&record, "U", row)?,
                get(&record, "V", row)?,
                get(&record, "W", row)?,
            ]);
            stress.push([
                get(&record, "uu", row)?,
                get(&record, "vv", row)?,
                get(&record, "ww", row)?,
                get(&record, "uv", row)?,
                get(&record, "uw", row)?,
                get(&record, "vw", row)?,
            ]);
            eps.push(get(&record, "eps", row)?);
        }
        Self::new(ys, mean, stress, eps)
    }

    pub fn write(&self, mut writer: impl std::io::Write) -> Result<()> {
        writeln!(writer, "y,U,V,W,uu,vv,ww,uv,uw,vw,eps")?;
        for i in 0..self.ys.len() {
            let u = self.mean_velocity[i];
            let s = self.stress[i];
            writeln!(
                writer,
                "{},{},{},{},{},{},{},{},{},{},{}",
                self.ys[i], u[0], u[1], u[2], s[0], s[1], s[2], s[3], s[4], s[5], self.eps[i]
            )?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path.as_ref())?;
        self.write(std::io::BufWriter::new(file))
    }
}

/// Parameters of the synthetic log-law channel fixture.
///
/// The mean profile follows Reichardt's smooth law of the wall and the
/// stress components are analytic near-wall bumps blended with flat core
/// values. Integral scales are compressed relative to a real channel so
/// the energetic band stays resolvable on desk-scale grids; `length_cap`
/// bounds the centerline integral length scale.
#[derive(Debug, Clone, Copy)]
pub struct ChannelFixture {
    /// Half-height of the channel; the profile spans `[0, 2h]`.
    pub half_height: f64,
    /// Friction-scaled shape parameter (`y+ = d_w * re_tau`).
    pub re_tau: f64,
    /// Centerline cap on the integral length scale `L = u'^3 / eps`.
    pub length_cap: f64,
    /// Near-wall integral length slope: `L = min(slope * d_w, length_cap)`.
    pub length_slope: f64,
    /// Rows per channel half (total rows = 2 * rows_per_half + 1).
    pub rows_per_half: usize,
    /// Wall clustering strength for the row placement.
    pub stretch: f64,
}

impl Default for ChannelFixture {
    fn default() -> Self {
        Self {
            half_height: 1.0,
            re_tau: 180.0,
            length_cap: 0.055,
            length_slope: 0.45,
            rows_per_half: 48,
            stretch: 2.4,
        }
    }
}

impl ChannelFixture {
    /// Builds the full symmetric profile over `[0, 2h]`.
    pub fn build(&self) -> Result<RansProfile> {
        let h = self.half_height;
        let n = self.rows_per_half;
        let mut ds = Vec::with_capacity(n + 1);
        for j in 0..=n {
            let t = j as f64 / n as f64;
            // tanh clustering toward the wall
            let d = h * (1.0 - ((self.stretch * (1.0 - t)).tanh() / self.stretch.tanh()));
            ds.push(d);
        }
        ds[0] = 0.0;
        *ds.last_mut().unwrap() = h;

        let mut ys = Vec::new();
        let mut mean = Vec::new();
        let mut stress = Vec::new();
        let mut eps = Vec::new();
        let mut push = |y: f64, d_w: f64, lower: bool| {
            let (u, s, e) = self.state(d_w, lower);
            ys.push(y);
            mean.push(u);
            stress.push(s);
            eps.push(e);
        };
        for &d in &ds {
            push(d, d, true);
        }
        for &d in ds.iter().rev().skip(1) {
            push(2.0 * h - d, d, false);
        }
        RansProfile::new(ys, mean, stress, eps)
    }

    /// Mean velocity, stress components and dissipation at wall distance `d_w`.
    fn state(&self, d_w: f64, lower_half: bool) -> ([f64; 3], [f64; 6], f64) {
        let y_plus = d_w * self.re_tau;
        let kappa = 0.41;
        // Reichardt's law of the wall.
        let u_mean = (1.0 + kappa * y_plus).ln() / kappa
            + 7.8 * (1.0 - (-y_plus / 11.0).exp() - (y_plus / 11.0) * (-y_plus / 3.0).exp());

        let eta = (d_w / self.half_height).clamp(0.0, 1.0);
        let bump = |x: f64| x * x * (2.0 * (1.0 - x)).exp();
        let outer = 1.0 - (-(y_plus / 40.0) * (y_plus / 40.0)).exp();

        let uu = 6.5 * bump(y_plus / 14.0) + outer * (0.8 + 0.5 * (1.0 - eta));
        let vv = 0.55 * bump(y_plus / 60.0) + 0.75 * outer * outer;
        let ww = 0.8 * bump(y_plus / 32.0) + 0.75 * outer;
        // Shear stress through a bounded correlation coefficient keeps the
        // tensor positive semi-definite by construction.
        let c_uv = 0.45 * (1.0 - eta) * (1.0 - (-y_plus / 25.0).exp());
        let sign = if lower_half { -1.0 } else { 1.0 };
        let uv = sign * c_uv * (uu * vv).sqrt();

        let k_t = 0.5 * (uu + vv + ww);
        let u_rms = (2.0 * k_t / 3.0).sqrt();
        let length = (self.length_slope * d_w).min(self.length_cap);
        let eps = if length > 0.0 {
            u_rms.powi(3) / length
        } else {
            0.0
        };
        ([u_mean, 0.0, 0.0], [uu, vv, ww, uv, 0.0, 0.0], eps)
    }
}
