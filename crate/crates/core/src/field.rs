//! Structured grids, sampled vector fields, and the SWTG binary format.
//!
//! File layout: magic `SWTG`, format version (u32 LE), dims (3 x u32 LE),
//! bounding box (6 x f64 LE, min then max), then `nx*ny*nz*3` f64 LE
//! values, x-fastest, velocity components interleaved per node. A JSON
//! sidecar (`<stem>.meta.json`) records the config hash, seed, variant and
//! generation timestamp.

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

pub const SWTG_MAGIC: [u8; 4] = *b"SWTG";
pub const SWTG_VERSION: u32 = 1;

/// Node placement along one axis.
///
/// Periodic axes omit the duplicate end node (`x_i = min + i L / n`);
/// bounded axes include both ends (`x_i = min + i L / (n-1)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisKind {
    Periodic,
    Bounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub dims: [usize; 3],
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub axes: [AxisKind; 3],
}

impl GridSpec {
    pub fn new(dims: [usize; 3], min: [f64; 3], max: [f64; 3], axes: [AxisKind; 3]) -> Result<Self> {
        for axis in 0..3 {
            if dims[axis] == 0 {
                return Err(Error::Grid(format!("axis {axis}: zero nodes")));
            }
            if axes[axis] == AxisKind::Bounded && dims[axis] < 2 {
                return Err(Error::Grid(format!(
                    "axis {axis}: bounded axes need at least two nodes"
                )));
            }
            if !(max[axis] > min[axis]) {
                return Err(Error::Grid(format!("axis {axis}: empty extent")));
            }
        }
        Ok(Self { dims, min, max, axes })
    }

    /// Grid covering a box with axis conventions inherited from the domain
    /// boundary kinds.
    pub fn covering(domain: &DomainSpec, dims: [usize; 3]) -> Result<Self> {
        Self::over_box(domain, dims, domain.min, domain.max)
    }

    pub fn over_box(
        domain: &DomainSpec,
        dims: [usize; 3],
        min: [f64; 3],
        max: [f64; 3],
    ) -> Result<Self> {
        let axes = std::array::from_fn(|a| {
            if domain.is_periodic(a) {
                AxisKind::Periodic
            } else {
                AxisKind::Bounded
            }
        });
        Self::new(dims, min, max, axes)
    }

    #[inline]
    pub fn extent(&self, axis: usize) -> f64 {
        self.max[axis] - self.min[axis]
    }

    #[inline]
    pub fn step(&self, axis: usize) -> f64 {
        match self.axes[axis] {
            AxisKind::Periodic => self.extent(axis) / self.dims[axis] as f64,
            AxisKind::Bounded => self.extent(axis) / (self.dims[axis] - 1) as f64,
        }
    }

    #[inline]
    pub fn node_coord(&self, axis: usize, i: usize) -> f64 {
        self.min[axis] + i as f64 * self.step(axis)
    }

    #[inline]
    pub fn node(&self, ix: usize, iy: usize, iz: usize) -> [f64; 3] {
        [
            self.node_coord(0, ix),
            self.node_coord(1, iy),
            self.node_coord(2, iz),
        ]
    }

    pub fn node_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Inclusive node index range with coordinates inside `[lo, hi]`.
    pub fn node_range(&self, axis: usize, lo: f64, hi: f64) -> Option<(usize, usize)> {
        let step = self.step(axis);
        let slack = 1e-9 * step;
        let i_lo = ((lo - self.min[axis] - slack) / step).ceil().max(0.0);
        let i_hi = ((hi - self.min[axis] + slack) / step).floor();
        let last = (self.dims[axis] - 1) as f64;
        let (i_lo, i_hi) = (i_lo, i_hi.min(last));
        if i_hi < i_lo || i_lo > last {
            None
        } else {
            Some((i_lo as usize, i_hi as usize))
        }
    }

    #[inline]
    pub fn linear_index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (iz * self.dims[1] + iy) * self.dims[0] + ix
    }
}

/// Sampled 3-vector field on a structured grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    spec: GridSpec,
    /// `3 * nx * ny * nz` values, x-fastest, components interleaved.
    values: Vec<f64>,
}

impl FieldGrid {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.node_count() * 3 {
            return Err(Error::Grid(format!(
                "value buffer holds {} floats, grid needs {}",
                values.len(),
                spec.node_count() * 3
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Grid("non-finite field value".into()));
        }
        Ok(Self { spec, values })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        let n = spec.node_count() * 3;
        Self {
            spec,
            values: vec![0.0; n],
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn value(&self, ix: usize, iy: usize, iz: usize) -> [f64; 3] {
        let i = self.spec.linear_index(ix, iy, iz) * 3;
        [self.values[i], self.values[i + 1], self.values[i + 2]]
    }

    pub fn mean_square_velocity(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() / self.spec.node_count() as f64
    }

    /// Trilinear interpolation; periodic axes wrap, bounded axes clamp.
    pub fn sample_trilinear(&self, x: [f64; 3]) -> [f64; 3] {
        let mut base = [0usize; 3];
        let mut next = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for axis in 0..3 {
            let step = self.spec.step(axis);
            let n = self.spec.dims[axis];
            let mut t = (x[axis] - self.spec.min[axis]) / step;
            match self.spec.axes[axis] {
                AxisKind::Periodic => {
                    t = t.rem_euclid(n as f64);
                    let i = t.floor() as usize % n;
                    base[axis] = i;
                    next[axis] = (i + 1) % n;
                    frac[axis] = t - t.floor();
                }
                AxisKind::Bounded => {
                    let t = t.clamp(0.0, (n - 1) as f64);
                    let i = (t.floor() as usize).min(n - 2);
                    base[axis] = i;
                    next[axis] = i + 1;
                    frac[axis] = t - i as f64;
                }
            }
        }
        let mut out = [0.0; 3];
        for corner in 0..8 {
            let ix = if corner & 1 == 0 { base[0] } else { next[0] };
            let iy = if corner & 2 == 0 { base[1] } else { next[1] };
            let iz = if corner & 4 == 0 { base[2] } else { next[2] };
            let wx = if corner & 1 == 0 { 1.0 - frac[0] } else { frac[0] };
            let wy = if corner & 2 == 0 { 1.0 - frac[1] } else { frac[1] };
            let wz = if corner & 4 == 0 { 1.0 - frac[2] } else { frac[2] };
            let w = wx * wy * wz;
            let v = self.value(ix, iy, iz);
            for c in 0..3 {
                out[c] += w * v[c];
            }
        }
        out
    }

    pub fn write_swtg(&self, mut writer: impl Write) -> Result<()> {
        writer.write_all(&SWTG_MAGIC)?;
        writer.write_all(&SWTG_VERSION.to_le_bytes())?;
        for d in self.spec.dims {
            writer.write_all(&(d as u32).to_le_bytes())?;
        }
        for v in self.spec.min.iter().chain(self.spec.max.iter()) {
            writer.write_all(&v.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        writer.write_all(&buf)?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>, sidecar: Option<&Sidecar>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path)?;
        self.write_swtg(std::io::BufWriter::new(file))?;
        if let Some(meta) = sidecar {
            let meta = Sidecar {
                axes: self.spec.axes,
                ..meta.clone()
            };
            let text = serde_json::to_string_pretty(&meta)
                .map_err(|e| Error::FieldFormat(e.to_string()))?;
            std::fs::write(sidecar_path(path), text)?;
        }
        Ok(())
    }

    pub fn read_swtg(mut reader: impl Read, axes: [AxisKind; 3]) -> Result<Self> {
        let mut magic = [0u8; 4];
        reader.read_exact(&mut magic)?;
        if magic != SWTG_MAGIC {
            return Err(Error::FieldFormat("bad magic bytes".into()));
        }
        let mut word = [0u8; 4];
        reader.read_exact(&mut word)?;
        let version = u32::from_le_bytes(word);
        if version != SWTG_VERSION {
            return Err(Error::FieldFormat(format!(
                "unsupported format version {version}"
            )));
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            reader.read_exact(&mut word)?;
            *d = u32::from_le_bytes(word) as usize;
        }
        let mut dword = [0u8; 8];
        let mut bbox = [0f64; 6];
        for v in &mut bbox {
            reader.read_exact(&mut dword)?;
            *v = f64::from_le_bytes(dword);
        }
        let spec = GridSpec::new(
            dims,
            [bbox[0], bbox[1], bbox[2]],
            [bbox[3], bbox[4], bbox[5]],
            axes,
        )?;
        let count = spec.node_count() * 3;
        let mut bytes = vec![0u8; count * 8];
        reader.read_exact(&mut bytes)?;
        let mut extra = [0u8; 1];
        if reader.read(&mut extra)? != 0 {
            return Err(Error::FieldFormat("trailing bytes after field data".into()));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(spec, values)
    }

    /// Loads a field; node conventions come from the sidecar when present,
    /// defaulting to periodic axes.
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, Option<Sidecar>)> {
        let path = path.as_ref();
        let sidecar = match std::fs::read_to_string(sidecar_path(path)) {
            Ok(text) => Some(
                serde_json::from_str::<Sidecar>(&text)
                    .map_err(|e| Error::FieldFormat(format!("bad sidecar: {e}")))?,
            ),
            Err(_) => None,
        };
        let axes = sidecar
            .as_ref()
            .map(|s| s.axes)
            .unwrap_or([AxisKind::Periodic; 3]);
        let file = std::fs::File::open(path)?;
        let field = Self::read_swtg(std::io::BufReader::new(file), axes)?;
        Ok((field, sidecar))
    }
}

pub fn sidecar_path(field_path: &Path) -> PathBuf {
    field_path.with_extension("meta.json")
}

/// Provenance sidecar written next to every exported field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub config_hash: String,
    pub seed: u64,
    pub variant: String,
    pub created_unix: u64,
    pub axes: [AxisKind; 3],
}

impl Sidecar {
    pub fn new(config_hash: u64, seed: u64, variant: &str) -> Self {
        Self {
            config_hash: format!("{config_hash:016x}"),
            seed,
            variant: variant.to_string(),
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            axes: [AxisKind::Periodic; 3],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn node_conventions() {
        let spec = GridSpec::new(
            [4, 5, 4],
            [0.0; 3],
            [8.0, 8.0, 8.0],
            [AxisKind::Periodic, AxisKind::Bounded, AxisKind::Periodic],
        )
        .unwrap();
        // Periodic: excludes the duplicate end node.
        assert_abs_diff_eq!(spec.step(0), 2.0);
        assert_abs_diff_eq!(spec.node_coord(0, 3), 6.0);
        // Bounded: includes both walls.
        assert_abs_diff_eq!(spec.step(1), 2.0);
        assert_abs_diff_eq!(spec.node_coord(1, 4), 8.0);
    }

    #[test]
    fn node_range_clips() {
        let spec = GridSpec::new([8, 8, 8], [0.0; 3], [8.0; 3], [AxisKind::Periodic; 3]).unwrap();
        assert_eq!(spec.node_range(0, 1.5, 3.5), Some((2, 3)));
        assert_eq!(spec.node_range(0, -5.0, 100.0), Some((0, 7)));
        assert_eq!(spec.node_range(0, 2.0, 2.0), Some((2, 2)));
        assert_eq!(spec.node_range(0, 2.1, 2.9), None);
        assert_eq!(spec.node_range(0, 9.0, 10.0), None);
    }

    #[test]
    fn single_node_file_is_92_bytes() {
        let spec = GridSpec::new(
            [1, 1, 1],
            [0.0; 3],
            [1.0; 3],
            [AxisKind::Periodic; 3],
        )
        .unwrap();
        let field = FieldGrid::new(spec, vec![1.0, 2.0, 3.0]).unwrap();
        let mut buf = Vec::new();
        field.write_swtg(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 12 + 48 + 24);
        assert_eq!(&buf[0..4], b"SWTG");
        // Version 1, little-endian.
        assert_eq!(&buf[4..8], &[1, 0, 0, 0]);
        // First value starts after the 68-byte header.
        assert_eq!(f64::from_le_bytes(buf[68..76].try_into().unwrap()), 1.0);
    }

    #[test]
    fn swtg_roundtrip_is_bit_identical() {
        let spec = GridSpec::new([3, 2, 2], [0.0; 3], [1.0, 2.0, 3.0], [AxisKind::Periodic; 3])
            .unwrap();
        let values: Vec<f64> = (0..36).map(|i| (i as f64).sin()).collect();
        let field = FieldGrid::new(spec, values).unwrap();
        let mut buf = Vec::new();
        field.write_swtg(&mut buf).unwrap();
        let back = FieldGrid::read_swtg(buf.as_slice(), [AxisKind::Periodic; 3]).unwrap();
        assert_eq!(field, back);
        let mut buf2 = Vec::new();
        back.write_swtg(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn malformed_files_are_rejected() {
        let junk = b"JUNKxxxxxxxxxxxxxxxx".to_vec();
        assert!(FieldGrid::read_swtg(junk.as_slice(), [AxisKind::Periodic; 3]).is_err());

        let spec =
            GridSpec::new([1, 1, 1], [0.0; 3], [1.0; 3], [AxisKind::Periodic; 3]).unwrap();
        let field = FieldGrid::new(spec, vec![0.0; 3]).unwrap();
        let mut buf = Vec::new();
        field.write_swtg(&mut buf).unwrap();
        buf.push(0); // trailing garbage
        assert!(FieldGrid::read_swtg(buf.as_slice(), [AxisKind::Periodic; 3]).is_err());
        // Truncated payload.
        let short = &buf[..buf.len() - 10];
        assert!(FieldGrid::read_swtg(short, [AxisKind::Periodic; 3]).is_err());
    }

    #[test]
    fn rejects_non_finite_values() {
        let spec =
            GridSpec::new([1, 1, 1], [0.0; 3], [1.0; 3], [AxisKind::Periodic; 3]).unwrap();
        assert!(FieldGrid::new(spec, vec![0.0, f64::NAN, 0.0]).is_err());
    }
}
