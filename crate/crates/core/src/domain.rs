//! Flow domain and boundary treatment.
//!
//! Modes whose effective support crosses a periodic face pair are
//! duplicated on the opposite side so the summed field is exactly
//! periodic; modes whose support would cross a no-slip face are kept
//! strictly inside, which zeroes the velocity (and all its moments) on
//! the wall and damps near-wall energy automatically.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Periodic,
    NoSlip,
    Open,
}

/// Axis-aligned box with a boundary kind per face.
///
/// `faces[axis][0]` is the low face, `faces[axis][1]` the high face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub faces: [[BoundaryKind; 2]; 3],
}

impl DomainSpec {
    pub fn new(min: [f64; 3], max: [f64; 3], faces: [[BoundaryKind; 2]; 3]) -> Result<Self> {
        for axis in 0..3 {
            if !(max[axis] > min[axis]) {
                return Err(Error::Domain(format!(
                    "axis {axis}: box must have positive extent, got [{}, {}]",
                    min[axis], max[axis]
                )));
            }
            let [lo, hi] = faces[axis];
            if (lo == BoundaryKind::Periodic) != (hi == BoundaryKind::Periodic) {
                return Err(Error::Domain(format!(
                    "axis {axis}: periodic faces must come in opposite pairs"
                )));
            }
        }
        Ok(Self { min, max, faces })
    }

    /// Box with the same kind on both faces of each axis.
    pub fn with_axis_kinds(min: [f64; 3], max: [f64; 3], kinds: [BoundaryKind; 3]) -> Result<Self> {
        Self::new(min, max, kinds.map(|k| [k, k]))
    }

    pub fn periodic_box(min: [f64; 3], max: [f64; 3]) -> Result<Self> {
        Self::with_axis_kinds(min, max, [BoundaryKind::Periodic; 3])
    }

    pub fn open_box(min: [f64; 3], max: [f64; 3]) -> Result<Self> {
        Self::with_axis_kinds(min, max, [BoundaryKind::Open; 3])
    }

    #[inline]
    pub fn extent(&self, axis: usize) -> f64 {
        self.max[axis] - self.min[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|a| self.extent(a)).product()
    }

    #[inline]
    pub fn is_periodic(&self, axis: usize) -> bool {
        self.faces[axis][0] == BoundaryKind::Periodic
    }

    pub fn contains(&self, x: [f64; 3]) -> bool {
        (0..3).all(|a| x[a] >= self.min[a] && x[a] <= self.max[a])
    }

    /// Wraps a point into the box along periodic axes; other axes untouched.
    pub fn wrap_point(&self, mut x: [f64; 3]) -> [f64; 3] {
        for axis in 0..3 {
            if self.is_periodic(axis) {
                let period = self.extent(axis);
                x[axis] = (x[axis] - self.min[axis]).rem_euclid(period) + self.min[axis];
            }
        }
        x
    }

    /// Translated copies (including the original position) that represent a
    /// support box on the torus: one extra image per crossed periodic face
    /// pair, so up to `2^n` positions for `n` crossed axes.
    ///
    /// Errors if the support is wider than the box on a periodic axis; a
    /// single image per axis cannot periodize such a mode exactly.
    pub fn periodic_images(
        &self,
        center: [f64; 3],
        halfwidths: [f64; 3],
    ) -> Result<Vec<[f64; 3]>> {
        let mut shifts: Vec<[f64; 3]> = vec![[0.0; 3]];
        for axis in 0..3 {
            if !self.is_periodic(axis) {
                continue;
            }
            let period = self.extent(axis);
            if 2.0 * halfwidths[axis] > period {
                return Err(Error::Domain(format!(
                    "axis {axis}: mode support width {} exceeds period {period}",
                    2.0 * halfwidths[axis]
                )));
            }
            let crosses_low = center[axis] - halfwidths[axis] < self.min[axis];
            let crosses_high = center[axis] + halfwidths[axis] > self.max[axis];
            let shift = if crosses_low {
                period
            } else if crosses_high {
                -period
            } else {
                continue;
            };
            let mut doubled = Vec::with_capacity(shifts.len() * 2);
            for s in shifts {
                doubled.push(s);
                let mut t = s;
                t[axis] += shift;
                doubled.push(t);
            }
            shifts = doubled;
        }
        Ok(shifts
            .into_iter()
            .map(|s| [center[0] + s[0], center[1] + s[1], center[2] + s[2]])
            .collect())
    }

    /// True when the support box stays strictly clear of every no-slip face.
    pub fn fits_noslip(&self, center: [f64; 3], halfwidths: [f64; 3]) -> bool {
        for axis in 0..3 {
            if self.faces[axis][0] == BoundaryKind::NoSlip
                && center[axis] - halfwidths[axis] <= self.min[axis]
            {
                return false;
            }
            if self.faces[axis][1] == BoundaryKind::NoSlip
                && center[axis] + halfwidths[axis] >= self.max[axis]
            {
                return false;
            }
        }
        true
    }

    /// True when a support of the given halfwidths can fit *somewhere* in
    /// the domain under the no-slip restriction.
    pub fn noslip_feasible(&self, halfwidths: [f64; 3]) -> bool {
        for axis in 0..3 {
            let mut lo = self.min[axis];
            let mut hi = self.max[axis];
            if self.faces[axis][0] == BoundaryKind::NoSlip {
                lo += halfwidths[axis];
            }
            if self.faces[axis][1] == BoundaryKind::NoSlip {
                hi -= halfwidths[axis];
            }
            if lo >= hi {
                return false;
            }
        }
        true
    }

    /// Minimum distance to any no-slip face; infinite when there are none.
    pub fn wall_distance(&self, x: [f64; 3]) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::Domain(format!(
                "point {x:?} lies outside the domain"
            )));
        }
        let mut best = f64::INFINITY;
        for axis in 0..3 {
            if self.faces[axis][0] == BoundaryKind::NoSlip {
                best = best.min(x[axis] - self.min[axis]);
            }
            if self.faces[axis][1] == BoundaryKind::NoSlip {
                best = best.min(self.max[axis] - x[axis]);
            }
        }
        Ok(best)
    }
}
