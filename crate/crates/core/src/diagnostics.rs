//! Validation estimators: shell-averaged energy spectra, second-order
//! structure functions, Eulerian autocorrelations and frequency spectra,
//! ensemble Reynolds stresses, and finite-difference divergence.

use crate::error::{Error, Result};
use crate::field::{AxisKind, FieldGrid};
use rustfft::{num_complex::Complex, FftPlanner};
use std::io::Write;

/// Shell-averaged energy spectrum with Parseval bookkeeping.
#[derive(Debug, Clone)]
pub struct ShellSpectrum {
    /// Bin width (the fundamental wavenumber of the longest box side).
    pub bin_width: f64,
    /// Energy density per bin; bin `n` collects `|k|` rounding to `n`.
    pub energy: Vec<f64>,
    /// `|sum E dk - mean |u|^2 / 2| / (mean |u|^2 / 2)`.
    pub parseval_residual: f64,
}

impl ShellSpectrum {
    pub fn wavenumber(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_width
    }

    /// Energy density interpolated at `k` (nearest bin).
    pub fn density_at(&self, k: f64) -> f64 {
        let bin = (k / self.bin_width).round() as usize;
        self.energy.get(bin).copied().unwrap_or(0.0)
    }

    pub fn write_csv(&self, mut writer: impl Write) -> Result<()> {
        writeln!(writer, "k,E")?;
        for (bin, e) in self.energy.iter().enumerate() {
            writeln!(writer, "{},{}", self.wavenumber(bin), e)?;
        }
        writeln!(writer, "# parseval_residual,{}", self.parseval_residual)?;
        Ok(())
    }
}

fn fft_3d(data: &mut [Complex<f64>], dims: [usize; 3]) {
    let [nx, ny, nz] = dims;
    let mut planner = FftPlanner::new();
    let fft_x = planner.plan_fft_forward(nx);
    for chunk in data.chunks_exact_mut(nx) {
        fft_x.process(chunk);
    }
    let fft_y = planner.plan_fft_forward(ny);
    let mut scratch = vec![Complex::default(); ny];
    for iz in 0..nz {
        for ix in 0..nx {
            for iy in 0..ny {
                scratch[iy] = data[(iz * ny + iy) * nx + ix];
            }
            fft_y.process(&mut scratch);
            for iy in 0..ny {
                data[(iz * ny + iy) * nx + ix] = scratch[iy];
            }
        }
    }
    let fft_z = planner.plan_fft_forward(nz);
    let mut scratch = vec![Complex::default(); nz];
    for iy in 0..ny {
        for ix in 0..nx {
            for iz in 0..nz {
                scratch[iz] = data[(iz * ny + iy) * nx + ix];
            }
            fft_z.process(&mut scratch);
            for iz in 0..nz {
                data[(iz * ny + iy) * nx + ix] = scratch[iz];
            }
        }
    }
}

/// 3D shell-averaged spectrum of a periodic field.
///
/// The DFT is normalized so Parseval holds directly:
/// `sum_k |u_hat|^2 = mean |u|^2`, and bin energies are divided by the
/// bin width so that `sum E dk = mean |u|^2 / 2`.
pub fn energy_spectrum(field: &FieldGrid) -> Result<ShellSpectrum> {
    let spec = field.spec();
    if spec.axes.iter().any(|&a| a != AxisKind::Periodic) {
        return Err(Error::Diagnostics(
            "energy spectrum requires a fully periodic field".into(),
        ));
    }
    let dims = spec.dims;
    let n_total = spec.node_count();
    let fundamentals: [f64; 3] =
        std::array::from_fn(|a| std::f64::consts::TAU / spec.extent(a));
    let bin_width = fundamentals[0].min(fundamentals[1]).min(fundamentals[2]);
    let k_max: f64 = (0..3)
        .map(|a| fundamentals[a] * (dims[a] / 2) as f64)
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    let n_bins = (k_max / bin_width).round() as usize + 2;
    let mut energy = vec![0.0f64; n_bins];

    for component in 0..3 {
        let mut buf: Vec<Complex<f64>> = field
            .values()
            .chunks_exact(3)
            .map(|v| Complex::new(v[component], 0.0))
            .collect();
        fft_3d(&mut buf, dims);
        let norm = 1.0 / n_total as f64;
        for iz in 0..dims[2] {
            let kz = signed_mode(iz, dims[2]) * fundamentals[2];
            for iy in 0..dims[1] {
                let ky = signed_mode(iy, dims[1]) * fundamentals[1];
                let row = (iz * dims[1] + iy) * dims[0];
                for ix in 0..dims[0] {
                    let kx = signed_mode(ix, dims[0]) * fundamentals[0];
                    let k = (kx * kx + ky * ky + kz * kz).sqrt();
                    let bin = (k / bin_width).round() as usize;
                    let amp = buf[row + ix] * norm;
                    energy[bin] += 0.5 * amp.norm_sqr();
                }
            }
        }
    }

    let total_spectral: f64 = energy.iter().sum();
    let total_spatial = 0.5 * field.mean_square_velocity();
    let parseval_residual = if total_spatial > 0.0 {
        (total_spectral - total_spatial).abs() / total_spatial
    } else {
        0.0
    };
    for e in &mut energy {
        *e /= bin_width;
    }
    Ok(ShellSpectrum {
        bin_width,
        energy,
        parseval_residual,
    })
}

#[inline]
fn signed_mode(i: usize, n: usize) -> f64 {
    if i <= n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

/// Bin-wise average of spectra from an ensemble of same-grid fields.
pub fn energy_spectrum_ensemble(fields: &[FieldGrid]) -> Result<ShellSpectrum> {
    if fields.is_empty() {
        return Err(Error::Diagnostics("empty ensemble".into()));
    }
    let mut acc: Option<ShellSpectrum> = None;
    for field in fields {
        let s = energy_spectrum(field)?;
        match &mut acc {
            None => acc = Some(s),
            Some(a) => {
                if s.energy.len() != a.energy.len() {
                    return Err(Error::Diagnostics("inconsistent grids in ensemble".into()));
                }
                for (dst, src) in a.energy.iter_mut().zip(&s.energy) {
                    *dst += src;
                }
                a.parseval_residual = a.parseval_residual.max(s.parseval_residual);
            }
        }
    }
    let mut out = acc.unwrap();
    for e in &mut out.energy {
        *e /= fields.len() as f64;
    }
    Ok(out)
}

/// Longitudinal second-order structure functions along each axis.
#[derive(Debug, Clone)]
pub struct StructureFunctionCurve {
    pub r: Vec<f64>,
    pub d11: Vec<f64>,
    pub d22: Vec<f64>,
    pub d33: Vec<f64>,
}

impl StructureFunctionCurve {
    pub fn write_csv(&self, mut writer: impl Write) -> Result<()> {
        writeln!(writer, "r,D11,D22,D33")?;
        for i in 0..self.r.len() {
            writeln!(
                writer,
                "{},{},{},{}",
                self.r[i], self.d11[i], self.d22[i], self.d33[i]
            )?;
        }
        Ok(())
    }
}

/// `D_ii(r)` at grid-stride separations: the squared increment of velocity
/// component `i` shifted along axis `i` (longitudinal), averaged over all
/// nodes with periodic wrap.
pub fn structure_functions(field: &FieldGrid, max_r: f64) -> Result<StructureFunctionCurve> {
    let spec = field.spec();
    if spec.axes.iter().any(|&a| a != AxisKind::Periodic) {
        return Err(Error::Diagnostics(
            "structure functions require a fully periodic field".into(),
        ));
    }
    let dx = spec.step(0);
    for axis in 1..3 {
        if ((spec.step(axis) - dx) / dx).abs() > 1e-9 {
            return Err(Error::Diagnostics(
                "structure functions need equal grid spacing on all axes".into(),
            ));
        }
    }
    let half_box = 0.5 * (0..3).map(|a| spec.extent(a)).fold(f64::INFINITY, f64::min);
    if max_r > half_box {
        return Err(Error::invalid(
            "max_r",
            format!("separation {max_r} exceeds half the box {half_box}"),
        ));
    }
    let strides = (max_r / dx).floor() as usize;
    let [nx, ny, nz] = spec.dims;
    let values = field.values();
    let idx = |ix: usize, iy: usize, iz: usize| ((iz * ny + iy) * nx + ix) * 3;

    let mut r = Vec::with_capacity(strides);
    let mut d = [
        Vec::with_capacity(strides),
        Vec::with_capacity(strides),
        Vec::with_capacity(strides),
    ];
    for m in 1..=strides {
        r.push(m as f64 * dx);
        let mut acc = [0.0f64; 3];
        for iz in 0..nz {
            for iy in 0..ny {
                for ix in 0..nx {
                    let here = values[idx(ix, iy, iz)];
                    let du = values[idx((ix + m) % nx, iy, iz)] - here;
                    acc[0] += du * du;
                    let here = values[idx(ix, iy, iz) + 1];
                    let dv = values[idx(ix, (iy + m) % ny, iz) + 1] - here;
                    acc[1] += dv * dv;
                    let here = values[idx(ix, iy, iz) + 2];
                    let dw = values[idx(ix, iy, (iz + m) % nz) + 2] - here;
                    acc[2] += dw * dw;
                }
            }
        }
        let n = (nx * ny * nz) as f64;
        for c in 0..3 {
            d[c].push(acc[c] / n);
        }
    }
    let [d11, d22, d33] = d;
    Ok(StructureFunctionCurve { r, d11, d22, d33 })
}

/// Log-log least-squares fit of a curve over `[x_lo, x_hi]`.
#[derive(Debug, Clone, Copy)]
pub struct PowerLawFit {
    pub exponent: f64,
    /// Geometric-mean prefactor at the reference exponent (see the fit
    /// functions for the normalization in use).
    pub prefactor: f64,
}

/// Fits `D ~ C' eps^(2/3) r^(2/3)`: free log-log slope, and the prefactor
/// `C'` as the geometric mean of `D / (eps^(2/3) r^(2/3))` over the band.
pub fn inertial_range_fit(
    r: &[f64],
    d: &[f64],
    eps: f64,
    r_lo: f64,
    r_hi: f64,
) -> Result<PowerLawFit> {
    let fit = fit_log_log(r, d, r_lo, r_hi, 2.0 / 3.0)?;
    Ok(PowerLawFit {
        exponent: fit.0,
        prefactor: fit.1 / eps.powf(2.0 / 3.0),
    })
}

/// Returns `(free slope, exp(mean(ln y - ref_exp * ln x)))` over the band.
fn fit_log_log(
    x: &[f64],
    y: &[f64],
    x_lo: f64,
    x_hi: f64,
    ref_exp: f64,
) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(&xi, &yi)| xi >= x_lo && xi <= x_hi && yi > 0.0)
        .map(|(&xi, &yi)| (xi.ln(), yi.ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::Diagnostics(format!(
            "power-law fit needs at least 4 points in band, found {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let ref_amp = (my - ref_exp * mx).exp();
    Ok((slope, ref_amp))
}

/// Normalized Eulerian autocorrelation per velocity component.
#[derive(Debug, Clone)]
pub struct Autocorrelation {
    pub dt: f64,
    /// `r[c][tau]`, normalized to 1 at zero lag.
    pub r: [Vec<f64>; 3],
}

impl Autocorrelation {
    pub fn write_csv(&self, mut writer: impl Write) -> Result<()> {
        writeln!(writer, "tau,R11,R22,R33")?;
        for lag in 0..self.r[0].len() {
            writeln!(
                writer,
                "{},{},{},{}",
                lag as f64 * self.dt,
                self.r[0][lag],
                self.r[1][lag],
                self.r[2][lag]
            )?;
        }
        Ok(())
    }
}

/// Biased-estimator autocorrelation averaged over probes:
/// `R(tau) = (1/T) sum_t u(t) u(t+tau)`, normalized by the zero-lag value.
pub fn eulerian_autocorrelation(
    series: &[Vec<[f64; 3]>],
    dt: f64,
    max_lag: usize,
) -> Result<Autocorrelation> {
    let t_len = series.first().map(|s| s.len()).unwrap_or(0);
    if series.is_empty() || t_len < 2 {
        return Err(Error::Diagnostics(
            "autocorrelation needs at least 2 samples".into(),
        ));
    }
    if series.iter().any(|s| s.len() != t_len) {
        return Err(Error::Diagnostics("ragged probe series".into()));
    }
    let max_lag = max_lag.min(t_len - 1);
    let mut r: [Vec<f64>; 3] = [
        vec![0.0; max_lag + 1],
        vec![0.0; max_lag + 1],
        vec![0.0; max_lag + 1],
    ];
    for probe in series {
        for c in 0..3 {
            for lag in 0..=max_lag {
                let mut acc = 0.0;
                for t in 0..t_len - lag {
                    acc += probe[t][c] * probe[t + lag][c];
                }
                r[c][lag] += acc / t_len as f64;
            }
        }
    }
    for c in 0..3 {
        let r0 = r[c][0];
        if r0 <= 0.0 {
            return Err(Error::Diagnostics(format!(
                "component {c} has no variance at zero lag"
            )));
        }
        for v in r[c].iter_mut() {
            *v /= r0;
        }
    }
    Ok(Autocorrelation { dt, r })
}

/// Eulerian frequency spectrum per component.
#[derive(Debug, Clone)]
pub struct FrequencySpectrum {
    pub omega: Vec<f64>,
    /// `phi[c][m]` for component `c`.
    pub phi: [Vec<f64>; 3],
}

impl FrequencySpectrum {
    /// Component-averaged density at index `m`.
    pub fn mean_phi(&self, m: usize) -> f64 {
        (self.phi[0][m] + self.phi[1][m] + self.phi[2][m]) / 3.0
    }

    pub fn write_csv(&self, mut writer: impl Write) -> Result<()> {
        writeln!(writer, "omega,Phi11,Phi22,Phi33")?;
        for m in 0..self.omega.len() {
            writeln!(
                writer,
                "{},{},{},{}",
                self.omega[m], self.phi[0][m], self.phi[1][m], self.phi[2][m]
            )?;
        }
        Ok(())
    }
}

/// Discrete cosine transform of the autocorrelation with even extension:
/// `Phi(omega) = dt (R_0 + 2 sum R_j cos(omega j dt))`, evaluated on the
/// frequency grid `omega_m = m pi / (J dt)`.
pub fn frequency_spectrum(autocorr: &Autocorrelation) -> FrequencySpectrum {
    let j_max = autocorr.r[0].len() - 1;
    let dt = autocorr.dt;
    let omega: Vec<f64> = (0..=j_max)
        .map(|m| m as f64 * std::f64::consts::PI / (j_max as f64 * dt))
        .collect();
    let mut phi: [Vec<f64>; 3] = [
        vec![0.0; j_max + 1],
        vec![0.0; j_max + 1],
        vec![0.0; j_max + 1],
    ];
    for c in 0..3 {
        for (m, &w) in omega.iter().enumerate() {
            let mut acc = autocorr.r[c][0];
            for j in 1..=j_max {
                let weight = if j == j_max { 1.0 } else { 2.0 };
                acc += weight * autocorr.r[c][j] * (w * j as f64 * dt).cos();
            }
            phi[c][m] = dt * acc;
        }
    }
    FrequencySpectrum { omega, phi }
}

/// Fits `Phi ~ C eps^(2/3) <u1^2> omega^(-5/3)` over the band; returns the
/// free exponent and the constant normalized the same way.
pub fn frequency_spectrum_fit(
    spectrum: &FrequencySpectrum,
    eps: f64,
    u1_sq: f64,
    omega_lo: f64,
    omega_hi: f64,
) -> Result<PowerLawFit> {
    let mean: Vec<f64> = (0..spectrum.omega.len())
        .map(|m| spectrum.mean_phi(m))
        .collect();
    let (slope, amp) = fit_log_log(&spectrum.omega, &mean, omega_lo, omega_hi, -5.0 / 3.0)?;
    Ok(PowerLawFit {
        exponent: slope,
        prefactor: amp / (eps.powf(2.0 / 3.0) * u1_sq),
    })
}

/// Wall-normal Reynolds stress profile from an ensemble of fields.
#[derive(Debug, Clone)]
pub struct StressProfile {
    pub y: Vec<f64>,
    /// `uu, vv, ww, uv, uw, vw` per wall-normal node.
    pub components: Vec<[f64; 6]>,
}

impl StressProfile {
    pub fn write_csv_with_reference(
        &self,
        reference: Option<&[(f64, [f64; 6])]>,
        mut writer: impl Write,
    ) -> Result<()> {
        if reference.is_some() {
            writeln!(
                writer,
                "y,uu,vv,ww,uv,uw,vw,gamma_ref_uu,gamma_ref_vv,gamma_ref_ww,gamma_ref_uv,gamma_ref_uw,gamma_ref_vw"
            )?;
        } else {
            writeln!(writer, "y,uu,vv,ww,uv,uw,vw")?;
        }
        for (i, y) in self.y.iter().enumerate() {
            let c = self.components[i];
            write!(writer, "{y},{},{},{},{},{},{}", c[0], c[1], c[2], c[3], c[4], c[5])?;
            if let Some(rows) = reference {
                let r = rows[i].1;
                write!(writer, ",{},{},{},{},{},{}", r[0], r[1], r[2], r[3], r[4], r[5])?;
            }
            writeln!(writer)?;
        }
        Ok(())
    }
}

/// Second moments of the fluctuation velocity, averaged over the ensemble
/// and over the two homogeneous directions; profiles run along `axis`.
pub fn ensemble_reynolds_stress(fields: &[FieldGrid], axis: usize) -> Result<StressProfile> {
    if fields.len() < 2 {
        return Err(Error::Diagnostics(
            "need at least 2 ensemble members".into(),
        ));
    }
    let spec = fields[0].spec().clone();
    if fields.iter().any(|f| f.spec() != &spec) {
        return Err(Error::Diagnostics("inconsistent grids in ensemble".into()));
    }
    let n_axis = spec.dims[axis];
    let [nx, ny, nz] = spec.dims;
    let mut mean = vec![[0.0f64; 3]; n_axis];
    let mut second = vec![[0.0f64; 6]; n_axis];
    let mut counts = vec![0u64; n_axis];

    for field in fields {
        for iz in 0..nz {
            for iy in 0..ny {
                for ix in 0..nx {
                    let slot = [ix, iy, iz][axis];
                    let v = field.value(ix, iy, iz);
                    for c in 0..3 {
                        mean[slot][c] += v[c];
                    }
                    counts[slot] += 1;
                }
            }
        }
    }
    for (m, &n) in mean.iter_mut().zip(&counts) {
        for c in 0..3 {
            m[c] /= n as f64;
        }
    }
    for field in fields {
        for iz in 0..nz {
            for iy in 0..ny {
                for ix in 0..nx {
                    let slot = [ix, iy, iz][axis];
                    let v = field.value(ix, iy, iz);
                    let f = [
                        v[0] - mean[slot][0],
                        v[1] - mean[slot][1],
                        v[2] - mean[slot][2],
                    ];
                    let s = &mut second[slot];
                    s[0] += f[0] * f[0];
                    s[1] += f[1] * f[1];
                    s[2] += f[2] * f[2];
                    s[3] += f[0] * f[1];
                    s[4] += f[0] * f[2];
                    s[5] += f[1] * f[2];
                }
            }
        }
    }
    for (s, &n) in second.iter_mut().zip(&counts) {
        for c in 0..6 {
            s[c] /= n as f64;
        }
    }
    Ok(StressProfile {
        y: (0..n_axis).map(|i| spec.node_coord(axis, i)).collect(),
        components: second,
    })
}

/// Max central-difference divergence over interior nodes, plus the RMS
/// velocity-gradient magnitude over the same nodes for normalization.
pub fn divergence_linf(field: &FieldGrid) -> Result<(f64, f64)> {
    let spec = field.spec();
    if spec.dims.iter().any(|&n| n < 3) {
        return Err(Error::Diagnostics(
            "divergence needs at least 3 nodes per axis".into(),
        ));
    }
    let [nx, ny, nz] = spec.dims;
    let inv2 = [
        0.5 / spec.step(0),
        0.5 / spec.step(1),
        0.5 / spec.step(2),
    ];
    let mut max_div = 0.0f64;
    let mut grad_sq_sum = 0.0f64;
    let mut count = 0u64;
    for iz in 1..nz - 1 {
        for iy in 1..ny - 1 {
            for ix in 1..nx - 1 {
                let mut grad = [[0.0f64; 3]; 3]; // grad[i][j] = d u_i / d x_j
                let xp = field.value(ix + 1, iy, iz);
                let xm = field.value(ix - 1, iy, iz);
                let yp = field.value(ix, iy + 1, iz);
                let ym = field.value(ix, iy - 1, iz);
                let zp = field.value(ix, iy, iz + 1);
                let zm = field.value(ix, iy, iz - 1);
                for i in 0..3 {
                    grad[i][0] = (xp[i] - xm[i]) * inv2[0];
                    grad[i][1] = (yp[i] - ym[i]) * inv2[1];
                    grad[i][2] = (zp[i] - zm[i]) * inv2[2];
                }
                let div = grad[0][0] + grad[1][1] + grad[2][2];
                max_div = max_div.max(div.abs());
                grad_sq_sum += grad.iter().flatten().map(|g| g * g).sum::<f64>();
                count += 1;
            }
        }
    }
    Ok((max_div, (grad_sq_sum / count as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn periodic_grid(n: usize, l: f64) -> GridSpec {
        GridSpec::new([n, n, n], [0.0; 3], [l; 3], [AxisKind::Periodic; 3]).unwrap()
    }

    fn fill(spec: &GridSpec, f: impl Fn([f64; 3]) -> [f64; 3]) -> FieldGrid {
        let mut field = FieldGrid::zeros(spec.clone());
        let [nx, ny, nz] = spec.dims;
        for iz in 0..nz {
            for iy in 0..ny {
                for ix in 0..nx {
                    let v = f(spec.node(ix, iy, iz));
                    let i = spec.linear_index(ix, iy, iz) * 3;
                    field.values_mut()[i..i + 3].copy_from_slice(&v);
                }
            }
        }
        field
    }

    #[test]
    fn single_mode_lands_in_its_shell() {
        let l = std::f64::consts::TAU;
        let spec = periodic_grid(32, l);
        let k1 = 3.0 * std::f64::consts::TAU / l;
        let field = fill(&spec, |x| [(k1 * x[0]).sin(), 0.0, 0.0]);
        let s = energy_spectrum(&field).unwrap();
        assert!(s.parseval_residual < 1e-10);
        let total: f64 = s.energy.iter().sum::<f64>() * s.bin_width;
        let shell3 = s.energy[3] * s.bin_width;
        assert_relative_eq!(shell3, total, max_relative = 1e-12);
        assert_relative_eq!(total, 0.25, max_relative = 1e-12); // mean sin^2 / 2
    }

    #[test]
    fn zero_field_gives_zero_spectrum() {
        let spec = periodic_grid(8, 1.0);
        let s = energy_spectrum(&FieldGrid::zeros(spec)).unwrap();
        assert!(s.energy.iter().all(|&e| e == 0.0));
        assert_eq!(s.parseval_residual, 0.0);
    }

    #[test]
    fn white_noise_satisfies_parseval() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let spec = periodic_grid(24, std::f64::consts::TAU);
        let mut field = FieldGrid::zeros(spec);
        for v in field.values_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let s = energy_spectrum(&field).unwrap();
        assert!(s.parseval_residual < 1e-6, "residual {}", s.parseval_residual);
        let total: f64 = s.energy.iter().sum::<f64>() * s.bin_width;
        assert_relative_eq!(
            total,
            0.5 * field.mean_square_velocity(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn ensemble_average_reduces_to_single_for_identical_fields() {
        let spec = periodic_grid(8, 1.0);
        let field = fill(&spec, |x| [x[0].sin(), 0.0, 0.0]);
        let one = energy_spectrum(&field).unwrap();
        let two = energy_spectrum_ensemble(&[field.clone(), field]).unwrap();
        for (a, b) in one.energy.iter().zip(&two.energy) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn structure_function_edge_cases() {
        let spec = periodic_grid(16, 4.0);
        let constant = fill(&spec, |_| [1.0, 2.0, 3.0]);
        let curve = structure_functions(&constant, 1.5).unwrap();
        assert!(curve.d11.iter().all(|&d| d == 0.0));
        assert!(curve.d22.iter().all(|&d| d == 0.0));
        assert!(curve.d33.iter().all(|&d| d == 0.0));
        // Separation beyond half the box is rejected.
        assert!(structure_functions(&constant, 2.5).is_err());
    }

    #[test]
    fn structure_function_matches_sinusoid_oracle() {
        let l = std::f64::consts::TAU;
        let n = 64;
        let spec = periodic_grid(n, l);
        let k = 2.0;
        let field = fill(&spec, |x| {
            [(k * x[0]).sin(), (k * x[1]).sin(), (k * x[2]).sin()]
        });
        let curve = structure_functions(&field, l / 2.0).unwrap();
        for (i, &r) in curve.r.iter().enumerate() {
            // D(r) = 2 <u^2> (1 - cos(k r)) with <u^2> = 1/2 on full periods.
            let expect = 1.0 - (k * r).cos();
            assert_abs_diff_eq!(curve.d11[i], expect, epsilon = 1e-10);
            assert_abs_diff_eq!(curve.d22[i], expect, epsilon = 1e-10);
            assert_abs_diff_eq!(curve.d33[i], expect, epsilon = 1e-10);
        }
        // Adding a constant velocity leaves the curves unchanged, exactly.
        let shifted = fill(&spec, |x| {
            [
                (k * x[0]).sin() + 7.0,
                (k * x[1]).sin() - 3.0,
                (k * x[2]).sin() + 0.5,
            ]
        });
        let curve2 = structure_functions(&shifted, l / 2.0).unwrap();
        for i in 0..curve.r.len() {
            assert_relative_eq!(curve.d11[i], curve2.d11[i], max_relative = 1e-11);
            assert_relative_eq!(curve.d22[i], curve2.d22[i], max_relative = 1e-11);
            assert_relative_eq!(curve.d33[i], curve2.d33[i], max_relative = 1e-11);
        }
    }

    #[test]
    fn inertial_fit_recovers_exact_power_laws() {
        let r: Vec<f64> = (1..60).map(|i| 0.05 * i as f64).collect();
        let eps: f64 = 0.0849;
        let d: Vec<f64> = r.iter().map(|&x| 1.7 * eps.powf(2.0 / 3.0) * x.powf(2.0 / 3.0)).collect();
        let fit = inertial_range_fit(&r, &d, eps, 0.1, 2.0).unwrap();
        assert_abs_diff_eq!(fit.exponent, 2.0 / 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.prefactor, 1.7, epsilon = 1e-10);

        let d2: Vec<f64> = r.iter().map(|&x| x * x).collect();
        let fit2 = inertial_range_fit(&r, &d2, eps, 0.1, 2.0).unwrap();
        assert_abs_diff_eq!(fit2.exponent, 2.0, epsilon = 1e-10);

        assert!(inertial_range_fit(&r, &d, eps, 0.0, 0.1).is_err());
    }

    #[test]
    fn autocorrelation_normalization_and_cosine() {
        // tau = 0 normalizes to exactly 1.
        let series = vec![vec![[1.0, -0.5, 2.0]; 64]];
        let ac = eulerian_autocorrelation(&series, 0.1, 10).unwrap();
        for c in 0..3 {
            assert_eq!(ac.r[c][0], 1.0);
        }

        // Long cosine series: R(tau) ~ cos(omega tau).
        let t_len = 5_000_000;
        let omega0 = 0.37;
        let dt = 0.25;
        let probe: Vec<[f64; 3]> = (0..t_len)
            .map(|t| {
                let c = (omega0 * t as f64 * dt).cos();
                [c, c, c]
            })
            .collect();
        let ac = eulerian_autocorrelation(&[probe].to_vec(), dt, 3).unwrap();
        for lag in 0..=3 {
            let expect = (omega0 * lag as f64 * dt).cos();
            assert_abs_diff_eq!(ac.r[0][lag], expect, epsilon = 1e-6);
        }
    }

    #[test]
    fn autocorrelation_of_white_noise_decays() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let t_len = 40_000;
        let probe: Vec<[f64; 3]> = (0..t_len)
            .map(|_| std::array::from_fn(|_| rng.gen_range(-1.0f64..1.0)))
            .collect();
        let ac = eulerian_autocorrelation(&[probe].to_vec(), 1.0, 20).unwrap();
        let bound = 3.0 / (t_len as f64).sqrt();
        for c in 0..3 {
            for lag in 1..=20 {
                assert!(ac.r[c][lag].abs() < bound, "lag {lag}: {}", ac.r[c][lag]);
            }
        }
        // Normalized values stay in [-1, 1] within estimator noise.
        for c in 0..3 {
            for &v in &ac.r[c] {
                assert!(v.abs() <= 1.0 + 1e-12);
            }
        }
        assert!(eulerian_autocorrelation(&[vec![[0.0; 3]; 1]].to_vec(), 1.0, 1).is_err());
    }

    #[test]
    fn frequency_spectrum_concentrates_cosine_mass() {
        let j = 256;
        let dt = 0.1;
        let omega0 = 8.0 * std::f64::consts::PI / (j as f64 * dt); // on-grid frequency
        let ac = Autocorrelation {
            dt,
            r: std::array::from_fn(|_| {
                (0..=j).map(|lag| (omega0 * lag as f64 * dt).cos()).collect()
            }),
        };
        let spec = frequency_spectrum(&ac);
        let peak = spec
            .omega
            .iter()
            .enumerate()
            .max_by(|a, b| spec.mean_phi(a.0).total_cmp(&spec.mean_phi(b.0)))
            .unwrap();
        assert_relative_eq!(spec.omega[peak.0], omega0, max_relative = 1e-12);
        // Mass outside the peak bin is orders of magnitude smaller.
        let side = spec.mean_phi(peak.0 / 2);
        assert!(spec.mean_phi(peak.0) > 100.0 * side.abs());
    }

    #[test]
    fn frequency_fit_recovers_exact_exponent() {
        let omega: Vec<f64> = (1..200).map(|i| 0.1 * i as f64).collect();
        let phi: Vec<f64> = omega.iter().map(|&w| 2.0 * w.powf(-5.0 / 3.0)).collect();
        let spec = FrequencySpectrum {
            omega: omega.clone(),
            phi: [phi.clone(), phi.clone(), phi],
        };
        let fit = frequency_spectrum_fit(&spec, 1.0, 1.0, 0.5, 15.0).unwrap();
        assert_abs_diff_eq!(fit.exponent, -5.0 / 3.0, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.prefactor, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn reynolds_stress_estimator() {
        let spec = periodic_grid(8, 1.0);
        // Identical zero fields -> zero tensor.
        let zeros = vec![FieldGrid::zeros(spec.clone()), FieldGrid::zeros(spec.clone())];
        let profile = ensemble_reynolds_stress(&zeros, 1).unwrap();
        assert!(profile
            .components
            .iter()
            .all(|c| c.iter().all(|&v| v == 0.0)));
        assert!(ensemble_reynolds_stress(&zeros[..1], 1).is_err());

        // i.i.d. unit-variance fields -> diagonal near 1.
        use rand::{Rng, SeedableRng};
        use rand_distr::StandardNormal;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let fields: Vec<FieldGrid> = (0..8)
            .map(|_| {
                let mut f = FieldGrid::zeros(spec.clone());
                for v in f.values_mut() {
                    *v = rng.sample(StandardNormal);
                }
                f
            })
            .collect();
        let profile = ensemble_reynolds_stress(&fields, 1).unwrap();
        // Per y-slot: 8 fields x 8 x 8 homogeneous nodes.
        let n_samples = 8.0 * 8.0 * 8.0;
        let sigma = (2.0f64 / n_samples).sqrt();
        for c in profile.components {
            for d in 0..3 {
                assert!((c[d] - 1.0).abs() < 4.0 * sigma, "diag {d} = {}", c[d]);
            }
        }
    }

    #[test]
    fn divergence_estimator_anchors() {
        let spec = periodic_grid(12, 3.0);
        let constant = fill(&spec, |_| [0.3, -0.2, 0.9]);
        let (div, grad) = divergence_linf(&constant).unwrap();
        assert_eq!(div, 0.0);
        assert_eq!(grad, 0.0);

        // Divergence-free shear.
        let shear = fill(&spec, |x| [x[1], 0.0, 0.0]);
        let (div, grad) = divergence_linf(&shear).unwrap();
        assert_abs_diff_eq!(div, 0.0, epsilon = 1e-12);
        assert_relative_eq!(grad, 1.0, max_relative = 1e-12);

        // Unit divergence everywhere.
        let expanding = fill(&spec, |x| [x[0], 0.0, 0.0]);
        let (div, _) = divergence_linf(&expanding).unwrap();
        assert_relative_eq!(div, 1.0, max_relative = 1e-12);

        let tiny = GridSpec::new([2, 4, 4], [0.0; 3], [1.0; 3], [AxisKind::Periodic; 3]).unwrap();
        assert!(divergence_linf(&FieldGrid::zeros(tiny)).is_err());
    }
}
