//! Built-in validation suite: one pass/fail line per check, exit 1 on any
//! failure. `--quick` keeps every check but shrinks grids and ensembles.

use crate::Failure;
use swtg::bandplan::{cutoff_bounds, local_spectrum, reconstruction_ratio};
use swtg::diagnostics;
use swtg::domain::DomainSpec;
use swtg::field::GridSpec;
use swtg::profile::ChannelFixture;
use swtg::sampler::{build_mode_set, EnergySource, GeneratorSetup, Variant};
use swtg::spectrum::{alpha_constant, ke_isotropic, SpectrumModel, WavenumberSequence};
use swtg::synthesis::evaluate_grid;
use swtg::wavelet::{peak_wavenumber, WaveletKind};

type CheckResult = Result<String, String>;

struct Report {
    failures: usize,
}

impl Report {
    fn run(&mut self, name: &str, check: impl FnOnce() -> CheckResult) {
        let started = std::time::Instant::now();
        match check() {
            Ok(detail) => println!(
                "PASS {name} — {detail} [{:.1}s]",
                started.elapsed().as_secs_f64()
            ),
            Err(detail) => {
                self.failures += 1;
                println!(
                    "FAIL {name} — {detail} [{:.1}s]",
                    started.elapsed().as_secs_f64()
                );
            }
        }
    }
}

pub fn run(quick: bool) -> Result<(), Failure> {
    let mut report = Report { failures: 0 };

    report.run("analytic constants", || {
        let alpha = alpha_constant();
        let ke = ke_isotropic(1.0).map_err(|e| e.to_string())?;
        if (alpha - 1.453).abs() > 1e-3 {
            return Err(format!("alpha = {alpha}"));
        }
        if (ke - 0.746834).abs() > 1e-5 {
            return Err(format!("ke(1) = {ke}"));
        }
        Ok(format!("alpha = {alpha:.6}, ke(1) = {ke:.6}"))
    });

    report.run("wavelet spectral peak", || {
        let k0 = peak_wavenumber(WaveletKind::MexicanHat).map_err(|e| e.to_string())?;
        let rel = (k0 - 2f64.sqrt()).abs() / 2f64.sqrt();
        if rel > 1e-4 {
            return Err(format!("k0 = {k0}, rel err {rel:.2e}"));
        }
        Ok(format!("k0 = {k0:.6}"))
    });

    report.run("spectrum normalization", || {
        let model = SpectrumModel::from_tke(0.5, 0.33, 125.43)
            .map_err(|e| e.to_string())?
            .normalized();
        let total = model
            .tke_integral(0.0, 100.0 * model.k_eta)
            .map_err(|e| e.to_string())?;
        let rel = (total - 0.5).abs() / 0.5;
        if rel > 0.01 {
            return Err(format!("integral = {total}, rel err {rel:.2e}"));
        }
        Ok(format!("integral = {total:.6} vs k_t = 0.5"))
    });

    report.run("shell energy identity", || {
        let domain =
            DomainSpec::periodic_box([0.0; 3], [std::f64::consts::TAU; 3]).map_err(|e| e.to_string())?;
        let sequence = WavenumberSequence::log_spaced(4.0, 0.25, 3).map_err(|e| e.to_string())?;
        let model = SpectrumModel::from_tke(0.5, 2.0, 40.0)
            .map_err(|e| e.to_string())?
            .normalized();
        let mut setup = GeneratorSetup::new(
            domain,
            sequence.clone(),
            Variant::ReynoldsPreserving,
            EnergySource::Isotropic { model, eps: 0.1 },
            1,
        );
        setup.delta = 1e-3;
        setup.cl_samples = 1000;
        let set = build_mode_set(&setup).map_err(|e| e.to_string())?;
        let mut worst: f64 = 0.0;
        for (shell, l, dl) in sequence.iter() {
            let c_l = set.shell_coefficients()[shell].ok_or("skipped shell")?;
            let target = model_eval(&setup, l) * dl / 0.5;
            if let Some(mode) = set.modes().iter().find(|m| m.shell as usize == shell) {
                let lhs = 2.0 * mode.weight * mode.weight * c_l;
                worst = worst.max(((lhs - target) / target).abs());
            }
        }
        if worst > 1e-12 {
            return Err(format!("identity off by {worst:.2e}"));
        }
        Ok(format!("max relative deviation {worst:.2e}"))
    });

    report.run("determinism across threads", || {
        let build = |threads: usize| -> Result<_, String> {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| e.to_string())?
                .install(|| {
                    let domain = DomainSpec::periodic_box([0.0; 3], [std::f64::consts::TAU; 3])
                        .map_err(|e| e.to_string())?;
                    let sequence =
                        WavenumberSequence::log_spaced(4.0, 0.25, 2).map_err(|e| e.to_string())?;
                    let model = SpectrumModel::from_tke(0.5, 2.0, 40.0)
                        .map_err(|e| e.to_string())?
                        .normalized();
                    let mut setup = GeneratorSetup::new(
                        domain,
                        sequence,
                        Variant::Solenoidal,
                        EnergySource::Isotropic { model, eps: 0.1 },
                        9,
                    );
                    setup.delta = 1e-3;
                    setup.cl_samples = 500;
                    let set = build_mode_set(&setup).map_err(|e| e.to_string())?;
                    let grid =
                        GridSpec::covering(&domain, [16, 16, 16]).map_err(|e| e.to_string())?;
                    let field = evaluate_grid(&set, &grid, Variant::Solenoidal, None)
                        .map_err(|e| e.to_string())?;
                    Ok(field.values().to_vec())
                })
        };
        let one = build(1)?;
        let many = build(8)?;
        if one != many {
            return Err("field differs between 1 and 8 threads".into());
        }
        Ok("bit-identical at 1 and 8 threads".into())
    });

    report.run("divergence-free variant", || {
        let n = if quick { 32 } else { 48 };
        let domain =
            DomainSpec::periodic_box([0.0; 3], [std::f64::consts::TAU; 3]).map_err(|e| e.to_string())?;
        let sequence = WavenumberSequence::log_spaced(4.0, 0.25, 4).map_err(|e| e.to_string())?;
        let model = SpectrumModel::from_tke(0.5, 2.0, 40.0)
            .map_err(|e| e.to_string())?
            .normalized();
        let mut setup = GeneratorSetup::new(
            domain,
            sequence,
            Variant::Solenoidal,
            EnergySource::Isotropic { model, eps: 0.1 },
            5,
        );
        setup.delta = 1e-3;
        setup.cl_samples = 1000;
        let set = build_mode_set(&setup).map_err(|e| e.to_string())?;
        let grid = GridSpec::covering(&domain, [n, n, n]).map_err(|e| e.to_string())?;
        let field =
            evaluate_grid(&set, &grid, Variant::Solenoidal, None).map_err(|e| e.to_string())?;
        let (max_div, rms_grad) = diagnostics::divergence_linf(&field).map_err(|e| e.to_string())?;
        let ratio = max_div / rms_grad;
        if ratio > 1e-3 {
            return Err(format!("max|div| / rms(grad) = {ratio:.2e}"));
        }
        Ok(format!("max|div| / rms(grad) = {ratio:.2e} on {n}^3"))
    });

    report.run("hit spectrum band", || {
        let box_len = 4.0 * std::f64::consts::PI;
        let pad = 1.0;
        let domain = DomainSpec::open_box(
            [-pad * box_len, -pad * box_len, -pad * box_len],
            [(1.0 + pad) * box_len; 3],
        )
        .map_err(|e| e.to_string())?;
        let k_t = 0.5;
        let eps = 0.0849;
        let u = (2.0 * k_t / 3.0_f64).sqrt();
        let k_e = ke_isotropic(u.powi(3) / eps).map_err(|e| e.to_string())?;
        let k_eta =
            swtg::spectrum::kolmogorov_wavenumber(eps, 7e-4).map_err(|e| e.to_string())?;
        let model = SpectrumModel::from_tke(k_t, k_e, k_eta)
            .map_err(|e| e.to_string())?
            .normalized();
        let sequence = WavenumberSequence::log_spaced(0.75, 0.25, 7).map_err(|e| e.to_string())?;
        let n = if quick { 48 } else { 64 };
        let seeds: &[u64] = if quick { &[11, 12] } else { &[11, 12, 13, 14] };
        let grid = GridSpec::new(
            [n, n, n],
            [0.0; 3],
            [box_len; 3],
            [swtg::field::AxisKind::Periodic; 3],
        )
        .map_err(|e| e.to_string())?;
        let mut fields = Vec::new();
        for &seed in seeds {
            let mut setup = GeneratorSetup::new(
                domain,
                sequence.clone(),
                Variant::Solenoidal,
                EnergySource::Isotropic { model, eps },
                seed,
            );
            setup.delta = 1e-3;
            setup.floor_frac = 0.2;
            setup.cl_samples = 2000;
            let set = build_mode_set(&setup).map_err(|e| e.to_string())?;
            fields.push(
                evaluate_grid(&set, &grid, Variant::Solenoidal, None).map_err(|e| e.to_string())?,
            );
        }
        let spectrum = diagnostics::energy_spectrum_ensemble(&fields).map_err(|e| e.to_string())?;
        // Compare over the interior of the generated band.
        let (lo, hi) = (sequence.magnitude(1), sequence.magnitude(sequence.len() - 2));
        let mut worst: f64 = 1.0;
        let mut worst_k = 0.0;
        for bin in 1..spectrum.energy.len() {
            let k = spectrum.wavenumber(bin);
            if k < lo || k > hi {
                continue;
            }
            let target = model.evaluate(k);
            if target <= 0.0 {
                continue;
            }
            let ratio = spectrum.energy[bin] / target;
            let miss = ratio.max(1.0 / ratio);
            if miss > worst {
                worst = miss;
                worst_k = k;
            }
        }
        if worst > 1.6 {
            return Err(format!("worst band ratio x{worst:.2} at k = {worst_k:.2}"));
        }
        Ok(format!(
            "band [{lo:.2}, {hi:.2}] within x{worst:.2} (parseval {:.1e})",
            spectrum.parseval_residual
        ))
    });

    report.run("channel fixture and band plan", || {
        let profile = ChannelFixture::default().build().map_err(|e| e.to_string())?;
        let nu = 0.015;
        let sequence = WavenumberSequence::log_spaced(0.3, 0.15, 42).map_err(|e| e.to_string())?;
        let plan = cutoff_bounds(&profile, nu, 0.05, &sequence).map_err(|e| e.to_string())?;
        if !plan.satisfies_budget() {
            return Err("band plan missed the 95% capture target".into());
        }
        // Reconstruction ratio sane at mid-channel.
        let model = local_spectrum(&profile, nu, 1.0)
            .map_err(|e| e.to_string())?
            .ok_or("no centerline spectrum")?;
        let gamma = reconstruction_ratio(&profile, nu, 1.0, 100.0 * model.k_eta)
            .map_err(|e| e.to_string())?;
        if (gamma - 1.0).abs() > 0.01 {
            return Err(format!("gamma(100 k_eta) = {gamma}"));
        }
        Ok(format!("capture >= 95% everywhere, gamma -> {gamma:.4}"))
    });

    report.run("config roundtrip", || {
        let text = r#"
            [domain]
            min = [0.0, 0.0, 0.0]
            max = [6.2831853, 6.2831853, 6.2831853]
            boundary = { x = "periodic", y = "periodic", z = "periodic" }
            [grid]
            dims = [32, 32, 32]
            [spectrum]
            k_t = 0.5
            eps = 0.0849
            nu = 7e-4
            [modes]
            k_start = 0.3
            d_k = 0.2
            shells = 15
            variant = "solenoidal"
            [run]
            seed = 42
        "#;
        let config = swtg::config::GeneratorConfig::parse(text).map_err(|e| e.to_string())?;
        let back =
            swtg::config::GeneratorConfig::parse(&config.to_toml()).map_err(|e| e.to_string())?;
        if config != back {
            return Err("config does not round-trip".into());
        }
        Ok(format!("hash {:016x}", config.hash()))
    });

    if report.failures > 0 {
        Err(Failure::Validation(format!(
            "{} validation check(s) failed",
            report.failures
        )))
    } else {
        println!("all validation checks passed");
        Ok(())
    }
}

fn model_eval(setup: &GeneratorSetup, l: f64) -> f64 {
    match &setup.energy {
        EnergySource::Isotropic { model, .. } => model.evaluate(l),
        EnergySource::Profile { .. } => unreachable!(),
    }
}
