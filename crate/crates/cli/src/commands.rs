//! Subcommand implementations.

use crate::{Failure, RunOpts};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use swtg::bandplan::{cutoff_bounds, reconstruction_ratio};
use swtg::config::GeneratorConfig;
use swtg::diagnostics;
use swtg::dynamics::{AdvectionStats, Evolution, MeanField, Scene};
use swtg::field::{FieldGrid, Sidecar};
use swtg::profile::{ChannelFixture, RansProfile};
use swtg::sampler::{build_mode_set, Variant};
use swtg::synthesis::{evaluate_grid, AnisotropyField};

pub struct LoadedConfig {
    pub config: GeneratorConfig,
    pub profile: Option<RansProfile>,
}

pub fn load_config(opts: &RunOpts) -> Result<LoadedConfig, Failure> {
    let mut config = GeneratorConfig::load(&opts.config)?;
    if let Some(seed) = opts.seed {
        config.run.seed = seed;
    }
    let profile = match (&config.profile, &opts.profile) {
        (Some(pc), Some(path)) => {
            let mut pc = pc.clone();
            pc.path = path.display().to_string();
            config.profile = Some(pc.clone());
            Some(RansProfile::load(path)?)
        }
        (Some(pc), None) => Some(RansProfile::load(&pc.path)?),
        (None, Some(_)) => {
            return Err(Failure::Usage(
                "--profile given but the config has no [profile] section".into(),
            ))
        }
        (None, None) => None,
    };
    Ok(LoadedConfig { config, profile })
}

fn report_warnings(set: &swtg::sampler::ModeSet) {
    for warning in set.warnings() {
        eprintln!("warning: {warning}");
    }
}

pub fn generate_hit(opts: &RunOpts, out: &Path) -> Result<(), Failure> {
    let loaded = load_config(opts)?;
    let config = &loaded.config;
    if config.spectrum.is_none() {
        return Err(Failure::Usage(
            "generate hit needs a [spectrum] section".into(),
        ));
    }
    let setup = config.hit_setup()?;
    let set = build_mode_set(&setup)?;
    report_warnings(&set);
    let domain = config.domain_spec()?;
    let grid = config.grid_spec(&domain)?;
    let aniso;
    let aniso_ref = match config.modes.variant {
        Variant::ReynoldsPreserving => {
            let k_t = config.spectrum.as_ref().unwrap().k_t;
            aniso = AnisotropyField::uniform(&swtg::synthesis::ReynoldsTensor::isotropic(k_t))?;
            Some(&aniso)
        }
        Variant::Solenoidal => None,
    };
    let field = evaluate_grid(&set, &grid, config.modes.variant, aniso_ref)?;
    save_field(&field, config, out)?;
    println!("wrote {} ({} modes)", out.display(), set.modes().len());
    Ok(())
}

pub fn generate_channel(opts: &RunOpts, out: &Path) -> Result<(), Failure> {
    let loaded = load_config(opts)?;
    let config = &loaded.config;
    let profile = loaded
        .profile
        .as_ref()
        .ok_or_else(|| Failure::Usage("generate channel needs a [profile] section".into()))?;
    let pc = config.profile.as_ref().unwrap();
    let plan = if pc.scale_reduction {
        Some(cutoff_bounds(
            profile,
            pc.nu,
            config.modes.band_budget,
            &config.sequence()?,
        )?)
    } else {
        None
    };
    let setup = config.channel_setup(profile, plan.as_ref())?;
    let set = build_mode_set(&setup)?;
    report_warnings(&set);
    let domain = config.domain_spec()?;
    let grid = config.grid_spec(&domain)?;
    let aniso;
    let aniso_ref = match config.modes.variant {
        Variant::ReynoldsPreserving => {
            aniso = AnisotropyField::Profile {
                profile,
                axis: pc.wall_axis,
            };
            Some(&aniso)
        }
        Variant::Solenoidal => None,
    };
    let field = evaluate_grid(&set, &grid, config.modes.variant, aniso_ref)?;
    save_field(&field, config, out)?;
    println!("wrote {} ({} modes)", out.display(), set.modes().len());
    Ok(())
}

fn save_field(field: &FieldGrid, config: &GeneratorConfig, out: &Path) -> Result<(), Failure> {
    let variant = match config.modes.variant {
        Variant::ReynoldsPreserving => "reynolds",
        Variant::Solenoidal => "solenoidal",
    };
    let sidecar = Sidecar::new(config.hash(), config.run.seed, variant);
    field.save(out, Some(&sidecar))?;
    Ok(())
}

pub fn evolve(opts: &RunOpts, out: &Path) -> Result<(), Failure> {
    let loaded = load_config(opts)?;
    let config = &loaded.config;
    let (set, mean, stats, k_c) = match (&config.spectrum, &loaded.profile) {
        (Some(hit), None) => {
            let setup = config.hit_setup()?;
            let set = build_mode_set(&setup)?;
            let model = config.hit_model()?;
            (
                set,
                MeanField::Uniform([0.0; 3]),
                AdvectionStats::Isotropic { k_t: hit.k_t },
                swtg::dynamics::cutoff_wavenumber(model.k_e)?,
            )
        }
        (None, Some(profile)) => {
            let pc = config.profile.as_ref().unwrap();
            let setup = config.channel_setup(profile, None)?;
            let set = build_mode_set(&setup)?;
            let (lo, hi) = profile.y_range();
            let model = swtg::bandplan::local_spectrum(profile, pc.nu, 0.5 * (lo + hi))?
                .ok_or_else(|| Failure::Usage("profile carries no energy".into()))?;
            (
                set,
                MeanField::Profile {
                    profile,
                    axis: pc.wall_axis,
                },
                AdvectionStats::Profile {
                    profile,
                    axis: pc.wall_axis,
                },
                swtg::dynamics::cutoff_wavenumber(model.k_e)?,
            )
        }
        _ => return Err(Failure::Usage("evolve needs [spectrum] or [profile]".into())),
    };
    report_warnings(&set);
    let domain = config.domain_spec()?;
    let grid = config.grid_spec(&domain)?;
    let probes = config.probe_positions(&grid);
    let scene = Scene {
        mean,
        stats,
        dt: config.dynamics.dt,
        n_steps: config.dynamics.n_steps,
        w_policy: config.dynamics.w_policy,
        ul_grid: config.dynamics.ul_grid,
    };
    let n_steps = config.dynamics.n_steps;
    let mut evolution = Evolution::new(set, scene, k_c)?;
    let series = evolution.record_probes(&probes, n_steps)?;

    let path = probes_path(out);
    let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(file, "t,probe,u,v,w").map_err(Failure::usage)?;
    for (p, track) in series.series.iter().enumerate() {
        for (step, v) in track.iter().enumerate() {
            writeln!(
                file,
                "{},{},{},{},{}",
                (step + 1) as f64 * series.dt,
                p,
                v[0],
                v[1],
                v[2]
            )
            .map_err(Failure::usage)?;
        }
    }
    println!("wrote {} ({} probes x {} steps)", path.display(), series.series.len(), n_steps);
    Ok(())
}

pub fn probes_path(prefix: &Path) -> PathBuf {
    let mut name = prefix.file_name().unwrap_or_default().to_os_string();
    name.push("_probes.csv");
    prefix.with_file_name(name)
}

pub fn read_probe_series(path: &Path) -> Result<(f64, Vec<Vec<[f64; 3]>>), Failure> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Failure::Usage("empty probe file".into()))?
        .map_err(Failure::usage)?;
    if header.trim() != "t,probe,u,v,w" {
        return Err(Failure::Usage(format!("bad probe header `{header}`")));
    }
    let mut series: Vec<Vec<[f64; 3]>> = Vec::new();
    let mut times: Vec<f64> = Vec::new();
    for line in lines {
        let line = line.map_err(Failure::usage)?;
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let mut next = |name: &str| -> Result<f64, Failure> {
            cols.next()
                .ok_or_else(|| Failure::Usage(format!("missing column {name}")))?
                .trim()
                .parse::<f64>()
                .map_err(|_| Failure::Usage(format!("bad number in column {name}")))
        };
        let t = next("t")?;
        let probe = next("probe")? as usize;
        let v = [next("u")?, next("v")?, next("w")?];
        if series.len() <= probe {
            series.resize(probe + 1, Vec::new());
        }
        if probe == 0 {
            times.push(t);
        }
        series[probe].push(v);
    }
    let dt = if times.len() >= 2 {
        times[1] - times[0]
    } else {
        1.0
    };
    Ok((dt, series))
}

pub fn diagnose_spectrum(field_path: &Path, out: &Path) -> Result<(), Failure> {
    let (field, _) = FieldGrid::load(field_path)?;
    let spectrum = diagnostics::energy_spectrum(&field)?;
    let mut buf = Vec::new();
    spectrum.write_csv(&mut buf)?;
    std::fs::write(out, buf)?;
    println!(
        "wrote {} (parseval residual {:.3e})",
        out.display(),
        spectrum.parseval_residual
    );
    Ok(())
}

pub fn diagnose_structure(field_path: &Path, out: &Path, max_r: Option<f64>) -> Result<(), Failure> {
    let (field, _) = FieldGrid::load(field_path)?;
    let max_r = max_r.unwrap_or_else(|| 0.25 * field.spec().extent(0));
    let curve = diagnostics::structure_functions(&field, max_r)?;
    let mut buf = Vec::new();
    curve.write_csv(&mut buf)?;
    std::fs::write(out, buf)?;
    println!("wrote {}", out.display());
    Ok(())
}

pub fn diagnose_autocorr(probes: &Path, out: &Path, max_lag: usize) -> Result<(), Failure> {
    let (dt, series) = read_probe_series(probes)?;
    let ac = diagnostics::eulerian_autocorrelation(&series, dt, max_lag)?;
    let mut buf = Vec::new();
    ac.write_csv(&mut buf)?;
    std::fs::write(out, buf)?;
    println!("wrote {}", out.display());
    Ok(())
}

pub fn diagnose_reynolds(fields: &[PathBuf], opts: &RunOpts, out: &Path) -> Result<(), Failure> {
    if fields.len() < 2 {
        return Err(Failure::Usage(
            "diagnose reynolds needs at least two fields".into(),
        ));
    }
    let loaded = load_config(opts)?;
    let profile = loaded
        .profile
        .as_ref()
        .ok_or_else(|| Failure::Usage("diagnose reynolds needs a [profile] config".into()))?;
    let pc = loaded.config.profile.as_ref().unwrap();
    let ensemble: Vec<FieldGrid> = fields
        .iter()
        .map(|p| FieldGrid::load(p).map(|(f, _)| f))
        .collect::<Result<_, _>>()?;
    let stress = diagnostics::ensemble_reynolds_stress(&ensemble, pc.wall_axis)?;
    // Resolvable reference: gamma(y) R(y) at the grid's smallest Nyquist.
    let spec = ensemble[0].spec();
    let k_n = (0..3)
        .map(|a| std::f64::consts::PI / spec.step(a))
        .fold(f64::INFINITY, f64::min);
    let reference: Vec<(f64, [f64; 6])> = stress
        .y
        .iter()
        .map(|&y| -> Result<_, Failure> {
            let gamma = reconstruction_ratio(profile, pc.nu, y, k_n)?;
            let r = profile.sample(y).stress.components();
            Ok((y, r.map(|c| gamma * c)))
        })
        .collect::<Result<_, _>>()?;
    let mut buf = Vec::new();
    stress.write_csv_with_reference(Some(&reference), &mut buf)?;
    std::fs::write(out, buf)?;
    println!("wrote {} (k_N = {k_n:.3})", out.display());
    Ok(())
}

pub fn diagnose_divergence(field_path: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let (field, _) = FieldGrid::load(field_path)?;
    let (max_div, rms_grad) = diagnostics::divergence_linf(&field)?;
    let ratio = if rms_grad > 0.0 { max_div / rms_grad } else { 0.0 };
    println!("max_divergence,{max_div}");
    println!("rms_velocity_gradient,{rms_grad}");
    println!("ratio,{ratio}");
    if let Some(path) = out {
        std::fs::write(
            path,
            format!("max_divergence,rms_velocity_gradient,ratio\n{max_div},{rms_grad},{ratio}\n"),
        )?;
    }
    Ok(())
}

pub fn bandplan(opts: &RunOpts, out: &Path) -> Result<(), Failure> {
    let loaded = load_config(opts)?;
    let config = &loaded.config;
    let profile = loaded
        .profile
        .as_ref()
        .ok_or_else(|| Failure::Usage("bandplan needs a [profile] config".into()))?;
    let pc = config.profile.as_ref().unwrap();
    let plan = cutoff_bounds(profile, pc.nu, config.modes.band_budget, &config.sequence()?)?;
    let mut buf = Vec::new();
    plan.write_csv(&mut buf)?;
    std::fs::write(out, buf)?;
    println!(
        "wrote {} (budget satisfied: {})",
        out.display(),
        plan.satisfies_budget()
    );
    Ok(())
}

pub fn fixture_channel(out: &Path) -> Result<(), Failure> {
    let profile = ChannelFixture::default().build()?;
    profile.save(out)?;
    println!("wrote {} ({} rows)", out.display(), profile.len());
    Ok(())
}
