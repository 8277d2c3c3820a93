//! Mode population: counts, determinism, and energy bookkeeping.

use swtg::domain::DomainSpec;
use swtg::sampler::{build_mode_set, EnergySource, GeneratorSetup, Variant};
use swtg::spectrum::{SpectrumModel, WavenumberSequence};

fn hit_setup(seed: u64) -> GeneratorSetup<'static> {
    // Shells sized so supports fit the periodic box at delta = 1e-3.
    let domain = DomainSpec::periodic_box([0.0; 3], [std::f64::consts::TAU; 3]).unwrap();
    let sequence = WavenumberSequence::log_spaced(4.0, 0.2, 4).unwrap();
    let model = SpectrumModel::from_tke(0.5, 2.0, 40.0).unwrap().normalized();
    let mut setup = GeneratorSetup::new(
        domain,
        sequence,
        Variant::ReynoldsPreserving,
        EnergySource::Isotropic { model, eps: 0.1 },
        seed,
    );
    setup.delta = 1e-3;
    setup.floor_frac = 0.05;
    setup.cl_samples = 2000;
    setup
}

#[test]
fn shell_counts_match_the_density_law() {
    let setup = hit_setup(7);
    let set = build_mode_set(&setup).unwrap();
    assert!(set.warnings().is_empty(), "{:?}", set.warnings());
    let volume = setup.domain.volume();
    for (shell, l, _) in setup.sequence.iter() {
        let expected = swtg::sampler::mode_count(volume, l, set.k0());
        assert_eq!(
            set.shell_mode_count(shell),
            expected as usize,
            "shell {shell}"
        );
    }
}

#[test]
fn same_seed_gives_identical_sets() {
    let a = build_mode_set(&hit_setup(42)).unwrap();
    let b = build_mode_set(&hit_setup(42)).unwrap();
    assert_eq!(a, b);
    let c = build_mode_set(&hit_setup(43)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn thread_count_does_not_change_the_set() {
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| build_mode_set(&hit_setup(42)).unwrap());
    let eight = rayon::ThreadPoolBuilder::new()
        .num_threads(8)
        .build()
        .unwrap()
        .install(|| build_mode_set(&hit_setup(42)).unwrap());
    assert_eq!(single, eight);
}

#[test]
fn shell_energy_identity_is_exact() {
    // 2 q^2 c_l = E(l) dl / k_t per shell, by construction.
    let setup = hit_setup(11);
    let set = build_mode_set(&setup).unwrap();
    let EnergySource::Isotropic { model, .. } = &setup.energy else {
        unreachable!()
    };
    let k_t = model.tke();
    for (shell, l, dl) in setup.sequence.iter() {
        let c_l = set.shell_coefficients()[shell].unwrap();
        let target = model.evaluate(l) * dl / k_t;
        for mode in set.modes().iter().filter(|m| m.shell as usize == shell) {
            let lhs = 2.0 * mode.weight * mode.weight * c_l;
            assert!(
                (lhs - target).abs() <= 1e-12 * target,
                "shell {shell}: {lhs} vs {target}"
            );
            // Solenoidal weight differs by sqrt(k_t).
            let ratio = mode.advect_weight / mode.weight;
            assert!((ratio - k_t.sqrt()).abs() < 1e-12 * k_t.sqrt());
        }
    }
    // Riemann sum over shells approaches the band fraction.
    let riemann: f64 = setup
        .sequence
        .iter()
        .map(|(_, l, dl)| model.evaluate(l) * dl)
        .sum::<f64>()
        / k_t;
    let exact: f64 = setup
        .sequence
        .iter()
        .map(|(shell, _, _)| {
            let c_l = set.shell_coefficients()[shell].unwrap();
            let q = set
                .modes()
                .iter()
                .find(|m| m.shell as usize == shell)
                .unwrap()
                .weight;
            2.0 * q * q * c_l
        })
        .sum();
    assert!((exact - riemann).abs() < 1e-9 * riemann);
}

#[test]
fn modes_satisfy_their_documented_invariants() {
    let setup = hit_setup(3);
    let set = build_mode_set(&setup).unwrap();
    assert!(!set.modes().is_empty());
    for mode in set.modes() {
        // Wavevector magnitude on its shell.
        let l = setup.sequence.magnitude(mode.shell as usize);
        let norm = mode.wavevector.iter().map(|k| k * k).sum::<f64>().sqrt();
        assert!((norm - l).abs() <= 1e-12 * l);
        // Orthonormal rotation with unit determinant.
        let o = &mode.rotation;
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|r| o[r][i] * o[r][j]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12);
            }
        }
        let det = o[0][0] * (o[1][1] * o[2][2] - o[1][2] * o[2][1])
            - o[0][1] * (o[1][0] * o[2][2] - o[1][2] * o[2][0])
            + o[0][2] * (o[1][0] * o[2][1] - o[1][1] * o[2][0]);
        assert!((det - 1.0).abs() < 1e-12);
        assert!(mode.weight >= 0.0);
        // Support half-widths fit half the period (periodizable).
        for axis in 0..3 {
            assert!(2.0 * mode.support[axis] <= setup.domain.extent(axis) + 1e-12);
        }
        assert!(mode.temporal.is_none());
    }
}

#[test]
fn infeasible_shells_are_skipped_with_a_warning() {
    let mut setup = hit_setup(5);
    // A shell far below the box-fit floor cannot exist in this domain.
    setup.sequence = WavenumberSequence::log_spaced(0.3, 0.6, 6).unwrap();
    let set = build_mode_set(&setup).unwrap();
    assert!(!set.warnings().is_empty());
    assert!(set.shell_coefficients()[0].is_none());
    assert_eq!(set.shell_mode_count(0), 0);
    // Highest shells are fine.
    let last = setup.sequence.len() - 1;
    assert!(set.shell_coefficients()[last].is_some());
}

#[test]
fn empty_sequence_and_degenerate_domain_error() {
    let setup = hit_setup(1);
    let mut bad = hit_setup(1);
    bad.max_modes = 10;
    assert!(build_mode_set(&bad).is_err());
    drop(setup);
}
