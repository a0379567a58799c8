//! Randomized invariants across the public API.

use std::path::Path;

use polyattractor::ensemble::{
    estimate_monotonicity_constant, kcenter_radius, monotonicity_ratio, one_dim_scan, sample_ball, tail_proxy,
    Ensemble, ModeWeight,
};
use polyattractor::harness::ExperimentConfig;
use polyattractor::spectral::{ModalField, PhaseState, SpectralBasis};
use polyattractor::wave::{simulate, Kernel, WaveParams};
use polyattractor::Error;
use proptest::prelude::*;

fn ensemble(modes: usize, count: usize, seed: u64) -> Ensemble<f64> {
    sample_ball(modes, count, 1.0, ModeWeight::Inverse, seed).unwrap()
}

fn vector(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, dim)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kcenter_radius_non_increasing(seed in any::<u64>(), count in 2usize..12) {
        let e = ensemble(6, count, seed);
        let radii: Vec<f64> = (1..=count).map(|k| kcenter_radius(&e, k).unwrap().radius).collect();
        prop_assert!(radii.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(radii[count - 1], 0.0);
        prop_assert!(radii[0] <= e.diameter());
    }

    #[test]
    fn tail_proxy_inclusion_and_union(seed in any::<u64>(), split in 1usize..9, cutoff in 0usize..=6) {
        let e = ensemble(6, 10, seed);
        let (left, right) = e.members().split_at(split);
        let a = Ensemble::new(left.to_vec()).unwrap();
        let b = Ensemble::new(right.to_vec()).unwrap();
        let whole = tail_proxy(&e, cutoff).unwrap();
        let (pa, pb) = (tail_proxy(&a, cutoff).unwrap(), tail_proxy(&b, cutoff).unwrap());
        prop_assert!(pa <= whole && pb <= whole);
        prop_assert_eq!(whole, pa.max(pb));
    }

    #[test]
    fn monotonicity_ratio_above_quartic_constant(x in vector(5), y in vector(5)) {
        if let Some(ratio) = monotonicity_ratio(&x, &y, 4.0) {
            prop_assert!(ratio >= 0.25 - 1e-12);
        }
    }

    #[test]
    fn monotonicity_estimate_is_reproducible(r in 2.0f64..5.0, dim in 1usize..6, seed in any::<u64>()) {
        let a = estimate_monotonicity_constant(r, dim, 500, seed).unwrap();
        let b = estimate_monotonicity_constant(r, dim, 500, seed).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a.estimate <= one_dim_scan(r));
    }

    #[test]
    fn kernel_frobenius_norm(entries in prop::collection::vec(-1.0f64..1.0, 16)) {
        let kernel = Kernel::from_matrix(4, entries.clone()).unwrap();
        let want = entries.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((kernel.frobenius_norm() - want).abs() <= 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pure_damping_energy_non_increasing(seed in any::<u64>(), p in 0.5f64..3.0) {
        let basis = SpectralBasis::with_default_grid(8).unwrap();
        let params = WaveParams::builder(basis).damping(1.0).exponent(p).dt(0.01).build().unwrap();
        let initial = ensemble(8, 1, seed).members()[0].clone();
        let traj = simulate(&initial, &params, 5.0, 0.01).unwrap();
        let e0 = traj.energy_full[0];
        for w in traj.energy_full.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-10 * e0);
        }
    }

    #[test]
    fn free_modes_oscillate_harmonically(j in 1usize..=6, amplitude in 0.1f64..2.0, t in 0.5f64..5.0) {
        let basis = SpectralBasis::with_default_grid(6).unwrap();
        let params = WaveParams::builder(basis).damping(0.0).dt(0.001).build().unwrap();
        let initial = PhaseState::new(ModalField::single_mode(6, j, amplitude), ModalField::zeros(6)).unwrap();
        let t = (t * 1000.0).round() / 1000.0;
        let traj = simulate(&initial, &params, t, t).unwrap();
        let end = traj.final_state().unwrap();
        let want = amplitude * (j as f64 * t).cos();
        prop_assert!((end.position.coeffs()[j - 1] - want).abs() <= 1e-9);
    }

    #[test]
    fn invalid_values_rejected_at_parse_time(
        case in prop::sample::select(vec![
            ("system", "modes", "0"),
            ("system", "dt", "-0.1"),
            ("system", "damping", "-2.0"),
            ("system", "exponent", "-1.0"),
            ("system", "sample_dt", "0.0015"),
            ("ensemble", "count", "0"),
            ("ensemble", "radius", "-1.0"),
            ("fit", "t_min", "-5.0"),
            ("bounds", "alpha_b0", "0.0"),
        ]),
    ) {
        let (section, key, value) = case;
        let mut text = String::from("[ensemble]\nseed = 1\n");
        if section != "ensemble" {
            text.push_str(&format!("[{section}]\n"));
        }
        if section == "bounds" {
            text.push_str("variant = \"wave\"\nt_end = 100.0\n");
        }
        text = text.replace(&format!("[{section}]\n"), &format!("[{section}]\n{key} = {value}\n"));
        match ExperimentConfig::parse(&text, Path::new(".")) {
            Err(Error::Config { key: got, .. }) => prop_assert_eq!(got, format!("{section}.{key}")),
            other => prop_assert!(false, "expected a config error, got {:?}", other.map(|_| ())),
        }
    }
}

#[test]
fn missing_field_names_key() {
    let err = ExperimentConfig::parse("[bounds]\nvariant = \"wave\"\nalpha_b0 = 1.0\n", Path::new(".")).unwrap_err();
    assert!(matches!(err, Error::Config { ref key, .. } if key == "bounds.t_end"), "{err}");
    let err = ExperimentConfig::parse("[ensemble]\ncount = 3\n", Path::new(".")).unwrap_err();
    assert!(matches!(err, Error::Config { ref key, .. } if key == "ensemble.seed"), "{err}");
}
