use std::f64::consts::LN_2;

use proptest::prelude::*;

use infoloop_core::montecarlo::{
    empirical_directed_info, simulate_loop, SimulationConfig, WelchParams,
};
use infoloop_core::suite::random_loop;
use infoloop_core::{LoopModel, NoiseSpec, TransferFunction};

fn deadbeat_loop() -> LoopModel {
    LoopModel::new(
        TransferFunction::from_coeffs(&[0.0, 1.0], &[1.0, -2.0]).unwrap(),
        TransferFunction::gain(-2.0),
        TransferFunction::unity(),
        NoiseSpec::white(1.0).unwrap(),
        NoiseSpec::white(1.0).unwrap(),
    )
    .unwrap()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    0.5 * (xs[(n - 1) / 2] + xs[n / 2])
}

fn gap(n: usize, seed: u64) -> f64 {
    let cfg = SimulationConfig::new(deadbeat_loop(), n, 4096, seed).unwrap();
    let traj = simulate_loop(&cfg).unwrap();
    let rate = empirical_directed_info(&traj, &WelchParams::default())
        .unwrap()
        .rate;
    (rate - 1.5 * LN_2).abs()
}

#[test]
fn longer_runs_do_not_drift_away() {
    let short = median((1..=10).map(|s| gap(1 << 17, s)).collect());
    let long = median((1..=10).map(|s| gap(1 << 18, s)).collect());
    assert!(
        long <= 1.5 * short,
        "median gap 2^18 = {long}, 2^17 = {short}"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn channel_equation_is_exact(seed in 0u64..1000, sim_seed in any::<u64>()) {
        let cfg = SimulationConfig::new(random_loop(seed), 6000, 1000, sim_seed).unwrap();
        let traj = simulate_loop(&cfg).unwrap();
        prop_assert_eq!(traj.sample_count, 5000);
        for t in 0..traj.sample_count {
            prop_assert_eq!(traj.y[t], traj.z[t] + traj.w[t]);
            prop_assert!(traj.u[t].is_finite());
        }
    }

    #[test]
    fn runs_are_reproducible(seed in 0u64..1000, sim_seed in any::<u64>()) {
        let cfg = SimulationConfig::new(random_loop(seed), 3000, 100, sim_seed).unwrap();
        prop_assert_eq!(simulate_loop(&cfg).unwrap(), simulate_loop(&cfg).unwrap());
    }
}
