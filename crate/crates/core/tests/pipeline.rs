//! End-to-end checks of the two-stage pipeline through the public API.

use bdris_core::evaluation::{
    run_channel_gain, run_sum_rate, ActiveSpec, StrategySpec, METRIC_GAIN,
};
use bdris_core::{
    effective_channel, fp_beamforming, passive_design, rzf_beamforming, sample_channels,
    sum_channel_gain, sum_rate, Architecture, FpOptions, Relaxation, ScenarioConfig,
};

#[test]
fn surface_improves_on_direct_channel() {
    let cfg = ScenarioConfig {
        n: 16,
        tx_power_dbm: Some(40.0),
        ..Default::default()
    };
    let p_t = cfg.transmit_power();
    for t in 0..10 {
        let ch = sample_channels(&cfg, t).unwrap();
        let theta =
            passive_design(&ch, Architecture::FullyConnected, Relaxation::LowComplexity).unwrap();
        assert!(theta.is_feasible(1e-9));
        let f = effective_channel(&ch, theta.theta()).unwrap();
        let (fp, state) = fp_beamforming(&f, p_t, ch.noise_power, FpOptions::default()).unwrap();
        assert!(fp.is_feasible());
        assert!(!state.objective_trace.is_empty());
        let rzf = rzf_beamforming(&f, p_t, ch.noise_power).unwrap();
        let fp_rate = sum_rate(&f, &fp.w, ch.noise_power).unwrap();
        let rzf_rate = sum_rate(&f, &rzf.w, ch.noise_power).unwrap();
        assert!(fp_rate >= rzf_rate * (1.0 - 1e-12));
        let gain = sum_channel_gain(&ch, theta.theta()).unwrap();
        assert!((gain - f.norm_squared()).abs() <= 1e-9 * gain);
    }
}

#[test]
fn sweeps_are_reproducible_and_paired() {
    let cfg = ScenarioConfig {
        trials: 8,
        seed: 21,
        ..Default::default()
    };
    let noris = StrategySpec::parse_with_group("NoRIS", 2).unwrap();
    let pop = StrategySpec::projected(
        Relaxation::LowComplexity,
        Architecture::SingleConnected,
        ActiveSpec::None,
    );
    let a = run_channel_gain(&cfg, &[noris, pop], &[4, 8]).unwrap();
    let b = run_channel_gain(&cfg, &[noris, pop], &[4, 8]).unwrap();
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert_eq!((x.mean, x.std), (y.mean, y.std));
    }
    // the direct channel does not depend on N
    assert_eq!(
        a.mean(&noris, 4, METRIC_GAIN),
        a.mean(&noris, 8, METRIC_GAIN)
    );

    let rates = run_sum_rate(&cfg, &[StrategySpec::proposed_1()], &[4]).unwrap();
    assert_eq!(rates.rows.len(), 1);
    assert_eq!(rates.rows[0].trials, 8);
}

#[test]
fn strategy_spec_mismatch_is_rejected() {
    let cfg = ScenarioConfig {
        trials: 2,
        ..Default::default()
    };
    assert!(run_channel_gain(&cfg, &[StrategySpec::proposed_1()], &[4]).is_err());
    assert!(run_sum_rate(&cfg, &[StrategySpec::proposed_1()], &[5]).is_err());
}
