//! End-to-end pipeline behavior: intensity optimization, sweeps, and the
//! two-mode demonstration scenario.

use mmdecoy::bounds::ChannelObservables;
use mmdecoy::keyrate::{
    evaluate_rate, optimize_signal_mu, scenario_bounds, sweep_attenuation, MuGrid, RateModel,
    Scenario, SweepModels,
};
use mmdecoy::presets;
use mmdecoy::source::ModeWeights;
use mmdecoy::Error;

fn preset_scenario(name: &str) -> Scenario {
    Scenario {
        weights: presets::mode_weights(name).expect("known preset"),
        detector: presets::gobby2004(),
        protocol: Default::default(),
        numerics: Default::default(),
    }
}

#[test]
fn extreme_attenuation_gives_zero_rate() {
    let sc = preset_scenario("sigma-1nm");
    for model in [RateModel::MultiMode, RateModel::SingleModeBaseline] {
        let opt = optimize_signal_mu(&sc, 60.0, model).unwrap();
        assert_eq!(opt.rate, 0.0);
        assert!(opt.all_zero);
        assert_eq!(opt.mu_s, 0.02);
    }
}

#[test]
fn lossless_channel_prefers_signal_above_decoy() {
    let sc = preset_scenario("sigma-1nm");
    let opt = optimize_signal_mu(&sc, 0.0, RateModel::MultiMode).unwrap();
    assert!(opt.rate > 0.0);
    assert!(opt.mu_s > sc.protocol.mu_d);
}

#[test]
fn wider_pump_supports_higher_signal_intensity() {
    let narrow =
        optimize_signal_mu(&preset_scenario("sigma-1nm"), 15.0, RateModel::MultiMode).unwrap();
    let wide =
        optimize_signal_mu(&preset_scenario("sigma-8nm"), 15.0, RateModel::MultiMode).unwrap();
    assert!(wide.mu_s >= narrow.mu_s);
    assert!(wide.rate >= narrow.rate);
}

#[test]
fn sweep_rates_non_increasing_in_attenuation() {
    let sc = preset_scenario("sigma-2nm");
    let alphas: Vec<f64> = (0..=6).map(|i| 5.0 * i as f64).collect();
    let points = sweep_attenuation(&sc, &alphas, SweepModels::Both).unwrap();
    for pair in points.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        assert!(b.mm.as_ref().unwrap().rate <= a.mm.as_ref().unwrap().rate + 1e-12);
        assert!(b.sm.as_ref().unwrap().rate <= a.sm.as_ref().unwrap().rate + 1e-12);
    }
}

#[test]
fn sweep_rejects_unsorted_grid() {
    let sc = preset_scenario("sigma-1nm");
    assert!(matches!(
        sweep_attenuation(&sc, &[10.0, 5.0], SweepModels::Both),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn sweep_empty_grid_is_empty() {
    let sc = preset_scenario("sigma-1nm");
    assert!(sweep_attenuation(&sc, &[], SweepModels::Both)
        .unwrap()
        .is_empty());
}

#[test]
fn vacuum_only_signal_grid_gives_zero_rates() {
    let mut sc = preset_scenario("sigma-1nm");
    sc.protocol.mu_s_grid = MuGrid {
        min: 0.0,
        max: 0.0,
        step: 1.0,
    };
    let points = sweep_attenuation(&sc, &[5.0, 10.0], SweepModels::Both).unwrap();
    for p in &points {
        let mm = p.mm.as_ref().unwrap();
        let sm = p.sm.as_ref().unwrap();
        assert_eq!(mm.rate, 0.0);
        assert_eq!(sm.rate, 0.0);
        assert!(mm.all_zero && sm.all_zero);
    }
}

#[test]
fn model_selection_skips_the_other_model() {
    let sc = preset_scenario("sigma-1nm");
    let points = sweep_attenuation(&sc, &[10.0], SweepModels::MultiModeOnly).unwrap();
    assert!(points[0].mm.is_some());
    assert!(points[0].sm.is_none());
}

#[test]
fn two_mode_demo_runs_the_bound_report() {
    let mut sc = preset_scenario("two-mode-demo");
    sc.protocol.mu_d = presets::TWO_MODE_DEMO_MU_DECOY;
    // The demo intensities are chosen to hit the worked occupations
    // (0.7, 0.3)/(0.6, 0.4), far above anything useful for key generation;
    // the report must still complete with consistent in-range bounds.
    let report = scenario_bounds(&sc, 10.0, presets::TWO_MODE_DEMO_MU_SIGNAL, None).unwrap();
    assert!(report.bound.converged);
    assert!((0.0..=1.0).contains(&report.bound.y1_lb_s));
    assert!(report.bound.e1_ub_s >= report.bound.e1_ub_d - 1e-12);
    assert_eq!(report.bound.e1_vacuous, report.bound.y1_lb_d <= 0.0);
}

#[test]
fn single_mode_scenario_yields_coincide() {
    let sc = Scenario {
        weights: ModeWeights::new(vec![1.0]).unwrap(),
        detector: presets::gobby2004(),
        protocol: Default::default(),
        numerics: Default::default(),
    };
    let report = scenario_bounds(&sc, 12.0, 0.5, None).unwrap();
    assert!((report.bound.y1_lb_s - report.bound.y1_lb_d).abs() <= 1e-12);
}

#[test]
fn hand_entered_inconsistent_observables_abort() {
    let sc = preset_scenario("sigma-4nm");
    let bogus = ChannelObservables {
        q_s: 1.0,
        q_d: 1.0,
        e_s: 0.0,
        e_d: 0.0,
        y0: 0.0,
    };
    assert!(matches!(
        scenario_bounds(&sc, 10.0, 0.6, Some(bogus)),
        Err(Error::InconsistentObservables(_))
    ));
}

#[test]
fn honest_pipeline_rate_positive_and_flagged_diagnostics() {
    let sc = preset_scenario("sigma-4nm");
    let eval = evaluate_rate(&sc, 10.0, 0.3, RateModel::MultiMode).unwrap();
    assert!(eval.rate > 0.0);
    assert!(eval.yrel_ok);
    assert!(eval.bound.is_some());
    let sm = evaluate_rate(&sc, 10.0, 0.3, RateModel::SingleModeBaseline).unwrap();
    assert!(sm.bound.is_none());
    assert!(eval.rate <= sm.rate);
}
