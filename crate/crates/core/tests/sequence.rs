use atomchip_sta::config::preset;
use atomchip_sta::scaling_sim::{integrate_scaling, FrequencySegment, TrapFrequencySchedule};
use atomchip_sta::sequence::{
    optimize_hold_and_lens, release_timing_hint, run_sequence, LensPulse, SequencePlan, TransportStage, PRESET_HOLD,
};
use atomchip_sta::sta_design::{design_ramp, steps_for, DEFAULT_DT};
use atomchip_sta::units::{hz_to_rad, MS};

fn stage() -> (TransportStage, SequencePlan) {
    let cfg = preset("quantus_dkc").unwrap();
    let sc = cfg.scenario().unwrap();
    let ansatz = cfg.chirped(&sc).unwrap();
    let schedule = design_ramp(&ansatz, sc.landscape(), steps_for(ansatz.t_f, DEFAULT_DT)).unwrap();
    (TransportStage::new(&schedule, sc.landscape(), &sc.species).unwrap(), cfg.plan)
}

fn sample_at(times: &[f64], t: f64) -> usize {
    times.iter().position(|&s| s >= t - 1e-9).unwrap()
}

#[test]
fn empty_plan_ends_where_transport_ends() {
    let (stage, plan) = stage();
    let mut empty = plan;
    empty.hold = 0.0;
    empty.free1 = 0.0;
    empty.lens.duration = 0.0;
    empty.free2 = 0.0;
    let r = run_sequence(&stage, &empty).unwrap();
    let end = stage.end_state();
    for a in 0..3 {
        assert!((r.final_state.lambda[a] - end.lambda[a]).abs() < 1e-12);
        assert!((r.final_state.lambda_dot[a] - end.lambda_dot[a]).abs() < 1e-12);
    }
}

#[test]
fn lens_redirects_expansion_without_resizing() {
    let (stage, plan) = stage();
    let tau = plan.lens.duration;
    let without = SequencePlan {
        lens: LensPulse { duration: 0.0, ..plan.lens },
        free2: plan.free2 + tau,
        ..plan
    };
    let a = run_sequence(&stage, &plan).unwrap();
    let b = run_sequence(&stage, &without).unwrap();
    let lens_end = a.timeline.iter().find(|s| s.label == "lens").unwrap().end;
    let (ia, ib) = (sample_at(&a.times, lens_end), sample_at(&b.times, lens_end));
    let w = plan.lens.frequencies_hz.map(hz_to_rad);
    for axis in 0..3 {
        // A thin lens changes sizes only at second order in the pulse length.
        let bound = (w[axis] * tau).powi(2);
        let change = a.radii[ia][axis] / b.radii[ib][axis] - 1.0;
        assert!(change.abs() < bound, "axis {axis}: {change:.3e} vs {bound:.3e}");
    }
    for axis in 1..3 {
        assert!(b.rates[axis].abs() > 5.0 * a.rates[axis].abs(), "axis {axis}");
    }
}

#[test]
fn expansion_rates_settle_in_free_flight() {
    let schedule = TrapFrequencySchedule::new(
        [20.0, 100.0, 100.0].map(|nu| hz_to_rad(nu).powi(2)),
        vec![
            FrequencySegment::harmonic_hz("trap", 10.0 * MS, [20.0, 100.0, 100.0]),
            FrequencySegment::free("flight", 200.0 * MS),
        ],
    )
    .unwrap();
    let run = integrate_scaling(&schedule, 1.0 * MS).unwrap();
    let end = run.last();
    let earlier = run.states.iter().find(|s| s.t >= end.t - 40.0 * MS).unwrap();
    for a in 0..3 {
        let change = (end.lambda_dot[a] - earlier.lambda_dot[a]).abs() / end.lambda_dot[a].abs();
        assert!(change < 1e-3, "axis {a}: {change:.3e}");
    }
}

#[test]
fn release_hint_brackets_the_preset_hold() {
    let (stage, plan) = stage();
    let long_hold = SequencePlan {
        hold: 80.0 * MS,
        free1: 0.0,
        free2: 0.0,
        lens: LensPulse { duration: 0.0, ..plan.lens },
        ..plan
    };
    let r = run_sequence(&stage, &long_hold).unwrap();
    let span = r.timeline.iter().find(|s| s.label == "hold").unwrap();
    let (times, sizes): (Vec<f64>, Vec<f64>) = r
        .times
        .iter()
        .zip(&r.radii)
        .filter(|(t, _)| **t >= span.start - 1e-12)
        .map(|(t, rad)| (t - span.start, rad[0]))
        .unzip();
    let hints = release_timing_hint(&times, &sizes, 0.0).unwrap();
    let nearest = hints
        .iter()
        .copied()
        .min_by(|a, b| (a - PRESET_HOLD).abs().total_cmp(&(b - PRESET_HOLD).abs()))
        .unwrap();
    assert!((nearest - PRESET_HOLD).abs() < 3.0 * MS, "hints {hints:?}");
}

#[test]
fn hold_scan_has_an_interior_optimum() {
    let (stage, plan) = stage();
    let holds: Vec<f64> = (0..=50).map(|k| (20.0 + 0.5 * k as f64) * MS).collect();
    let scan = optimize_hold_and_lens(&stage, &plan, &holds, &[plan.lens.duration]).unwrap();
    assert!(scan.best.hold > holds[0] && scan.best.hold < holds[holds.len() - 1]);
    let repeat = optimize_hold_and_lens(&stage, &plan, &holds, &[plan.lens.duration]).unwrap();
    assert_eq!(scan, repeat);
}

#[test]
fn resting_weak_axis_at_release_is_far_hotter() {
    let (stage, plan) = stage();
    let preset = run_sequence(&stage, &plan).unwrap();
    let adiabatic = run_sequence(&stage, &SequencePlan { adiabatic_weak_axis: true, ..plan }).unwrap();
    assert!(adiabatic.temperature.t3d > 10.0 * preset.temperature.t3d);
    let t = preset.temperature.t1d;
    assert!(t[0] > t[1] && t[0] > t[2]);
}
