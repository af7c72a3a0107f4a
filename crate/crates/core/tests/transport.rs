use atomchip_sta::classical_sim::{integrate, perturbation_response, ForceModel, Perturbation};
use atomchip_sta::scenario::Scenario;
use atomchip_sta::sta_design::{design_ramp, steps_for, RampSchedule, TrajectoryAnsatz, DEFAULT_DT};
use atomchip_sta::units::{MILLIGAUSS, MS, UM};

const HOLD: f64 = 150.0 * MS;

fn scenario() -> Scenario {
    Scenario::quantus().unwrap()
}

fn chirped(sc: &Scenario, tf: f64) -> RampSchedule {
    design_ramp(&sc.chirped(tf).unwrap(), sc.landscape(), steps_for(tf, DEFAULT_DT)).unwrap()
}

#[test]
fn newton_integration_retraces_designed_trajectory() {
    let sc = scenario();
    for tf in [60.0 * MS, 75.0 * MS, 120.0 * MS] {
        let s = chirped(&sc, tf);
        let run = integrate(&s, ForceModel::Harmonic, 0.0, sc.landscape()).unwrap();
        let end = run.final_state();
        assert!((end.z - s.z_f()).abs() < 10e-9, "tf {tf}: {:.3e} m", end.z - s.z_f());
        assert!(end.v.abs() < 1e-6, "tf {tf}: v = {:.3e} m/s", end.v);
    }
}

#[test]
fn harmonic_transport_leaves_no_residual_oscillation() {
    let sc = scenario();
    let zi = sc.z_i().unwrap();
    let zf = sc.z_f().unwrap();
    for ansatz in [
        sc.chirped(75.0 * MS).unwrap(),
        TrajectoryAnsatz::polynomial9(zi, zf, 75.0 * MS),
    ] {
        let s = design_ramp(&ansatz, sc.landscape(), steps_for(ansatz.t_f, DEFAULT_DT)).unwrap();
        let run = integrate(&s, ForceModel::Harmonic, HOLD, sc.landscape()).unwrap();
        assert!(run.metrics.residual_amplitude < 1e-9, "{:?}: {:.3e}", ansatz.kind, run.metrics.residual_amplitude);
    }
}

#[test]
fn trap_position_moves_continuously() {
    let sc = scenario();
    let s = chirped(&sc, 75.0 * MS);
    let max_speed = s.zt_dot.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for w in s.z_t.windows(2) {
        assert!((w[1] - w[0]).abs() < 5.0 * max_speed * s.dt);
    }
}

#[test]
fn anharmonic_residual_is_sub_micron_and_chirp_helps() {
    let sc = scenario();
    let l = sc.landscape();
    let tf = 75.0 * MS;
    let residual = |a: &TrajectoryAnsatz| {
        let s = design_ramp(a, l, steps_for(tf, DEFAULT_DT)).unwrap();
        integrate(&s, ForceModel::Anharmonic, HOLD, l).unwrap().metrics.residual_amplitude
    };
    let (zi, zf) = (sc.z_i().unwrap(), sc.z_f().unwrap());
    let with_chirp = residual(&sc.chirped(tf).unwrap());
    let without = residual(&TrajectoryAnsatz::chirped(zi, zf, tf, 0.0, 0.0));
    let linear = residual(&TrajectoryAnsatz::linear(zi, zf, tf));
    assert!(with_chirp < 1.0 * UM, "{with_chirp:.3e}");
    assert!(without > 4.0 * with_chirp);
    assert!(linear > 5.0 * without);
}

#[test]
fn small_bias_errors_respond_linearly() {
    let sc = scenario();
    let s = chirped(&sc, 75.0 * MS);
    for model in [ForceModel::Harmonic, ForceModel::Anharmonic] {
        for db in [0.25, 0.5, 1.0] {
            let r = |d: f64| {
                perturbation_response(&s, sc.landscape(), model, Perturbation::Bias(d * MILLIGAUSS), HOLD)
                    .unwrap()
                    .residual
            };
            let ratio = r(db) / r(0.5 * db);
            assert!((1.8..=2.2).contains(&ratio), "{model:?} {db} mG: ratio {ratio}");
        }
    }
}

#[test]
fn perturbations_outside_first_order_are_rejected() {
    let sc = scenario();
    let s = chirped(&sc, 75.0 * MS);
    let l = sc.landscape();
    assert!(perturbation_response(&s, l, ForceModel::Harmonic, Perturbation::Bias(60.0 * MILLIGAUSS), HOLD).is_err());
    assert!(perturbation_response(&s, l, ForceModel::Harmonic, Perturbation::Timing(6.0 * MS), HOLD).is_err());
}

#[test]
fn bias_maps_one_to_one_onto_distance() {
    let sc = scenario();
    assert!(sc.landscape().bias.is_strictly_monotone());
    let s = chirped(&sc, 75.0 * MS);
    for (z, b) in s.z_t.iter().zip(&s.bias).step_by(250) {
        let back = sc.landscape().z_of_bias(*b).unwrap();
        assert!((back - z).abs() < 1e-9 * z.abs().max(1e-3), "z {z} vs {back}");
    }
}
