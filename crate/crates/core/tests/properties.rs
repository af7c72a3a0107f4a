use atomchip_sta::chip_model::{field_at, hessian, AtomSpecies, ChipConfig};
use atomchip_sta::mode_analysis::{mode_frequencies, ModeLabel};
use atomchip_sta::output::{csv_string, parse_csv};
use atomchip_sta::pade::fit_pade;
use atomchip_sta::scaling_sim::{
    expansion_temperature, expansion_temperature_from_radii, integrate_scaling, scaling_invariant, FrequencySegment,
    TrapFrequencySchedule,
};
use atomchip_sta::sta_design::{evaluate_trajectory, TrajectoryAnsatz};
use atomchip_sta::units::{GAUSS, MM, RB87_MASS, UM};
use nalgebra::Vector3;
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn width_and_radius_temperature_forms_agree(
        rates in prop::array::uniform3(1e-7f64..1e-3),
    ) {
        let t_width = expansion_temperature(RB87_MASS, rates).t3d;
        let t_radius = expansion_temperature_from_radii(RB87_MASS, rates.map(|r| r * 7f64.sqrt()));
        prop_assert!(rel(t_width, t_radius) < 1e-12);
    }

    #[test]
    fn mode_branches_are_ordered_and_continuous(eta in 1e-3f64..2.0, perp in 10.0f64..3000.0) {
        let t = mode_frequencies(eta, perp).unwrap();
        prop_assert!(t.omega(ModeLabel::Q1) >= t.omega(ModeLabel::Monopole));
        let nearby = mode_frequencies(eta * (1.0 + 1e-9), perp).unwrap();
        for m in ModeLabel::ALL {
            prop_assert!(rel(t.omega(m), nearby.omega(m)) < 1e-7, "{m} jumps near eta = {eta}");
        }
    }

    #[test]
    fn csv_values_round_trip(values in prop::collection::vec(-1e30f64..1e30, 1..20)) {
        let text = csv_string(&["v"], &values.iter().map(|v| [*v]).collect::<Vec<_>>());
        let table = parse_csv(&text).unwrap();
        for (a, b) in values.iter().zip(table.column("v").unwrap()) {
            prop_assert!(rel(*a, b) < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn permuting_axes_permutes_scaling_factors(
        w0 in prop::array::uniform3(100.0f64..2000.0),
        ratio in prop::array::uniform3(0.5f64..2.0),
        perm in Just([2usize, 0, 1]).prop_union(Just([1, 0, 2])).or(Just([0, 2, 1])),
    ) {
        let sq = |w: [f64; 3]| w.map(|v| v * v);
        let p = |a: [f64; 3]| [a[perm[0]], a[perm[1]], a[perm[2]]];
        let run = |w0: [f64; 3], w1: [f64; 3]| {
            let schedule = TrapFrequencySchedule::new(
                sq(w0),
                vec![FrequencySegment::constant("trap", 20e-3, sq(w1)), FrequencySegment::free("flight", 10e-3)],
            )
            .unwrap();
            integrate_scaling(&schedule, 1e-3).unwrap()
        };
        let w1: [f64; 3] = std::array::from_fn(|k| w0[k] * ratio[k]);
        let a = run(w0, w1);
        let b = run(p(w0), p(w1));
        for (sa, sb) in a.states.iter().zip(&b.states) {
            let pa = p(sa.lambda);
            for k in 0..3 {
                prop_assert!(rel(pa[k], sb.lambda[k]) < 1e-12);
            }
        }
    }

    #[test]
    fn constant_trap_conserves_scaling_invariant(
        w0 in prop::array::uniform3(100.0f64..1000.0),
        ratio in prop::array::uniform3(0.5f64..2.0),
    ) {
        let sq = |w: [f64; 3]| w.map(|v| v * v);
        let w1: [f64; 3] = std::array::from_fn(|k| w0[k] * ratio[k]);
        let schedule = TrapFrequencySchedule::new(sq(w0), vec![FrequencySegment::constant("trap", 50e-3, sq(w1))]).unwrap();
        let run = integrate_scaling(&schedule, 1e-3).unwrap();
        let e0 = scaling_invariant(&run.states[0], sq(w1), sq(w0));
        for s in &run.states {
            prop_assert!(rel(scaling_invariant(s, sq(w1), sq(w0)), e0) < 1e-8);
        }
    }

    #[test]
    fn chirped_trajectories_start_and_end_at_rest(
        a in -2.0f64..0.0,
        b in 0.3f64..1.5,
        tf in 0.03f64..0.2,
    ) {
        prop_assume!((1.0 + a + b).abs() > 0.2);
        let (zi, zf) = (0.45 * MM, 1.65 * MM);
        let ansatz = TrajectoryAnsatz::chirped(zi, zf, tf, a, b);
        let start = evaluate_trajectory(&ansatz, 0.0).unwrap();
        let end = evaluate_trajectory(&ansatz, tf).unwrap();
        prop_assert!(rel(start[0], zi) < 1e-12 && rel(end[0], zf) < 1e-12);
        // Derivatives scale with the fastest phase velocity of the chirp.
        let rate = 2.0 * std::f64::consts::PI / (1.0 + a + b).abs() * (1.0 + 2.0 * a.abs() + 3.0 * b.abs()) / tf;
        for n in 1..5 {
            let scale = (zf - zi) * rate.powi(n as i32);
            prop_assert!(start[n].abs() < 1e-10 * scale, "derivative {n} at start");
            prop_assert!(end[n].abs() < 1e-10 * scale, "derivative {n} at end");
        }
    }

    #[test]
    fn rational_fit_reproduces_samples_within_reported_residual(
        p in prop::array::uniform3(-2.0f64..2.0),
        q in 0.0f64..0.5,
    ) {
        let samples: Vec<(f64, f64)> = (0..30)
            .map(|k| {
                let z = 0.4 + 1.3 * k as f64 / 29.0;
                (z, (p[0] + p[1] * z + p[2] * z * z) / (1.0 + q * z))
            })
            .collect();
        let fit = fit_pade(&samples, 2, 1).unwrap();
        let ymax = samples.iter().map(|(_, y)| y.abs()).fold(0.0, f64::max);
        let relative = samples.iter().all(|(_, y)| *y != 0.0);
        for (z, y) in &samples {
            let scale = if relative { y.abs() } else { ymax };
            prop_assert!((fit.eval(*z) - y).abs() / scale <= fit.max_residual * (1.0 + 1e-9));
        }
        prop_assert!(fit.max_residual < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn wire_fields_superpose(x in -5.0f64..5.0, y in -20.0f64..20.0, z in 0.05f64..3.0) {
        let chip = ChipConfig::z_wire(5.0, 0.0);
        let point = [x * MM, y * MM, z * MM];
        let total = field_at(&chip, point).unwrap();
        let v = Vector3::from(point);
        let sum = chip
            .segments
            .iter()
            .map(|s| s.field_at(&v).unwrap())
            .fold(Vector3::zeros(), |acc, b| acc + b);
        let scale = sum.norm();
        for k in 0..3 {
            prop_assert!((total[k] - sum[k]).abs() <= 1e-14 * scale);
        }
    }

    #[test]
    fn potential_hessian_is_symmetric(
        bias in 4.0f64..25.0,
        offset in prop::array::uniform3(-20.0f64..20.0),
    ) {
        let chip = ChipConfig::z_wire(5.0, bias * GAUSS);
        let species = AtomSpecies::rb87();
        let p = [offset[0] * UM, offset[1] * UM, 0.5 * MM + offset[2] * UM];
        let h = hessian(&chip, &species, p, 1e-7).unwrap();
        let norm = h.norm();
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((h[(i, j)] - h[(j, i)]).abs() < 1e-8 * norm);
            }
        }
    }
}
