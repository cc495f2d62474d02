mod common;

use std::f64::consts::PI;

use approx::assert_relative_eq;
use common::*;
use gridwell::prelude::*;
use gridwell::solver::algebraic_residual;
use num_complex::Complex64;

fn solved() -> (GridModel, Vec<LineSpec>, StateVector) {
    let (model, lines) = ieee14();
    let fp = operation_point(&model, &model.ones(), &SolverOptions::default()).unwrap();
    (model, lines, fp)
}

#[test]
fn layout_and_masses() {
    let (model, _) = ieee14();
    assert_eq!(model.system_size(), 32);
    let ones = model.mass().iter().filter(|&&m| m == 1.0).count();
    let zeros = model.mass().iter().filter(|&&m| m == 0.0).count();
    assert_eq!((ones, zeros), (12, 20));
    for bus in SWING_BUSES {
        let o = model.offsets()[bus - 1];
        assert_eq!(&model.mass()[o..o + 3], &[1.0, 1.0, 1.0]);
    }
    let r = model.full_residual(&model.ones()).unwrap();
    assert!(r.iter().all(|v| v.is_finite()));
    assert!(max_abs(r) > 0.0);
}

#[test]
fn operation_point_matches_power_oracle() {
    let (model, _, fp) = solved();
    assert!(max_abs(model.full_residual(&fp).unwrap()) <= 1e-8);
    assert!((model.voltage(&fp, 2).unwrap() - Complex64::new(1.0, 0.0)).norm() <= 1e-12);
    let u = model.voltages(fp.as_slice());
    let i = raw_currents(&TABLE_II, &u);
    for row in TABLE_I.iter() {
        let s = u[row.0 - 1] * i[row.0 - 1].conj();
        match row.1 {
            "Load" => assert!((s - Complex64::new(row.3.unwrap(), row.4.unwrap())).norm() <= 1e-8),
            "Generator" | "SynComp" => {
                assert!((s.re - row.3.unwrap()).abs() <= 1e-8);
                assert!(model.internal(&fp, row.0, 1).unwrap().abs() <= 1e-10);
                assert_relative_eq!(u[row.0 - 1].norm(), 1.0, epsilon = 1e-10);
            }
            _ => {}
        }
    }
}

#[test]
fn derived_series_at_operation_point() {
    let (model, lines, fp) = solved();
    let traj = Trajectory {
        times: vec![0.0],
        states: vec![fp.clone()],
        model,
    };
    let d = derived_series(&traj);
    for row in TABLE_I.iter() {
        let b = &d.buses[row.0 - 1];
        if let Some(p) = row.3 {
            assert!((b.p[0] - p).abs() <= 1e-6, "bus {} p={}", row.0, b.p[0]);
        }
        if row.1 == "Load" {
            assert!((b.q[0] - row.4.unwrap()).abs() <= 1e-6);
        }
        assert_eq!(b.omega.is_some(), SWING_BUSES.contains(&row.0));
        if let Some(w) = &b.omega {
            assert!(w[0].abs() <= 1e-10);
        }
    }
    assert!((d.buses[1].v[0] - 1.0).abs() <= 1e-12);
    assert!(d.buses[1].phi[0].abs() <= 1e-12);
    // Net injected power is dissipated in line resistance.
    let total: f64 = d.buses.iter().map(|b| b.p[0]).sum();
    let losses = raw_losses(&TABLE_II, &traj.model.voltages(fp.as_slice()));
    assert!(losses > 0.0);
    assert_relative_eq!(total, losses, epsilon = 1e-9);
    assert_eq!(lines.len(), 20);
}

#[test]
fn perturbation_setter_matches_listing() {
    let (model, _, fp) = solved();
    let mut x0 = fp.clone();
    let w = model.internal(&x0, 1, 1).unwrap();
    model.set_internal(&mut x0, 1, 1, w + 0.2).unwrap();
    assert_relative_eq!(model.internal(&x0, 1, 1).unwrap(), 0.2, epsilon = 1e-10);
    assert!(matches!(model.internal(&fp, 4, 1), Err(Error::Selector(_))));
}

#[test]
fn frequency_perturbation_decays() {
    let (model, _, fp) = solved();
    let opts = SolverOptions::default();
    let traj = run_frequency_perturbation(&model, &fp, 1, 0.2, (0.0, 0.5), &opts).unwrap();
    assert!(traj.last().max_abs_diff(&fp) < traj.states[0].max_abs_diff(&fp));
    for s in &traj.states[1..] {
        assert!(algebraic_residual(&model, s).unwrap() <= opts.newton_tol);
    }
    assert!(matches!(
        run_frequency_perturbation(&model, &fp, 4, 0.2, (0.0, 0.5), &opts),
        Err(Error::Selector(_))
    ));
}

#[test]
fn zero_perturbation_is_equilibrium_hold() {
    let (model, _, fp) = solved();
    let opts = SolverOptions::default();
    let held = integrate(&model, &fp, (0.0, 0.1), &opts).unwrap();
    let perturbed = run_frequency_perturbation(&model, &fp, 1, 0.0, (0.0, 0.1), &opts).unwrap();
    assert_eq!(held.states, perturbed.states);
    assert_eq!(held.times, perturbed.times);
}

#[test]
fn line_trip_initial_state_and_residual() {
    let (model, lines, fp) = solved();
    let opts = SolverOptions::default();
    let traj = run_line_tripping(&model, &lines, &fp, 2, (0.0, 0.05), &opts).unwrap();
    assert_eq!(traj.states[0], fp);
    assert_eq!(traj.times[0], 0.0);
    // The post-trip model has no line 1-5.
    assert_eq!(traj.model.laplacian().get(1, 5), Complex64::new(0.0, 0.0));
    // Only blocks of the tripped line's endpoints see a non-zero residual at t0.
    let r = traj.model.full_residual(&fp).unwrap();
    for (bus, &o) in traj.model.offsets().iter().enumerate() {
        let len = 2 + traj.model.nodes()[bus].internal_count();
        let block = max_abs(r[o..o + len].iter().copied());
        if bus + 1 == 1 || bus + 1 == 5 {
            assert!(block > 1e-3, "bus {} residual {block}", bus + 1);
        } else {
            assert!(block <= 1e-9, "bus {} residual {block}", bus + 1);
        }
    }
    for s in &traj.states[1..] {
        assert!(algebraic_residual(&traj.model, s).unwrap() <= opts.newton_tol);
    }
}

#[test]
fn line_trip_errors() {
    let (model, lines, fp) = solved();
    let opts = SolverOptions::default();
    assert!(matches!(
        run_line_tripping(&model, &lines, &fp, 21, (0.0, 0.1), &opts),
        Err(Error::LineIndex { .. })
    ));
    // Line 14 (7-8) is the only connection of bus 8.
    assert!(matches!(
        run_line_tripping(&model, &lines, &fp, 14, (0.0, 0.1), &opts),
        Err(Error::Disconnected { components: 2 })
    ));
}

#[test]
fn remove_line_equals_zeroed_admittance() {
    let (_, lines) = ieee14();
    let rest = remove_line(&lines, 2).unwrap();
    assert_eq!(rest.len(), 19);
    let full = build_admittance_laplacian(&lines, 14).unwrap();
    let tripped = build_admittance_laplacian(&rest, 14).unwrap();
    let y = lines[1].admittance();
    for a in 1..=14 {
        for b in 1..=14 {
            let mut expected = full.get(a, b);
            match (a, b) {
                (1, 5) | (5, 1) => expected += y,
                (1, 1) | (5, 5) => expected -= y,
                _ => {}
            }
            assert!((tripped.get(a, b) - expected).norm() <= 1e-14, "({a},{b})");
        }
    }
    assert_eq!(tripped.get(1, 5), Complex64::new(0.0, 0.0));
}

#[test]
fn scenario_spec_dispatch() {
    let (model, lines, fp) = solved();
    let opts = SolverOptions::default();
    let spec = ScenarioSpec {
        kind: ScenarioKind::LineTripping { line: 2 },
        t_span: (0.0, 0.02),
    };
    let a = spec.run(&model, &lines, &fp, &opts).unwrap();
    let b = run_line_tripping(&model, &lines, &fp, 2, (0.0, 0.02), &opts).unwrap();
    assert_eq!(a.states, b.states);
    let d = derived_series(&a);
    assert!(d.max_frequency_deviation_hz(&a.times) > 0.0);
    assert_relative_eq!(
        d.max_frequency_deviation_hz(&a.times) * 2.0 * PI,
        d.max_abs_omega(&a.times, 0.0),
        max_relative = 1e-15
    );
}

#[test]
fn algebraic_constraints_hold_along_line_trip() {
    let (model, lines, fp) = solved();
    let traj = run_line_tripping(
        &model,
        &lines,
        &fp,
        2,
        (0.0, 1.0),
        &SolverOptions::default(),
    )
    .unwrap();
    let d = derived_series(&traj);
    let worst = TABLE_I
        .iter()
        .filter(|r| r.1 == "Load")
        .flat_map(|r| {
            let b = &d.buses[r.0 - 1];
            let (p, q) = (r.3.unwrap(), r.4.unwrap());
            b.p.iter()
                .zip(&b.q)
                .skip(1)
                .map(move |(&pp, &qq)| ((pp - p).powi(2) + (qq - q).powi(2)).sqrt())
        })
        .fold(0.0, f64::max);
    assert!(worst <= 1e-7, "{worst}");
}
