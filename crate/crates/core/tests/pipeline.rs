use pfgamma_core::solver::{alternate_minimize, eps_sweep, initialize};
use pfgamma_core::*;

fn short_bar(delta: f64) -> Scenario {
    let mut s = Scenario::bar(delta);
    s.schedule.eps = Some(vec![0.25, 0.125]);
    s.initializer.restart = Initializer::Notched {
        value: 0.0,
        half_width_eps: 1.5,
    };
    s.output.no_timing = true;
    s
}

#[test]
fn outer_history_decreases_until_it_stops() {
    let s = short_bar(6.0);
    let problem = s.problem().unwrap();
    let params = problem.params(0.125).unwrap();
    let grid = problem.grid(&[64]).unwrap();
    let func = Functional::new(&grid, &params, &problem.op, &problem.density).unwrap();
    let start = initialize(
        &func,
        &problem.field(&grid).unwrap(),
        Initializer::notched(),
        &s.solver,
    )
    .unwrap();
    let (field, hist) = alternate_minimize(&func, &start, &s.solver).unwrap();
    assert!(hist.converged);
    let totals: Vec<f64> = std::iter::once(hist.initial.total)
        .chain(hist.records.iter().map(|r| r.energy.total))
        .collect();
    for w in totals.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} -> {}", w[0], w[1]);
    }
    assert!(field.is_feasible());
    assert!(
        field.v.iter().any(|&v| v < 0.1),
        "the bar should crack at delta = 6"
    );
}

#[test]
fn sweeps_are_deterministic_and_bounded() {
    let s = short_bar(3.0);
    let run = || {
        eps_sweep(
            &s.problem().unwrap(),
            &s.eps_list().unwrap(),
            &s.sweep_options(),
            &s.solver,
        )
        .unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.field.v, b.field.v);
    for row in &a.rows {
        assert!(row.energy.total <= row.warm_energy + 1e-12);
        assert!(row.diagnostics.psi_mass <= row.eps * row.energy.total + 1e-12);
        assert_eq!(row.runtime_s, 0.0);
    }
}

#[test]
fn elastic_bar_stays_intact() {
    let s = short_bar(1.0);
    let res = eps_sweep(
        &s.problem().unwrap(),
        &s.eps_list().unwrap(),
        &s.sweep_options(),
        &s.solver,
    )
    .unwrap();
    let last = res.rows.last().unwrap();
    assert!(res.field.v.iter().all(|&v| v > 0.5));
    assert!((last.energy.total - 0.5).abs() < 0.1);
}

#[test]
fn nonquadratic_exponents_use_the_iterative_solvers() {
    let mut s = short_bar(2.0);
    s.density.p = 3.0;
    s.q = 3.0;
    s.schedule.eps = Some(vec![0.25]);
    let res = eps_sweep(
        &s.problem().unwrap(),
        &s.eps_list().unwrap(),
        &s.sweep_options(),
        &s.solver,
    )
    .unwrap();
    let row = &res.rows[0];
    assert!(row.energy.is_finite() && row.energy.total > 0.0);
    assert!(res.field.is_feasible());
}
