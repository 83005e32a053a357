mod common;

use vmot::lp::{build, DeltaPolicy, Mode};
use vmot::payoff::Direction;
use vmot::pdhg::{solve, PdhgSolver, SolverConfig};
use vmot::LinearProgram;

fn instance(seed: u64, d: usize, mode: Mode) -> LinearProgram {
    let (system, costs) = common::random_instance(seed, d);
    let cost = common::tensor(&system, costs, Direction::Min);
    build(&system, &cost, mode, &DeltaPolicy::default()).unwrap()
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

#[test]
fn accepted_steps_satisfy_the_step_condition() {
    for seed in 0..5 {
        let mode = if seed % 2 == 0 { Mode::Exact } else { Mode::Relaxed };
        let lp = instance(200 + seed, 2, mode);
        let mut solver = PdhgSolver::new(&lp, SolverConfig::default()).unwrap();
        let dense = solver.problem().matrix.to_dense();
        for it in 0..10_000 {
            if it % 64 == 0 {
                // Restarts may move the iterate; never stop early.
                solver.check();
            }
            let before = solver.state().clone();
            let step = solver.step().unwrap();
            let after = solver.state();
            let dx: Vec<f64> = after.x.iter().zip(&before.x).map(|(a, b)| a - b).collect();
            let dy: Vec<f64> = after.y.iter().zip(&before.y).map(|(a, b)| a - b).collect();
            let interaction: f64 =
                dense.iter().zip(&dy).map(|(row, &yi)| yi * row.iter().zip(&dx).map(|(a, x)| a * x).sum::<f64>()).sum();
            let w = before.omega;
            let movement = w * sq(&dx) + sq(&dy) / w;
            assert!(
                step.eta * 2.0 * interaction.abs() <= movement * (1.0 + 1e-9) + 1e-300,
                "seed {seed} iteration {it}: eta {} bound {}",
                step.eta,
                step.bound
            );
            assert!(after.is_projected(&solver.problem().senses));
        }
    }
}

#[test]
fn scaling_does_not_change_the_optimum() {
    let eps = 1e-8;
    for seed in 0..20 {
        let lp = instance(300 + seed, 1 + (seed % 2) as usize, Mode::Exact);
        let plain = solve(&lp, &SolverConfig { ruiz_iters: 0, ..SolverConfig::with_tolerance(eps) }).unwrap();
        let scaled = solve(&lp, &SolverConfig { ruiz_iters: 10, ..SolverConfig::with_tolerance(eps) }).unwrap();
        assert!(plain.converged() && scaled.converged());
        let (a, b) = (plain.report.primal_objective, scaled.report.primal_objective);
        assert!((a - b).abs() <= 10.0 * eps * (1.0 + a.abs() + b.abs()), "seed {seed}: {a} vs {b}");
    }
}

#[test]
fn deterministic_runs_are_bit_identical() {
    for mode in [Mode::Exact, Mode::Relaxed] {
        let lp = instance(400, 2, mode);
        let config = SolverConfig { deterministic_reductions: true, ..SolverConfig::default() };
        let a = solve(&lp, &config).unwrap();
        let b = solve(&lp, &config).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        assert_eq!(a.restarts, b.restarts);
        assert_eq!(a.report.primal_objective.to_bits(), b.report.primal_objective.to_bits());
        assert_eq!(a.report.iterations, b.report.iterations);
    }
}

#[test]
fn restart_errors_never_increase() {
    for seed in 0..5 {
        let lp = instance(500 + seed, 2, Mode::Exact);
        let sol = solve(&lp, &SolverConfig::with_tolerance(1e-10)).unwrap();
        for w in sol.restarts.windows(2) {
            assert!(w[1].kkt_error <= w[0].kkt_error, "seed {seed}");
        }
    }
}

#[test]
fn pass_budget_is_respected() {
    let lp = instance(600, 2, Mode::Exact);
    let sol = solve(&lp, &SolverConfig { max_kkt_passes: 10, ..SolverConfig::with_tolerance(1e-14) }).unwrap();
    assert!(!sol.converged());
    // A step in progress finishes its retries before the budget is checked.
    assert!(sol.kkt_passes >= 10 && sol.kkt_passes <= 20);
}

#[test]
fn single_precision_solves() {
    let (system, costs) = common::random_instance(700, 1);
    let system32 = vmot::marginals::MarginalSystem::<f32>::new(
        system.times().iter().map(|&t| t as f32).collect(),
        system
            .grids()
            .iter()
            .map(|row| {
                row.iter()
                    .map(|g| {
                        vmot::marginals::MarginalGrid::new(
                            g.support().iter().map(|&x| x as f32).collect(),
                            g.weights().iter().map(|&w| w as f32).collect(),
                        )
                        .unwrap()
                    })
                    .collect()
            })
            .collect(),
    )
    .unwrap();
    let cost = vmot::payoff::CostTensor::new(
        costs.iter().map(|&c| c as f32).collect(),
        vmot::lp::IndexMap::new(system32.dims()),
        Direction::Min,
    )
    .unwrap();
    let lp = build(&system32, &cost, Mode::Exact, &DeltaPolicy::default()).unwrap();
    let sol = solve(&lp, &SolverConfig::with_tolerance(1e-4)).unwrap();
    assert!(sol.converged());
    let lp64 = instance(700, 1, Mode::Exact);
    let exact = solve(&lp64, &SolverConfig::with_tolerance(1e-10)).unwrap();
    assert!((sol.report.primal_objective as f64 - exact.report.primal_objective).abs() < 1e-3);
}
