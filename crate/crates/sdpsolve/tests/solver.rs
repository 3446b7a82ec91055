use sdpsolve::{residuals, solve, EqConstraint, PsdBlock, SdpProblem, Sense, SolverConfig, Status, C64};

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn tight() -> SolverConfig {
    SolverConfig { tol_abs: 1e-10, tol_rel: 1e-9, ..Default::default() }
}

#[test]
fn two_by_two_boundary() {
    let mut p = SdpProblem::new("maximize q s.t. [[1,q],[q,1]] psd", Sense::Maximize);
    let q = p.add_vars("q", 1);
    p.objective[q] = 1.0;
    let mut b = PsdBlock::new("B", 2);
    b.add_constant(0, 0, re(1.0));
    b.add_constant(1, 1, re(1.0));
    b.add_term(q, 0, 1, re(1.0));
    p.blocks.push(b);
    let sol = solve(&p, &tight()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.objective - 1.0).abs() < 1e-7, "{}", sol.objective);
}

/// minimize Tr X s.t. X ⪰ 0, X11 = 1, with X a 3x3 Hermitian variable.
fn trace_problem() -> SdpProblem {
    let n = 3;
    let mut p = SdpProblem::new("min trace", Sense::Minimize);
    let mut b = PsdBlock::new("X", n);
    let mut first = None;
    for i in 0..n {
        for j in i..n {
            if i == j {
                let v = p.add_vars(format!("x{i}{i}"), 1);
                p.objective[v] = 1.0;
                b.add_term(v, i, i, re(1.0));
                if i == 0 {
                    first = Some(v);
                }
            } else {
                let v = p.add_vars(format!("x{i}{j}"), 2);
                b.add_term(v, i, j, re(1.0));
                b.add_term(v + 1, i, j, C64::new(0.0, 1.0));
            }
        }
    }
    p.blocks.push(b);
    p.eqs.push(EqConstraint { label: "x11".into(), terms: vec![(first.unwrap(), 1.0)], rhs: 1.0 });
    p
}

#[test]
fn min_trace_with_fixed_corner() {
    let p = trace_problem();
    let sol = solve(&p, &tight()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.objective - 1.0).abs() < 1e-7);
}

#[test]
fn reported_residuals_match_recomputation() {
    let p = trace_problem();
    let sol = solve(&p, &SolverConfig::default()).unwrap();
    let r = residuals(&p, &sol.x, &sol.slacks, &sol.duals, &sol.eq_duals);
    assert!((r.primal - sol.residuals.primal).abs() <= 1e-9);
    assert!((r.dual - sol.residuals.dual).abs() <= 1e-9);
    assert!((r.gap - sol.residuals.gap).abs() <= 1e-9);
    assert!(sol.residuals.converged(1e-7, 1e-6));
}

#[test]
fn solves_are_deterministic() {
    let p = sdpref::random_instance(77);
    let a = solve(&p, &SolverConfig::default()).unwrap();
    let b = solve(&p, &SolverConfig::default()).unwrap();
    assert_eq!(a.x, b.x);
    assert_eq!(a.iterations, b.iterations);
}

#[test]
fn matches_reference_on_random_instances() {
    for seed in 0..20 {
        let p = sdpref::random_instance(seed);
        let reference = sdpref::barrier_solve(&p);
        let sol = solve(&p, &tight()).unwrap();
        assert_eq!(sol.status, Status::Optimal, "seed {seed}");
        let err = (sol.objective - reference.objective).abs() / (1.0 + reference.objective.abs());
        assert!(err <= 1e-5, "seed {seed}: admm {} vs ref {}", sol.objective, reference.objective);
    }
}

#[test]
fn checkpoint_best_residual_is_monotone() {
    let p = sdpref::random_instance(5);
    let cfg = SolverConfig { log: true, ..tight() };
    let sol = solve(&p, &cfg).unwrap();
    let mut best = f64::INFINITY;
    let mut prev_best = f64::INFINITY;
    for row in sol.log.iter().filter(|r| r.iter % 100 == 0) {
        best = best.min(row.primal_res.max(row.dual_res).max(row.gap));
        assert!(best <= prev_best);
        prev_best = best;
    }
}

#[test]
fn infeasible_problem_is_not_reported_optimal() {
    // x ⪰ 0 (1x1) and x = -1
    let mut p = SdpProblem::new("infeasible", Sense::Minimize);
    let x = p.add_vars("x", 1);
    let mut b = PsdBlock::new("B", 1);
    b.add_term(x, 0, 0, re(1.0));
    p.blocks.push(b);
    p.eqs.push(EqConstraint { label: "fix".into(), terms: vec![(x, 1.0)], rhs: -1.0 });
    let sol = solve(&p, &SolverConfig { max_iter: 2000, ..Default::default() }).unwrap();
    assert_ne!(sol.status, Status::Optimal);
}

#[test]
fn problem_dump_round_trips() {
    let p = sdpref::random_instance(3);
    let s = serde_json::to_string(&p).unwrap();
    let back: SdpProblem = serde_json::from_str(&s).unwrap();
    assert_eq!(p, back);
}

#[test]
fn validation_rejects_bad_indices() {
    let mut p = SdpProblem::new("bad", Sense::Minimize);
    p.add_vars("x", 1);
    let mut b = PsdBlock::new("B", 2);
    b.add_term(3, 0, 0, re(1.0));
    p.blocks.push(b);
    assert!(solve(&p, &SolverConfig::default()).is_err());
    let mut p2 = SdpProblem::new("bad2", Sense::Minimize);
    p2.add_vars("x", 1);
    let mut b2 = PsdBlock::new("B", 2);
    b2.add_term(0, 0, 0, C64::new(1.0, 1.0));
    p2.blocks.push(b2);
    assert!(p2.validate().is_err());
}
