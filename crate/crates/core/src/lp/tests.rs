use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn one_var(cost: f64) -> LinearProgram {
    let mut lp = LinearProgram::new();
    lp.add_free("x", cost).unwrap();
    lp
}

#[test]
fn single_lower_row() {
    let mut lp = one_var(1.0);
    lp.add_row(Row::new("r", Sense::Ge, 3.0, vec![(0, 1.0)])).unwrap();
    let s = solve(&lp);
    assert_eq!(s.status, LpStatus::Optimal);
    assert!((s.primal[0] - 3.0).abs() < 1e-12);
    assert!((s.duals[0] - 1.0).abs() < 1e-12);
    assert!((s.objective - 3.0).abs() < 1e-12);
}

#[test]
fn maximise_under_upper_row() {
    let mut lp = one_var(-1.0);
    lp.add_row(Row::new("cap", Sense::Le, 5.0, vec![(0, 1.0)])).unwrap();
    lp.add_row(Row::new("nonneg", Sense::Ge, 0.0, vec![(0, 1.0)])).unwrap();
    let s = solve(&lp);
    assert_eq!(s.status, LpStatus::Optimal);
    assert!((s.primal[0] - 5.0).abs() < 1e-12);
    assert!((s.objective + 5.0).abs() < 1e-12);
    assert!((s.duals[0] + 1.0).abs() < 1e-12);
    assert_eq!(s.duals[1], 0.0);
}

#[test]
fn maximise_under_bounds() {
    let mut lp = LinearProgram::new();
    lp.add_var("x", 0.0, 5.0, -1.0).unwrap();
    let s = solve(&lp);
    assert_eq!(s.status, LpStatus::Optimal);
    assert!((s.objective + 5.0).abs() < 1e-12);
}

#[test]
fn contradictory_rows_are_infeasible() {
    let mut lp = one_var(0.0);
    lp.add_row(Row::new("lo", Sense::Ge, 1.0, vec![(0, 1.0)])).unwrap();
    lp.add_row(Row::new("hi", Sense::Le, 0.0, vec![(0, 1.0)])).unwrap();
    assert_eq!(solve(&lp).status, LpStatus::Infeasible);
}

#[test]
fn unbounded_and_infeasible_are_told_apart() {
    let mut lp = one_var(1.0);
    lp.add_row(Row::new("hi", Sense::Le, 4.0, vec![(0, 1.0)])).unwrap();
    assert_eq!(solve(&lp).status, LpStatus::Unbounded);

    let mut lp = LinearProgram::new();
    lp.add_free("x", 1.0).unwrap();
    lp.add_free("y", 0.0).unwrap();
    lp.add_row(Row::new("a", Sense::Ge, 1.0, vec![(1, 1.0)])).unwrap();
    lp.add_row(Row::new("b", Sense::Le, 0.0, vec![(1, 1.0)])).unwrap();
    assert_eq!(solve(&lp).status, LpStatus::Infeasible);
}

#[test]
fn equality_rows_and_names() {
    let mut lp = LinearProgram::new();
    let x = lp.add_var("x", 0.0, f64::INFINITY, 1.0).unwrap();
    let y = lp.add_var("y", 0.0, f64::INFINITY, 2.0).unwrap();
    lp.add_row(Row::new("sum", Sense::Eq, 4.0, vec![(x, 1.0), (y, 1.0)])).unwrap();
    lp.add_row(Row::new("ymin", Sense::Ge, 1.0, vec![(y, 1.0)])).unwrap();
    let s = solve(&lp);
    let p = s.primal_by_name(&lp);
    assert!((p["x"] - 3.0).abs() < 1e-12 && (p["y"] - 1.0).abs() < 1e-12);
    let d = s.duals_by_name(&lp);
    assert!((d["sum"] - 1.0).abs() < 1e-12);
    assert!((d["ymin"] - 1.0).abs() < 1e-12);
    assert!(lp.add_free("x", 0.0).is_err());
    assert!(lp.add_row(Row::new("bad", Sense::Ge, 0.0, vec![(7, 1.0)])).is_err());
}

#[test]
fn tight_row_without_dual_is_flagged() {
    let mut lp = one_var(1.0);
    lp.add_row(Row::new("a", Sense::Ge, 2.0, vec![(0, 1.0)])).unwrap();
    lp.add_row(Row::new("b", Sense::Ge, 2.0, vec![(0, 2.0)])).unwrap();
    lp.add_row(Row::new("c", Sense::Ge, 4.0, vec![(0, 2.0)])).unwrap();
    let s = solve(&lp);
    assert!((s.objective - 2.0).abs() < 1e-12);
    assert!(s.dual_degenerate);
}

/// Random LP with free variables that is feasible at a known point and
/// bounded because the cost is a nonnegative combination of the first
/// `bounding` rows.
fn random_lp(rng: &mut ChaCha8Rng, n: usize, m: usize, bounding: usize) -> LinearProgram {
    let mut lp = LinearProgram::new();
    let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let g: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut c = vec![0.0; n];
    for row in g.iter().take(bounding) {
        let y: f64 = rng.gen_range(0.1..1.0);
        for (cj, a) in c.iter_mut().zip(row) {
            *cj += y * a;
        }
    }
    for (j, cj) in c.iter().enumerate() {
        lp.add_free(format!("x{j}"), *cj).unwrap();
    }
    for (r, row) in g.iter().enumerate() {
        let act: f64 = row.iter().zip(&x0).map(|(a, x)| a * x).sum();
        let rhs = act - rng.gen_range(0.0..1.0);
        lp.add_row(Row::new(format!("r{r}"), Sense::Ge, rhs, row.iter().copied().enumerate().collect())).unwrap();
    }
    lp
}

fn check_optimal(lp: &LinearProgram, s: &LpSolution) {
    assert_eq!(s.status, LpStatus::Optimal);
    assert!(lp.primal_residual(&s.primal) <= 1e-7, "primal residual {}", lp.primal_residual(&s.primal));
    assert!(lp.complementarity_residual(&s.primal, &s.duals) <= 1e-7);
    assert!(s.duals.iter().all(|&y| y >= 0.0));
    let dual_obj: f64 = lp.rows().iter().zip(&s.duals).map(|(r, y)| r.rhs * y).sum();
    assert!((dual_obj - s.objective).abs() <= 1e-7 * (1.0 + s.objective.abs()), "{dual_obj} vs {}", s.objective);
    // stationarity: G^T y = c
    let mut gty = vec![0.0; lp.num_vars()];
    for (r, y) in lp.rows().iter().zip(&s.duals) {
        for &(j, a) in &r.coefs {
            gty[j] += a * y;
        }
    }
    for (v, g) in lp.vars().iter().zip(&gty) {
        assert!((v.cost - g).abs() < 1e-7);
    }
}

#[test]
fn strong_duality_on_random_dense_lps() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for &(n, m) in &[(2, 3), (5, 12), (20, 40), (60, 60), (200, 200)] {
        let lp = random_lp(&mut rng, n, m, n.min(m));
        check_optimal(&lp, &solve(&lp));
    }
}

#[test]
fn duals_match_rhs_sensitivity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    for _ in 0..10 {
        let lp = random_lp(&mut rng, 8, 20, 8);
        let s = solve(&lp);
        if s.dual_degenerate {
            continue;
        }
        for (r, y) in s.duals.iter().enumerate() {
            if *y <= 1e-6 {
                continue;
            }
            let eps = 1e-4;
            let mut bumped = LinearProgram::new();
            for v in lp.vars() {
                bumped.add_var(v.name.clone(), v.lower, v.upper, v.cost).unwrap();
            }
            for (q, row) in lp.rows().iter().enumerate() {
                let mut row = row.clone();
                if q == r {
                    row.rhs += eps;
                }
                bumped.add_row(row).unwrap();
            }
            let b = solve(&bumped);
            assert!((b.objective - s.objective - y * eps).abs() < 1e-5);
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn warm_restart_matches_cold_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10 {
        let full = random_lp(&mut rng, 12, 50, 12);
        let mut part = LinearProgram::new();
        for v in full.vars() {
            part.add_var(v.name.clone(), v.lower, v.upper, v.cost).unwrap();
        }
        for row in &full.rows()[..30] {
            part.add_row(row.clone()).unwrap();
        }
        let prior = solve(&part);
        assert!(prior.is_optimal());
        let warm = add_rows_and_resolve(&mut part, full.rows()[30..].to_vec(), &prior).unwrap();
        let cold = solve(&full);
        check_optimal(&part, &warm);
        assert!((warm.objective - cold.objective).abs() <= 1e-8 * (1.0 + cold.objective.abs()));
        assert!(warm.objective >= prior.objective - 1e-9);
    }
}

#[test]
fn non_binding_row_keeps_solution() {
    let mut lp = one_var(1.0);
    lp.add_row(Row::new("r", Sense::Ge, 3.0, vec![(0, 1.0)])).unwrap();
    let s = solve(&lp);
    let again = add_rows_and_resolve(&mut lp, vec![Row::new("loose", Sense::Ge, -10.0, vec![(0, 1.0)])], &s).unwrap();
    assert_eq!(again.primal, s.primal);
    assert_eq!(again.objective, s.objective);
    assert_eq!(again.iterations, 0);
}

#[test]
fn mps_export() {
    let mut lp = LinearProgram::new();
    lp.add_var("x", 0.0, 4.0, 1.0).unwrap();
    lp.add_free("y", -2.0).unwrap();
    lp.add_row(Row::new("r1", Sense::Le, 3.0, vec![(0, 1.0), (1, 1.0)])).unwrap();
    let mut out = Vec::new();
    write_mps(&lp, "tiny", &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    for needle in ["NAME tiny", " L r1", " x COST 1e0", " y r1 1e0", " RHS r1 3e0", " UP BND x 4e0", " FR BND y", "ENDATA"] {
        assert!(text.contains(needle), "missing {needle:?} in\n{text}");
    }
}
