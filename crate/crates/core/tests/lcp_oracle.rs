//! Projected SOR against a dense active-set solve of the same LCP.

use proptest::prelude::*;

use ruinfree::fbp::*;
use ruinfree::model::*;

fn dense(m: &Tridiagonal) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        a[i][i] = m.diag[i];
        if i > 0 {
            a[i][i - 1] = m.lower[i];
        }
        if i + 1 < n {
            a[i][i + 1] = m.upper[i];
        }
    }
    a
}

/// Gaussian elimination with partial pivoting.
fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Primal-dual active set: pin nodes that exceed their obstacle, release
/// pinned nodes whose row would need `M x > q`, re-solve densely on the free
/// nodes, until the set stops changing.
fn active_set(m: &Tridiagonal, q: &[f64], u: &[f64]) -> Vec<f64> {
    let n = q.len();
    let full = dense(m);
    let mut pinned = vec![false; n];
    for _ in 0..10 * n {
        let free: Vec<usize> = (0..n).filter(|i| !pinned[*i]).collect();
        let mut x: Vec<f64> = u.to_vec();
        if !free.is_empty() {
            let a: Vec<Vec<f64>> = free
                .iter()
                .map(|&i| free.iter().map(|&j| full[i][j]).collect())
                .collect();
            let b: Vec<f64> = free
                .iter()
                .map(|&i| {
                    q[i] - (0..n)
                        .filter(|j| pinned[*j])
                        .map(|j| full[i][j] * u[j])
                        .sum::<f64>()
                })
                .collect();
            for (k, xi) in free.iter().zip(gauss(a, b)) {
                x[*k] = xi;
            }
        }
        let mx = m.apply(&x);
        let next: Vec<bool> = (0..n)
            .map(|i| if pinned[i] { mx[i] - q[i] <= 0.0 } else { x[i] > u[i] })
            .collect();
        if next == pinned {
            return x;
        }
        pinned = next;
    }
    panic!("active set did not settle");
}

fn check_against_oracle(m: &Tridiagonal, q: &[f64], u: &[f64]) {
    let exact = active_set(m, q, u);
    assert!(complementarity_residual(m, q, u, &exact) < 1e-11);
    let mut x = vec![0.0; q.len()];
    let settings = PsorSettings {
        tol: 1e-12,
        max_iter: 100_000,
        ..PsorSettings::default()
    };
    let out = psor_step(m, q, u, &mut x, &settings);
    assert!(out.converged, "{out:?}");
    for (i, (a, b)) in x.iter().zip(&exact).enumerate() {
        assert!((a - b).abs() < 1e-9, "node {i}: psor {a} vs oracle {b}");
    }
}

#[test]
fn solver_step_on_fifty_nodes() {
    let p = ModelParams::example();
    let a = AnnuityState::new(1.0, &p).unwrap();
    let spec = GridSpec {
        n_y: 50,
        n_t: 20,
        ..GridSpec::default()
    };
    let grid = DualGrid::for_annuity(a, &p, &spec).unwrap();
    let op = assemble_operator(&grid, &p).unwrap();
    let y = grid.y_nodes();
    let n_t = grid.n_t();
    let t = grid.t_nodes();
    let next: Vec<f64> = y
        .iter()
        .map(|y| terminal_dual_capped(*y, a, &p).unwrap())
        .collect();
    let u: Vec<f64> = y
        .iter()
        .map(|y| obstacle_u(*y, a, t[n_t - 1], &p).unwrap())
        .collect();
    let q = op.rhs(&next, u[0], u[49]);
    check_against_oracle(&op.matrix, &q, &u);

    // the contact set has both blocks, so the oracle exercised both sides
    let exact = active_set(&op.matrix, &q, &u);
    let touching: Vec<bool> = exact.iter().zip(&u).map(|(x, u)| (x - u).abs() < 1e-14).collect();
    assert!(touching[1] && touching[48] && touching.iter().any(|b| !b));
}

#[test]
fn full_solve_matches_oracle_step_by_step() {
    let p = ModelParams::example();
    let a = AnnuityState::new(0.5, &p).unwrap();
    let spec = GridSpec {
        n_y: 50,
        n_t: 10,
        ..GridSpec::default()
    };
    let grid = DualGrid::for_annuity(a, &p, &spec).unwrap();
    let sol = solve_obstacle(a, &grid, &p, &PsorSettings::default()).unwrap();
    let op = assemble_operator(&grid, &p).unwrap();
    for k in 0..grid.n_t() {
        let u = sol.obstacle(k);
        let q = op.rhs(&sol.values[k + 1], u[0], u[49]);
        let exact = active_set(&op.matrix, &q, &u);
        for (i, (a, b)) in sol.values[k].iter().zip(&exact).enumerate() {
            // solver tolerance is in units of the value, times the condition
            assert!((a - b).abs() < 1e-7, "k={k} i={i}: {a} vs {b}");
        }
    }
}

prop_compose! {
    fn m_matrix(n: usize)(
        off in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), n),
        excess in prop::collection::vec(0.01..1.0f64, n),
    ) -> Tridiagonal {
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut diag = vec![0.0; n];
        for i in 0..n {
            lower[i] = if i > 0 { -off[i].0 } else { 0.0 };
            upper[i] = if i + 1 < n { -off[i].1 } else { 0.0 };
            diag[i] = -lower[i] - upper[i] + excess[i];
        }
        Tridiagonal { lower, diag, upper }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_m_matrices(
        m in m_matrix(50),
        q in prop::collection::vec(-1.0..2.0f64, 50),
        u in prop::collection::vec(0.0..1.0f64, 50),
    ) {
        check_against_oracle(&m, &q, &u);
    }
}
