//! `max delta` subject to `M c >= delta`, `c >= 0`, `sum c = 1`, solved by
//! enumerating the vertices of the feasible polytope.

use nalgebra::{DMatrix, DVector};

/// Slack tolerance when testing a candidate vertex for feasibility.
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceLp {
    /// Optimal weights on the simplex.
    pub c: Vec<f64>,
    /// Optimal value `min_i (M c)_i`.
    pub delta: f64,
}

fn combinations(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    if k > n {
        return;
    }
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Solve the dominance LP for the square matrix `m`. Among optimal vertices
/// the one with the largest smallest weight is returned.
pub fn maximize_dominance(m: &DMatrix<f64>) -> DominanceLp {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    // unknowns x = (c_1..c_n, delta); constraints 0..n are rows of M, n..2n are c_i >= 0
    let mut best: Option<DominanceLp> = None;
    combinations(2 * n, n, |tight| {
        let mut sys = DMatrix::zeros(n + 1, n + 1);
        let mut rhs = DVector::zeros(n + 1);
        for (r, &k) in tight.iter().enumerate() {
            if k < n {
                for j in 0..n {
                    sys[(r, j)] = m[(k, j)];
                }
                sys[(r, n)] = -1.0;
            } else {
                sys[(r, k - n)] = 1.0;
            }
        }
        for j in 0..n {
            sys[(n, j)] = 1.0;
        }
        rhs[n] = 1.0;
        let Some(x) = sys.lu().solve(&rhs) else { return };
        if x.iter().any(|v| !v.is_finite()) {
            return;
        }
        let c: Vec<f64> = x.iter().take(n).copied().collect();
        if c.iter().any(|&v| v < -FEAS_TOL) {
            return;
        }
        let c: Vec<f64> = c.iter().map(|&v| v.max(0.0)).collect();
        let delta = (0..n).map(|i| (0..n).map(|j| m[(i, j)] * c[j]).sum::<f64>()).fold(f64::INFINITY, f64::min);
        if delta < x[n] - FEAS_TOL * (1.0 + x[n].abs()) {
            return;
        }
        let cand = DominanceLp { c, delta };
        let better = match &best {
            None => true,
            Some(b) => {
                let minc = |v: &DominanceLp| v.c.iter().copied().fold(f64::INFINITY, f64::min);
                cand.delta > b.delta + 1e-12 || (cand.delta > b.delta - 1e-12 && minc(&cand) > minc(b) + 1e-12)
            }
        };
        if better {
            best = Some(cand);
        }
    });
    best.expect("the simplex always has a vertex")
}
