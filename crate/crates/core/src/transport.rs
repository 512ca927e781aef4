//! Exact 1-Wasserstein distances and optimal couplings on finite metric spaces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::StandardLp;
use crate::model::{Distribution, FiniteSpace};

/// Marginal residual above which an optimal coupling is rejected.
pub const MARGINAL_TOLERANCE: f64 = 1e-9;

/// Ground costs `c[i][j]` between support points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    /// Euclidean distances between the points of `space`.
    pub fn from_space(space: &FiniteSpace) -> Self {
        let n = space.len();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = space.distance(i, j);
            }
        }
        Self { n, data }
    }

    /// Validates symmetry, a zero diagonal and non-negativity.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::shape("cost matrix must be square and non-empty"));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        for i in 0..n {
            if data[i * n + i] != 0.0 {
                return Err(Error::param(format!("cost diagonal entry {i} is non-zero")));
            }
            for j in 0..n {
                let c = data[i * n + j];
                if !c.is_finite() || c < 0.0 {
                    return Err(Error::param(format!("cost ({i},{j}) = {c}")));
                }
                if (c - data[j * n + i]).abs() > 1e-12 {
                    return Err(Error::param(format!("cost ({i},{j}) is not symmetric")));
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Same costs with support points reordered: `new[i][j] = old[perm[i]][perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = self.get(perm[i], perm[j]);
            }
        }
        Self { n, data }
    }
}

/// Transport plan `γ[i][j]` between two laws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    rows: usize,
    cols: usize,
    mass: Vec<f64>,
}

impl Coupling {
    pub(crate) fn from_mass(rows: usize, cols: usize, mass: Vec<f64>) -> Self {
        debug_assert_eq!(mass.len(), rows * cols);
        Self { rows, cols, mass }
    }

    pub fn diagonal(p: &Distribution) -> Self {
        let n = p.len();
        let mut mass = vec![0.0; n * n];
        for i in 0..n {
            mass[i * n + i] = p.get(i);
        }
        Self { rows: n, cols: n, mass }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mass[i * self.cols + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.mass.chunks(self.cols).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in self.mass.chunks(self.cols) {
            for (o, v) in out.iter_mut().zip(r) {
                *o += v;
            }
        }
        out
    }

    pub fn cost(&self, cost: &CostMatrix) -> f64 {
        let mut total = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                total += cost.get(i, j) * self.get(i, j);
            }
        }
        total
    }

    /// Largest deviation of either marginal from `(p, q)`.
    pub fn marginal_residual(&self, p: &Distribution, q: &Distribution) -> f64 {
        let r = self
            .row_sums()
            .iter()
            .zip(p.weights())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let c = self
            .col_sums()
            .iter()
            .zip(q.weights())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        r.max(c)
    }
}

/// W1 on the real line via the CDF formula `Σ_k |F_p(k) - F_q(k)| (x_{k+1} - x_k)`.
pub fn w1_1d(p: &Distribution, q: &Distribution, coords: &[f64]) -> Result<f64> {
    if p.len() != coords.len() || q.len() != coords.len() {
        return Err(Error::shape(format!(
            "supports differ: |p| = {}, |q| = {}, {} coordinates",
            p.len(),
            q.len(),
            coords.len()
        )));
    }
    if coords.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("coordinates must be strictly increasing"));
    }
    let (mut fp, mut fq, mut total) = (0.0, 0.0, 0.0);
    for k in 0..coords.len() - 1 {
        fp += p.get(k);
        fq += q.get(k);
        total += (fp - fq).abs() * (coords[k + 1] - coords[k]);
    }
    Ok(total)
}

/// Exact W1 by solving the transportation linear program; returns the
/// optimal value and an optimal coupling.
pub fn w1_lp(p: &Distribution, q: &Distribution, cost: &CostMatrix) -> Result<(f64, Coupling)> {
    let n = cost.len();
    if p.len() != n || q.len() != n {
        return Err(Error::shape(format!(
            "supports differ from the {n}-point cost matrix"
        )));
    }
    if n == 1 {
        return Ok((0.0, Coupling::from_mass(1, 1, vec![1.0])));
    }

    // Variables x[i*n + j]. Rows: n supply rows, then n-1 demand rows (the
    // last demand row is implied by total mass).
    let rows = 2 * n - 1;
    let mut lp = StandardLp::new(rows, n * n);
    for i in 0..n {
        for j in 0..n {
            let v = i * n + j;
            lp.set(i, v, 1.0);
            if j < n - 1 {
                lp.set(n + j, v, 1.0);
            }
            lp.c[v] = cost.get(i, j);
        }
    }
    for i in 0..n {
        lp.b[i] = p.get(i);
    }
    for j in 0..n - 1 {
        lp.b[n + j] = q.get(j);
    }

    let x = lp.minimize(&northwest_corner(p, q))?;
    let coupling = Coupling::from_mass(n, n, x);
    let residual = coupling.marginal_residual(p, q);
    if residual > MARGINAL_TOLERANCE {
        return Err(Error::Numerical(format!(
            "optimal coupling misses the marginals by {residual:e}"
        )));
    }
    Ok((coupling.cost(cost), coupling))
}

/// Staircase basis of `2n - 1` cells; a spanning tree of the bipartite graph.
fn northwest_corner(p: &Distribution, q: &Distribution) -> Vec<usize> {
    let n = p.len();
    let (mut supply, mut demand) = (p.get(0), q.get(0));
    let (mut i, mut j) = (0, 0);
    let mut basis = Vec::with_capacity(2 * n - 1);
    loop {
        basis.push(i * n + j);
        if i == n - 1 && j == n - 1 {
            break;
        }
        let moved = supply.min(demand);
        supply -= moved;
        demand -= moved;
        if j == n - 1 || (i < n - 1 && supply <= demand) {
            i += 1;
            supply += p.get(i);
        } else {
            j += 1;
            demand += q.get(j);
        }
    }
    basis
}
