//! Dense primal simplex for small standard-form linear programs
//! `min cᵀx  s.t.  Ax = b, x ≥ 0`, started from a caller-supplied feasible basis.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-12;
const COST_EPS: f64 = 1e-12;
/// Degenerate pivots tolerated under Dantzig's rule before switching to Bland's.
const DEGENERATE_STREAK: usize = 64;

pub(crate) struct StandardLp {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows × cols` constraint matrix.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl StandardLp {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            a: vec![0.0; rows * cols],
            b: vec![0.0; rows],
            c: vec![0.0; cols],
        }
    }

    pub fn set(&mut self, r: usize, j: usize, v: f64) {
        self.a[r * self.cols + j] = v;
    }

    /// Solves from `basis` (one column per row, primal feasible). Returns `x`.
    pub fn minimize(&self, basis: &[usize]) -> Result<Vec<f64>> {
        let (m, n) = (self.rows, self.cols);
        if basis.len() != m {
            return Err(Error::Numerical(format!(
                "starting basis has {} columns for {m} rows",
                basis.len()
            )));
        }
        let w = n + 1;
        let mut tab = vec![0.0; m * w];
        for r in 0..m {
            tab[r * w..r * w + n].copy_from_slice(&self.a[r * n..(r + 1) * n]);
            tab[r * w + n] = self.b[r];
        }
        let mut obj = vec![0.0; w];
        let mut row_basis = vec![usize::MAX; m];

        for &col in basis {
            let r = (0..m)
                .filter(|&r| row_basis[r] == usize::MAX)
                .max_by(|&x, &y| tab[x * w + col].abs().total_cmp(&tab[y * w + col].abs()))
                .ok_or_else(|| Error::Numerical("starting basis larger than row count".into()))?;
            if tab[r * w + col].abs() < PIVOT_EPS {
                return Err(Error::Numerical("singular starting basis".into()));
            }
            pivot(&mut tab, &mut obj, w, m, r, col);
            row_basis[r] = col;
        }
        for r in 0..m {
            if tab[r * w + n] < 0.0 {
                if tab[r * w + n] < -1e-9 {
                    return Err(Error::Numerical("starting basis is not primal feasible".into()));
                }
                tab[r * w + n] = 0.0;
            }
        }

        // Reduced costs relative to the starting basis.
        obj[..n].copy_from_slice(&self.c);
        obj[n] = 0.0;
        for r in 0..m {
            let cb = self.c[row_basis[r]];
            if cb != 0.0 {
                for j in 0..w {
                    obj[j] -= cb * tab[r * w + j];
                }
            }
        }

        let max_iter = 50 * (m + n) + 1000;
        let mut bland = false;
        let mut streak = 0;
        for _ in 0..max_iter {
            let entering = if bland {
                (0..n).find(|&j| obj[j] < -COST_EPS)
            } else {
                (0..n)
                    .filter(|&j| obj[j] < -COST_EPS)
                    .min_by(|&x, &y| obj[x].total_cmp(&obj[y]))
            };
            let Some(j) = entering else {
                let mut x = vec![0.0; n];
                for r in 0..m {
                    x[row_basis[r]] = tab[r * w + n].max(0.0);
                }
                return Ok(x);
            };

            let mut leave: Option<(usize, f64)> = None;
            for r in 0..m {
                let coef = tab[r * w + j];
                if coef > PIVOT_EPS {
                    let ratio = tab[r * w + n] / coef;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio - 1e-15
                                || (ratio <= bratio + 1e-15 && row_basis[r] < row_basis[br])
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, bratio))
                            }
                        }
                    };
                }
            }
            let Some((r, ratio)) = leave else {
                return Err(Error::Numerical("linear program is unbounded".into()));
            };
            if ratio <= 1e-15 {
                streak += 1;
                if streak > DEGENERATE_STREAK {
                    bland = true;
                }
            } else {
                streak = 0;
            }
            pivot(&mut tab, &mut obj, w, m, r, j);
            row_basis[r] = j;
        }
        Err(Error::Numerical(format!("simplex exceeded {max_iter} pivots")))
    }
}

fn pivot(tab: &mut [f64], obj: &mut [f64], w: usize, m: usize, r: usize, col: usize) {
    let p = tab[r * w + col];
    for v in &mut tab[r * w..(r + 1) * w] {
        *v /= p;
    }
    let (before, rest) = tab.split_at_mut(r * w);
    let (prow, after) = rest.split_at_mut(w);
    for other in before.chunks_mut(w).chain(after.chunks_mut(w)) {
        let f = other[col];
        if f != 0.0 {
            for (o, pv) in other.iter_mut().zip(prow.iter()) {
                *o -= f * pv;
            }
            other[col] = 0.0;
        }
    }
    let f = obj[col];
    if f != 0.0 {
        for (o, pv) in obj.iter_mut().zip(prow.iter()) {
            *o -= f * pv;
        }
        obj[col] = 0.0;
    }
    debug_assert!(m * w == tab.len());
}
