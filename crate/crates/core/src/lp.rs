//! Small dense two-phase simplex, used as an independent oracle for the L1
//! index and nothing else. Bland's rule keeps it from cycling; it is meant
//! for a few dozen variables, not for speed.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// `maximize c·x  subject to  rows,  x ≥ 0`.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Sense, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
}

const EPS: f64 = 1e-12;

struct Tableau {
    // m constraint rows followed by the objective row; last column is the rhs.
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let piv = self.a[r][c];
        self.a[r].iter_mut().for_each(|e| *e /= piv);
        let row = self.a[r].clone();
        for (i, other) in self.a.iter_mut().enumerate() {
            if i != r {
                let f = other[c];
                if f != 0.0 {
                    for (o, p) in other.iter_mut().zip(&row) {
                        *o -= f * p;
                    }
                }
            }
        }
        self.basis[r] = c;
    }

    /// Maximizes the objective row over columns `< allowed`. The objective
    /// row stores reduced costs `z_j - c_j`, so negative entries improve.
    fn optimize(&mut self, allowed: usize) -> Result<()> {
        let m = self.basis.len();
        let rhs = self.width;
        for _ in 0..50_000 {
            let Some(c) = (0..allowed).find(|&j| self.a[m][j] < -EPS) else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..m {
                let aic = self.a[i][c];
                if aic > EPS {
                    let ratio = self.a[i][rhs] / aic;
                    let better = match best {
                        None => true,
                        Some((bi, br)) => ratio < br - EPS || (ratio <= br + EPS && self.basis[i] < self.basis[bi]),
                    };
                    if better {
                        best = Some((i, ratio));
                    }
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, c),
                None => return Err(Error::InvalidArgument("linear program is unbounded".into())),
            }
        }
        Err(Error::InvalidArgument("simplex iteration cap reached".into()))
    }
}

impl LinearProgram {
    pub fn solve(&self) -> Result<LpSolution> {
        let n = self.objective.len();
        let m = self.rows.len();
        if self.rows.iter().any(|(a, _, _)| a.len() != n) {
            return Err(Error::Dimension {
                expected: n,
                got: self.rows.iter().map(|r| r.0.len()).find(|&l| l != n).unwrap_or(n),
            });
        }
        let n_slack = self.rows.iter().filter(|r| r.1 != Sense::Eq).count();
        let width = n + n_slack + m;
        let art0 = n + n_slack;
        let mut a = vec![vec![0.0; width + 1]; m + 1];
        let mut slack = n;
        for (i, (coef, sense, b)) in self.rows.iter().enumerate() {
            let flip = if *b < 0.0 { -1.0 } else { 1.0 };
            for j in 0..n {
                a[i][j] = flip * coef[j];
            }
            match sense {
                Sense::Le => {
                    a[i][slack] = flip;
                    slack += 1;
                }
                Sense::Ge => {
                    a[i][slack] = -flip;
                    slack += 1;
                }
                Sense::Eq => {}
            }
            a[i][art0 + i] = 1.0;
            a[i][width] = flip * b;
        }
        let mut t = Tableau {
            a,
            basis: (art0..art0 + m).collect(),
            width,
        };

        // Phase one: maximize -Σ artificials.
        for j in art0..width {
            t.a[m][j] = 1.0;
        }
        for i in 0..m {
            let row = t.a[i].clone();
            for (o, r) in t.a[m].iter_mut().zip(&row) {
                *o -= r;
            }
        }
        t.optimize(width)?;
        if t.a[m][width] < -1e-9 {
            return Err(Error::InvalidArgument("linear program is infeasible".into()));
        }
        // Drive remaining (zero-level) artificials out of the basis.
        for i in 0..m {
            if t.basis[i] >= art0 {
                if let Some(c) = (0..art0).find(|&j| t.a[i][j].abs() > 1e-9) {
                    t.pivot(i, c);
                }
            }
        }

        // Phase two on the original objective, artificials frozen.
        for j in 0..=width {
            t.a[m][j] = if j < n { -self.objective[j] } else { 0.0 };
        }
        for i in 0..m {
            let c = t.basis[i];
            let f = t.a[m][c];
            if f != 0.0 {
                let row = t.a[i].clone();
                for (o, r) in t.a[m].iter_mut().zip(&row) {
                    *o -= f * r;
                }
            }
        }
        t.optimize(art0)?;
        let mut x = vec![0.0; n];
        for (i, &b) in t.basis.iter().enumerate() {
            if b < n {
                x[b] = t.a[i][width];
            }
        }
        let value = x.iter().zip(&self.objective).map(|(a, b)| a * b).sum();
        Ok(LpSolution { value, x })
    }
}

/// The L1 index as a linear program over `(q, u)` with `u ≥ |q - p|`:
/// maximize `v·q` subject to `Σ q = 1`, `Σ u ≤ δ`, `q, u ≥ 0`.
pub fn olp_linear_program(p: &[f64], v: &[f64], delta: f64) -> Result<LpSolution> {
    let n = p.len();
    if v.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: v.len(),
        });
    }
    let mut objective = v.to_vec();
    objective.resize(2 * n, 0.0);
    let mut rows = Vec::with_capacity(2 * n + 2);
    rows.push((
        (0..2 * n).map(|j| if j < n { 1.0 } else { 0.0 }).collect(),
        Sense::Eq,
        1.0,
    ));
    rows.push((
        (0..2 * n).map(|j| if j < n { 0.0 } else { 1.0 }).collect(),
        Sense::Le,
        delta,
    ));
    for i in 0..n {
        let mut up = vec![0.0; 2 * n];
        up[i] = 1.0;
        up[n + i] = -1.0;
        rows.push((up, Sense::Le, p[i]));
        let mut down = vec![0.0; 2 * n];
        down[i] = 1.0;
        down[n + i] = 1.0;
        rows.push((down, Sense::Ge, p[i]));
    }
    let mut sol = LinearProgram { objective, rows }.solve()?;
    sol.x.truncate(n);
    Ok(sol)
}
