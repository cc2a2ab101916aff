//! Composed offspring p.g.f.s, the process p.g.f. and shape-function
//! diagnostics.
//!
//! Compositions are carried in complement space (`u = 1 - s`) so that
//! survival probabilities close to 0 keep full relative precision.

use serde::Serialize;

use crate::environment::{BpveiModel, LawTable};
use crate::error::{Error, Result};

/// Values of `f_{k,n}` (when `k` is set) or of `F_n` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PgfCurve {
    pub k: Option<i64>,
    pub n: u64,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

/// Result of the shape-sum uniformity diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Uniformity {
    Ratio {
        ratio: f64,
        sup: f64,
        reference: f64,
    },
    /// `sum phi_k(1) / mu_{k-1} = 0`: every `phi_k` vanishes.
    Vacuous,
}

impl Uniformity {
    pub fn ratio(&self) -> Option<f64> {
        match self {
            Uniformity::Ratio { ratio, .. } => Some(*ratio),
            Uniformity::Vacuous => None,
        }
    }
}

pub fn unit_grid(size: usize) -> Vec<f64> {
    let last = (size.max(2) - 1) as f64;
    (0..size.max(2)).map(|j| j as f64 / last).collect()
}

fn check_s(s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "s",
            value: s,
            lo: 0.0,
            hi: 1.0,
        })
    }
}

/// Generating-function evaluator over generations `0..=horizon`.
#[derive(Debug, Clone)]
pub struct PgfEngine {
    table: LawTable,
}

impl PgfEngine {
    pub fn new(model: &BpveiModel, horizon: u64) -> Self {
        PgfEngine {
            table: model.table(horizon),
        }
    }

    pub fn from_table(table: LawTable) -> Self {
        PgfEngine { table }
    }

    pub fn table(&self) -> &LawTable {
        &self.table
    }

    pub fn horizon(&self) -> u64 {
        self.table.horizon()
    }

    fn check_gen(&self, n: u64) -> Result<()> {
        if n > self.horizon() {
            return Err(Error::Index(format!(
                "generation {n} beyond engine horizon {}",
                self.horizon()
            )));
        }
        Ok(())
    }

    fn check_window(&self, k: i64, n: u64) -> Result<()> {
        if k < -1 || k > n as i64 {
            return Err(Error::Index(format!(
                "need -1 <= k <= n, got k = {k}, n = {n}"
            )));
        }
        self.check_gen(n)
    }

    /// `1 - f_{k,n}(1 - u)`.
    pub fn compose_complement(&self, k: i64, n: u64, u: f64) -> Result<f64> {
        self.check_window(k, n)?;
        let mut u = u;
        for l in ((k + 1) as u64..=n).rev() {
            u = self.table.offspring(l).pgf_complement(u);
        }
        Ok(u)
    }

    /// `f_{k,n}(s) = f_{k+1}(f_{k+2}(... f_n(s)))`, with `f_{n,n}(s) = s`.
    pub fn compose_offspring(&self, k: i64, n: u64, s: f64) -> Result<f64> {
        check_s(s)?;
        if k == n as i64 {
            self.check_window(k, n)?;
            return Ok(s);
        }
        Ok(1.0 - self.compose_complement(k, n, 1.0 - s)?)
    }

    /// `ln F_n(s)` with `F_n(s) = prod_{i<n} h_i(f_{i-1,n-1}(s))`.
    pub fn process_log_pgf(&self, n: u64, s: f64) -> Result<f64> {
        check_s(s)?;
        if n == 0 {
            return Ok(0.0);
        }
        self.check_gen(n - 1)?;
        let mut u = 1.0 - s;
        let mut log = 0.0;
        for i in (0..n).rev() {
            u = self.table.offspring(i).pgf_complement(u);
            log += (-self.table.immigration(i).pgf_complement(u)).ln_1p();
        }
        Ok(log)
    }

    /// Process p.g.f. `F_n(s) = E[s^{Z_n}]`.
    pub fn process_pgf(&self, n: u64, s: f64) -> Result<f64> {
        Ok(self.process_log_pgf(n, s)?.exp())
    }

    /// `P[Z_n > 0] = 1 - F_n(0)`.
    pub fn survival(&self, n: u64) -> Result<f64> {
        Ok(-self.process_log_pgf(n, 0.0)?.exp_m1())
    }

    /// `P[Z_n > 0]` for `n = 1..=up_to`.
    pub fn survival_curve(&self, up_to: u64) -> Result<Vec<f64>> {
        (1..=up_to).map(|n| self.survival(n)).collect()
    }

    /// `phi_k(s)`; `phi_k(1) = nu_k / 2`.
    pub fn shape_function(&self, k: u64, s: f64) -> Result<f64> {
        check_s(s)?;
        self.check_gen(k)?;
        Ok(self.table.offspring(k).shape(s))
    }

    /// Absolute residual of the iterated shape identity
    /// `1/(1 - f_{k,n}(s)) = mu_k/(mu_n (1-s)) + mu_k sum_{l=k+1}^n phi_l(f_{l,n}(s)) / mu_{l-1}`.
    pub fn iterated_shape_residual(&self, k: u64, n: u64, s: f64) -> Result<f64> {
        if k >= n {
            return Err(Error::Index(format!("need k < n, got k = {k}, n = {n}")));
        }
        if !(0.0..1.0).contains(&s) {
            return Err(Error::Domain {
                what: "s",
                value: s,
                lo: 0.0,
                hi: 1.0,
            });
        }
        self.check_gen(n)?;
        let mut u = 1.0 - s;
        // phi_l(f_{l,n}(s)) for l = n, n-1, ..., k+1, with u = 1 - f_{l,n}(s).
        let mut phis = Vec::with_capacity((n - k) as usize);
        for l in ((k + 1)..=n).rev() {
            let law = self.table.offspring(l);
            phis.push(law.shape_complement(u));
            u = law.pgf_complement(u);
        }
        phis.reverse();
        let lhs = 1.0 / u;
        // mu_k / mu_{l-1} = 1 / prod_{j=k+1}^{l-1} m_j
        let mut ratio = 1.0;
        let mut sum = 0.0;
        for (idx, phi) in phis.iter().enumerate() {
            let l = k + 1 + idx as u64;
            if l > k + 1 {
                ratio /= self.table.offspring(l - 1).mean();
            }
            sum += phi * ratio;
        }
        let mu_ratio = ratio / self.table.offspring(n).mean();
        let rhs = mu_ratio / (1.0 - s) + sum;
        Ok((lhs - rhs).abs())
    }

    /// Ratio `sup_s |S(s) - S(1)| / S(1)` over a uniform grid, where
    /// `S(s) = sum_{k=i}^n phi_k(f_{k,n}(s)) / mu_{k-1}`.
    pub fn shape_sum_uniformity(&self, i: u64, n: u64, grid_size: usize) -> Result<Uniformity> {
        if i > n {
            return Err(Error::Index(format!("need i <= n, got i = {i}, n = {n}")));
        }
        if grid_size < 11 {
            return Err(Error::Config(format!(
                "grid_size must be at least 11, got {grid_size}"
            )));
        }
        self.check_gen(n)?;
        // Weights 1/mu_{k-1}, rescaled by mu_{i-1}; the ratio is scale-free.
        let mut weights = Vec::with_capacity((n - i + 1) as usize);
        let mut w = 1.0;
        for k in i..=n {
            if k > i {
                w /= self.table.offspring(k - 1).mean();
            }
            weights.push(w);
        }
        // Same summation order as the grid loop, so constant shapes give 0.
        let reference: f64 = (i..=n)
            .rev()
            .map(|k| self.table.offspring(k).shape_complement(0.0) * weights[(k - i) as usize])
            .sum();
        if reference == 0.0 {
            return Ok(Uniformity::Vacuous);
        }
        let mut sup = 0.0f64;
        for s in unit_grid(grid_size) {
            let mut u = 1.0 - s;
            let mut total = 0.0;
            for k in (i..=n).rev() {
                let law = self.table.offspring(k);
                total += law.shape_complement(u) * weights[(k - i) as usize];
                u = law.pgf_complement(u);
            }
            sup = sup.max((total - reference).abs());
        }
        Ok(Uniformity::Ratio {
            ratio: sup / reference,
            sup,
            reference,
        })
    }

    pub fn composition_curve(&self, k: i64, n: u64, grid_size: usize) -> Result<PgfCurve> {
        let grid = unit_grid(grid_size);
        let values = grid
            .iter()
            .map(|&s| self.compose_offspring(k, n, s))
            .collect::<Result<_>>()?;
        Ok(PgfCurve {
            k: Some(k),
            n,
            grid,
            values,
        })
    }

    pub fn process_curve(&self, n: u64, grid_size: usize) -> Result<PgfCurve> {
        let grid = unit_grid(grid_size);
        let values = grid
            .iter()
            .map(|&s| self.process_pgf(n, s))
            .collect::<Result<_>>()?;
        Ok(PgfCurve {
            k: None,
            n,
            grid,
            values,
        })
    }
}
