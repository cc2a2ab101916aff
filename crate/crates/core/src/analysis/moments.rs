//! Mean and variance sequences of `Z_n` and the normalizer `a_n`.

use serde::Serialize;

use crate::environment::{BpveiModel, LawTable};

/// One generation of the moment table. `expected` and `variance` refer to
/// `Z_n`; the remaining fields to the laws of generation `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentRow {
    pub n: u64,
    pub m: f64,
    pub sigma2: f64,
    pub alpha: f64,
    pub beta2: f64,
    /// `mu_n = m_0 * ... * m_n`.
    pub mu: f64,
    pub nu: f64,
    pub expected: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentTable {
    pub rows: Vec<MomentRow>,
    /// Set when a moment left the finite floating-point range.
    pub overflow: bool,
}

impl MomentTable {
    pub fn build(model: &BpveiModel, horizon: u64) -> Self {
        Self::from_table(&model.table(horizon), horizon)
    }

    pub fn from_table(table: &LawTable, horizon: u64) -> Self {
        let mut rows = Vec::with_capacity(horizon as usize + 1);
        let (mut e, mut v, mut mu) = (0.0f64, 0.0f64, 1.0f64);
        for n in 0..=horizon {
            let off = table.offspring(n);
            let imm = table.immigration(n);
            mu *= off.mean();
            rows.push(MomentRow {
                n,
                m: off.mean(),
                sigma2: off.variance(),
                alpha: imm.mean(),
                beta2: imm.variance(),
                mu,
                nu: off.nu(),
                expected: e,
                variance: v,
            });
            let (m, s2, a, b2) = (off.mean(), off.variance(), imm.mean(), imm.variance());
            v = m * m * (v + b2) + s2 * (e + a);
            e = m * (e + a);
        }
        let overflow = rows
            .iter()
            .any(|r| !r.expected.is_finite() || !r.variance.is_finite() || !r.mu.is_finite());
        MomentTable { rows, overflow }
    }

    pub fn expected(&self, n: u64) -> f64 {
        self.rows[n as usize].expected
    }

    pub fn variance(&self, n: u64) -> f64 {
        self.rows[n as usize].variance
    }
}

/// `E[Z_1], ..., E[Z_horizon]` from `E[Z_{n+1}] = m_n (E[Z_n] + alpha_n)`.
pub fn mean_sequence(model: &BpveiModel, horizon: u64) -> Vec<f64> {
    let t = MomentTable::build(model, horizon);
    t.rows[1..].iter().map(|r| r.expected).collect()
}

/// `E[Z_{n+1}] = sum_{i=0}^n alpha_{n-i} prod_{j=0}^i m_{n-j}`, evaluated
/// term by term for `n + 1 = 1..=horizon`.
pub fn mean_double_sum(model: &BpveiModel, horizon: u64) -> Vec<f64> {
    let table = model.table(horizon);
    (0..horizon)
        .map(|n| {
            let mut total = 0.0;
            let mut prod = 1.0;
            for i in 0..=n {
                prod *= table.offspring(n - i).mean();
                total += table.immigration(n - i).mean() * prod;
            }
            total
        })
        .collect()
}

/// `Var[Z_1], ..., Var[Z_horizon]` from
/// `Var[Z_{n+1}] = m_n^2 (Var[Z_n] + beta_n^2) + sigma_n^2 (E[Z_n] + alpha_n)`.
pub fn variance_sequence(model: &BpveiModel, horizon: u64) -> Vec<f64> {
    let t = MomentTable::build(model, horizon);
    t.rows[1..].iter().map(|r| r.variance).collect()
}

/// The closed form
/// `sum_i beta_i^2 prod_{j=i}^n m_j^2
///  + sum_i prod_{j=i+1}^n m_j^2 sigma_i^2 (alpha_i + sum_{k=0}^i alpha_{i-k} prod_{l=0}^k m_{i-l})`
/// taken literally, for `n + 1 = 1..=horizon`. Its inner sum is `E[Z_{i+1}]`
/// where the recursion has `E[Z_i]`, so the two disagree.
pub fn variance_printed_form(model: &BpveiModel, horizon: u64) -> Vec<f64> {
    let table = model.table(horizon);
    let next_mean = mean_double_sum(model, horizon);
    (0..horizon)
        .map(|n| {
            let mut total = 0.0;
            for i in 0..=n {
                let sq = |lo: u64| -> f64 {
                    (lo..=n)
                        .map(|j| table.offspring(j).mean().powi(2))
                        .product()
                };
                let off = table.offspring(i);
                let imm = table.immigration(i);
                total += imm.variance() * sq(i);
                total += sq(i + 1) * off.variance() * (imm.mean() + next_mean[i as usize]);
            }
            total
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceAuditRow {
    pub n: u64,
    pub recursion: f64,
    pub printed: f64,
    pub deviation: f64,
}

/// Recursion and printed closed form side by side for `Z_1..=Z_horizon`.
pub fn variance_audit(model: &BpveiModel, horizon: u64) -> Vec<VarianceAuditRow> {
    let rec = variance_sequence(model, horizon);
    let printed = variance_printed_form(model, horizon);
    rec.iter()
        .zip(&printed)
        .enumerate()
        .map(|(i, (r, p))| VarianceAuditRow {
            n: i as u64 + 1,
            recursion: *r,
            printed: *p,
            deviation: p - r,
        })
        .collect()
}

/// Partial sums `S_n = sum_{k=0}^n nu_k / mu_{k-1}` and the normalizer
/// `a_{n+1} = mu_n S_n / 2` (`a_0 = 0`, `mu_{-1} = 1`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizerSequence {
    pub partial_sums: Vec<f64>,
    pub a: Vec<f64>,
    /// Every `nu_k` vanishes, so `a_n = 0`.
    pub vacuous: bool,
}

impl NormalizerSequence {
    pub fn a_at(&self, n: u64) -> f64 {
        self.a[n as usize]
    }
}

pub fn normalizer(model: &BpveiModel, horizon: u64) -> NormalizerSequence {
    normalizer_from_table(&model.table(horizon), horizon)
}

pub fn normalizer_from_table(table: &LawTable, horizon: u64) -> NormalizerSequence {
    let mut partial_sums = Vec::with_capacity(horizon as usize + 1);
    let mut a = Vec::with_capacity(horizon as usize + 2);
    a.push(0.0);
    let (mut sum, mut mu_prev) = (0.0, 1.0);
    for k in 0..=horizon {
        let off = table.offspring(k);
        let nu = off.nu();
        if nu != 0.0 {
            sum += nu / mu_prev;
        }
        let mu = mu_prev * off.mean();
        partial_sums.push(sum);
        a.push(mu * sum / 2.0);
        mu_prev = mu;
    }
    let vacuous = partial_sums.iter().all(|s| *s == 0.0);
    NormalizerSequence {
        partial_sums,
        a,
        vacuous,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{preset, GenerationSchedule};
    use crate::laws::LawSpec;

    fn homogeneous(off: LawSpec, imm: LawSpec) -> BpveiModel {
        BpveiModel::new(
            "h",
            GenerationSchedule::homogeneous(off),
            GenerationSchedule::homogeneous(imm),
            false,
        )
        .unwrap()
    }

    #[test]
    fn example_b_first_moments() {
        let m = preset("example_b", None).unwrap();
        let e = mean_sequence(&m, 2);
        assert!((e[0] - 0.25).abs() < 1e-15);
        assert!((e[1] - 0.375).abs() < 1e-15);
        let v = variance_sequence(&m, 1);
        assert!((v[0] - 0.1875).abs() < 1e-15);
    }

    #[test]
    fn printed_variance_overshoots_by_one_sixteenth() {
        let m = preset("example_b", None).unwrap();
        let audit = variance_audit(&m, 3);
        assert!((audit[0].printed - 0.25).abs() < 1e-15);
        assert!((audit[0].deviation - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn deterministic_chain_moments() {
        let m = preset("deterministic_chain", None).unwrap();
        let e = mean_sequence(&m, 10);
        let v = variance_sequence(&m, 10);
        for (i, (e, v)) in e.iter().zip(&v).enumerate() {
            assert_eq!(*e, (i + 1) as f64);
            assert_eq!(*v, 0.0);
        }
    }

    #[test]
    fn double_sum_equals_recursion() {
        for name in ["example_b", "example_c", "critical_geo_pois"] {
            let m = preset(name, None).unwrap();
            let rec = mean_sequence(&m, 50);
            let ds = mean_double_sum(&m, 50);
            for (r, d) in rec.iter().zip(&ds) {
                assert!((r - d).abs() <= 1e-10 * r.abs().max(1e-300), "{name}");
            }
        }
    }

    #[test]
    fn normalizer_closed_forms() {
        let geo = normalizer(
            &homogeneous(LawSpec::geometric(0.5), LawSpec::poisson(1.0)),
            20,
        );
        for n in 1..=21u64 {
            assert!((geo.a_at(n) - n as f64).abs() < 1e-12);
        }
        let pois = normalizer(
            &homogeneous(LawSpec::poisson(1.0), LawSpec::poisson(1.0)),
            20,
        );
        for n in 1..=21u64 {
            assert!((pois.a_at(n) - n as f64 / 2.0).abs() < 1e-12);
        }
        let b = normalizer(&preset("example_b", None).unwrap(), 20);
        assert!(b.vacuous);
        assert!(b.a.iter().all(|a| *a == 0.0));
    }
}
