//! Evidence for `q = 1`, which holds iff `f_{-1,n}(0) -> 1` and
//! `sum_j (1 - h_j(f_j(0))) < infinity`, and lower bounds on `q` from
//! `P[Z_j = 0 for all j >= n] = F_n(0) prod_{j >= n} h_j(f_j(0))`.

use serde::Serialize;

use super::criticality::{divergence_evidence, tends_to_zero, DivergenceEvidence, Verdict3};
use super::fit::{dyadic_horizons, PowerFit};
use crate::environment::{BpveiModel, Role};
use crate::pgf::PgfEngine;

/// Gaps `1 - f_{-1,n}(0)` below this count as converged.
pub const GAP_NEGLIGIBLE: f64 = 1e-9;
/// A flat gap above this level counts as bounded away from 0.
pub const GAP_PERSISTENT: f64 = 1e-3;
/// Slope of the log-log gap fit at or below which the gap tends to 0.
pub const GAP_DECAY_SLOPE: f64 = -0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtinctionVerdict {
    CertainExtinctionEvidence,
    PositiveSurvivalEvidence,
    Inconclusive,
}

/// Bound on `sum_{j > horizon} (1 - h_j(f_j(0)))` from power envelopes of
/// the immigration and offspring means, using
/// `1 - h_j(f_j(0)) <= alpha_j min(1, m_j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticTail {
    pub bound: f64,
    /// Upper bound on each term beyond the horizon.
    pub term_max: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QLowerBounds {
    /// `F_n(0) prod_{j=n}^{horizon} h_j(f_j(0))` times the tail factor, `n = 0..=horizon`.
    pub raw: Vec<f64>,
    /// Running maximum of `raw`.
    pub bounds: Vec<f64>,
    pub q_hat: f64,
    /// Lower bound on `prod_{j > horizon} h_j(f_j(0))`; 1 when truncated.
    pub tail_factor: f64,
    /// No analytic tail was available, so the product stops at the horizon.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtinctionReport {
    pub horizon: u64,
    pub horizons: Vec<u64>,
    /// `f_{-1,n}(0)` at each horizon.
    pub composed_zero: Vec<f64>,
    /// `1 - f_{-1,n}(0)` at each horizon.
    pub gap: Vec<f64>,
    pub gap_fit: Option<PowerFit>,
    pub condition1: Verdict3,
    pub sums: DivergenceEvidence,
    pub analytic_tail: Option<AnalyticTail>,
    /// Partial sum at the horizon plus the analytic tail.
    pub sum_upper: Option<f64>,
    pub condition2: Verdict3,
    pub q: QLowerBounds,
    pub verdict: ExtinctionVerdict,
}

/// `1 - h_j(f_j(0))` for `j = 0..=horizon`.
pub fn return_terms(engine: &PgfEngine, horizon: u64) -> Vec<f64> {
    let t = engine.table();
    (0..=horizon)
        .map(|j| {
            let u = t.offspring(j).pgf_complement(1.0);
            t.immigration(j).pgf_complement(u)
        })
        .collect()
}

pub fn analytic_tail(model: &BpveiModel, horizon: u64) -> Option<AnalyticTail> {
    let alpha = model.mean_envelope(Role::Immigration)?;
    let from = horizon.max(1);
    let mut best: Option<AnalyticTail> = None;
    let mut consider = |env: crate::laws::PowerEnvelope| {
        if from < env.valid_from {
            return;
        }
        if let Some(bound) = env.tail_sum_after(from) {
            let cand = AnalyticTail {
                bound,
                term_max: env.at(from + 1).min(1.0),
                exponent: env.exponent,
            };
            if best.is_none_or(|b| cand.bound < b.bound) {
                best = Some(cand);
            }
        }
    };
    consider(alpha);
    if let Some(m) = model.mean_envelope(Role::Offspring) {
        consider(alpha.times(&m));
    }
    best
}

pub fn q_lower_bounds(model: &BpveiModel, horizon: u64) -> QLowerBounds {
    let engine = PgfEngine::new(model, horizon);
    q_lower_bounds_with(model, &engine, horizon)
}

fn q_lower_bounds_with(model: &BpveiModel, engine: &PgfEngine, horizon: u64) -> QLowerBounds {
    let terms = return_terms(engine, horizon);
    let tail = analytic_tail(model, horizon);
    let (tail_factor, truncated) = match tail {
        Some(t) if t.term_max < 1.0 => ((-t.bound / (1.0 - t.term_max)).exp(), false),
        Some(_) => (0.0, false),
        None => (1.0, true),
    };
    // suffix[n] = sum_{j=n}^{horizon} ln h_j(f_j(0))
    let mut suffix = vec![0.0; horizon as usize + 2];
    for j in (0..=horizon as usize).rev() {
        suffix[j] = suffix[j + 1] + (-terms[j]).ln_1p();
    }
    let raw: Vec<f64> = (0..=horizon)
        .map(|n| {
            let log_f = engine.process_log_pgf(n, 0.0).expect("n within horizon");
            ((log_f + suffix[n as usize]).exp() * tail_factor).min(1.0)
        })
        .collect();
    let mut bounds = Vec::with_capacity(raw.len());
    let mut best = 0.0f64;
    for r in &raw {
        best = best.max(*r);
        bounds.push(best);
    }
    QLowerBounds {
        q_hat: best,
        raw,
        bounds,
        tail_factor,
        truncated,
    }
}

pub fn extinction_conditions(model: &BpveiModel, horizon: u64) -> ExtinctionReport {
    let horizon = horizon.max(2);
    let engine = PgfEngine::new(model, horizon);
    let horizons = dyadic_horizons(2, horizon);

    let gap: Vec<f64> = horizons
        .iter()
        .map(|&n| {
            engine
                .compose_complement(-1, n, 1.0)
                .expect("n within horizon")
        })
        .collect();
    let composed_zero: Vec<f64> = gap.iter().map(|g| 1.0 - g).collect();
    let (gap_fit, _) = tends_to_zero(&horizons, &gap);
    let last_gap = *gap.last().expect("at least one horizon");
    let condition1 = if last_gap < GAP_NEGLIGIBLE {
        Verdict3::Holds
    } else {
        match gap_fit {
            Some(f) if f.exponent <= GAP_DECAY_SLOPE => Verdict3::Holds,
            Some(f) if f.exponent > -0.05 && last_gap > GAP_PERSISTENT => Verdict3::Fails,
            None if last_gap > GAP_PERSISTENT => Verdict3::Fails,
            _ => Verdict3::Inconclusive,
        }
    };

    let terms = return_terms(&engine, horizon);
    let mut cum = Vec::with_capacity(terms.len());
    let mut acc = 0.0;
    for t in &terms {
        acc += t;
        cum.push(acc);
    }
    let partial: Vec<f64> = horizons.iter().map(|h| cum[*h as usize]).collect();
    let sums = divergence_evidence(&horizons, &partial);
    let analytic = analytic_tail(model, horizon);
    let sum_upper = analytic.map(|t| cum[horizon as usize] + t.bound);
    let condition2 = if analytic.is_some() {
        Verdict3::Holds
    } else {
        sums.diverges_to_condition()
    };

    let verdict = match (condition1, condition2) {
        (Verdict3::Holds, Verdict3::Holds) => ExtinctionVerdict::CertainExtinctionEvidence,
        (Verdict3::Fails, _) | (_, Verdict3::Fails) => ExtinctionVerdict::PositiveSurvivalEvidence,
        _ => ExtinctionVerdict::Inconclusive,
    };
    let q = q_lower_bounds_with(model, &engine, horizon);
    ExtinctionReport {
        horizon,
        horizons,
        composed_zero,
        gap,
        gap_fit,
        condition1,
        sums,
        analytic_tail: analytic,
        sum_upper,
        condition2,
        q,
        verdict,
    }
}

impl DivergenceEvidence {
    /// Convergence of the sum, read off the divergence evidence.
    fn diverges_to_condition(&self) -> Verdict3 {
        match self.diverges {
            Verdict3::Holds => Verdict3::Fails,
            Verdict3::Fails => Verdict3::Holds,
            Verdict3::Inconclusive => Verdict3::Inconclusive,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::preset;
    use crate::laws::LawSpec;

    #[test]
    fn example_b_certain_extinction() {
        let r = extinction_conditions(&preset("example_b", None).unwrap(), 200);
        assert_eq!(r.verdict, ExtinctionVerdict::CertainExtinctionEvidence);
        let limit = 0.5 + (std::f64::consts::PI.powi(2) / 6.0 - 1.0) / 2.0;
        assert!(*r.sums.partial_sums.last().unwrap() <= limit);
        assert!(r.sum_upper.unwrap() >= limit - 1e-12);
        assert!(r.q.q_hat >= 0.99, "{}", r.q.q_hat);
        // 1 - f_{-1,n}(0) = (n!)^-2 / 4
        assert!((r.gap[0] - 0.25 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn example_c_positive_survival() {
        let r = extinction_conditions(&preset("example_c", None).unwrap(), 512);
        assert_eq!(r.condition1, Verdict3::Holds);
        assert_eq!(r.condition2, Verdict3::Fails);
        assert_eq!(r.verdict, ExtinctionVerdict::PositiveSurvivalEvidence);
        let e = r.sums.increment_fit.unwrap().exponent;
        assert!((-1.1..=-0.9).contains(&e), "{e}");
        assert!(r.analytic_tail.is_none());
        assert!(r.q.truncated);
    }

    #[test]
    fn example_a_with_identity_offspring() {
        let m = preset("example_a", Some(LawSpec::finite(vec![0.0, 1.0]))).unwrap();
        let r = extinction_conditions(&m, 256);
        let full = std::f64::consts::PI.powi(2) / 6.0;
        let last = *r.sums.partial_sums.last().unwrap();
        assert!(last < full && full - last < 1.0 / 256.0);
        assert_eq!(r.condition2, Verdict3::Holds);
        assert!(r.sum_upper.unwrap() >= full);
        assert_eq!(r.condition1, Verdict3::Fails);
    }

    #[test]
    fn q_bounds_monotone_and_capped() {
        for name in ["example_b", "example_c", "critical_geo_pois"] {
            let q = q_lower_bounds(&preset(name, None).unwrap(), 100);
            assert!(q.bounds.windows(2).all(|w| w[1] >= w[0]));
            assert!(q.bounds.iter().all(|b| *b <= 1.0));
        }
        let d = q_lower_bounds(&preset("deterministic_chain", None).unwrap(), 50);
        assert!(d.bounds.iter().all(|b| *b == 0.0));
    }

    #[test]
    fn composed_zero_is_nondecreasing() {
        for name in [
            "example_b",
            "example_c",
            "critical_geo_pois",
            "deterministic_chain",
        ] {
            let m = preset(name, None).unwrap();
            let e = PgfEngine::new(&m, 300);
            let mut prev = -1.0;
            for n in 0..=300u64 {
                let v = e.compose_offspring(-1, n, 0.0).unwrap();
                assert!(v >= prev, "{name} n={n}");
                prev = v;
            }
        }
    }
}
