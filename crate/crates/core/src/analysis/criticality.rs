//! Criticality in the varying-environment sense: `sum nu_k / mu_{k-1}`
//! diverges and `1 / mu_n` is of smaller order than the partial sum.

use serde::Serialize;

use super::fit::{power_law_fit, PowerFit};
use super::moments::normalizer_from_table;
use crate::environment::BpveiModel;

/// A partial sum is called divergent when it still grows by this fraction
/// between the last two horizons.
pub const DIVERGENCE_GROWTH: f64 = 0.10;
/// Increments decaying faster than `n^-1.1` count as summable.
pub const SUMMABLE_EXPONENT: f64 = -1.1;
/// Log-log slope below which a ratio is taken to tend to 0.
pub const RATIO_DECAY_SLOPE: f64 = -0.25;
/// Log-log slope above which a ratio is taken not to tend to 0.
pub const RATIO_FLAT_SLOPE: f64 = -0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict3 {
    Holds,
    Fails,
    Inconclusive,
}

/// Divergence evidence for a nondecreasing partial-sum sequence sampled at
/// increasing horizons.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceEvidence {
    pub horizons: Vec<u64>,
    pub partial_sums: Vec<f64>,
    /// Relative growth between the last two horizons.
    pub last_growth: f64,
    /// Fit of the per-generation increment rate between horizons.
    pub increment_fit: Option<PowerFit>,
    pub diverges: Verdict3,
}

pub fn divergence_evidence(horizons: &[u64], partial_sums: &[f64]) -> DivergenceEvidence {
    let k = partial_sums.len();
    let last_growth = if k >= 2 && partial_sums[k - 2] > 0.0 {
        partial_sums[k - 1] / partial_sums[k - 2] - 1.0
    } else if k >= 2 && partial_sums[k - 1] > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let mut xs = Vec::new();
    let mut rates = Vec::new();
    for i in 1..k {
        let width = (horizons[i] - horizons[i - 1]) as f64;
        xs.push(horizons[i] as f64);
        rates.push((partial_sums[i] - partial_sums[i - 1]) / width);
    }
    let increment_fit = power_law_fit(&xs, &rates);
    let diverges = match increment_fit {
        Some(f) if last_growth >= DIVERGENCE_GROWTH && f.exponent >= SUMMABLE_EXPONENT => {
            Verdict3::Holds
        }
        Some(f) if last_growth < DIVERGENCE_GROWTH && f.exponent < SUMMABLE_EXPONENT => {
            Verdict3::Fails
        }
        // Increments vanished entirely: the sum has stopped moving.
        None if last_growth == 0.0 && partial_sums.last().is_some_and(|s| s.is_finite()) => {
            Verdict3::Fails
        }
        _ => Verdict3::Inconclusive,
    };
    DivergenceEvidence {
        horizons: horizons.to_vec(),
        partial_sums: partial_sums.to_vec(),
        last_growth,
        increment_fit,
        diverges,
    }
}

/// Whether a positive sequence tends to 0, judged by its log-log slope.
pub fn tends_to_zero(horizons: &[u64], values: &[f64]) -> (Option<PowerFit>, Verdict3) {
    let xs: Vec<f64> = horizons.iter().map(|h| *h as f64).collect();
    let fit = power_law_fit(&xs, values);
    let last = values.last().copied().unwrap_or(f64::NAN);
    let verdict = if last < 1e-6 {
        Verdict3::Holds
    } else {
        match fit {
            Some(f) if f.exponent <= RATIO_DECAY_SLOPE => Verdict3::Holds,
            Some(f) if f.exponent > RATIO_FLAT_SLOPE => Verdict3::Fails,
            _ => Verdict3::Inconclusive,
        }
    };
    (fit, verdict)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalityVerdict {
    CriticalEvidence,
    NotCritical,
    Vacuous,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalityReport {
    pub divergence: DivergenceEvidence,
    /// `1 / mu_n` at each horizon.
    pub inverse_mu: Vec<f64>,
    /// `(1 / mu_n) / S_n` at each horizon.
    pub ratio: Vec<f64>,
    pub ratio_fit: Option<PowerFit>,
    pub ratio_to_zero: Verdict3,
    pub verdict: CriticalityVerdict,
}

pub fn criticality_classify(model: &BpveiModel, horizons: &[u64]) -> CriticalityReport {
    let max = horizons.iter().copied().max().unwrap_or(1);
    let table = model.table(max);
    let norm = normalizer_from_table(&table, max);
    let mut mu = Vec::with_capacity(max as usize + 1);
    let mut acc = 1.0;
    for n in 0..=max {
        acc *= table.offspring(n).mean();
        mu.push(acc);
    }
    let sums: Vec<f64> = horizons
        .iter()
        .map(|h| norm.partial_sums[*h as usize])
        .collect();
    let inverse_mu: Vec<f64> = horizons.iter().map(|h| 1.0 / mu[*h as usize]).collect();
    let ratio: Vec<f64> = inverse_mu.iter().zip(&sums).map(|(i, s)| i / s).collect();
    let divergence = divergence_evidence(horizons, &sums);
    let (ratio_fit, ratio_to_zero) = tends_to_zero(horizons, &ratio);
    let verdict = if norm.vacuous {
        CriticalityVerdict::Vacuous
    } else {
        match (divergence.diverges, ratio_to_zero) {
            (Verdict3::Holds, Verdict3::Holds) => CriticalityVerdict::CriticalEvidence,
            (Verdict3::Fails, _) | (_, Verdict3::Fails) => CriticalityVerdict::NotCritical,
            _ => CriticalityVerdict::Inconclusive,
        }
    };
    CriticalityReport {
        divergence,
        inverse_mu,
        ratio,
        ratio_fit,
        ratio_to_zero,
        verdict,
    }
}
