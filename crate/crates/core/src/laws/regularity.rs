//! Evidence for the uniform second-moment regularity condition
//! `E[X^2; X > c (1 + E X)] <= eps * E[X^2; X >= 2]` over a finite horizon.
//!
//! For each generation the smallest admissible `c` is found exactly: the
//! left side is a step function of the integer threshold `k = floor(c (1 + m))`,
//! so the infimum is `k* / (1 + m)` where `k*` is the first integer whose
//! certified tail bound `sum_{j > k} j^2 P[X = j]` fits under `eps * rhs`.

use serde::Serialize;

use super::{LawInstance, LawSpec};
use crate::error::Result;

/// Largest threshold scanned before a generation is declared inconclusive.
const MAX_THRESHOLD: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularityStatus {
    /// A finite constant works for every generation up to the horizon (and
    /// for the limiting law, when one exists).
    Satisfied,
    /// `P[X >= 2] = 0` at every generation: both sides vanish.
    Degenerate,
    /// Some generation needs a threshold beyond the scan limit.
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularityRow {
    pub epsilon: f64,
    pub status: RegularityStatus,
    /// Smallest constant valid for all checked generations.
    pub c: f64,
    /// Generation attaining `c` (`None` when the limiting law attains it).
    pub worst_generation: Option<u64>,
    /// Constant required by the limiting law alone.
    pub limit_c: Option<f64>,
    pub degenerate_generations: u64,
    /// First generation whose scan hit the limit.
    pub violation: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularityReport {
    pub horizon: u64,
    pub rows: Vec<RegularityRow>,
}

impl RegularityReport {
    pub fn satisfied(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.status != RegularityStatus::Inconclusive)
    }
}

/// `(c, degenerate)`, or `None` if the scan limit was hit.
fn min_constant(law: &LawInstance, eps: f64) -> Option<(f64, bool)> {
    let rhs = (law.variance() + law.mean() * law.mean() - law.pmf(1)).max(0.0);
    let degenerate = rhs <= 0.0 || law.support_max().is_some_and(|b| b < 2);
    let target = if degenerate { 0.0 } else { eps * rhs };
    let mut k = 0;
    loop {
        if law.second_moment_tail(k) <= target {
            return Some((k as f64 / (1.0 + law.mean()), degenerate));
        }
        k += 1;
        if k > MAX_THRESHOLD {
            return None;
        }
    }
}

/// Runs the check over explicit per-generation laws plus an optional limit law.
pub fn regularity_check_laws(
    laws: &[LawInstance],
    limit: Option<&LawInstance>,
    epsilons: &[f64],
) -> RegularityReport {
    let rows = epsilons
        .iter()
        .map(|&eps| {
            let mut c = 0.0f64;
            let mut worst = None;
            let mut violation = None;
            let mut degenerate_generations = 0;
            for (n, law) in laws.iter().enumerate() {
                match min_constant(law, eps) {
                    Some((cn, deg)) => {
                        if deg {
                            degenerate_generations += 1;
                        }
                        if cn > c || worst.is_none() {
                            c = c.max(cn);
                            worst = Some(n as u64);
                        }
                    }
                    None => {
                        violation.get_or_insert(n as u64);
                    }
                }
            }
            let limit_c = limit.and_then(|l| min_constant(l, eps)).map(|(lc, _)| lc);
            if let Some(lc) = limit_c {
                if lc > c {
                    c = lc;
                    worst = None;
                }
            }
            let status = if violation.is_some() {
                RegularityStatus::Inconclusive
            } else if degenerate_generations == laws.len() as u64 {
                RegularityStatus::Degenerate
            } else {
                RegularityStatus::Satisfied
            };
            RegularityRow {
                epsilon: eps,
                status,
                c,
                worst_generation: worst,
                limit_c,
                degenerate_generations,
                violation,
            }
        })
        .collect();
    RegularityReport {
        horizon: laws.len().saturating_sub(1) as u64,
        rows,
    }
}

/// Regularity evidence for one configured law over generations `0..=horizon`.
pub fn regularity_check(
    offspring: &LawSpec,
    epsilons: &[f64],
    horizon: u64,
) -> Result<RegularityReport> {
    let laws = (0..=horizon)
        .map(|n| offspring.instantiate(n))
        .collect::<Result<Vec<_>>>()?;
    Ok(regularity_check_laws(
        &laws,
        offspring.limit_law().as_ref(),
        epsilons,
    ))
}
