//! Single-generation laws on the non-negative integers.
//!
//! A [`LawSpec`] is the configured, generation-parametrized description of a
//! law; [`LawSpec::instantiate`] evaluates its schedules at one generation and
//! returns an immutable [`LawInstance`] that carries the p.g.f., the moments
//! used throughout the crate (`m`, `sigma^2`, `f''(1)`, `nu`), and a sampler.
//!
//! Probabilities close to 1 are handled in complement form: most routines take
//! `u = 1 - s` and return `1 - f(1 - u)`, which keeps survival probabilities
//! and shape functions free of cancellation.

mod regularity;
mod sample;
mod schedule;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::ln_factorial;

pub use regularity::{
    regularity_check, regularity_check_laws, RegularityReport, RegularityRow, RegularityStatus,
};
pub use schedule::{Bounds, ParamSchedule, PowerEnvelope};

/// Tolerance on `sum(probs) == 1` for finite laws.
pub const FINITE_PMF_SUM_TOL: f64 = 1e-12;

/// Configured law family. JSON form: `{"family":"bernoulli_shift","p":{...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawSpec {
    /// p.g.f. `1 - p + p s`, `p` in `(0, 1]`.
    BernoulliShift { p: ParamSchedule },
    /// p.g.f. `1 / (1 + m (1 - s))`: mean `m`, constant shape function 1.
    LinearFractional { m: ParamSchedule },
    /// `P[X = k] = p (1 - p)^k`, `p` in `(0, 1)`.
    Geometric { p: ParamSchedule },
    /// p.g.f. `exp(-rate (1 - s))`.
    Poisson { rate: ParamSchedule },
    /// Explicit probabilities `P[X = k] = probs[k]`.
    FinitePmf { probs: Vec<f64> },
}

/// A law evaluated at one generation.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Law {
    BernoulliShift { p: f64 },
    LinearFractional { m: f64 },
    Geometric { p: f64 },
    Poisson { rate: f64 },
    FinitePmf { probs: Arc<[f64]> },
}

/// Immutable, shareable law with precomputed moments.
#[derive(Debug, Clone, PartialEq)]
pub struct LawInstance {
    law: Law,
    mean: f64,
    variance: f64,
    fact2: f64,
    // Finite laws only: sf[i] = P[X > i], cum_sf[j] = sum_{i > j} P[X > i].
    sf: Arc<[f64]>,
    cum_sf: Arc<[f64]>,
}

impl LawSpec {
    pub fn family_name(&self) -> &'static str {
        match self {
            LawSpec::BernoulliShift { .. } => "bernoulli_shift",
            LawSpec::LinearFractional { .. } => "linear_fractional",
            LawSpec::Geometric { .. } => "geometric",
            LawSpec::Poisson { .. } => "poisson",
            LawSpec::FinitePmf { .. } => "finite_pmf",
        }
    }

    pub fn bernoulli_shift(p: ParamSchedule) -> Self {
        LawSpec::BernoulliShift { p }
    }

    pub fn geometric(p: f64) -> Self {
        LawSpec::Geometric {
            p: ParamSchedule::constant(p),
        }
    }

    pub fn poisson(rate: f64) -> Self {
        LawSpec::Poisson {
            rate: ParamSchedule::constant(rate),
        }
    }

    pub fn linear_fractional(m: f64) -> Self {
        LawSpec::LinearFractional {
            m: ParamSchedule::constant(m),
        }
    }

    pub fn finite(probs: Vec<f64>) -> Self {
        LawSpec::FinitePmf { probs }
    }

    /// Evaluates the schedules at generation `n`.
    pub fn instantiate(&self, n: u64) -> Result<LawInstance> {
        let law = match self {
            LawSpec::BernoulliShift { p } => Law::BernoulliShift { p: p.eval(n) },
            LawSpec::LinearFractional { m } => Law::LinearFractional { m: m.eval(n) },
            LawSpec::Geometric { p } => Law::Geometric { p: p.eval(n) },
            LawSpec::Poisson { rate } => Law::Poisson { rate: rate.eval(n) },
            LawSpec::FinitePmf { probs } => Law::FinitePmf {
                probs: probs.clone().into(),
            },
        };
        LawInstance::new(law, n)
    }

    /// Checks admissibility of every generation in `from..=to`.
    pub fn validate_range(&self, from: u64, to: Option<u64>) -> Result<()> {
        let check = |name: &'static str,
                     s: &ParamSchedule,
                     upper: Option<(f64, bool)>,
                     expected: &'static str|
         -> Result<()> {
            s.validate(from)?;
            let b = s.bounds(from, to);
            let bad_lo = !(b.lo > 0.0 || (b.lo == 0.0 && b.lo_open));
            let bad_hi = match upper {
                Some((u, inclusive)) => {
                    if inclusive {
                        b.hi > u
                    } else {
                        !(b.hi < u || (b.hi == u && b.hi_open))
                    }
                }
                None => b.hi.is_infinite() && !b.hi_open,
            };
            if bad_lo || bad_hi || b.lo.is_nan() || b.hi.is_nan() {
                let (generation, value) = if bad_lo {
                    (from, b.lo)
                } else {
                    (to.unwrap_or(from), b.hi)
                };
                return Err(Error::Inadmissible {
                    generation,
                    param: name,
                    value,
                    expected,
                });
            }
            Ok(())
        };
        match self {
            LawSpec::BernoulliShift { p } => check("p", p, Some((1.0, true)), "(0, 1]"),
            LawSpec::Geometric { p } => check("p", p, Some((1.0, false)), "(0, 1)"),
            LawSpec::LinearFractional { m } => check("m", m, None, "(0, inf)"),
            LawSpec::Poisson { rate } => check("rate", rate, None, "(0, inf)"),
            LawSpec::FinitePmf { .. } => self.instantiate(from).map(|_| ()),
        }
    }

    /// Power-type upper envelope of the mean, when the schedule structure
    /// provides one.
    pub fn mean_envelope(&self) -> Option<PowerEnvelope> {
        match self {
            LawSpec::BernoulliShift { p } => p.envelope(),
            LawSpec::LinearFractional { m } => m.envelope(),
            LawSpec::Poisson { rate } => rate.envelope(),
            LawSpec::Geometric { p } => match p {
                ParamSchedule::Constant { value } => Some(PowerEnvelope {
                    coeff: (1.0 - value) / value,
                    exponent: 0.0,
                    valid_from: 1,
                }),
                _ => None,
            },
            LawSpec::FinitePmf { probs } => Some(PowerEnvelope {
                coeff: probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum(),
                exponent: 0.0,
                valid_from: 1,
            }),
        }
    }

    /// The law obtained from the schedule limits, if every limit exists and is
    /// admissible.
    pub fn limit_law(&self) -> Option<LawInstance> {
        let law = match self {
            LawSpec::BernoulliShift { p } => Law::BernoulliShift { p: p.limit()? },
            LawSpec::LinearFractional { m } => Law::LinearFractional { m: m.limit()? },
            LawSpec::Geometric { p } => Law::Geometric { p: p.limit()? },
            LawSpec::Poisson { rate } => Law::Poisson {
                rate: rate.limit()?,
            },
            LawSpec::FinitePmf { probs } => Law::FinitePmf {
                probs: probs.clone().into(),
            },
        };
        LawInstance::new(law, u64::MAX).ok()
    }
}

fn inadmissible(generation: u64, param: &'static str, value: f64, expected: &'static str) -> Error {
    Error::Inadmissible {
        generation,
        param,
        value,
        expected,
    }
}

impl LawInstance {
    /// Builds and validates a law; `generation` only labels errors.
    pub fn new(law: Law, generation: u64) -> Result<Self> {
        let empty: Arc<[f64]> = Arc::from(Vec::new());
        let (mean, variance, fact2, sf, cum_sf) = match &law {
            Law::BernoulliShift { p } => {
                let p = *p;
                if !(p > 0.0 && p <= 1.0) {
                    return Err(inadmissible(generation, "p", p, "(0, 1]"));
                }
                (p, p * (1.0 - p), 0.0, empty.clone(), empty)
            }
            Law::Geometric { p } => {
                let p = *p;
                if !(p > 0.0 && p < 1.0) {
                    return Err(inadmissible(generation, "p", p, "(0, 1)"));
                }
                let q = 1.0 - p;
                (
                    q / p,
                    q / (p * p),
                    2.0 * q * q / (p * p),
                    empty.clone(),
                    empty,
                )
            }
            Law::LinearFractional { m } => {
                let m = *m;
                if !(m > 0.0 && m.is_finite()) {
                    return Err(inadmissible(generation, "m", m, "(0, inf)"));
                }
                (m, m * (1.0 + m), 2.0 * m * m, empty.clone(), empty)
            }
            Law::Poisson { rate } => {
                let r = *rate;
                if !(r > 0.0 && r.is_finite()) {
                    return Err(inadmissible(generation, "rate", r, "(0, inf)"));
                }
                (r, r, r * r, empty.clone(), empty)
            }
            Law::FinitePmf { probs } => {
                if probs.is_empty() {
                    return Err(Error::Law(
                        "finite_pmf needs at least one probability".into(),
                    ));
                }
                if let Some(p) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
                    return Err(Error::Law(format!(
                        "finite_pmf probability {p} is negative"
                    )));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > FINITE_PMF_SUM_TOL {
                    return Err(Error::Law(format!(
                        "finite_pmf probabilities sum to {total}, not 1"
                    )));
                }
                if probs[0] >= 1.0 {
                    return Err(inadmissible(generation, "probs[0]", probs[0], "[0, 1)"));
                }
                let len = probs.len();
                let mut sf = vec![0.0; len];
                let mut acc = 0.0;
                for i in (0..len).rev() {
                    sf[i] = acc;
                    acc += probs[i];
                }
                let mut cum = vec![0.0; len];
                let mut acc = 0.0;
                for j in (0..len).rev() {
                    cum[j] = acc;
                    acc += sf[j];
                }
                let mean: f64 = probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
                let fact2: f64 = probs
                    .iter()
                    .enumerate()
                    .map(|(k, p)| (k as f64) * (k as f64 - 1.0) * p)
                    .sum();
                let variance = (fact2 + mean - mean * mean).max(0.0);
                (mean, variance, fact2, sf.into(), cum.into())
            }
        };
        Ok(LawInstance {
            law,
            mean,
            variance,
            fact2,
            sf,
            cum_sf,
        })
    }

    pub fn law(&self) -> &Law {
        &self.law
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// Second factorial moment `f''(1)`.
    pub fn fact2(&self) -> f64 {
        self.fact2
    }

    /// Normalized second factorial moment `f''(1) / f'(1)^2`.
    pub fn nu(&self) -> f64 {
        self.fact2 / (self.mean * self.mean)
    }

    pub fn zero_mass(&self) -> f64 {
        self.pgf_unchecked(0.0)
    }

    /// `p` of the geometric representation, for the two geometric-type families.
    fn geometric_p(&self) -> Option<f64> {
        match self.law {
            Law::Geometric { p } => Some(p),
            Law::LinearFractional { m } => Some(1.0 / (1.0 + m)),
            _ => None,
        }
    }

    /// Largest value with positive probability, if bounded.
    pub fn support_max(&self) -> Option<u64> {
        match &self.law {
            Law::BernoulliShift { .. } => Some(1),
            Law::FinitePmf { probs } => probs.iter().rposition(|p| *p > 0.0).map(|k| k as u64),
            _ => None,
        }
    }

    pub fn pgf(&self, s: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Domain {
                what: "s",
                value: s,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(self.pgf_unchecked(s))
    }

    pub fn pgf_unchecked(&self, s: f64) -> f64 {
        match &self.law {
            Law::BernoulliShift { p } => 1.0 - p + p * s,
            Law::Geometric { .. } | Law::LinearFractional { .. } => {
                let p = self.geometric_p().unwrap_or(1.0);
                p / (1.0 - (1.0 - p) * s)
            }
            Law::Poisson { rate } => (-rate * (1.0 - s)).exp(),
            Law::FinitePmf { probs } => probs.iter().rev().fold(0.0, |acc, p| acc * s + p),
        }
    }

    /// `E[s^X]` for `s >= 0`, including `s > 1`; `None` where the series
    /// diverges.
    pub fn pgf_extended(&self, s: f64) -> Option<f64> {
        let v = match &self.law {
            Law::Geometric { .. } | Law::LinearFractional { .. } => {
                let p = self.geometric_p().unwrap_or(1.0);
                let d = 1.0 - (1.0 - p) * s;
                if d <= 0.0 {
                    return None;
                }
                p / d
            }
            _ => self.pgf_unchecked(s),
        };
        v.is_finite().then_some(v)
    }

    /// `1 - f(1 - u)` for `u` in `[0, 1]`, without cancellation.
    pub fn pgf_complement(&self, u: f64) -> f64 {
        match &self.law {
            Law::BernoulliShift { p } => p * u,
            Law::Geometric { p } => {
                let q = 1.0 - p;
                q * u / (p + q * u)
            }
            Law::LinearFractional { m } => m * u / (1.0 + m * u),
            Law::Poisson { rate } => -(-rate * u).exp_m1(),
            Law::FinitePmf { .. } => u * self.finite_q(1.0 - u),
        }
    }

    // Q(s) = sum_i s^i P[X > i], so that 1 - f(s) = (1 - s) Q(s).
    fn finite_q(&self, s: f64) -> f64 {
        self.sf.iter().rev().fold(0.0, |acc, v| acc * s + v)
    }

    // R(s) = sum_j s^j sum_{i > j} P[X > i], so that phi(s) = R(s) / (m Q(s)).
    fn finite_r(&self, s: f64) -> f64 {
        self.cum_sf.iter().rev().fold(0.0, |acc, v| acc * s + v)
    }

    /// Shape function `phi(s)` defined by
    /// `1 / (1 - f(s)) = 1 / (m (1 - s)) + phi(s)`, taking `u = 1 - s`.
    /// At `u = 0` this is the extension value `nu / 2`.
    pub fn shape_complement(&self, u: f64) -> f64 {
        match &self.law {
            Law::BernoulliShift { .. } => 0.0,
            Law::Geometric { .. } | Law::LinearFractional { .. } => 1.0,
            Law::Poisson { rate } => {
                let x = rate * u;
                if x < 1e-3 {
                    let x2 = x * x;
                    0.5 + x / 12.0 - x * x2 / 720.0 + x * x2 * x2 / 30_240.0
                } else {
                    1.0 / -(-x).exp_m1() - 1.0 / x
                }
            }
            Law::FinitePmf { .. } => {
                let s = 1.0 - u;
                self.finite_r(s) / (self.mean * self.finite_q(s))
            }
        }
    }

    pub fn shape(&self, s: f64) -> f64 {
        self.shape_complement(1.0 - s)
    }

    pub fn pmf(&self, k: u64) -> f64 {
        match &self.law {
            Law::BernoulliShift { p } => match k {
                0 => 1.0 - p,
                1 => *p,
                _ => 0.0,
            },
            Law::Geometric { .. } | Law::LinearFractional { .. } => {
                let p = self.geometric_p().unwrap_or(1.0);
                p * (1.0 - p).powf(k as f64)
            }
            Law::Poisson { rate } => (-rate + k as f64 * rate.ln() - ln_factorial(k)).exp(),
            Law::FinitePmf { probs } => probs.get(k as usize).copied().unwrap_or(0.0),
        }
    }

    /// `P[X = 0..=k_max]`.
    pub fn pmf_prefix(&self, k_max: usize) -> Vec<f64> {
        match &self.law {
            Law::Poisson { rate } => {
                let mut out = Vec::with_capacity(k_max + 1);
                let mut term = (-rate).exp();
                for k in 0..=k_max {
                    if k > 0 {
                        term *= rate / k as f64;
                    }
                    out.push(term);
                }
                out
            }
            Law::Geometric { .. } | Law::LinearFractional { .. } => {
                let p = self.geometric_p().unwrap_or(1.0);
                let q = 1.0 - p;
                let mut out = Vec::with_capacity(k_max + 1);
                let mut term = p;
                for _ in 0..=k_max {
                    out.push(term);
                    term *= q;
                }
                out
            }
            _ => (0..=k_max as u64).map(|k| self.pmf(k)).collect(),
        }
    }

    /// Survival function `P[X > k]`, accurate in the far tail.
    pub fn sf(&self, k: u64) -> f64 {
        match &self.law {
            Law::BernoulliShift { p } => {
                if k == 0 {
                    *p
                } else {
                    0.0
                }
            }
            Law::Geometric { .. } | Law::LinearFractional { .. } => {
                let p = self.geometric_p().unwrap_or(1.0);
                (1.0 - p).powf(k as f64 + 1.0)
            }
            Law::Poisson { rate } => {
                if (k as f64) >= *rate {
                    let mut term = self.pmf(k + 1);
                    let mut sum = 0.0;
                    let mut j = k + 1;
                    while term > 0.0 && term > sum * 1e-17 {
                        sum += term;
                        j += 1;
                        term *= rate / j as f64;
                    }
                    sum
                } else {
                    let cdf: f64 = self.pmf_prefix(k as usize).iter().sum();
                    (1.0 - cdf).max(0.0)
                }
            }
            Law::FinitePmf { .. } => self.sf.get(k as usize).copied().unwrap_or(0.0),
        }
    }

    /// Certified upper bound on `sum_{j > k} j^2 P[X = j]`.
    pub fn second_moment_tail(&self, k: u64) -> f64 {
        match &self.law {
            Law::BernoulliShift { p } => {
                if k == 0 {
                    *p
                } else {
                    0.0
                }
            }
            Law::FinitePmf { probs } => probs
                .iter()
                .enumerate()
                .skip(k as usize + 1)
                .map(|(j, p)| (j * j) as f64 * p)
                .sum(),
            _ => {
                // Term ratios t_{j+1} / t_j are decreasing in j for both
                // infinite families; sum explicitly until the remainder is
                // negligible, then close with a geometric series.
                let ratio = |j: u64| -> f64 {
                    let jf = j as f64;
                    match &self.law {
                        Law::Poisson { rate } => rate * (jf + 1.0) / (jf * jf),
                        _ => {
                            let q = 1.0 - self.geometric_p().unwrap_or(1.0);
                            q * (jf + 1.0) * (jf + 1.0) / (jf * jf)
                        }
                    }
                };
                let mut j = k + 1;
                let mut sum = 0.0;
                loop {
                    let t = (j * j) as f64 * self.pmf(j);
                    let r = ratio(j);
                    if t == 0.0 {
                        return sum;
                    }
                    if r < 1.0 && t / (1.0 - r) <= 1e-9 * (sum + t) {
                        return sum + t / (1.0 - r);
                    }
                    sum += t;
                    j += 1;
                }
            }
        }
    }
}
