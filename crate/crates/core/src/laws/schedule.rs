//! Generation-indexed scalar parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A scalar law parameter as a function of the generation index `n`.
///
/// JSON form: `{"kind":"constant","value":0.5}`,
/// `{"kind":"power","coeff":1.0,"exponent":-2.0,"offset":0}` (evaluates to
/// `coeff * (n + offset)^exponent`), or
/// `{"kind":"table","entries":[...],"fallback":{...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParamSchedule {
    Constant {
        value: f64,
    },
    Power {
        coeff: f64,
        exponent: f64,
        #[serde(default)]
        offset: u64,
    },
    Table {
        entries: Vec<f64>,
        fallback: Box<ParamSchedule>,
    },
}

/// Infimum and supremum of a schedule over a generation range. An `open`
/// end is a limit that is approached but never attained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lo: f64,
    pub lo_open: bool,
    pub hi: f64,
    pub hi_open: bool,
}

impl Bounds {
    fn point(v: f64) -> Self {
        Bounds {
            lo: v,
            lo_open: false,
            hi: v,
            hi_open: false,
        }
    }

    fn merge(self, other: Bounds) -> Bounds {
        let (lo, lo_open) = if other.lo < self.lo || (other.lo == self.lo && !other.lo_open) {
            (other.lo, other.lo_open)
        } else {
            (self.lo, self.lo_open)
        };
        let (hi, hi_open) = if other.hi > self.hi || (other.hi == self.hi && !other.hi_open) {
            (other.hi, other.hi_open)
        } else {
            (self.hi, self.hi_open)
        };
        Bounds {
            lo,
            lo_open,
            hi,
            hi_open,
        }
    }
}

/// Upper envelope `coeff * n^exponent`, valid for every `n >= valid_from`
/// (and `valid_from >= 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerEnvelope {
    pub coeff: f64,
    pub exponent: f64,
    pub valid_from: u64,
}

impl PowerEnvelope {
    pub fn at(&self, n: u64) -> f64 {
        self.coeff * (n as f64).powf(self.exponent)
    }

    /// Product of two envelopes (both must hold, so the later start wins).
    pub fn times(&self, other: &PowerEnvelope) -> PowerEnvelope {
        PowerEnvelope {
            coeff: self.coeff * other.coeff,
            exponent: self.exponent + other.exponent,
            valid_from: self.valid_from.max(other.valid_from),
        }
    }

    /// Integral-test bound on `sum_{n > from} coeff * n^exponent`; `None`
    /// when the series does not converge or `from` precedes the envelope.
    pub fn tail_sum_after(&self, from: u64) -> Option<f64> {
        if self.exponent >= -1.0 || from < self.valid_from || from == 0 {
            return None;
        }
        let e1 = self.exponent + 1.0;
        Some(self.coeff * (from as f64).powf(e1) / -e1)
    }
}

impl ParamSchedule {
    pub fn constant(value: f64) -> Self {
        ParamSchedule::Constant { value }
    }

    pub fn power(coeff: f64, exponent: f64, offset: u64) -> Self {
        ParamSchedule::Power {
            coeff,
            exponent,
            offset,
        }
    }

    pub fn eval(&self, n: u64) -> f64 {
        match self {
            ParamSchedule::Constant { value } => *value,
            ParamSchedule::Power {
                coeff,
                exponent,
                offset,
            } => coeff * ((n + offset) as f64).powf(*exponent),
            ParamSchedule::Table { entries, fallback } => match entries.get(n as usize) {
                Some(v) => *v,
                None => fallback.eval(n),
            },
        }
    }

    /// Limit as `n -> infinity`, when it exists and is finite.
    pub fn limit(&self) -> Option<f64> {
        match self {
            ParamSchedule::Constant { value } => Some(*value),
            ParamSchedule::Power {
                coeff, exponent, ..
            } => {
                if *exponent < 0.0 {
                    Some(0.0)
                } else if *exponent == 0.0 {
                    Some(*coeff)
                } else {
                    None
                }
            }
            ParamSchedule::Table { fallback, .. } => fallback.limit(),
        }
    }

    /// Whether the schedule is of power type (constant counts as exponent 0).
    pub fn envelope(&self) -> Option<PowerEnvelope> {
        match self {
            ParamSchedule::Constant { value } => Some(PowerEnvelope {
                coeff: value.abs(),
                exponent: 0.0,
                valid_from: 1,
            }),
            ParamSchedule::Power {
                coeff,
                exponent,
                offset,
            } => {
                let coeff = if *exponent <= 0.0 {
                    coeff.abs()
                } else {
                    coeff.abs() * (1.0 + *offset as f64).powf(*exponent)
                };
                Some(PowerEnvelope {
                    coeff,
                    exponent: *exponent,
                    valid_from: 1,
                })
            }
            ParamSchedule::Table { entries, fallback } => fallback.envelope().map(|mut e| {
                e.valid_from = e.valid_from.max(entries.len() as u64).max(1);
                e
            }),
        }
    }

    /// Structural checks independent of any particular law.
    pub fn validate(&self, from: u64) -> Result<()> {
        match self {
            ParamSchedule::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::Schedule(format!("constant {value} is not finite")));
                }
            }
            ParamSchedule::Power {
                coeff,
                exponent,
                offset,
            } => {
                if !coeff.is_finite() || !exponent.is_finite() {
                    return Err(Error::Schedule("power coefficients must be finite".into()));
                }
                if *offset == 0 && *exponent < 0.0 && from == 0 {
                    return Err(Error::Schedule(
                        "power schedule with offset 0 and negative exponent evaluated at n = 0"
                            .into(),
                    ));
                }
            }
            ParamSchedule::Table { entries, fallback } => {
                if let Some(v) = entries.iter().find(|v| !v.is_finite()) {
                    return Err(Error::Schedule(format!("table entry {v} is not finite")));
                }
                fallback.validate(from.max(entries.len() as u64))?;
            }
        }
        Ok(())
    }

    /// Range of values over generations `from..=to` (`to = None`: open-ended).
    pub fn bounds(&self, from: u64, to: Option<u64>) -> Bounds {
        match self {
            ParamSchedule::Constant { value } => Bounds::point(*value),
            ParamSchedule::Power { .. } => {
                let a = self.eval(from);
                let b = match to {
                    Some(t) => Bounds::point(self.eval(t)),
                    None => match self.limit() {
                        Some(l) if l != a => Bounds {
                            lo: l,
                            lo_open: true,
                            hi: l,
                            hi_open: true,
                        },
                        Some(l) => Bounds::point(l),
                        None => {
                            // Diverges; sign follows the coefficient.
                            let l = if self.eval(from + 1) >= a {
                                f64::INFINITY
                            } else {
                                f64::NEG_INFINITY
                            };
                            Bounds {
                                lo: l,
                                lo_open: true,
                                hi: l,
                                hi_open: true,
                            }
                        }
                    },
                };
                Bounds::point(a).merge(b)
            }
            ParamSchedule::Table { entries, fallback } => {
                let len = entries.len() as u64;
                let mut acc: Option<Bounds> = None;
                let last_in_table = to.map_or(len, |t| t.saturating_add(1).min(len));
                for n in from..last_in_table {
                    let b = Bounds::point(entries[n as usize]);
                    acc = Some(acc.map_or(b, |a| a.merge(b)));
                }
                let needs_fallback = to.is_none_or(|t| t >= len);
                if needs_fallback {
                    let b = fallback.bounds(from.max(len), to);
                    acc = Some(acc.map_or(b, |a| a.merge(b)));
                }
                acc.unwrap_or_else(|| Bounds::point(fallback.eval(from)))
            }
        }
    }
}
