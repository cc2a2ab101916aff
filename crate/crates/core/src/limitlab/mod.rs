//! Numerical checks of the gamma limit of `Z_n / a_n` and of `P[Z_n > 0] -> 1`
//! in the critical regime.

mod gamma;

use serde::Serialize;

pub use gamma::{gamma_cdf, gamma_quantile};

use crate::analysis::{
    criticality_classify, dyadic_horizons, normalizer, CriticalityVerdict, Verdict3,
};
use crate::environment::{BpveiModel, Role};
use crate::error::{Error, Result};
use crate::laws::{regularity_check_laws, RegularityReport};
use crate::montecarlo::{checkpoint_samples, EmpiricalDistribution, SimConfig};
use crate::pgf::PgfEngine;

/// Epsilons at which the regularity condition is evaluated.
pub const REGULARITY_EPSILONS: [f64; 3] = [0.5, 0.1, 0.01];

/// One-sample Kolmogorov-Smirnov distance of a sorted sample to `cdf`.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let r = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, x) in sorted.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((i + 1) as f64 / r - f).max(f - i as f64 / r);
    }
    d.clamp(0.0, 1.0)
}

/// Empirical Laplace transform `mean exp(-lambda x)` of a normalized sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplaceProbe {
    pub lambda: f64,
    pub empirical: f64,
    /// `(1 + lambda)^(-shape)` when a limit shape is known.
    pub target: Option<f64>,
    pub stderr: f64,
}

impl LaplaceProbe {
    /// `|empirical - target| <= max(k * stderr, floor)`.
    pub fn within(&self, k: f64, floor: f64) -> Option<bool> {
        self.target
            .map(|t| (self.empirical - t).abs() <= (k * self.stderr).max(floor))
    }
}

pub fn empirical_laplace(sample: &[f64], lambda: f64) -> LaplaceProbe {
    let r = sample.len() as f64;
    let terms: Vec<f64> = sample.iter().map(|x| (-lambda * x).exp()).collect();
    let mean = terms.iter().sum::<f64>() / r;
    let var = if sample.len() > 1 {
        terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (r - 1.0)
    } else {
        0.0
    };
    LaplaceProbe {
        lambda,
        empirical: mean,
        target: None,
        stderr: (var / r).sqrt(),
    }
}

/// A hypothesis of the limit theorem with its numeric evidence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitCheck {
    pub status: Verdict3,
    /// Limiting value from the schedule structure, when one exists.
    pub limit: Option<f64>,
    pub min_over_horizon: f64,
    pub max_over_horizon: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionAudit {
    pub horizon: u64,
    /// `nu_n -> nu > 0`.
    pub nu: LimitCheck,
    /// `alpha_n -> alpha > 0`.
    pub alpha: LimitCheck,
    /// `tau = inf_n h_n(0) > 0`; `limit` is `h(0)` of the limiting law.
    pub tau: LimitCheck,
    /// `sup_n beta_n^2 < infinity`.
    pub beta2: LimitCheck,
    pub criticality: CriticalityVerdict,
    pub regularity: Verdict3,
    pub regularity_report: RegularityReport,
}

impl AssumptionAudit {
    /// Every hypothesis holds.
    pub fn passes(&self) -> bool {
        [
            self.nu.status,
            self.alpha.status,
            self.tau.status,
            self.beta2.status,
            self.regularity,
        ]
        .iter()
        .all(|s| *s == Verdict3::Holds)
            && self.criticality == CriticalityVerdict::CriticalEvidence
    }

    /// `2 alpha / nu` when both limits exist and are positive.
    pub fn shape(&self) -> Option<f64> {
        match (self.alpha.limit, self.nu.limit) {
            (Some(a), Some(v)) if a > 0.0 && v > 0.0 => Some(2.0 * a / v),
            _ => None,
        }
    }
}

fn extremes(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

fn positive_limit(limit: Option<f64>, envelope_exponent: Option<f64>) -> Verdict3 {
    match limit {
        Some(l) if l > 0.0 && l.is_finite() => Verdict3::Holds,
        Some(_) => Verdict3::Fails,
        None if envelope_exponent.is_some_and(|e| e < 0.0) => Verdict3::Fails,
        None => Verdict3::Inconclusive,
    }
}

pub fn assumption_audit(model: &BpveiModel, horizon: u64) -> AssumptionAudit {
    let horizon = horizon.max(1);
    let table = model.table(horizon);
    let off_limit = model.limit_law(Role::Offspring);
    let imm_limit = model.limit_law(Role::Immigration);
    let gens = 0..=horizon;

    let (lo, hi) = extremes(gens.clone().map(|n| table.offspring(n).nu()));
    let nu_lim = off_limit.as_ref().map(|l| l.nu());
    let nu = LimitCheck {
        // nu_n = 0 throughout (two-point laws) cannot tend to a positive limit.
        status: if hi == 0.0 {
            Verdict3::Fails
        } else {
            positive_limit(nu_lim, None)
        },
        limit: nu_lim,
        min_over_horizon: lo,
        max_over_horizon: hi,
    };

    let (lo, hi) = extremes(gens.clone().map(|n| table.immigration(n).mean()));
    let alpha_lim = imm_limit.as_ref().map(|l| l.mean());
    let alpha_exp = model.mean_envelope(Role::Immigration).map(|e| e.exponent);
    let alpha = LimitCheck {
        status: positive_limit(alpha_lim, alpha_exp),
        limit: alpha_lim,
        min_over_horizon: lo,
        max_over_horizon: hi,
    };

    let (lo, hi) = extremes(gens.clone().map(|n| table.immigration(n).zero_mass()));
    let tau_lim = imm_limit.as_ref().map(|l| l.zero_mass());
    let tau_status = if lo <= 0.0 {
        Verdict3::Fails
    } else {
        match tau_lim {
            Some(t) if t > 0.0 => Verdict3::Holds,
            Some(_) => Verdict3::Fails,
            // Growing immigration means drives h_n(0) to 0.
            None if alpha_exp.is_some_and(|e| e > 0.0) => Verdict3::Fails,
            None => Verdict3::Inconclusive,
        }
    };
    let tau = LimitCheck {
        status: tau_status,
        limit: tau_lim,
        min_over_horizon: tau_lim.map_or(lo, |t| lo.min(t)),
        max_over_horizon: hi,
    };

    let (lo, hi) = extremes(gens.map(|n| table.immigration(n).variance()));
    let beta_lim = imm_limit.as_ref().map(|l| l.variance());
    let beta2 = LimitCheck {
        status: match beta_lim {
            Some(b) if b.is_finite() && hi.is_finite() => Verdict3::Holds,
            Some(_) => Verdict3::Fails,
            None => Verdict3::Inconclusive,
        },
        limit: beta_lim,
        min_over_horizon: lo,
        max_over_horizon: hi,
    };

    let criticality =
        criticality_classify(model, &dyadic_horizons(16.min(horizon), horizon)).verdict;
    let regularity_report = regularity_check_laws(
        table.offspring_laws(),
        off_limit.as_ref(),
        &REGULARITY_EPSILONS,
    );
    let regularity = if regularity_report.satisfied() {
        Verdict3::Holds
    } else {
        Verdict3::Inconclusive
    };

    AssumptionAudit {
        horizon,
        nu,
        alpha,
        tau,
        beta2,
        criticality,
        regularity,
        regularity_report,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaLimitReport {
    pub n: u64,
    pub a_n: f64,
    pub alpha: Option<f64>,
    pub nu: Option<f64>,
    pub shape: Option<f64>,
    /// False when the normalizer vanishes or a limit is missing.
    pub applicable: bool,
    pub reps: u64,
    pub ks: Option<f64>,
    pub laplace: Vec<LaplaceProbe>,
    pub survival: f64,
    pub survival_stderr: f64,
    /// `1 - F_n(0)` from the process generating function.
    pub survival_exact: f64,
    pub exploded: u64,
}

impl GammaLimitReport {
    /// Simulated survival within `k` standard errors of the exact value.
    pub fn survival_within(&self, k: f64) -> bool {
        (self.survival - self.survival_exact).abs() <= k * self.survival_stderr
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaLimitRun {
    pub model: String,
    pub seed: u64,
    pub lambdas: Vec<f64>,
    pub audit: AssumptionAudit,
    pub reports: Vec<GammaLimitReport>,
}

/// Simulates `reps` trajectories up to the largest `n` in `n_list` once and
/// compares `Z_n / a_n` with `Gamma(2 alpha / nu, 1)` at every listed `n`.
pub fn verify_gamma_limit(
    model: &BpveiModel,
    n_list: &[u64],
    reps: u64,
    seed: u64,
    lambdas: &[f64],
) -> Result<GammaLimitRun> {
    if n_list.is_empty() || n_list.contains(&0) {
        return Err(Error::Config(
            "n list must hold positive generations".into(),
        ));
    }
    if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::Domain {
            what: "lambda",
            value: *l,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let max_n = *n_list.iter().max().expect("nonempty");
    let audit = assumption_audit(model, max_n);
    let shape = audit.shape();
    let norm = normalizer(model, max_n);
    let engine = PgfEngine::new(model, max_n);
    let config = SimConfig::new(max_n, reps, seed).with_record(n_list.to_vec());
    let samples = checkpoint_samples(model, &config)?;

    let reports = samples
        .iter()
        .map(|sample| -> Result<GammaLimitReport> {
            let n = sample.n;
            let a_n = norm.a_at(n);
            let applicable = a_n > 0.0 && a_n.is_finite() && shape.is_some();
            let p = sample.positive_fraction();
            let (ks, laplace) = if applicable {
                gamma_fit(sample, a_n, shape.expect("applicable"), lambdas)
            } else {
                (None, Vec::new())
            };
            Ok(GammaLimitReport {
                n,
                a_n,
                alpha: audit.alpha.limit,
                nu: audit.nu.limit,
                shape,
                applicable,
                reps,
                ks,
                laplace,
                survival: p,
                survival_stderr: (p * (1.0 - p) / reps as f64).sqrt(),
                survival_exact: engine.survival(n)?,
                exploded: sample.exploded,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(GammaLimitRun {
        model: model.name.clone(),
        seed,
        lambdas: lambdas.to_vec(),
        audit,
        reports,
    })
}

fn gamma_fit(
    sample: &EmpiricalDistribution,
    a_n: f64,
    shape: f64,
    lambdas: &[f64],
) -> (Option<f64>, Vec<LaplaceProbe>) {
    let scaled = sample.normalized(a_n);
    let ks = ks_statistic(scaled.values(), |x| gamma::gamma_cdf_unchecked(shape, x));
    let probes = lambdas
        .iter()
        .map(|l| LaplaceProbe {
            target: Some((1.0 + l).powf(-shape)),
            ..empirical_laplace(scaled.values(), *l)
        })
        .collect();
    (Some(ks), probes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{preset, GenerationSchedule};
    use crate::laws::{LawSpec, ParamSchedule};
    use crate::montecarlo::ks_critical_1pct;
    use crate::montecarlo::rng::{stream, DOMAIN_AUX};
    use rand::Rng;

    #[test]
    fn ks_simple_cases() {
        assert_eq!(ks_statistic(&[0.0], |x| gamma_cdf(1.0, x).unwrap()), 1.0);
        let r = 100;
        let q: Vec<f64> = (1..=r)
            .map(|i| gamma_quantile(1.0, (i as f64 - 0.5) / r as f64).unwrap())
            .collect();
        let d = ks_statistic(&q, |x| gamma_cdf(1.0, x).unwrap());
        assert!((d - 0.005).abs() < 1e-9, "{d}");
    }

    #[test]
    fn ks_self_consistency() {
        let r = 10_000;
        let mut rng = stream(7, DOMAIN_AUX, 0, 0);
        let mut xs: Vec<f64> = (0..r)
            .map(|_| gamma_quantile(1.0, rng.random::<f64>()).unwrap())
            .collect();
        xs.sort_by(f64::total_cmp);
        let d = ks_statistic(&xs, |x| gamma_cdf(1.0, x).unwrap());
        assert!(d < 1.63 / (r as f64).sqrt(), "{d}");
    }

    #[test]
    fn laplace_simple_cases() {
        let p = empirical_laplace(&[0.0; 10], 3.0);
        assert_eq!(p.empirical, 1.0);
        assert_eq!(p.stderr, 0.0);
        let l = 1.7;
        let p = empirical_laplace(&[2f64.ln() / l], l);
        assert!((p.empirical - 0.5).abs() < 1e-15);
    }

    #[test]
    fn critical_preset_audit_passes() {
        let a = assumption_audit(&preset("critical_geo_pois", None).unwrap(), 256);
        assert_eq!(a.nu.limit, Some(2.0));
        assert_eq!(a.alpha.limit, Some(1.0));
        assert!((a.tau.limit.unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(a.beta2.max_over_horizon, 1.0);
        assert!(a.passes(), "{a:?}");
        assert_eq!(a.shape(), Some(1.0));
    }

    #[test]
    fn example_b_not_applicable() {
        let m = preset("example_b", None).unwrap();
        let a = assumption_audit(&m, 64);
        assert_eq!(a.nu.status, Verdict3::Fails);
        assert!(!a.passes());
        let run = verify_gamma_limit(&m, &[10], 200, 1, &[1.0]).unwrap();
        assert!(!run.reports[0].applicable);
        assert!(run.reports[0].ks.is_none());
    }

    #[test]
    fn vanishing_immigration_flags_tau() {
        // h_n(0) = 1 - p_n with p_n -> 1 keeps tau > 0, but a growing
        // poisson rate drives it to 0.
        let m = BpveiModel::new(
            "grow",
            GenerationSchedule::homogeneous(LawSpec::geometric(0.5)),
            GenerationSchedule::homogeneous(LawSpec::Poisson {
                rate: ParamSchedule::power(1.0, 0.5, 1),
            }),
            false,
        )
        .unwrap();
        let a = assumption_audit(&m, 64);
        assert_eq!(a.tau.status, Verdict3::Fails);
    }

    #[test]
    fn critical_preset_gamma_limit_small() {
        let m = preset("critical_geo_pois", None).unwrap();
        let run = verify_gamma_limit(&m, &[100, 400], 4000, 11, &[1.0]).unwrap();
        for r in &run.reports {
            assert!(r.applicable);
            assert!((r.a_n - r.n as f64).abs() < 1e-9);
            let probe = r.laplace[0];
            assert_eq!(probe.target, Some(0.5));
            assert!(probe.within(4.0, 0.02).unwrap(), "{probe:?}");
            assert!(r.survival_within(4.0), "{r:?}");
        }
        let ks: Vec<f64> = run.reports.iter().map(|r| r.ks.unwrap()).collect();
        assert!(
            ks[1] < 2.0 * ks_critical_1pct(4000, 4000).max(0.05),
            "{ks:?}"
        );
    }

    #[test]
    fn invalid_inputs() {
        let m = preset("critical_geo_pois", None).unwrap();
        assert!(verify_gamma_limit(&m, &[], 10, 1, &[1.0]).is_err());
        assert!(verify_gamma_limit(&m, &[5], 10, 1, &[0.0]).is_err());
        assert!(verify_gamma_limit(&m, &[0], 10, 1, &[1.0]).is_err());
    }
}
