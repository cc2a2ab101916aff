use bpvei_core::analysis::{
    criticality_classify, dyadic_horizons, extinction_conditions, normalizer, variance_audit,
    MomentTable,
};
use bpvei_core::exact::{propagate, propagate_adaptive, survival_bounds};
use bpvei_core::limitlab::verify_gamma_limit;
use bpvei_core::montecarlo::{checkpoint_samples, survival_curve, Engine, Sampler, SimConfig};
use bpvei_core::pgf::PgfEngine;
use bpvei_core::{preset, BpveiModel};
use serde_json::json;

use crate::args::*;
use crate::output::{json, num, opt_num, Artifact, Csv};
use crate::CliError;

pub struct Report {
    pub artifacts: Vec<Artifact>,
    pub guard: Option<String>,
    /// Output prefix used when `--out` is absent; `None` prints to stdout.
    pub default_out: Option<&'static str>,
}

impl Report {
    fn single(content: String) -> Self {
        Report {
            artifacts: vec![Artifact::main(content)],
            guard: None,
            default_out: None,
        }
    }
}

pub fn name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Validate => "validate",
        Command::Pgf(_) => "pgf",
        Command::Oracle(_) => "oracle",
        Command::Moments(_) => "moments",
        Command::Criticality(_) => "criticality",
        Command::Extinction(_) => "extinction",
        Command::Simulate(_) => "simulate",
        Command::Survival(_) => "survival",
        Command::Figure1(_) => "figure1",
        Command::GammaLimit(_) => "gamma-limit",
        Command::Replay(_) => "replay",
    }
}

pub fn dispatch(cli: &Cli, model: &BpveiModel) -> Result<Report, CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Validate => {
            let mut text = model.to_json();
            text.push('\n');
            Ok(Report::single(text))
        }
        Command::Pgf(a) => pgf(model, a, g.format),
        Command::Oracle(a) => oracle(model, a, g.format),
        Command::Moments(a) => moments(model, a, g.format),
        Command::Criticality(a) => criticality(model, a, g.format),
        Command::Extinction(a) => extinction(model, a, g.format),
        Command::Simulate(a) => simulate(model, a, g.seed, g.format),
        Command::Survival(a) => survival(model, a, g.seed, g.format),
        Command::Figure1(a) => figure1(a, g.seed),
        Command::GammaLimit(a) => gamma_limit(model, a, g.seed, g.format),
        Command::Replay(_) => unreachable!("replay is resolved before dispatch"),
    }
}

fn sim_config(a: &SimArgs, seed: u64) -> SimConfig {
    let mut c = SimConfig::new(a.horizon, a.reps, seed);
    c.engine = match a.engine {
        EngineArg::Direct => Engine::Direct,
        EngineArg::Decomposition => Engine::Decomposition,
    };
    c.sampler = match a.sampler {
        SamplerArg::Individual => Sampler::Individual,
        SamplerArg::Aggregate => Sampler::Aggregate,
    };
    c.overflow_guard = a.overflow_guard;
    c
}

fn exploded_guard(exploded: u64) -> Option<String> {
    (exploded > 0).then(|| format!("{exploded} trajectories exceeded the overflow guard"))
}

fn pgf(model: &BpveiModel, a: &PgfArgs, format: Format) -> Result<Report, CliError> {
    let engine = PgfEngine::new(model, a.n);
    let curve = if a.process {
        engine.process_curve(a.n, a.grid)?
    } else {
        engine.composition_curve(a.k, a.n, a.grid)?
    };
    Ok(Report::single(match format {
        Format::Json => json(&curve),
        Format::Csv => {
            let mut csv = Csv::new(&["s", "value", "k", "n"]);
            let k = curve.k.map(|k| k.to_string()).unwrap_or_default();
            for (s, v) in curve.grid.iter().zip(&curve.values) {
                csv.row(&[num(*s), num(*v), k.clone(), curve.n.to_string()]);
            }
            csv.finish()
        }
    }))
}

fn oracle(model: &BpveiModel, a: &OracleArgs, format: Format) -> Result<Report, CliError> {
    let pmf = match a.max_cutoff {
        Some(max) => propagate_adaptive(model, a.n, a.cutoff, a.tail_tol, max)?,
        None => propagate(model, a.n, a.cutoff, a.tail_tol)?,
    };
    let guard = pmf.tail_exceeded.then(|| {
        format!(
            "tail mass {} exceeds tolerance {} at cutoff {}",
            num(pmf.tail),
            num(pmf.tail_tol),
            pmf.cutoff
        )
    });
    let content = match format {
        Format::Json => json(&serde_json::json!({
            "pmf": &pmf,
            "tail_upper": pmf.tail_upper(),
            "survival": survival_bounds(&pmf),
        })),
        Format::Csv => {
            let comment = format!(
                "n={} cutoff={} tail={} tail_upper={} tail_exceeded={}",
                pmf.n,
                pmf.cutoff,
                num(pmf.tail),
                num(pmf.tail_upper()),
                pmf.tail_exceeded
            );
            let mut csv = Csv::with_comment(&comment, &["k", "prob"]);
            for (k, p) in pmf.probs.iter().enumerate() {
                csv.row(&[k.to_string(), num(*p)]);
            }
            csv.finish()
        }
    };
    Ok(Report {
        guard,
        ..Report::single(content)
    })
}

fn moments(model: &BpveiModel, a: &MomentsArgs, format: Format) -> Result<Report, CliError> {
    let table = MomentTable::build(model, a.horizon);
    let audit = variance_audit(model, a.horizon);
    let norm = normalizer(model, a.horizon);
    let guard = table
        .overflow
        .then(|| "a moment left the floating-point range".to_string());
    let content = match format {
        Format::Json => json(&json!({
            "table": &table,
            "variance_audit": &audit,
            "normalizer": &norm,
        })),
        Format::Csv => {
            let mut csv = Csv::new(&[
                "n",
                "m",
                "sigma2",
                "alpha",
                "beta2",
                "mu",
                "nu",
                "expected",
                "variance",
                "printed_variance",
                "a_n",
            ]);
            for r in &table.rows {
                let printed = match r.n {
                    0 => 0.0,
                    n => audit[n as usize - 1].printed,
                };
                csv.row(&[
                    r.n.to_string(),
                    num(r.m),
                    num(r.sigma2),
                    num(r.alpha),
                    num(r.beta2),
                    num(r.mu),
                    num(r.nu),
                    num(r.expected),
                    num(r.variance),
                    num(printed),
                    num(norm.a_at(r.n)),
                ]);
            }
            csv.finish()
        }
    };
    Ok(Report {
        guard,
        ..Report::single(content)
    })
}

fn criticality(
    model: &BpveiModel,
    a: &CriticalityArgs,
    format: Format,
) -> Result<Report, CliError> {
    if a.min_horizon == 0 || a.min_horizon > a.horizon {
        return Err(CliError::Usage(
            "need 1 <= --min-horizon <= --horizon".into(),
        ));
    }
    let r = criticality_classify(model, &dyadic_horizons(a.min_horizon, a.horizon));
    Ok(match format {
        Format::Json => Report::single(json(&r)),
        Format::Csv => {
            let mut csv = Csv::new(&["n", "partial_sum", "inverse_mu", "ratio"]);
            for (i, h) in r.divergence.horizons.iter().enumerate() {
                csv.row(&[
                    h.to_string(),
                    num(r.divergence.partial_sums[i]),
                    num(r.inverse_mu[i]),
                    num(r.ratio[i]),
                ]);
            }
            let verdict = json(&json!({
                "verdict": r.verdict,
                "diverges": r.divergence.diverges,
                "last_growth": r.divergence.last_growth,
                "increment_fit": r.divergence.increment_fit,
                "ratio_to_zero": r.ratio_to_zero,
                "ratio_fit": r.ratio_fit,
            }));
            Report {
                artifacts: vec![
                    Artifact::main(csv.finish()),
                    Artifact::side(".verdict.json", verdict),
                ],
                guard: None,
                default_out: None,
            }
        }
    })
}

fn extinction(model: &BpveiModel, a: &ExtinctionArgs, format: Format) -> Result<Report, CliError> {
    let r = extinction_conditions(model, a.horizon);
    Ok(match format {
        Format::Json => Report::single(json(&r)),
        Format::Csv => {
            let engine = PgfEngine::new(model, r.horizon);
            let terms = bpvei_core::analysis::extinction::return_terms(&engine, r.horizon);
            let mut csv = Csv::new(&[
                "n",
                "return_term",
                "partial_sum",
                "composed_zero",
                "q_raw",
                "q_bound",
            ]);
            let mut acc = 0.0;
            for (n, t) in terms.iter().enumerate() {
                acc += t;
                let gap = engine.compose_complement(-1, n as u64, 1.0)?;
                csv.row(&[
                    n.to_string(),
                    num(*t),
                    num(acc),
                    num(1.0 - gap),
                    num(r.q.raw[n]),
                    num(r.q.bounds[n]),
                ]);
            }
            let verdict = json(&json!({
                "verdict": r.verdict,
                "condition1": r.condition1,
                "condition2": r.condition2,
                "gap_fit": r.gap_fit,
                "increment_fit": r.sums.increment_fit,
                "analytic_tail": r.analytic_tail,
                "sum_upper": r.sum_upper,
                "q_hat": r.q.q_hat,
                "q_tail_factor": r.q.tail_factor,
                "q_truncated": r.q.truncated,
            }));
            Report {
                artifacts: vec![
                    Artifact::main(csv.finish()),
                    Artifact::side(".verdict.json", verdict),
                ],
                guard: None,
                default_out: None,
            }
        }
    })
}

fn simulate(
    model: &BpveiModel,
    a: &SimulateArgs,
    seed: u64,
    format: Format,
) -> Result<Report, CliError> {
    let record = if a.record.is_empty() {
        vec![a.sim.horizon]
    } else {
        a.record.clone()
    };
    let config = sim_config(&a.sim, seed).with_record(record);
    let samples = checkpoint_samples(model, &config)?;
    let exploded = samples.first().map_or(0, |s| s.exploded);
    let content = if a.raw {
        let last = samples
            .iter()
            .max_by_key(|s| s.n)
            .expect("at least one checkpoint");
        let mut text = String::new();
        for v in last.values() {
            text.push_str(&format!("{}\n", *v as u64));
        }
        text
    } else {
        let rows: Vec<(u64, f64, f64, usize)> = samples
            .iter()
            .map(|s| {
                let r = s.reps();
                let mean = s.mean();
                let var = s.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                    / (r.max(2) - 1) as f64;
                (s.n, mean, (var / r as f64).sqrt(), r)
            })
            .collect();
        match format {
            Format::Json => json(
                &rows
                    .iter()
                    .map(|(n, e, se, r)| json!({"n": n, "estimate": e, "stderr": se, "R": r}))
                    .collect::<Vec<_>>(),
            ),
            Format::Csv => {
                let mut csv = Csv::new(&["n", "estimate", "stderr", "R"]);
                for (n, e, se, r) in rows {
                    csv.row(&[n.to_string(), num(e), num(se), r.to_string()]);
                }
                csv.finish()
            }
        }
    };
    Ok(Report {
        guard: exploded_guard(exploded),
        ..Report::single(content)
    })
}

fn survival(
    model: &BpveiModel,
    a: &SurvivalArgs,
    seed: u64,
    format: Format,
) -> Result<Report, CliError> {
    let curve = survival_curve(model, &sim_config(&a.sim, seed))?;
    let content = match format {
        Format::Json => json(&curve),
        Format::Csv => {
            let mut csv = Csv::new(&["n", "estimate", "stderr", "R"]);
            for p in &curve.points {
                csv.row(&[
                    p.n.to_string(),
                    num(p.estimate),
                    num(p.stderr),
                    p.reps.to_string(),
                ]);
            }
            csv.finish()
        }
    };
    Ok(Report {
        guard: exploded_guard(curve.exploded),
        ..Report::single(content)
    })
}

fn figure1(a: &Figure1Args, seed: u64) -> Result<Report, CliError> {
    let mut artifacts = Vec::new();
    let mut exploded = 0;
    for name in ["example_b", "example_c"] {
        let model = preset(name, None)?;
        let curve = survival_curve(&model, &SimConfig::new(a.horizon, a.reps, seed))?;
        exploded += curve.exploded;
        let engine = PgfEngine::new(&model, a.horizon);
        let mut csv = Csv::new(&["n", "p_hat", "stderr", "exact"]);
        for p in &curve.points {
            csv.row(&[
                p.n.to_string(),
                num(p.estimate),
                num(p.stderr),
                num(engine.survival(p.n)?),
            ]);
        }
        artifacts.push(Artifact::side(&format!("_{name}.csv"), csv.finish()));
    }
    Ok(Report {
        artifacts,
        guard: exploded_guard(exploded),
        default_out: Some("figure1"),
    })
}

fn gamma_limit(
    model: &BpveiModel,
    a: &GammaLimitArgs,
    seed: u64,
    format: Format,
) -> Result<Report, CliError> {
    let run = verify_gamma_limit(model, &a.n, a.reps, seed, &a.lambdas)?;
    let exploded = run.reports.iter().map(|r| r.exploded).max().unwrap_or(0);
    let mut csv = Csv::new(&["n", "ks", "lambda", "empirical", "target", "stderr"]);
    for r in &run.reports {
        for p in &r.laplace {
            csv.row(&[
                r.n.to_string(),
                opt_num(r.ks),
                num(p.lambda),
                num(p.empirical),
                opt_num(p.target),
                num(p.stderr),
            ]);
        }
    }
    Ok(Report {
        artifacts: match format {
            Format::Json => vec![
                Artifact::main(json(&run)),
                Artifact::side(".csv", csv.finish()),
            ],
            Format::Csv => vec![
                Artifact::main(csv.finish()),
                Artifact::side(".json", json(&run)),
            ],
        },
        guard: exploded_guard(exploded),
        default_out: None,
    })
}
