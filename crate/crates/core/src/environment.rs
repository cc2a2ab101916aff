//! Generation-indexed offspring and immigration schedules assembled into a
//! validated model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laws::{LawInstance, LawSpec, ParamSchedule, PowerEnvelope};

/// A law applied on generations `from..=to` (`to = None`: open-ended).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub from: u64,
    pub to: Option<u64>,
    pub law: LawSpec,
}

impl Stage {
    pub fn open(from: u64, law: LawSpec) -> Self {
        Stage {
            from,
            to: None,
            law,
        }
    }

    pub fn closed(from: u64, to: u64, law: LawSpec) -> Self {
        Stage {
            from,
            to: Some(to),
            law,
        }
    }

    fn contains(&self, n: u64) -> bool {
        n >= self.from && self.to.is_none_or(|t| n <= t)
    }

    fn has_zero_variance(&self) -> bool {
        match &self.law {
            LawSpec::BernoulliShift { p } => {
                let b = p.bounds(self.from, self.to);
                b.hi >= 1.0 && !b.hi_open
            }
            LawSpec::FinitePmf { .. } => self
                .law
                .instantiate(self.from)
                .map(|l| l.variance() == 0.0)
                .unwrap_or(false),
            _ => false,
        }
    }
}

/// Stages that partition the generations `0, 1, 2, ...` exactly once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GenerationSchedule {
    stages: Vec<Stage>,
}

impl GenerationSchedule {
    pub fn new(stages: Vec<Stage>) -> Self {
        GenerationSchedule { stages }
    }

    pub fn homogeneous(law: LawSpec) -> Self {
        GenerationSchedule {
            stages: vec![Stage::open(0, law)],
        }
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    fn validate(&self, role: Role) -> Result<()> {
        let name = role.name();
        let err = |stage: usize, reason: String| Error::Stage {
            role: name,
            stage,
            reason,
        };
        if self.stages.is_empty() {
            return Err(err(0, "no stages".into()));
        }
        let mut next = 0u64;
        let last = self.stages.len() - 1;
        for (i, st) in self.stages.iter().enumerate() {
            if st.from != next {
                let reason = if st.from < next {
                    format!(
                        "starts at {} but generation {} is already covered",
                        st.from, st.from
                    )
                } else {
                    format!("gap: generations {}..{} are not covered", next, st.from - 1)
                };
                return Err(err(i, reason));
            }
            match st.to {
                Some(t) if t < st.from => {
                    return Err(err(
                        i,
                        format!("ends at {t} before it starts at {}", st.from),
                    ))
                }
                Some(_) if i == last => {
                    return Err(err(
                        i,
                        "final stage must be open-ended (\"to\": null)".into(),
                    ))
                }
                None if i != last => {
                    return Err(err(i, "only the final stage may be open-ended".into()))
                }
                _ => {}
            }
            st.law
                .validate_range(st.from, st.to)
                .map_err(|e| err(i, e.to_string()))?;
            next = st.to.map_or(u64::MAX, |t| t + 1);
        }
        Ok(())
    }

    fn stage_for(&self, n: u64) -> &Stage {
        self.stages
            .iter()
            .find(|s| s.contains(n))
            .expect("validated schedule covers every generation")
    }

    pub fn spec_at(&self, n: u64) -> &LawSpec {
        &self.stage_for(n).law
    }

    fn final_stage(&self) -> &Stage {
        self.stages.last().expect("validated schedule is non-empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Offspring,
    Immigration,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Offspring => "offspring",
            Role::Immigration => "immigration",
        }
    }
}

/// Model JSON: `{"name": str, "offspring": [stage...], "immigration": [stage...]}`
/// with `stage = {"from": int, "to": int|null, "law": {...}}`. An optional
/// `"degenerate": true` admits zero-variance laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BpveiModel {
    pub name: String,
    offspring: GenerationSchedule,
    immigration: GenerationSchedule,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    degenerate: bool,
}

impl BpveiModel {
    pub fn new(
        name: impl Into<String>,
        offspring: GenerationSchedule,
        immigration: GenerationSchedule,
        degenerate: bool,
    ) -> Result<Self> {
        let model = BpveiModel {
            name: name.into(),
            offspring,
            immigration,
            degenerate,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        for role in [Role::Offspring, Role::Immigration] {
            let sched = self.schedule(role);
            sched.validate(role)?;
            if !self.degenerate {
                if let Some(i) = sched.stages.iter().position(Stage::has_zero_variance) {
                    return Err(Error::Stage {
                        role: role.name(),
                        stage: i,
                        reason: "zero-variance law requires \"degenerate\": true".into(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn schedule(&self, role: Role) -> &GenerationSchedule {
        match role {
            Role::Offspring => &self.offspring,
            Role::Immigration => &self.immigration,
        }
    }

    /// The law of generation `n`; a pure function of `(model, role, n)`.
    pub fn law_at(&self, role: Role, n: u64) -> LawInstance {
        self.schedule(role)
            .spec_at(n)
            .instantiate(n)
            .expect("validated model instantiates at every generation")
    }

    /// Law obtained from the limits of the final stage's schedules.
    pub fn limit_law(&self, role: Role) -> Option<LawInstance> {
        self.schedule(role).final_stage().law.limit_law()
    }

    /// Power-type envelope on the mean valid from the final stage onward.
    pub fn mean_envelope(&self, role: Role) -> Option<PowerEnvelope> {
        let st = self.schedule(role).final_stage();
        st.law.mean_envelope().map(|mut e| {
            e.valid_from = e.valid_from.max(st.from).max(1);
            e
        })
    }

    /// Precomputes the laws of generations `0..=horizon`.
    pub fn table(&self, horizon: u64) -> LawTable {
        LawTable {
            offspring: (0..=horizon)
                .map(|n| self.law_at(Role::Offspring, n))
                .collect(),
            immigration: (0..=horizon)
                .map(|n| self.law_at(Role::Immigration, n))
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }
}

/// Parses and validates a model document.
pub fn build_model(config: &str) -> Result<BpveiModel> {
    let model: BpveiModel =
        serde_json::from_str(config).map_err(|e| Error::Config(e.to_string()))?;
    model.validate()?;
    Ok(model)
}

/// Laws of generations `0..=horizon`, instantiated once.
#[derive(Debug, Clone)]
pub struct LawTable {
    offspring: Vec<LawInstance>,
    immigration: Vec<LawInstance>,
}

impl LawTable {
    pub fn horizon(&self) -> u64 {
        self.offspring.len() as u64 - 1
    }

    pub fn offspring(&self, n: u64) -> &LawInstance {
        &self.offspring[n as usize]
    }

    pub fn immigration(&self, n: u64) -> &LawInstance {
        &self.immigration[n as usize]
    }

    pub fn get(&self, role: Role, n: u64) -> &LawInstance {
        match role {
            Role::Offspring => self.offspring(n),
            Role::Immigration => self.immigration(n),
        }
    }

    pub fn offspring_laws(&self) -> &[LawInstance] {
        &self.offspring
    }
}

fn half() -> LawSpec {
    LawSpec::bernoulli_shift(ParamSchedule::constant(0.5))
}

fn half_then_power(exponent: f64) -> GenerationSchedule {
    GenerationSchedule::new(vec![
        Stage::closed(0, 1, half()),
        Stage::open(
            2,
            LawSpec::bernoulli_shift(ParamSchedule::power(1.0, exponent, 0)),
        ),
    ])
}

pub const PRESET_NAMES: [&str; 5] = [
    "example_a",
    "example_b",
    "example_c",
    "critical_geo_pois",
    "deterministic_chain",
];

/// Built-in models. `example_a` fixes only the immigration and needs an
/// offspring law; it admits degenerate offspring such as `f(s) = s`.
pub fn preset(name: &str, offspring: Option<LawSpec>) -> Result<BpveiModel> {
    match name {
        "example_a" => {
            let off = offspring.ok_or_else(|| {
                Error::Config("preset example_a requires an offspring law".into())
            })?;
            BpveiModel::new(
                "example_a",
                GenerationSchedule::homogeneous(off),
                half_then_power(-2.0),
                true,
            )
        }
        "example_b" => BpveiModel::new(
            "example_b",
            half_then_power(-2.0),
            GenerationSchedule::homogeneous(half()),
            false,
        ),
        "example_c" => BpveiModel::new(
            "example_c",
            half_then_power(-1.0),
            GenerationSchedule::homogeneous(half()),
            false,
        ),
        "critical_geo_pois" => BpveiModel::new(
            "critical_geo_pois",
            GenerationSchedule::homogeneous(LawSpec::geometric(0.5)),
            GenerationSchedule::homogeneous(LawSpec::poisson(1.0)),
            false,
        ),
        "deterministic_chain" => BpveiModel::new(
            "deterministic_chain",
            GenerationSchedule::homogeneous(LawSpec::finite(vec![0.0, 1.0])),
            GenerationSchedule::homogeneous(LawSpec::finite(vec![0.0, 1.0])),
            true,
        ),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}
