use std::collections::BTreeMap;

use margmap_core::scaled::extended;
use margmap_core::{AnytimeResult, CliqueTree, MmapProblem, Scaled, Step, Termination};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

/// A scaled value as `mantissa * 2^exponent`, with the nearest double for
/// convenience.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledValue {
    #[serde(with = "extended")]
    pub mantissa: f64,
    pub exponent: i64,
    #[serde(with = "extended")]
    pub value: f64,
}

impl From<Scaled> for ScaledValue {
    fn from(s: Scaled) -> ScaledValue {
        ScaledValue { mantissa: s.mantissa, exponent: s.exponent, value: s.to_f64() }
    }
}

impl From<ScaledValue> for Scaled {
    fn from(s: ScaledValue) -> Scaled {
        Scaled::new(s.mantissa, s.exponent)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemInfo {
    pub n_vars: usize,
    pub n_decision: usize,
    pub n_latent: usize,
    pub n_evidence: usize,
    pub width: usize,
    pub nodes: usize,
}

impl ProblemInfo {
    pub fn new(p: &MmapProblem, tree: &CliqueTree) -> ProblemInfo {
        ProblemInfo {
            n_vars: p.model().n_vars(),
            n_decision: p.decision().len(),
            n_latent: p.latent().len(),
            n_evidence: p.evidence().len(),
            width: tree.width(),
            nodes: tree.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub t: usize,
    pub wall_clock: f64,
    pub z_lower: ScaledValue,
    pub z_upper: ScaledValue,
    pub step_lower: ScaledValue,
    pub step_upper: ScaledValue,
    #[serde(with = "extended")]
    pub gap: f64,
    pub caps: Vec<usize>,
    #[serde(with = "extended::vec")]
    pub quality: Vec<f64>,
}

impl From<&Step> for StepReport {
    fn from(s: &Step) -> StepReport {
        StepReport {
            t: s.t,
            wall_clock: s.wall_clock,
            z_lower: s.z_lower.into(),
            z_upper: s.z_upper.into(),
            step_lower: s.step_lower.into(),
            step_upper: s.step_upper.into(),
            gap: s.gap(),
            caps: s.caps.clone(),
            quality: s.quality(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    Interrupted,
    TimeLimit,
    MemoryCap,
    StepLimit,
    Failed,
}

impl From<Termination> for Status {
    fn from(t: Termination) -> Status {
        match t {
            Termination::Converged => Status::Converged,
            Termination::Interrupted => Status::Interrupted,
            Termination::TimeLimit => Status::TimeLimit,
            Termination::MemoryCap => Status::MemoryCap,
            Termination::StepLimit => Status::StepLimit,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub z_star: ScaledValue,
    pub agrees: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub instance: Option<String>,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub problem: Option<ProblemInfo>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub z_lower: Option<ScaledValue>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub z_upper: Option<ScaledValue>,
    #[serde(skip_serializing_if = "Option::is_none", default, with = "opt_extended")]
    pub gap: Option<f64>,
    /// Decision variable index to state.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub assignment: Option<BTreeMap<usize, usize>>,
    #[serde(default)]
    pub steps: Vec<StepReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub verification: Option<Verification>,
    pub config: RunConfig,
}

impl RunReport {
    pub fn solved(p: &MmapProblem, tree: &CliqueTree, r: &AnytimeResult, config: &RunConfig) -> RunReport {
        RunReport {
            instance: None,
            status: r.termination.into(),
            error: None,
            problem: Some(ProblemInfo::new(p, tree)),
            z_lower: Some(r.z_lower.into()),
            z_upper: Some(r.z_upper.into()),
            gap: Some(r.gap()),
            assignment: Some(r.assignment.iter().map(|(v, &s)| (v.0, s)).collect()),
            steps: r.trace.steps.iter().map(StepReport::from).collect(),
            verification: None,
            config: config.clone(),
        }
    }

    pub fn failed(message: String, config: &RunConfig) -> RunReport {
        RunReport {
            instance: None,
            status: Status::Failed,
            error: Some(message),
            problem: None,
            z_lower: None,
            z_upper: None,
            gap: None,
            assignment: None,
            steps: vec![],
            verification: None,
            config: config.clone(),
        }
    }
}

mod opt_extended {
    use margmap_core::scaled::extended;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => extended::serialize(x, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        #[derive(Deserialize)]
        struct Wrap(#[serde(with = "extended")] f64);
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use margmap_core::anytime::solve;
    use margmap_core::generate::small_example;
    use margmap_core::SolverConfig;

    #[test]
    fn report_round_trips_through_json() {
        let p = small_example(3);
        let family = margmap_core::FactorSetFamily::build(&p);
        let tree = CliqueTree::for_family(&family, 2).unwrap();
        let r = solve(&p, &SolverConfig::default()).unwrap();
        let mut report = RunReport::solved(&p, &tree, &r, &RunConfig::default());
        report.steps[0].quality.push(f64::INFINITY);
        report.gap = Some(f64::INFINITY);
        let json = serde_json::to_string(&report).unwrap();
        let back: RunReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn failed_report_round_trips() {
        let report = RunReport::failed("budget".into(), &RunConfig::default());
        let back: RunReport = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn scaled_value_keeps_tiny_magnitudes() {
        let s = Scaled::new(0.75, -5000);
        let v = ScaledValue::from(s);
        assert_eq!(v.value, 0.0);
        assert_eq!(Scaled::from(v), s);
    }
}
