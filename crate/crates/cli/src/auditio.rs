//! Audit configuration files, the text report and JSONL check records.

use std::fmt::Write;

use anyhow::{anyhow, bail, Context};
use kpem_core::audit::{replay, AuditConfig, AuditReport, Axiom, AxiomCheck, FactorFamily, Instance, TightnessSearch};
use kpem_core::qstate::build_state_with;
use kpem_core::{Limits, MeasureKind, MeasureSpec, Partition, StateSpec};
use serde::{Deserialize, Serialize};

use crate::fmt::num;
use crate::statefile::{document_to_spec, spec_to_document, StateDocument};

/// Every field is optional and falls back to the built-in default suite.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub measures: Option<Vec<String>>,
    pub axioms: Option<Vec<String>>,
    pub levels: Option<Vec<usize>>,
    pub instances: Option<usize>,
    pub seed: Option<u64>,
    pub families: Option<Vec<String>>,
    pub min_parties: Option<usize>,
    pub max_parties: Option<usize>,
    pub max_factor: Option<usize>,
    pub curated: Option<bool>,
}

impl ConfigFile {
    pub fn into_config(self, limits: Limits) -> anyhow::Result<AuditConfig> {
        let mut cfg = AuditConfig { limits, ..AuditConfig::default() };
        if let Some(m) = self.measures {
            cfg.measures = m
                .iter()
                .map(|t| t.parse::<MeasureKind>().with_context(|| format!("measures: `{t}`")))
                .collect::<anyhow::Result<_>>()?;
        }
        if let Some(a) = self.axioms {
            cfg.axioms = a
                .iter()
                .map(|t| t.parse::<Axiom>().with_context(|| format!("axioms: `{t}`")))
                .collect::<anyhow::Result<_>>()?;
        }
        if let Some(l) = self.levels {
            if l.iter().any(|&k| k < 2) {
                bail!("levels: every level must be at least 2");
            }
            cfg.levels = l;
        }
        if let Some(f) = self.families {
            cfg.generator.families = f
                .iter()
                .map(|t| t.parse::<FactorFamily>().with_context(|| format!("families: `{t}`")))
                .collect::<anyhow::Result<_>>()?;
        }
        cfg.instances = self.instances.unwrap_or(cfg.instances);
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        cfg.generator.min_parties = self.min_parties.unwrap_or(cfg.generator.min_parties);
        cfg.generator.max_parties = self.max_parties.unwrap_or(cfg.generator.max_parties);
        cfg.generator.max_factor = self.max_factor.unwrap_or(cfg.generator.max_factor);
        cfg.curated = self.curated.unwrap_or(cfg.curated);
        let g = &cfg.generator;
        if g.min_parties < 2 || g.min_parties > g.max_parties || g.max_factor < 1 {
            bail!("generator: need 2 <= min_parties <= max_parties and max_factor >= 1");
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceRecord {
    Symmetry { state: StateDocument, perm: Vec<usize> },
    Additivity { left: StateDocument, right: StateDocument },
    KMonotone { state: StateDocument },
    Coarsening { state: StateDocument, from: String, to: String },
    Ordering { state: StateDocument },
}

impl InstanceRecord {
    pub fn from_instance(inst: &Instance) -> anyhow::Result<Self> {
        Ok(match inst {
            Instance::Symmetry { state, perm } => {
                InstanceRecord::Symmetry { state: spec_to_document(state), perm: perm.clone() }
            }
            Instance::Additivity { left, right } => {
                InstanceRecord::Additivity { left: spec_to_document(left), right: spec_to_document(right) }
            }
            Instance::KMonotone { state } => InstanceRecord::KMonotone { state: spec_to_document(state) },
            Instance::Ordering { state } => InstanceRecord::Ordering { state: spec_to_document(state) },
            Instance::Coarsening { state, from, to } => {
                let s = build_state_with(state, &Limits::unbounded())?;
                InstanceRecord::Coarsening {
                    state: spec_to_document(state),
                    from: from.to_text(s.layout()),
                    to: to.to_text(s.layout()),
                }
            }
        })
    }

    pub fn to_instance(&self) -> anyhow::Result<Instance> {
        let spec = |d: &StateDocument| -> anyhow::Result<StateSpec> { Ok(document_to_spec(d)?) };
        Ok(match self {
            InstanceRecord::Symmetry { state, perm } => Instance::Symmetry { state: spec(state)?, perm: perm.clone() },
            InstanceRecord::Additivity { left, right } => {
                Instance::Additivity { left: spec(left)?, right: spec(right)? }
            }
            InstanceRecord::KMonotone { state } => Instance::KMonotone { state: spec(state)? },
            InstanceRecord::Ordering { state } => Instance::Ordering { state: spec(state)? },
            InstanceRecord::Coarsening { state, from, to } => {
                let st = spec(state)?;
                let s = build_state_with(&st, &Limits::unbounded())?;
                Instance::Coarsening {
                    state: st,
                    from: Partition::parse(from, s.layout())?,
                    to: Partition::parse(to, s.layout())?,
                }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessRecord {
    pub index: usize,
    pub margin: f64,
    pub instance: InstanceRecord,
}

/// One line of the JSONL output: a single (axiom, measure, level) check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckRecord {
    pub axiom: String,
    pub measure: String,
    pub k: usize,
    pub expected: String,
    pub verdict: String,
    pub deviates: bool,
    pub worst_margin: f64,
    pub evaluated: usize,
    pub skipped: usize,
    pub witness: Option<WitnessRecord>,
}

impl CheckRecord {
    pub fn from_check(c: &AxiomCheck) -> anyhow::Result<Self> {
        let witness = match &c.witness {
            Some(w) => Some(WitnessRecord {
                index: w.index,
                margin: w.margin,
                instance: InstanceRecord::from_instance(&w.instance)?,
            }),
            None => None,
        };
        Ok(CheckRecord {
            axiom: c.axiom.name().to_string(),
            measure: c.measure.kind.to_string(),
            k: c.measure.k,
            expected: c.expected.to_string(),
            verdict: c.verdict.to_string(),
            deviates: c.deviates(),
            worst_margin: c.worst_margin,
            evaluated: c.evaluated(),
            skipped: c.skipped(),
            witness,
        })
    }

    /// Recompute the witness margin from the record alone.
    pub fn replay(&self, limits: &Limits) -> anyhow::Result<Option<f64>> {
        let Some(w) = &self.witness else { return Ok(None) };
        let axiom: Axiom = self.axiom.parse()?;
        let kind: MeasureKind = self.measure.parse()?;
        let spec = MeasureSpec::new(kind, self.k);
        let inst = w.instance.to_instance()?;
        replay(axiom, &spec, &inst, limits)?
            .map(Some)
            .ok_or_else(|| anyhow!("witness of {} {} k={} no longer evaluates", self.axiom, self.measure, self.k))
    }
}

pub fn write_jsonl(report: &AuditReport) -> anyhow::Result<String> {
    let mut out = String::new();
    for c in &report.checks {
        out.push_str(&serde_json::to_string(&CheckRecord::from_check(c)?)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn read_jsonl(text: &str) -> anyhow::Result<Vec<CheckRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("line {}", i + 1)))
        .collect()
}

pub fn render_report(report: &AuditReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<28} {:<20} {:>2}  {:<8} {:<8} {:>14}  {:>5} {:>5}",
        "axiom", "measure", "k", "expected", "verdict", "worst margin", "eval", "skip"
    );
    for c in &report.checks {
        let _ = write!(
            out,
            "{:<28} {:<20} {:>2}  {:<8} {:<8} {:>14}  {:>5} {:>5}",
            c.axiom.name(),
            c.measure.kind.to_string(),
            c.measure.k,
            c.expected.to_string(),
            c.verdict.to_string(),
            num(c.worst_margin),
            c.evaluated(),
            c.skipped()
        );
        if c.deviates() {
            out.push_str("  DEVIATION");
        }
        out.push('\n');
    }
    let violated: Vec<_> = report.checks.iter().filter(|c| c.verdict == kpem_core::audit::Verdict::Violated).collect();
    if !violated.is_empty() {
        out.push_str("\nwitnesses\n");
        for c in violated {
            if let Some(w) = &c.witness {
                let _ = writeln!(
                    out,
                    "  {} {} k={}: margin {} on {}",
                    c.axiom.name(),
                    c.measure.kind,
                    c.measure.k,
                    num(w.margin),
                    w.instance.describe()
                );
            }
        }
    }
    let deviations = report.deviations().count();
    let _ = writeln!(out, "\n{} checks, {} deviations from the expected verdict", report.checks.len(), deviations);
    let missing = report.missing_counterexamples();
    if !missing.is_empty() {
        let names: Vec<String> = missing.iter().map(|k| k.to_string()).collect();
        let _ = writeln!(out, "no counterexample found for: {}", names.join(", "));
    }
    out
}

pub fn render_tightness(h: &str, t: &TightnessSearch) -> String {
    let mut out = format!(
        "tight coarsening search Eprime/{h} k=3: {} trials, condition realized {}, worst margin {}",
        t.trials,
        t.condition_realized,
        num(t.worst_margin)
    );
    if let Some(w) = t.witness.as_ref().filter(|_| t.found()) {
        let _ = write!(out, " on {}", w.instance.describe());
    }
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use kpem_core::audit::{check_axiom, curated_instances, Source};
    use kpem_core::ReducedFunction;

    #[test]
    fn records_replay_their_margin() {
        for (axiom, kind, k) in [
            (Axiom::Additivity, MeasureKind::C, 3),
            (Axiom::TightCoarseningMonotoneB, MeasureKind::Cq(2.0), 2),
            (Axiom::CoarseningMonotoneA, MeasureKind::CGalpha(0.5), 2),
        ] {
            let spec = MeasureSpec::new(kind, k);
            let c = check_axiom(axiom, &spec, &Source::Explicit(curated_instances(axiom)), &Limits::default()).unwrap();
            let text = serde_json::to_string(&CheckRecord::from_check(&c).unwrap()).unwrap();
            let rec: CheckRecord = serde_json::from_str(&text).unwrap();
            let m = rec.replay(&Limits::default()).unwrap().unwrap();
            assert!((m - c.worst_margin).abs() < 1e-12, "{axiom} {kind}");
        }
    }

    #[test]
    fn config_file_overrides() {
        let f: ConfigFile =
            serde_json::from_str(r#"{"measures":["E/entropy","Cq:2"],"levels":[2],"instances":5,"families":["ghz"]}"#)
                .unwrap();
        let cfg = f.into_config(Limits::default()).unwrap();
        assert_eq!(cfg.measures, vec![MeasureKind::E(ReducedFunction::Entropy), MeasureKind::Cq(2.0)]);
        assert_eq!(cfg.instances, 5);
        assert_eq!(cfg.generator.families, vec![FactorFamily::Ghz]);
        assert!(serde_json::from_str::<ConfigFile>(r#"{"measure":[]}"#).is_err());
        let bad: ConfigFile = serde_json::from_str(r#"{"levels":[1]}"#).unwrap();
        assert!(bad.into_config(Limits::default()).is_err());
    }
}
