//! Axiom auditor: evaluates symmetry, additivity, k-monotonicity, the three
//! coarsening inequalities and the ordering chain on product-form
//! compositions, where every coarsened or reduced system is still a pure
//! state and can be measured exactly.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_4;
use core::fmt;
use core::str::FromStr;

use num_complex::Complex64;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::measures::{measure, Family, MeasureKind, MeasureSpec};
use crate::partition::Partition;
use crate::qstate::{
    build_state_with, default_label, random_pure_with, FactorSpec, Limits, PureState, StateSpec, SystemLayout,
};
use crate::redfun::ReducedFunction;

/// A margin above this is a violation.
pub const VIOLATION_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axiom {
    Symmetry,
    Additivity,
    KMonotone,
    CoarseningMonotoneA,
    TightCoarseningMonotoneB,
    PartialTraceMonotoneC,
    OrderingChain,
}

impl Axiom {
    pub const ALL: [Axiom; 7] = [
        Axiom::Symmetry,
        Axiom::Additivity,
        Axiom::KMonotone,
        Axiom::CoarseningMonotoneA,
        Axiom::TightCoarseningMonotoneB,
        Axiom::PartialTraceMonotoneC,
        Axiom::OrderingChain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Axiom::Symmetry => "symmetry",
            Axiom::Additivity => "additivity",
            Axiom::KMonotone => "k_monotone",
            Axiom::CoarseningMonotoneA => "coarsening_monotone_a",
            Axiom::TightCoarseningMonotoneB => "tight_coarsening_monotone_b",
            Axiom::PartialTraceMonotoneC => "partial_trace_monotone_c",
            Axiom::OrderingChain => "ordering_chain",
        }
    }

    /// Smallest level at which the axiom says anything.
    pub fn min_level(self) -> usize {
        match self {
            Axiom::KMonotone => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axiom {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Axiom::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidParameter(alloc::format!("unknown axiom `{s}`")))
    }
}

/// One replayable test case. Every state is a product of its spec's factors.
#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    /// Measure before and after relabelling by `perm`.
    Symmetry { state: StateSpec, perm: Vec<usize> },
    /// Measure of `left ⊗ right` against the sum of the parts.
    Additivity { left: StateSpec, right: StateSpec },
    /// Level k against level k − 1.
    KMonotone { state: StateSpec },
    /// System `from` (a partition of some parties) against system `to`.
    Coarsening { state: StateSpec, from: Partition, to: Partition },
    /// `E′ ≤ E ≤ 𝓔` for the measure's reduced function.
    Ordering { state: StateSpec },
}

impl Instance {
    pub fn states(&self) -> Vec<&StateSpec> {
        match self {
            Instance::Additivity { left, right } => vec![left, right],
            Instance::Symmetry { state, .. }
            | Instance::KMonotone { state }
            | Instance::Coarsening { state, .. }
            | Instance::Ordering { state } => vec![state],
        }
    }

    /// Short human-readable description.
    pub fn describe(&self) -> String {
        let factors = |s: &StateSpec| {
            s.factors
                .iter()
                .map(|f| {
                    let mut t = String::from(f.kind_name());
                    t.push('(');
                    t.push_str(&f.labels().concat());
                    t.push(')');
                    t
                })
                .collect::<Vec<_>>()
                .join("⊗")
        };
        match self {
            Instance::Symmetry { state, perm } => alloc::format!("{} perm {:?}", factors(state), perm),
            Instance::Additivity { left, right } => alloc::format!("{} + {}", factors(left), factors(right)),
            Instance::KMonotone { state } | Instance::Ordering { state } => factors(state),
            Instance::Coarsening { state, from, to } => match build_state_with(state, &Limits::unbounded()) {
                Ok(s) => {
                    alloc::format!("{}: {} -> {}", factors(state), from.to_text(s.layout()), to.to_text(s.layout()))
                }
                Err(_) => factors(state),
            },
        }
    }
}

/// Measured value of a system `X₁|…|X_p` given as a partition of some of the
/// parties of `state`. `None` when the reduced state is mixed or the measure
/// hits a size cap. Systems with fewer than k parts hold no k-partite
/// entanglement and score 0.
pub fn evaluate_system(
    spec: &MeasureSpec,
    state: &PureState,
    system: &Partition,
    limits: &Limits,
) -> Result<Option<f64>> {
    let keep = system.parties();
    let sub = if keep.len() == state.n_parties() {
        state.clone()
    } else {
        match state.marginal_state(&keep) {
            Ok(s) => s,
            Err(Error::NotPureMarginal(_)) => return Ok(None),
            Err(e) => return Err(e),
        }
    };
    let local = system.map_parties(|p| keep.binary_search(&p).expect("party of the system"));
    let grouped = sub.regroup(&local)?;
    value_or_zero(spec, &grouped, limits)
}

fn value_or_zero(spec: &MeasureSpec, state: &PureState, limits: &Limits) -> Result<Option<f64>> {
    if state.n_parties() < spec.k {
        return Ok(Some(0.0));
    }
    match measure(spec, state, limits) {
        Ok(r) => Ok(Some(r.value)),
        Err(Error::SizeCap { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn build(spec: &StateSpec) -> Result<PureState> {
    build_state_with(spec, &Limits::unbounded())
}

/// Margin of one instance; positive means the axiom's inequality fails
/// (for equalities, the absolute deviation). `None` when skipped.
pub fn replay(axiom: Axiom, spec: &MeasureSpec, instance: &Instance, limits: &Limits) -> Result<Option<f64>> {
    macro_rules! get {
        ($e:expr) => {
            match $e? {
                Some(v) => v,
                None => return Ok(None),
            }
        };
    }
    match (axiom, instance) {
        (Axiom::Symmetry, Instance::Symmetry { state, perm }) => {
            let s = build(state)?;
            let p = s.permute_parties(perm)?;
            Ok(Some(libm::fabs(get!(value_or_zero(spec, &p, limits)) - get!(value_or_zero(spec, &s, limits)))))
        }
        (Axiom::Additivity, Instance::Additivity { left, right }) => {
            let l = build(left)?;
            let r = build(right)?;
            let both = l.tensor(&r)?;
            let sum = get!(value_or_zero(spec, &l, limits)) + get!(value_or_zero(spec, &r, limits));
            Ok(Some(libm::fabs(get!(value_or_zero(spec, &both, limits)) - sum)))
        }
        (Axiom::KMonotone, Instance::KMonotone { state }) => {
            if spec.k < 3 {
                return Ok(None);
            }
            let s = build(state)?;
            Ok(Some(get!(value_or_zero(spec, &s, limits)) - get!(value_or_zero(&spec.at(spec.k - 1), &s, limits))))
        }
        (
            Axiom::CoarseningMonotoneA | Axiom::TightCoarseningMonotoneB | Axiom::PartialTraceMonotoneC,
            Instance::Coarsening { state, from, to },
        ) => {
            let s = build(state)?;
            let hi = get!(evaluate_system(spec, &s, from, limits));
            let lo = get!(evaluate_system(spec, &s, to, limits));
            Ok(Some(lo - hi))
        }
        (Axiom::OrderingChain, Instance::Ordering { state }) => {
            let h = match spec.kind {
                MeasureKind::E(h) | MeasureKind::CalE(h) | MeasureKind::Eprime(h) => h,
                _ => return Ok(None),
            };
            let s = build(state)?;
            if s.n_parties() < spec.k {
                return Ok(None);
            }
            let at = |kind| MeasureSpec::new(kind, spec.k);
            let ep = get!(value_or_zero(&at(MeasureKind::Eprime(h)), &s, limits));
            let e = get!(value_or_zero(&at(MeasureKind::E(h)), &s, limits));
            let ce = get!(value_or_zero(&at(MeasureKind::CalE(h)), &s, limits));
            Ok(Some((ep - e).max(e - ce)))
        }
        _ => Err(Error::InvalidParameter(alloc::format!("instance does not fit axiom {axiom}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Violated,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Violated => "violated",
        })
    }
}

/// What the theory predicts for one (axiom, measure, level) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expectation {
    Pass,
    Violated,
    /// No claim either way.
    Open,
}

impl fmt::Display for Expectation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Expectation::Pass => "pass",
            Expectation::Violated => "violated",
            Expectation::Open => "-",
        })
    }
}

#[derive(Debug, Clone)]
pub struct AxiomWitness {
    pub index: usize,
    pub instance: Instance,
    pub margin: f64,
}

#[derive(Debug, Clone)]
pub struct AxiomCheck {
    pub axiom: Axiom,
    pub measure: MeasureSpec,
    pub verdict: Verdict,
    pub worst_margin: f64,
    /// Instance with the largest margin.
    pub witness: Option<AxiomWitness>,
    /// Per-instance margins in generation order; `None` marks a skip.
    pub margins: Vec<Option<f64>>,
    pub instances: Vec<Instance>,
    pub expected: Expectation,
}

impl AxiomCheck {
    pub fn evaluated(&self) -> usize {
        self.margins.iter().filter(|m| m.is_some()).count()
    }

    pub fn skipped(&self) -> usize {
        self.margins.len() - self.evaluated()
    }

    pub fn deviates(&self) -> bool {
        match self.expected {
            Expectation::Pass => self.verdict != Verdict::Pass,
            Expectation::Violated => self.verdict != Verdict::Violated,
            Expectation::Open => false,
        }
    }
}

/// Factor kinds the random generator draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorFamily {
    Haar,
    Ghz,
    W,
    Bell,
    /// `cos t|00⟩ + sin t|11⟩` with random `t`.
    Weak,
}

impl FactorFamily {
    pub const ALL: [FactorFamily; 5] =
        [FactorFamily::Haar, FactorFamily::Ghz, FactorFamily::W, FactorFamily::Bell, FactorFamily::Weak];

    pub fn name(self) -> &'static str {
        match self {
            FactorFamily::Haar => "haar",
            FactorFamily::Ghz => "ghz",
            FactorFamily::W => "w",
            FactorFamily::Bell => "bell",
            FactorFamily::Weak => "weak",
        }
    }
}

impl FromStr for FactorFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FactorFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidParameter(alloc::format!("unknown state family `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub families: Vec<FactorFamily>,
    pub min_parties: usize,
    pub max_parties: usize,
    pub max_factor: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig { families: FactorFamily::ALL.to_vec(), min_parties: 3, max_parties: 8, max_factor: 4 }
    }
}

/// A product-form composition: factor states whose parties are contiguous
/// and labelled `A, B, …` in order.
#[derive(Debug, Clone)]
pub struct Composition {
    pub factors: Vec<PureState>,
}

impl Composition {
    pub fn n_parties(&self) -> usize {
        self.factors.iter().map(PureState::n_parties).sum()
    }

    pub fn spec(&self) -> StateSpec {
        StateSpec::from_factors(&self.factors)
    }

    /// Party index sets of each factor.
    pub fn factor_sets(&self) -> Vec<Vec<usize>> {
        self.spec().factor_party_sets()
    }
}

/// Draw a random product-form composition with `n` parties whose labels
/// start at `offset`.
pub fn random_composition<R: Rng + ?Sized>(gen: &GeneratorConfig, n: usize, offset: usize, rng: &mut R) -> Composition {
    let mut factors = Vec::new();
    let mut next = offset;
    let mut left = n;
    while left > 0 {
        let size = rng.random_range(1..=gen.max_factor.min(left));
        let labels: Vec<String> = (next..next + size).map(default_label).collect();
        next += size;
        left -= size;
        factors.push(random_factor(gen, &labels, rng));
    }
    Composition { factors }
}

fn random_factor<R: Rng + ?Sized>(gen: &GeneratorConfig, labels: &[String], rng: &mut R) -> PureState {
    let size = labels.len();
    let fitting: Vec<FactorFamily> = gen
        .families
        .iter()
        .copied()
        .filter(|f| match f {
            FactorFamily::Haar => true,
            FactorFamily::Ghz | FactorFamily::W => size >= 2,
            FactorFamily::Bell | FactorFamily::Weak => size == 2,
        })
        .collect();
    let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let family = fitting.choose(rng).copied().unwrap_or(FactorFamily::Haar);
    let spec = match family {
        FactorFamily::Haar => {
            let layout = SystemLayout::new(labels.iter().map(|l| (l.clone(), 2))).expect("fresh labels");
            return random_pure_with(&layout, rng).canonical_phase();
        }
        FactorFamily::Ghz => FactorSpec::ghz(&refs, 2),
        FactorFamily::W => FactorSpec::w(&refs),
        FactorFamily::Bell => FactorSpec::maxent(&refs, 2),
        FactorFamily::Weak => {
            let t = rng.random_range(0.02..FRAC_PI_4);
            FactorSpec::real(&refs, &[2, 2], &[libm::cos(t), 0.0, 0.0, libm::sin(t)])
        }
    };
    spec.build().expect("generator factors are valid")
}

fn random_blocks<R: Rng + ?Sized>(items: &[usize], max_block: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut items = items.to_vec();
    items.shuffle(rng);
    let mut blocks = Vec::new();
    let mut rest = &items[..];
    while !rest.is_empty() {
        let size = rng.random_range(1..=max_block.min(rest.len()));
        blocks.push(rest[..size].to_vec());
        rest = &rest[size..];
    }
    blocks
}

/// Nonempty proper subset of `0..n` as a sorted list; `None` if n < 2.
fn proper_subset<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Option<Vec<usize>> {
    if n < 2 {
        return None;
    }
    loop {
        let pick: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
        if !pick.is_empty() && pick.len() < n {
            return Some(pick);
        }
    }
}

const ATTEMPTS: usize = 64;

/// Draw one random instance for `axiom` at level `k`; `None` after repeated
/// failure to meet the axiom's side conditions.
pub fn random_instance<R: Rng + ?Sized>(
    axiom: Axiom,
    k: usize,
    gen: &GeneratorConfig,
    rng: &mut R,
) -> Option<Instance> {
    let lo = gen.min_parties.max(k).max(2);
    let hi = gen.max_parties.max(lo);
    for _ in 0..ATTEMPTS {
        let n = rng.random_range(lo..=hi);
        match axiom {
            Axiom::Symmetry => {
                let c = random_composition(gen, n, 0, rng);
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(rng);
                return Some(Instance::Symmetry { state: c.spec(), perm });
            }
            Axiom::Additivity => {
                let nl = rng.random_range(1..n);
                let l = random_composition(gen, nl, 0, rng);
                let r = random_composition(gen, n - nl, nl, rng);
                return Some(Instance::Additivity { left: l.spec(), right: r.spec() });
            }
            Axiom::KMonotone => {
                return Some(Instance::KMonotone { state: random_composition(gen, n, 0, rng).spec() });
            }
            Axiom::OrderingChain => {
                return Some(Instance::Ordering { state: random_composition(gen, n, 0, rng).spec() });
            }
            Axiom::CoarseningMonotoneA => {
                let c = random_composition(gen, n, 0, rng);
                let sets = c.factor_sets();
                let Some(drop) = proper_subset(sets.len(), rng) else { continue };
                let (gone, kept) = split_parties(&sets, &drop);
                let kept_blocks = random_blocks(&kept, 3, rng);
                if kept_blocks.len() < k {
                    continue;
                }
                let mut all = kept_blocks.clone();
                all.extend(random_blocks(&gone, 3, rng));
                let from = Partition::new(all).expect("disjoint");
                let to = Partition::new(kept_blocks).expect("disjoint");
                return Some(Instance::Coarsening { state: c.spec(), from, to });
            }
            Axiom::TightCoarseningMonotoneB => {
                let c = random_composition(gen, n, 0, rng);
                let sets = c.factor_sets();
                let ids: Vec<usize> = (0..sets.len()).collect();
                let mut blocks = Vec::new();
                for group in random_blocks(&ids, 3, rng) {
                    if group.len() > 1 {
                        blocks.push(group.iter().flat_map(|&f| sets[f].iter().copied()).collect());
                    } else {
                        let parties = &sets[group[0]];
                        if parties.len() > 1 && rng.random_bool(0.5) {
                            blocks.extend(random_blocks(parties, parties.len(), rng));
                        } else {
                            blocks.push(parties.clone());
                        }
                    }
                }
                if blocks.len() == n {
                    continue;
                }
                let to = Partition::new(blocks).expect("disjoint");
                return Some(Instance::Coarsening { state: c.spec(), from: Partition::discrete(n), to });
            }
            Axiom::PartialTraceMonotoneC => {
                let c = random_composition(gen, n, 0, rng);
                let sets = c.factor_sets();
                let Some(drop) = proper_subset(sets.len(), rng) else { continue };
                let (gone, kept) = split_parties(&sets, &drop);
                let inner = random_blocks(&kept, 3, rng);
                if inner.len() < k {
                    continue;
                }
                let mut outer = inner.clone();
                for p in gone {
                    let b = rng.random_range(0..outer.len());
                    outer[b].push(p);
                }
                let from = Partition::new(outer).expect("disjoint");
                let to = Partition::new(inner).expect("disjoint");
                return Some(Instance::Coarsening { state: c.spec(), from, to });
            }
        }
    }
    None
}

fn split_parties(sets: &[Vec<usize>], drop: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut gone = Vec::new();
    let mut kept = Vec::new();
    for (i, s) in sets.iter().enumerate() {
        if drop.contains(&i) {
            gone.extend_from_slice(s);
        } else {
            kept.extend_from_slice(s);
        }
    }
    (gone, kept)
}

fn labels(range: core::ops::Range<usize>) -> Vec<String> {
    range.map(default_label).collect()
}

fn ghz(range: core::ops::Range<usize>) -> FactorSpec {
    FactorSpec::Ghz { labels: labels(range), dim: 2 }
}

fn w(range: core::ops::Range<usize>) -> FactorSpec {
    FactorSpec::W { labels: labels(range) }
}

fn bell(at: usize) -> FactorSpec {
    FactorSpec::MaxEnt { labels: labels(at..at + 2), dim: 2 }
}

fn zero(at: usize) -> FactorSpec {
    FactorSpec::Amplitudes {
        labels: labels(at..at + 1),
        dims: vec![2],
        amps: vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
    }
}

fn weak(at: usize, t: f64) -> FactorSpec {
    let z = Complex64::new(0.0, 0.0);
    FactorSpec::Amplitudes {
        labels: labels(at..at + 2),
        dims: vec![2, 2],
        amps: vec![Complex64::new(libm::cos(t), 0.0), z, z, Complex64::new(libm::sin(t), 0.0)],
    }
}

fn parse(text: &str, spec: &StateSpec) -> Partition {
    let s = build(spec).expect("curated state");
    Partition::parse(text, s.layout()).expect("curated partition")
}

/// The hand-built compositions behind the known counterexamples (and a few
/// positive controls), grouped by axiom.
pub fn curated_instances(axiom: Axiom) -> Vec<Instance> {
    let spec = |f: Vec<FactorSpec>| StateSpec::new(f);
    match axiom {
        Axiom::Symmetry => vec![Instance::Symmetry { state: spec(vec![w(0..3), bell(3)]), perm: vec![4, 2, 0, 3, 1] }],
        Axiom::Additivity => vec![
            // Bell ⊗ |0⟩ against W₃
            Instance::Additivity { left: spec(vec![bell(0), zero(2)]), right: spec(vec![w(3..6)]) },
            Instance::Additivity { left: spec(vec![bell(0)]), right: spec(vec![bell(2)]) },
            Instance::Additivity { left: spec(vec![bell(0)]), right: spec(vec![zero(2), bell(3)]) },
            Instance::Additivity { left: spec(vec![ghz(0..3)]), right: spec(vec![ghz(3..6)]) },
        ],
        Axiom::KMonotone => vec![
            Instance::KMonotone { state: spec(vec![ghz(0..3), zero(3)]) },
            Instance::KMonotone { state: spec(vec![w(0..3), bell(3), ghz(5..8)]) },
            Instance::KMonotone { state: spec(vec![bell(0), zero(2), ghz(3..6)]) },
        ],
        Axiom::CoarseningMonotoneA => {
            let a = spec(vec![bell(0), zero(2), ghz(3..6)]);
            let b = spec(vec![bell(0), zero(2), zero(3)]);
            let c = spec(vec![bell(0), zero(2), w(3..6)]);
            vec![
                Instance::Coarsening { from: Partition::discrete(6), to: parse("A|B|D|E|F", &a), state: a },
                Instance::Coarsening { from: Partition::discrete(4), to: parse("A|B|D", &b), state: b },
                Instance::Coarsening { from: Partition::discrete(6), to: parse("A|B|D|E|F", &c), state: c },
            ]
        }
        Axiom::TightCoarseningMonotoneB => {
            let a = spec(vec![weak(0, 0.05), bell(2)]);
            let b = spec(vec![ghz(0..4), bell(4), bell(6), zero(8)]);
            vec![
                Instance::Coarsening { from: Partition::discrete(4), to: parse("AB|C|D", &a), state: a },
                Instance::Coarsening { from: Partition::discrete(9), to: parse("AB|CD|EF|GHI", &b), state: b },
            ]
        }
        Axiom::PartialTraceMonotoneC => {
            let a = spec(vec![ghz(0..3), bell(3)]);
            vec![Instance::Coarsening { from: parse("AD|BE|C", &a), to: parse("A|B|C", &a), state: a }]
        }
        Axiom::OrderingChain => vec![
            Instance::Ordering { state: spec(vec![ghz(0..4), w(4..7), zero(7)]) },
            Instance::Ordering { state: spec(vec![w(0..3), bell(3)]) },
        ],
    }
}

/// Predicted verdict of one cell, from the theorems for the factor-sum and
/// minimum-sum measures and the counterexample constructions for the others.
pub fn expected_verdict(axiom: Axiom, spec: &MeasureSpec) -> Expectation {
    let k = spec.k;
    match spec.kind {
        MeasureKind::E(h) | MeasureKind::CalE(h) => {
            if h.is_known_subadditive() || axiom != Axiom::OrderingChain {
                Expectation::Pass
            } else {
                Expectation::Open
            }
        }
        MeasureKind::Eprime(h) => match axiom {
            Axiom::TightCoarseningMonotoneB if k == 2 && h.is_known_subadditive() => Expectation::Pass,
            Axiom::TightCoarseningMonotoneB => Expectation::Open,
            Axiom::OrderingChain if !h.is_known_subadditive() => Expectation::Open,
            _ => Expectation::Pass,
        },
        MeasureKind::C => match (axiom, k) {
            (Axiom::Additivity, 3) | (Axiom::CoarseningMonotoneA, 3) | (Axiom::TightCoarseningMonotoneB, 2) => {
                Expectation::Violated
            }
            _ => Expectation::Open,
        },
        MeasureKind::Cq(_) | MeasureKind::Calpha(_) => match (axiom, k) {
            (Axiom::Additivity, 2) | (Axiom::CoarseningMonotoneA, 3) | (Axiom::TightCoarseningMonotoneB, 2) => {
                Expectation::Violated
            }
            _ => Expectation::Open,
        },
        MeasureKind::CGq(_) | MeasureKind::CGalpha(_) => match (axiom, k) {
            (Axiom::Additivity, 2)
            | (Axiom::KMonotone, 3)
            | (Axiom::CoarseningMonotoneA, 2)
            | (Axiom::TightCoarseningMonotoneB, 2) => Expectation::Violated,
            _ => Expectation::Open,
        },
    }
}

/// Where the instances of a check come from.
#[derive(Debug, Clone)]
pub enum Source {
    Explicit(Vec<Instance>),
    Random { gen: GeneratorConfig, count: usize, seed: u64 },
}

/// Run one axiom on one measure at one level.
pub fn check_axiom(axiom: Axiom, spec: &MeasureSpec, source: &Source, limits: &Limits) -> Result<AxiomCheck> {
    let instances = match source {
        Source::Explicit(list) => list.clone(),
        Source::Random { gen, count, seed } => random_instances(axiom, spec.k, gen, *count, *seed),
    };
    check_instances(axiom, spec, instances, limits)
}

fn random_instances(axiom: Axiom, k: usize, gen: &GeneratorConfig, count: usize, seed: u64) -> Vec<Instance> {
    if gen.families.is_empty() {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    // draws that miss the side conditions are retried, up to a bounded total
    for _ in 0..count.saturating_mul(4) {
        if out.len() == count {
            break;
        }
        out.extend(random_instance(axiom, k, gen, &mut rng));
    }
    out
}

fn check_instances(axiom: Axiom, spec: &MeasureSpec, instances: Vec<Instance>, limits: &Limits) -> Result<AxiomCheck> {
    spec.kind.reduced_function().validate()?;
    let mut margins = Vec::with_capacity(instances.len());
    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    for (index, inst) in instances.iter().enumerate() {
        let m = replay(axiom, spec, inst, limits)?;
        if let Some(v) = m {
            if v > worst {
                worst = v;
                witness = Some(AxiomWitness { index, instance: inst.clone(), margin: v });
            }
        }
        margins.push(m);
    }
    let verdict = if worst > VIOLATION_TOL { Verdict::Violated } else { Verdict::Pass };
    Ok(AxiomCheck {
        axiom,
        measure: *spec,
        verdict,
        worst_margin: if worst.is_finite() { worst } else { 0.0 },
        witness,
        margins,
        instances,
        expected: expected_verdict(axiom, spec),
    })
}

#[derive(Debug, Clone)]
pub struct AuditConfig {
    pub measures: Vec<MeasureKind>,
    pub axioms: Vec<Axiom>,
    pub levels: Vec<usize>,
    /// Random instances per check.
    pub instances: usize,
    pub seed: u64,
    pub generator: GeneratorConfig,
    /// Append the curated counterexample constructions to every check.
    pub curated: bool,
    pub limits: Limits,
}

impl Default for AuditConfig {
    fn default() -> Self {
        let ent = ReducedFunction::Entropy;
        let con = ReducedFunction::Concurrence;
        AuditConfig {
            measures: vec![
                MeasureKind::E(ent),
                MeasureKind::E(con),
                MeasureKind::CalE(ent),
                MeasureKind::CalE(con),
                MeasureKind::Eprime(ent),
                MeasureKind::Eprime(con),
                MeasureKind::C,
                MeasureKind::Cq(2.0),
                MeasureKind::Calpha(0.5),
                MeasureKind::CGq(2.0),
                MeasureKind::CGalpha(0.5),
            ],
            axioms: Axiom::ALL.to_vec(),
            levels: vec![2, 3, 4],
            instances: 500,
            seed: 2024,
            generator: GeneratorConfig::default(),
            curated: true,
            limits: Limits::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AuditReport {
    pub checks: Vec<AxiomCheck>,
}

impl AuditReport {
    pub fn deviations(&self) -> impl Iterator<Item = &AxiomCheck> {
        self.checks.iter().filter(|c| c.deviates())
    }

    /// Checks of one measure kind (all levels).
    pub fn of_kind<'a>(&'a self, kind: &'a MeasureKind) -> impl Iterator<Item = &'a AxiomCheck> + 'a {
        self.checks.iter().filter(move |c| c.measure.kind == *kind)
    }

    /// Measure kinds for which no unification or completeness axiom
    /// (additivity through tight coarsening) was caught violated, although
    /// the theory says one must be.
    pub fn missing_counterexamples(&self) -> Vec<MeasureKind> {
        let mut kinds: Vec<MeasureKind> = Vec::new();
        for c in &self.checks {
            if !kinds.contains(&c.measure.kind) {
                kinds.push(c.measure.kind);
            }
        }
        kinds
            .into_iter()
            .filter(|k| {
                matches!(k.family(), Family::Geometric)
                    || matches!(k, MeasureKind::C | MeasureKind::Cq(_) | MeasureKind::Calpha(_))
            })
            .filter(|k| {
                !self.of_kind(k).any(|c| {
                    matches!(
                        c.axiom,
                        Axiom::Additivity
                            | Axiom::KMonotone
                            | Axiom::CoarseningMonotoneA
                            | Axiom::TightCoarseningMonotoneB
                    ) && c.verdict == Verdict::Violated
                })
            })
            .collect()
    }
}

fn mix_seed(seed: u64, axiom: Axiom, k: usize) -> u64 {
    // splitmix64 over (seed, axiom, k) so every cell gets its own stream
    let mut z = seed ^ ((axiom as u64) << 32) ^ (k as u64);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Every (axiom, measure, level) cell of the configuration. The random
/// instances of a cell depend only on (seed, axiom, level), so all measures
/// see the same states.
pub fn run_suite(config: &AuditConfig) -> Result<AuditReport> {
    let mut checks = Vec::new();
    if config.generator.families.is_empty() && !config.curated {
        return Ok(AuditReport { checks });
    }
    for &axiom in &config.axioms {
        for &k in &config.levels {
            if k < axiom.min_level() {
                continue;
            }
            let mut instances =
                random_instances(axiom, k, &config.generator, config.instances, mix_seed(config.seed, axiom, k));
            if config.curated {
                instances.extend(curated_instances(axiom));
            }
            for kind in &config.measures {
                if axiom == Axiom::OrderingChain
                    && kind.family() != Family::Factor
                    && !matches!(kind, MeasureKind::Eprime(_))
                {
                    continue;
                }
                let spec = MeasureSpec::new(*kind, k);
                checks.push(check_instances(axiom, &spec, instances.clone(), &config.limits)?);
            }
        }
    }
    Ok(AuditReport { checks })
}

/// Outcome of the search for tight-coarsening failures of `Eprime` at k = 3
/// on compositions `ψ^{ABCD} ⊗ ψ^{EF} ⊗ ψ^{GH} ⊗ ψ^I`.
#[derive(Debug, Clone)]
pub struct TightnessSearch {
    pub trials: usize,
    /// Some trial had `h(ρ^D) ≥ h(ρ^A) > h(ρ^{AB})`.
    pub condition_realized: bool,
    pub worst_margin: f64,
    pub witness: Option<AxiomWitness>,
}

impl TightnessSearch {
    pub fn found(&self) -> bool {
        self.worst_margin > VIOLATION_TOL
    }
}

/// Random four-party factors (Haar, and near-product perturbations of two
/// Bell pairs) against every merge of two or three parties inside ABCD and
/// every union of whole factors.
pub fn eprime_tightness_search(
    h: ReducedFunction,
    trials: usize,
    seed: u64,
    limits: &Limits,
) -> Result<TightnessSearch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = MeasureSpec::new(MeasureKind::Eprime(h), 3);
    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    let mut realized = false;
    let mut index = 0;
    for trial in 0..trials {
        let head = four_party_factor(trial, &mut rng);
        let rest = [bell_like(4, &mut rng), bell_like(6, &mut rng)];
        let mut factors = vec![FactorSpec::from_state(&head)];
        factors.extend(rest.iter().map(FactorSpec::from_state));
        factors.push(zero(8));
        let state = StateSpec::new(factors);
        let s = build(&state)?;
        let hv = |parties: &[usize]| -> Result<f64> { h.evaluate(&s.reduced_density(parties)?) };
        let (ha, hd, hab) = (hv(&[0])?, hv(&[3])?, hv(&[0, 1])?);
        if hd >= ha && ha > hab + 1e-12 {
            realized = true;
        }
        for merge in tight_merges() {
            let to = Partition::new(merge).expect("disjoint");
            let inst = Instance::Coarsening { state: state.clone(), from: Partition::discrete(9), to };
            if let Some(m) = replay(Axiom::TightCoarseningMonotoneB, &spec, &inst, limits)? {
                if m > worst {
                    worst = m;
                    witness = Some(AxiomWitness { index, instance: inst, margin: m });
                }
            }
            index += 1;
        }
    }
    Ok(TightnessSearch { trials, condition_realized: realized, worst_margin: worst.max(0.0), witness })
}

fn four_party_factor(trial: usize, rng: &mut ChaCha8Rng) -> PureState {
    let layout = SystemLayout::new(labels(0..4).into_iter().map(|l| (l, 2))).expect("fresh labels");
    if trial.is_multiple_of(2) {
        return random_pure_with(&layout, rng);
    }
    // Bell(AB) ⊗ Bell(CD) with a small random admixture
    let base = bell(0).build().and_then(|a| a.tensor(&bell(2).build()?)).expect("bell pairs");
    let noise = random_pure_with(&layout, rng);
    let eps = rng.random_range(0.02..0.3);
    let amps = base.amplitudes().iter().zip(noise.amplitudes()).map(|(a, b)| a + b * eps).collect();
    PureState::normalized(layout, amps).expect("nonzero")
}

fn bell_like(at: usize, rng: &mut ChaCha8Rng) -> PureState {
    let t = rng.random_range(0.3..FRAC_PI_4);
    weak(at, t).build().expect("valid")
}

/// Merges of the nine-party system `ABCD|EF|GH|I` allowed by the tight clause:
/// blocks inside ABCD, or unions of whole factors.
fn tight_merges() -> Vec<Vec<Vec<usize>>> {
    let inner: Vec<Vec<Vec<usize>>> = vec![
        vec![vec![0, 1], vec![2], vec![3]],
        vec![vec![0], vec![1, 2], vec![3]],
        vec![vec![0], vec![1], vec![2, 3]],
        vec![vec![0, 2], vec![1], vec![3]],
        vec![vec![0, 3], vec![1], vec![2]],
        vec![vec![1, 3], vec![0], vec![2]],
        vec![vec![0, 1], vec![2, 3]],
        vec![vec![0, 2], vec![1, 3]],
        vec![vec![0, 3], vec![1, 2]],
        vec![vec![0, 1, 2], vec![3]],
        vec![vec![0], vec![1, 2, 3]],
        vec![vec![0], vec![1], vec![2], vec![3]],
    ];
    let outer: Vec<Vec<Vec<usize>>> = vec![
        vec![vec![4], vec![5], vec![6], vec![7], vec![8]],
        vec![vec![4, 5], vec![6], vec![7], vec![8]],
        vec![vec![4], vec![5], vec![6, 7, 8]],
        vec![vec![4, 5], vec![6, 7, 8]],
    ];
    let mut out = Vec::new();
    for i in &inner {
        for o in &outer {
            let mut p = i.clone();
            p.extend(o.iter().cloned());
            if p.len() < 9 {
                out.push(p);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const ENT: ReducedFunction = ReducedFunction::Entropy;
    const CON: ReducedFunction = ReducedFunction::Concurrence;

    fn check(axiom: Axiom, kind: MeasureKind, k: usize, instances: Vec<Instance>) -> AxiomCheck {
        check_axiom(axiom, &MeasureSpec::new(kind, k), &Source::Explicit(instances), &Limits::default()).unwrap()
    }

    #[test]
    fn additivity_counterexample_for_c3() {
        let c = check(Axiom::Additivity, MeasureKind::C, 3, curated_instances(Axiom::Additivity)[..1].to_vec());
        assert_eq!(c.verdict, Verdict::Violated);
        // C₃(ψ⊗φ) = √2/3, C₃(ψ) = 0, C₃(φ) = 2√2/3
        assert!((c.worst_margin - core::f64::consts::SQRT_2 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn cq_coarsening_counterexample() {
        let c = check(
            Axiom::CoarseningMonotoneA,
            MeasureKind::Cq(2.0),
            3,
            curated_instances(Axiom::CoarseningMonotoneA)[..1].to_vec(),
        );
        assert_eq!(c.verdict, Verdict::Violated);
        assert!((c.worst_margin - (libm::sqrt(1.0 / 3.0) - 0.5)).abs() < 1e-9);
    }

    #[test]
    fn tight_counterexample_for_c2() {
        let c = check(
            Axiom::TightCoarseningMonotoneB,
            MeasureKind::C,
            2,
            curated_instances(Axiom::TightCoarseningMonotoneB)[..1].to_vec(),
        );
        assert_eq!(c.verdict, Verdict::Violated);
    }

    #[test]
    fn factor_sum_measures_hold_on_curated_cases() {
        for axiom in Axiom::ALL {
            for kind in [MeasureKind::E(ENT), MeasureKind::CalE(CON)] {
                for k in axiom.min_level()..=3 {
                    let c = check(axiom, kind, k, curated_instances(axiom));
                    assert_eq!(c.verdict, Verdict::Pass, "{axiom} {kind} k={k}: {}", c.worst_margin);
                }
            }
        }
    }

    #[test]
    fn witnesses_replay() {
        let spec = MeasureSpec::new(MeasureKind::CGq(2.0), 3);
        let c = check(Axiom::KMonotone, spec.kind, 3, curated_instances(Axiom::KMonotone));
        let w = c.witness.unwrap();
        let again = replay(Axiom::KMonotone, &spec, &w.instance, &Limits::default()).unwrap().unwrap();
        assert!((again - w.margin).abs() < 1e-9);
        assert_eq!(c.verdict, Verdict::Violated);
    }

    #[test]
    fn random_instances_are_pure_preserving() {
        let gen = GeneratorConfig::default();
        let spec = MeasureSpec::new(MeasureKind::E(ENT), 2);
        for axiom in [Axiom::CoarseningMonotoneA, Axiom::TightCoarseningMonotoneB, Axiom::PartialTraceMonotoneC] {
            let c =
                check_axiom(axiom, &spec, &Source::Random { gen: gen.clone(), count: 40, seed: 3 }, &Limits::default())
                    .unwrap();
            assert_eq!(c.margins.len(), 40);
            assert_eq!(c.skipped(), 0, "{axiom}");
            assert_eq!(c.verdict, Verdict::Pass, "{axiom}");
        }
    }

    #[test]
    fn mixed_reductions_are_skipped() {
        let state = StateSpec::new(vec![ghz(0..3)]);
        let inst = Instance::Coarsening { from: Partition::discrete(3), to: parse("A|B", &state), state };
        let c = check(Axiom::CoarseningMonotoneA, MeasureKind::E(ENT), 2, vec![inst]);
        assert_eq!(c.skipped(), 1);
        assert_eq!(c.verdict, Verdict::Pass);
    }

    #[test]
    fn empty_family_gives_empty_report() {
        let config = AuditConfig {
            generator: GeneratorConfig { families: Vec::new(), ..GeneratorConfig::default() },
            curated: false,
            ..AuditConfig::default()
        };
        assert!(run_suite(&config).unwrap().checks.is_empty());
    }

    #[test]
    fn suite_is_deterministic() {
        let config = AuditConfig {
            measures: vec![MeasureKind::Eprime(ENT), MeasureKind::CGq(2.0)],
            levels: vec![2, 3],
            instances: 15,
            ..AuditConfig::default()
        };
        let a = run_suite(&config).unwrap();
        let b = run_suite(&config).unwrap();
        assert_eq!(a.checks.len(), b.checks.len());
        for (x, y) in a.checks.iter().zip(&b.checks) {
            assert_eq!(x.margins, y.margins);
            assert_eq!(x.instances, y.instances);
        }
    }

    #[test]
    fn names_round_trip() {
        for a in Axiom::ALL {
            assert_eq!(a.name().parse::<Axiom>().unwrap(), a);
        }
        for f in FactorFamily::ALL {
            assert_eq!(f.name().parse::<FactorFamily>().unwrap(), f);
        }
        assert!("fast".parse::<Axiom>().is_err());
    }
}
