//! The k-partite measures: factor-sum measures (`E`, `calE`), minimum over
//! (k−1)-fineness partitions (`Eprime`, `C`, `Cq`, `Calpha`) and the
//! geometric product over every such partition (`CGq`, `CGalpha`). All of
//! them are defined on pure states; mixed states only get a sampled
//! convex-roof upper bound.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::factorize::{finest_factorization, FactorDecomposition};
use crate::linalg::{self, orthonormalize};
use crate::partition::{count_k_fineness, Partition, RgsCursor};
use crate::qstate::{mask_of, parties_of, DensityMatrix, Limits, MarginalCache, PureState};
use crate::redfun::ReducedFunction;
use crate::PURITY_TOL;

/// Two scores closer than this count as a tie; the earlier partition wins.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum MeasureKind {
    /// `min Σ h_C / m` with the concurrence reduced function.
    C,
    /// `min √(Σ (1 − Tr ρ^q) / m)`.
    Cq(f64),
    /// `min √(Σ (Tr ρ^α − 1) / m)`.
    Calpha(f64),
    /// Geometric mean over every partition of `Σ (1 − Tr ρ^q) / m`, square-rooted.
    CGq(f64),
    /// As `CGq` with `Tr ρ^α − 1`.
    CGalpha(f64),
    /// Sum of `½ Σᵢ h(ρ^{Aᵢ})` over factors with at least k parties.
    E(ReducedFunction),
    /// Sum of the all-bipartitions form over factors with at least k parties.
    CalE(ReducedFunction),
    /// `min ½ Σ_blocks h` over (k−1)-fineness partitions.
    Eprime(ReducedFunction),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Factor,
    Min,
    Geometric,
}

impl MeasureKind {
    /// Parse the `--measure` grammar; `h` is required for `E`, `calE`, `Eprime`
    /// and ignored otherwise.
    pub fn parse(text: &str, h: Option<ReducedFunction>) -> Result<Self> {
        let (name, param) = match text.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (text, None),
        };
        let num = |what: &str| -> Result<f64> {
            let p = param.ok_or_else(|| Error::InvalidParameter(format!("`{name}` needs `:{what}`")))?;
            p.trim().parse::<f64>().map_err(|_| Error::InvalidParameter(format!("`{p}` is not a number")))
        };
        let need_h = || h.ok_or_else(|| Error::InvalidParameter(format!("`{name}` needs a reduced function")));
        let no_param = || match param {
            Some(p) => Err(Error::InvalidParameter(format!("`{name}` takes no parameter, got `{p}`"))),
            None => Ok(()),
        };
        let kind = match name {
            "C" => {
                no_param()?;
                MeasureKind::C
            }
            "Cq" => MeasureKind::Cq(num("q")?),
            "Calpha" => MeasureKind::Calpha(num("alpha")?),
            "CGq" => MeasureKind::CGq(num("q")?),
            "CGalpha" => MeasureKind::CGalpha(num("alpha")?),
            "E" => {
                no_param()?;
                MeasureKind::E(need_h()?)
            }
            "calE" => {
                no_param()?;
                MeasureKind::CalE(need_h()?)
            }
            "Eprime" => {
                no_param()?;
                MeasureKind::Eprime(need_h()?)
            }
            other => return Err(Error::InvalidParameter(format!("unknown measure `{other}`"))),
        };
        kind.reduced_function().validate()?;
        Ok(kind)
    }

    pub fn reduced_function(&self) -> ReducedFunction {
        match *self {
            MeasureKind::C => ReducedFunction::Concurrence,
            MeasureKind::Cq(q) | MeasureKind::CGq(q) => ReducedFunction::QFamily(q),
            MeasureKind::Calpha(a) | MeasureKind::CGalpha(a) => ReducedFunction::AlphaFamily(a),
            MeasureKind::E(h) | MeasureKind::CalE(h) | MeasureKind::Eprime(h) => h,
        }
    }

    pub fn family(&self) -> Family {
        match self {
            MeasureKind::E(_) | MeasureKind::CalE(_) => Family::Factor,
            MeasureKind::CGq(_) | MeasureKind::CGalpha(_) => Family::Geometric,
            _ => Family::Min,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MeasureKind::C => "C",
            MeasureKind::Cq(_) => "Cq",
            MeasureKind::Calpha(_) => "Calpha",
            MeasureKind::CGq(_) => "CGq",
            MeasureKind::CGalpha(_) => "CGalpha",
            MeasureKind::E(_) => "E",
            MeasureKind::CalE(_) => "calE",
            MeasureKind::Eprime(_) => "Eprime",
        }
    }
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            MeasureKind::Cq(p) | MeasureKind::Calpha(p) | MeasureKind::CGq(p) | MeasureKind::CGalpha(p) => {
                write!(f, "{}:{}", self.name(), p)
            }
            MeasureKind::E(h) | MeasureKind::CalE(h) | MeasureKind::Eprime(h) => write!(f, "{}/{}", self.name(), h),
            MeasureKind::C => f.write_str("C"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeasureSpec {
    pub kind: MeasureKind,
    pub k: usize,
}

impl MeasureSpec {
    pub fn new(kind: MeasureKind, k: usize) -> Self {
        MeasureSpec { kind, k }
    }

    /// Same measure at another level.
    pub fn at(&self, k: usize) -> Self {
        MeasureSpec { kind: self.kind, k }
    }

    /// Checks parameters and `2 ≤ k ≤ n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        self.kind.reduced_function().validate()?;
        if self.k < 2 || self.k > n {
            return Err(Error::KOutOfRange { k: self.k, n });
        }
        Ok(())
    }
}

impl fmt::Display for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} k={}", self.kind, self.k)
    }
}

/// Inverse of `Display`: `Eprime/entropy`, `Cq:2`, `C`.
impl FromStr for MeasureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('/') {
            Some((m, h)) => MeasureKind::parse(m.trim(), Some(h.trim().parse()?)),
            None => MeasureKind::parse(s.trim(), None),
        }
    }
}

/// One reduced-function term: `weight · h(ρ^parties)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlockTerm {
    pub parties: Vec<usize>,
    pub h: f64,
    pub weight: f64,
}

/// One partition of a geometric measure: its block sum and block count.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PartitionSum {
    pub partition: Partition,
    pub sum: f64,
}

#[derive(Debug, Clone)]
pub enum Witness {
    Partition(Partition),
    Factors(FactorDecomposition),
    None,
}

#[derive(Debug, Clone)]
pub struct MeasureResult {
    pub spec: MeasureSpec,
    pub value: f64,
    pub witness: Witness,
    /// Weighted terms of the witness (minimum and factor families).
    pub terms: Vec<BlockTerm>,
    /// Every partition's sum (geometric family).
    pub partition_sums: Vec<PartitionSum>,
}

impl MeasureResult {
    pub fn witness_partition(&self) -> Option<&Partition> {
        match &self.witness {
            Witness::Partition(p) => Some(p),
            _ => None,
        }
    }

    /// Value rebuilt from the stored terms alone.
    pub fn recompute(&self) -> f64 {
        let linear: f64 = self.terms.iter().map(|t| t.weight * t.h).sum();
        match self.spec.kind {
            MeasureKind::Cq(_) | MeasureKind::Calpha(_) => libm::sqrt(linear),
            MeasureKind::CGq(_) | MeasureKind::CGalpha(_) => geometric(&self.partition_sums),
            _ => linear,
        }
    }
}

fn geometric(sums: &[PartitionSum]) -> f64 {
    if sums.is_empty() || sums.iter().any(|s| s.sum <= 0.0) {
        return 0.0;
    }
    let log: f64 = sums.iter().map(|s| libm::log(s.sum) - libm::log(s.partition.n_blocks() as f64)).sum();
    libm::exp(log / (2.0 * sums.len() as f64))
}

/// `h(ρ^X)` for every party mask of one state, computed on demand.
pub struct HTable<'a> {
    cache: MarginalCache<'a>,
    h: ReducedFunction,
    dense: Vec<f64>,
    sparse: BTreeMap<u32, f64>,
}

impl<'a> HTable<'a> {
    pub fn new(state: &'a PureState, h: ReducedFunction) -> Self {
        let n = state.n_parties();
        let dense = if n <= 20 { vec![f64::NAN; 1usize << n] } else { Vec::new() };
        HTable { cache: MarginalCache::new(state), h, dense, sparse: BTreeMap::new() }
    }

    pub fn get(&mut self, mask: u32) -> Result<f64> {
        if let Some(v) = self.dense.get(mask as usize) {
            if !v.is_nan() {
                return Ok(*v);
            }
        } else if let Some(v) = self.sparse.get(&mask) {
            return Ok(*v);
        }
        let v = self.h.of_spectrum(self.cache.spectrum(mask)?);
        if (mask as usize) < self.dense.len() {
            self.dense[mask as usize] = v;
        } else {
            self.sparse.insert(mask, v);
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnifiedKind {
    /// `½ Σᵢ h(ρ^{Aᵢ})`
    Additive,
    /// `½ Σ_X h(ρ^X)`, one representative side X per bipartition.
    BipartiteSum,
    /// `min_X h(ρ^X)` over proper nonempty X.
    MinReduced,
}

/// The underlying n-partite measure of a pure state.
pub fn unified_mem(kind: UnifiedKind, h: ReducedFunction, state: &PureState) -> Result<f64> {
    h.validate()?;
    let n = state.n_parties();
    if n < 2 {
        return Err(Error::TooFewParties { needed: 2, found: n });
    }
    let parties: Vec<usize> = (0..n).collect();
    let mut table = HTable::new(state, h);
    match kind {
        UnifiedKind::MinReduced => {
            let full = state.layout().full_mask();
            let mut best = f64::INFINITY;
            for mask in 1..full {
                best = best.min(table.get(mask)?);
            }
            Ok(best)
        }
        _ => {
            let terms = unified_terms(kind, &parties, &mut table)?;
            Ok(terms.iter().map(|t| t.weight * t.h).sum())
        }
    }
}

/// Additive or bipartite-sum terms of one factor, indexed by global parties.
fn unified_terms(kind: UnifiedKind, parties: &[usize], table: &mut HTable<'_>) -> Result<Vec<BlockTerm>> {
    let s = parties.len();
    let mut terms = Vec::new();
    match kind {
        UnifiedKind::Additive => {
            for &p in parties {
                terms.push(BlockTerm { parties: vec![p], h: table.get(1 << p)?, weight: 0.5 });
            }
        }
        UnifiedKind::BipartiteSum if s == 2 => {
            // a single cut; counted in full so the two-party value equals the additive one
            terms.push(BlockTerm { parties: vec![parties[0]], h: table.get(1 << parties[0])?, weight: 1.0 });
        }
        UnifiedKind::BipartiteSum => {
            let last = s - 1;
            for local in 1u32..(1 << s) - 1 {
                let size = local.count_ones() as usize;
                let keep = 2 * size < s || (2 * size == s && local & (1 << last) == 0);
                if !keep {
                    continue;
                }
                let set: Vec<usize> = parties_of(local).into_iter().map(|i| parties[i]).collect();
                let h = table.get(mask_of(&set))?;
                terms.push(BlockTerm { parties: set, h, weight: 0.5 });
            }
        }
        UnifiedKind::MinReduced => unreachable!("min-reduced has no term form"),
    }
    Ok(terms)
}

/// Evaluate any measure on a pure state under the given limits.
pub fn measure(spec: &MeasureSpec, state: &PureState, limits: &Limits) -> Result<MeasureResult> {
    match spec.kind.family() {
        Family::Factor => measure_factor_family(spec, state, limits),
        Family::Min => measure_min_family(spec, state, limits),
        Family::Geometric => measure_geometric_family(spec, state, limits),
    }
}

pub fn measure_value(spec: &MeasureSpec, state: &PureState, limits: &Limits) -> Result<f64> {
    Ok(measure(spec, state, limits)?.value)
}

pub fn measure_factor_family(spec: &MeasureSpec, state: &PureState, limits: &Limits) -> Result<MeasureResult> {
    let kind = match spec.kind {
        MeasureKind::E(_) => UnifiedKind::Additive,
        MeasureKind::CalE(_) => UnifiedKind::BipartiteSum,
        _ => return Err(Error::InvalidParameter(format!("{} is not a factor-sum measure", spec.kind))),
    };
    spec.validate(state.n_parties())?;
    limits.check_layout(state.layout())?;
    let dec = finest_factorization(state, PURITY_TOL)?;
    let mut table = HTable::new(state, spec.kind.reduced_function());
    let mut terms = Vec::new();
    for f in dec.at_least(spec.k) {
        terms.extend(unified_terms(kind, &f.parties, &mut table)?);
    }
    let value = terms.iter().map(|t| t.weight * t.h).sum();
    Ok(MeasureResult { spec: *spec, value, witness: Witness::Factors(dec), terms, partition_sums: Vec::new() })
}

fn check_family(n: usize, fineness: usize, limits: &Limits) -> Result<()> {
    let count = count_k_fineness(n, fineness);
    if count > limits.max_family as u128 {
        let value = usize::try_from(count).unwrap_or(usize::MAX);
        return Err(Error::SizeCap { what: "partition family size", value, cap: limits.max_family });
    }
    Ok(())
}

pub fn measure_min_family(spec: &MeasureSpec, state: &PureState, limits: &Limits) -> Result<MeasureResult> {
    enum Score {
        Half,
        Mean,
        RootMean,
    }
    let score = match spec.kind {
        MeasureKind::Eprime(_) => Score::Half,
        MeasureKind::C => Score::Mean,
        MeasureKind::Cq(_) | MeasureKind::Calpha(_) => Score::RootMean,
        _ => return Err(Error::InvalidParameter(format!("{} is not a minimum-over-partitions measure", spec.kind))),
    };
    let n = state.n_parties();
    spec.validate(n)?;
    limits.check_layout(state.layout())?;
    check_family(n, spec.k - 1, limits)?;

    let parties: Vec<usize> = (0..n).collect();
    let mut table = HTable::new(state, spec.kind.reduced_function());
    let mut cursor = RgsCursor::new(n, spec.k - 1)?;
    let mut masks = Vec::with_capacity(n);
    let mut best = f64::INFINITY;
    let mut best_rgs = Vec::new();
    while cursor.advance() {
        cursor.block_masks_into(&parties, &mut masks);
        let mut sum = 0.0;
        for &m in &masks {
            sum += table.get(m)?;
        }
        let value = match score {
            Score::Half => 0.5 * sum,
            Score::Mean => sum / masks.len() as f64,
            Score::RootMean => libm::sqrt(sum / masks.len() as f64),
        };
        if value < best - TIE_TOL {
            best = value;
            best_rgs.clear();
            best_rgs.extend_from_slice(cursor.rgs());
        }
    }
    let witness = Partition::from_rgs(&best_rgs, &parties);
    let weight = match score {
        Score::Half => 0.5,
        _ => 1.0 / witness.n_blocks() as f64,
    };
    let mut terms = Vec::with_capacity(witness.n_blocks());
    for block in witness.blocks() {
        terms.push(BlockTerm { parties: block.clone(), h: table.get(mask_of(block))?, weight });
    }
    Ok(MeasureResult {
        spec: *spec,
        value: best,
        witness: Witness::Partition(witness),
        terms,
        partition_sums: Vec::new(),
    })
}

pub fn measure_geometric_family(spec: &MeasureSpec, state: &PureState, limits: &Limits) -> Result<MeasureResult> {
    if spec.kind.family() != Family::Geometric {
        return Err(Error::InvalidParameter(format!("{} is not a geometric measure", spec.kind)));
    }
    let n = state.n_parties();
    spec.validate(n)?;
    limits.check_layout(state.layout())?;
    if n > limits.max_geometric_parties {
        return Err(Error::SizeCap {
            what: "parties for a geometric measure",
            value: n,
            cap: limits.max_geometric_parties,
        });
    }
    check_family(n, spec.k - 1, limits)?;

    let parties: Vec<usize> = (0..n).collect();
    let mut table = HTable::new(state, spec.kind.reduced_function());
    let mut cursor = RgsCursor::new(n, spec.k - 1)?;
    let mut masks = Vec::with_capacity(n);
    let mut sums = Vec::new();
    while cursor.advance() {
        cursor.block_masks_into(&parties, &mut masks);
        let mut sum = 0.0;
        for &m in &masks {
            sum += table.get(m)?;
        }
        sums.push(PartitionSum { partition: Partition::from_masks(&masks), sum });
    }
    let value = geometric(&sums);
    Ok(MeasureResult { spec: *spec, value, witness: Witness::None, terms: Vec::new(), partition_sums: sums })
}

/// Sampled convex-roof estimate for a mixed state.
#[derive(Debug, Clone)]
pub struct RoofBound {
    /// Smallest ensemble average found. An upper bound, never claimed tight.
    pub value: f64,
    /// Running minimum after each iteration; nonincreasing.
    pub trace: Vec<f64>,
    /// Rank of the state's support.
    pub rank: usize,
}

/// Ensemble decompositions `ψ̃_j = Σᵢ V_ji √λᵢ eᵢ` with `V` an isometry are
/// sampled; the eigen-ensemble (`V = I`) goes first, later candidates
/// alternate between fresh Haar isometries and perturbations of the best one.
pub fn convex_roof_upper_bound(
    spec: &MeasureSpec,
    dm: &DensityMatrix,
    budget: usize,
    seed: u64,
    limits: &Limits,
) -> Result<RoofBound> {
    if budget == 0 {
        return Err(Error::ZeroBudget);
    }
    spec.validate(dm.layout().len())?;
    limits.check_layout(dm.layout())?;
    let eig = linalg::hermitian_eigen(dm.matrix());
    let spectrum = crate::qstate::clip_spectrum(eig.values.clone())?;
    let support: Vec<usize> = (0..spectrum.len()).filter(|&i| spectrum[i] > 1e-12).collect();
    let r = support.len();
    let weighted: Vec<Vec<Complex64>> =
        support.iter().map(|&i| eig.vector(i).into_iter().map(|a| a * libm::sqrt(spectrum[i])).collect()).collect();

    let evaluate = |v: &[Vec<Complex64>]| -> Result<f64> {
        // v[c] is column c of the isometry, length = ensemble size
        let m = v[0].len();
        let dim = weighted[0].len();
        let mut total = 0.0;
        for j in 0..m {
            let mut amps = vec![Complex64::new(0.0, 0.0); dim];
            for (c, col) in v.iter().enumerate() {
                let coeff = col[j];
                if coeff.norm_sqr() == 0.0 {
                    continue;
                }
                for (a, w) in amps.iter_mut().zip(&weighted[c]) {
                    *a += coeff * w;
                }
            }
            let p: f64 = amps.iter().map(Complex64::norm_sqr).sum();
            if p < 1e-14 {
                continue;
            }
            let psi = PureState::normalized(dm.layout().clone(), amps)?;
            total += p * measure_value(spec, &psi, limits)?;
        }
        Ok(total)
    };

    let identity: Vec<Vec<Complex64>> =
        (0..r).map(|c| (0..r).map(|j| Complex64::new(if j == c { 1.0 } else { 0.0 }, 0.0)).collect()).collect();
    let mut best_v = identity;
    let mut best = evaluate(&best_v)?;
    let mut trace = vec![best];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = |rng: &mut ChaCha8Rng| {
        Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    };
    for it in 1..budget {
        let candidate = if it % 2 == 1 {
            let m = r + rng.random_range(0..=r);
            let mut cols: Vec<Vec<Complex64>> = (0..r).map(|_| (0..m).map(|_| gauss(&mut rng)).collect()).collect();
            orthonormalize(&mut cols);
            cols
        } else {
            let eps = 0.3 / libm::sqrt(it as f64);
            let mut cols: Vec<Vec<Complex64>> =
                best_v.iter().map(|c| c.iter().map(|a| a + gauss(&mut rng) * eps).collect()).collect();
            orthonormalize(&mut cols);
            cols
        };
        if candidate.len() == r {
            let value = evaluate(&candidate)?;
            if value < best {
                best = value;
                best_v = candidate;
            }
        }
        trace.push(best);
    }
    Ok(RoofBound { value: best, trace, rank: r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{build_state, random_pure, FactorSpec, StateSpec, SystemLayout};
    use approx::assert_abs_diff_eq;

    const ENT: ReducedFunction = ReducedFunction::Entropy;
    const CON: ReducedFunction = ReducedFunction::Concurrence;

    fn log3() -> f64 {
        libm::log2(3.0)
    }

    fn psi() -> PureState {
        build_state(&StateSpec::new(vec![
            FactorSpec::ghz(&["A", "B", "C", "D"], 2),
            FactorSpec::w(&["E", "F", "G"]),
            FactorSpec::real(&["H"], &[2], &[1.0, 0.0]),
        ]))
        .unwrap()
    }

    fn phi() -> PureState {
        build_state(&StateSpec::new(vec![FactorSpec::w(&["A", "B", "C"]), FactorSpec::maxent(&["D", "E"], 2)])).unwrap()
    }

    fn value(kind: MeasureKind, k: usize, s: &PureState) -> f64 {
        let r = measure(&MeasureSpec::new(kind, k), s, &Limits::default()).unwrap();
        assert_abs_diff_eq!(r.recompute(), r.value, epsilon = 1e-10);
        r.value
    }

    #[test]
    fn unified_forms() {
        let ghz4 = FactorSpec::ghz(&["A", "B", "C", "D"], 2).build().unwrap();
        let w3 = FactorSpec::w(&["A", "B", "C"]).build().unwrap();
        assert_abs_diff_eq!(unified_mem(UnifiedKind::Additive, ENT, &ghz4).unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(unified_mem(UnifiedKind::BipartiteSum, CON, &ghz4).unwrap(), 3.5, epsilon = 1e-12);
        assert_abs_diff_eq!(
            unified_mem(UnifiedKind::BipartiteSum, ENT, &w3).unwrap(),
            1.5 * log3() - 1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(unified_mem(UnifiedKind::MinReduced, ENT, &ghz4).unwrap(), 1.0, epsilon = 1e-12);
        let bell = FactorSpec::maxent(&["A", "B"], 2).build().unwrap();
        assert_abs_diff_eq!(unified_mem(UnifiedKind::BipartiteSum, ENT, &bell).unwrap(), 1.0, epsilon = 1e-12);
        let single = FactorSpec::real(&["A"], &[2], &[1.0, 0.0]).build().unwrap();
        assert!(unified_mem(UnifiedKind::Additive, ENT, &single).is_err());
    }

    #[test]
    fn factor_family_on_first_state() {
        let s = psi();
        assert_abs_diff_eq!(value(MeasureKind::E(ENT), 4, &s), 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(value(MeasureKind::E(ENT), 3, &s), 1.0 + 1.5 * log3(), epsilon = 1e-9);
        assert_abs_diff_eq!(value(MeasureKind::CalE(ENT), 3, &s), 2.5 + 1.5 * log3(), epsilon = 1e-9);
        assert_abs_diff_eq!(value(MeasureKind::CalE(CON), 4, &s), 3.5, epsilon = 1e-9);
    }

    #[test]
    fn min_family_on_first_state() {
        let s = psi();
        assert_abs_diff_eq!(value(MeasureKind::Eprime(ENT), 2, &s), 1.0 + 1.5 * log3(), epsilon = 1e-9);
        let r = measure(&MeasureSpec::new(MeasureKind::Eprime(ENT), 3), &s, &Limits::default()).unwrap();
        assert_abs_diff_eq!(r.value, 1.0 / 3.0 + log3(), epsilon = 1e-9);
        let w = r.witness_partition().unwrap();
        assert!(w.fineness() <= 2);
        // the tabulated witness scores the same
        let alt = Partition::parse("AB|CD|EF|G|H", s.layout()).unwrap();
        let mut t = HTable::new(&s, ENT);
        let alt_score: f64 = alt.block_masks().iter().map(|&m| 0.5 * t.get(m).unwrap()).sum();
        assert_abs_diff_eq!(alt_score, r.value, epsilon = 1e-12);
    }

    #[test]
    fn level_four_minimum_is_one() {
        let s = psi();
        let r = measure(&MeasureSpec::new(MeasureKind::Eprime(ENT), 4), &s, &Limits::default()).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(value(MeasureKind::Eprime(CON), 4, &s), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn second_state() {
        let s = phi();
        let r = measure(&MeasureSpec::new(MeasureKind::Eprime(CON), 3), &s, &Limits::default()).unwrap();
        assert_abs_diff_eq!(r.value, 2.0 * core::f64::consts::SQRT_2 / 3.0, epsilon = 1e-9);
        assert_eq!(r.witness_partition().unwrap().to_text(s.layout()), "AB|C|DE");
        assert_abs_diff_eq!(value(MeasureKind::C, 3, &s), 4.0 * core::f64::consts::SQRT_2 / 9.0, epsilon = 1e-9);
        assert_abs_diff_eq!(value(MeasureKind::Eprime(ENT), 3, &s), log3() - 2.0 / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(value(MeasureKind::CalE(ENT), 2, &s), 1.5 * log3(), epsilon = 1e-9);
        assert_abs_diff_eq!(value(MeasureKind::CalE(CON), 2, &s), 1.0 + core::f64::consts::SQRT_2, epsilon = 1e-9);
    }

    #[test]
    fn geometric_family() {
        // GHZ3 ⊗ |0⟩ with q = 2: every mixed block has 1 − Tr ρ² = 1/2
        let s = build_state(&StateSpec::new(vec![
            FactorSpec::ghz(&["A", "B", "C"], 2),
            FactorSpec::real(&["D"], &[2], &[1.0, 0.0]),
        ]))
        .unwrap();
        let k3 = value(MeasureKind::CGq(2.0), 3, &s);
        let k2 = value(MeasureKind::CGq(2.0), 2, &s);
        // independent product over the ten partitions of Γ₂ on four parties
        let mut log = 0.0;
        let mut count = 0;
        for p in crate::partition::KFineness::new(&[0, 1, 2, 3], 2).unwrap() {
            let sum: f64 = p.blocks().iter().filter(|b| b.iter().any(|&x| x < 3)).count() as f64 * 0.5;
            log += libm::log(sum / p.n_blocks() as f64);
            count += 1;
        }
        assert_eq!(count, 10);
        assert_abs_diff_eq!(k3, libm::exp(log / 20.0), epsilon = 1e-12);
        assert_abs_diff_eq!(k2, libm::sqrt(0.75 * 0.5), epsilon = 1e-12);
        assert!(k3 > k2);
        // 2-producible input at k = 3 vanishes
        let bells =
            build_state(&StateSpec::new(vec![FactorSpec::maxent(&["A", "B"], 2), FactorSpec::maxent(&["C", "D"], 2)]))
                .unwrap();
        assert_eq!(value(MeasureKind::CGalpha(0.5), 3, &bells), 0.0);
    }

    #[test]
    fn level_and_cap_errors() {
        let s = phi();
        let spec = MeasureSpec::new(MeasureKind::E(ENT), 6);
        assert_eq!(measure(&spec, &s, &Limits::default()).unwrap_err(), Error::KOutOfRange { k: 6, n: 5 });
        assert!(measure(&spec.at(1), &s, &Limits::default()).is_err());
        let tight = Limits { max_family: 5, ..Limits::default() };
        assert!(matches!(measure(&MeasureSpec::new(MeasureKind::C, 3), &s, &tight), Err(Error::SizeCap { .. })));
        let few = Limits { max_geometric_parties: 4, ..Limits::default() };
        assert!(matches!(measure(&MeasureSpec::new(MeasureKind::CGq(2.0), 2), &s, &few), Err(Error::SizeCap { .. })));
    }

    #[test]
    fn display_round_trips() {
        for kind in [
            MeasureKind::C,
            MeasureKind::CGq(2.5),
            MeasureKind::Calpha(0.25),
            MeasureKind::Eprime(ReducedFunction::QFamily(3.0)),
        ] {
            assert_eq!(alloc::format!("{kind}").parse::<MeasureKind>().unwrap(), kind);
        }
    }

    #[test]
    fn measure_grammar() {
        assert_eq!(MeasureKind::parse("Cq:2", None).unwrap(), MeasureKind::Cq(2.0));
        assert_eq!(MeasureKind::parse("CGalpha:0.5", None).unwrap(), MeasureKind::CGalpha(0.5));
        assert_eq!(MeasureKind::parse("Eprime", Some(ENT)).unwrap(), MeasureKind::Eprime(ENT));
        assert_eq!("calE/concurrence".parse::<MeasureKind>().unwrap(), MeasureKind::CalE(CON));
        assert!(MeasureKind::parse("E", None).is_err());
        assert!(MeasureKind::parse("Cq:0.5", None).is_err());
        assert!(MeasureKind::parse("Calpha:2", None).is_err());
        assert!(MeasureKind::parse("C:3", None).is_err());
        assert!(MeasureKind::parse("Z", None).is_err());
    }

    #[test]
    fn roof_bound_on_pure_and_separable() {
        let s = psi();
        let spec = MeasureSpec::new(MeasureKind::E(ENT), 3);
        let dm = DensityMatrix::from_pure(&s);
        let b = convex_roof_upper_bound(&spec, &dm, 5, 1, &Limits::default()).unwrap();
        assert_abs_diff_eq!(b.value, 1.0 + 1.5 * log3(), epsilon = 1e-9);
        assert_eq!(b.rank, 1);

        let layout = SystemLayout::qubits(&["A", "B", "C"]).unwrap();
        let a = PureState::basis(layout.clone(), &[0, 0, 0]).unwrap();
        let c = PureState::basis(layout, &[1, 0, 1]).unwrap();
        let mix = DensityMatrix::mixture(&[0.3, 0.7], &[a, c]).unwrap();
        let spec = MeasureSpec::new(MeasureKind::Eprime(ENT), 2);
        let b = convex_roof_upper_bound(&spec, &mix, 10, 2, &Limits::default()).unwrap();
        assert_abs_diff_eq!(b.value, 0.0, epsilon = 1e-12);
        assert!(convex_roof_upper_bound(&spec, &mix, 0, 2, &Limits::default()).is_err());
    }

    #[test]
    fn roof_trace_is_nonincreasing() {
        let ghz = FactorSpec::ghz(&["A", "B", "C"], 2).build().unwrap();
        let zero = PureState::basis(ghz.layout().clone(), &[0, 0, 0]).unwrap();
        let mix = DensityMatrix::mixture(&[0.5, 0.5], &[ghz, zero]).unwrap();
        let spec = MeasureSpec::new(MeasureKind::Eprime(ENT), 2);
        let b = convex_roof_upper_bound(&spec, &mix, 60, 7, &Limits::default()).unwrap();
        assert_eq!(b.trace.len(), 60);
        assert!(b.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(b.value <= b.trace[0]);
        assert!(b.value > 0.0);
    }

    #[test]
    fn local_unitaries_leave_values_unchanged() {
        let layout = SystemLayout::qubits(&["A", "B", "C", "D"]).unwrap();
        let s = random_pure(&layout, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut t = s.clone();
        for p in 0..4 {
            t = t.apply_local(p, &crate::qstate::random_unitary(2, &mut rng)).unwrap();
        }
        for kind in [MeasureKind::C, MeasureKind::Cq(2.0), MeasureKind::CGalpha(0.5), MeasureKind::Eprime(ENT)] {
            for k in 2..=4 {
                assert_abs_diff_eq!(value(kind, k, &s), value(kind, k, &t), epsilon = 1e-9);
            }
        }
    }
}
