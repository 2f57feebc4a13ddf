//! Pure states over labelled multi-qudit layouts, partial traces and spectra.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::partition::Partition;
use crate::{EIGEN_CLIP, PURITY_TOL};

/// Tolerance on `‖ψ‖ = 1`, on Hermiticity and on unit trace.
pub const NORM_TOL: f64 = 1e-12;

/// Hard ceiling imposed by the `u32` subset masks used throughout.
pub const MAX_PARTIES_HARD: usize = 30;

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Party {
    pub label: String,
    pub dim: usize,
}

/// Ordered labelled parties. Party 0 is the most significant digit of the
/// composite index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemLayout {
    parties: Vec<Party>,
}

impl SystemLayout {
    pub fn new<S: Into<String>>(parties: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let parties: Vec<Party> = parties.into_iter().map(|(label, dim)| Party { label: label.into(), dim }).collect();
        if parties.is_empty() {
            return Err(Error::EmptyLayout);
        }
        if parties.len() > MAX_PARTIES_HARD {
            return Err(Error::SizeCap { what: "parties", value: parties.len(), cap: MAX_PARTIES_HARD });
        }
        for (i, p) in parties.iter().enumerate() {
            if p.dim < 2 {
                return Err(Error::DimTooSmall { label: p.label.clone(), dim: p.dim });
            }
            if parties[..i].iter().any(|q| q.label == p.label) {
                return Err(Error::DuplicateLabel(p.label.clone()));
            }
        }
        Ok(SystemLayout { parties })
    }

    /// Qubit layout with the given labels.
    pub fn qubits(labels: &[&str]) -> Result<Self> {
        Self::new(labels.iter().map(|l| (*l, 2)))
    }

    /// Qubit layout labelled `A`, `B`, `C`, … (then `P26`, `P27`, … past `Z`).
    pub fn lettered(n: usize, dim: usize) -> Result<Self> {
        Self::new((0..n).map(|i| (default_label(i), dim)))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.parties.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parties.is_empty()
    }

    pub fn parties(&self) -> &[Party] {
        &self.parties
    }

    #[inline]
    pub fn dim(&self, i: usize) -> usize {
        self.parties[i].dim
    }

    pub fn label(&self, i: usize) -> &str {
        &self.parties[i].label
    }

    pub fn dims(&self) -> Vec<usize> {
        self.parties.iter().map(|p| p.dim).collect()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.parties.iter().map(|p| p.label.as_str()).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.parties.iter().map(|p| p.dim).product()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.parties.iter().position(|p| p.label == label)
    }

    /// Hilbert dimension of the parties in `mask`.
    pub fn mask_dim(&self, mask: u32) -> usize {
        (0..self.len()).filter(|i| mask >> i & 1 == 1).map(|i| self.dim(i)).product()
    }

    pub fn full_mask(&self) -> u32 {
        full_mask(self.len())
    }

    /// Layout of the listed parties, in the given order.
    pub fn select(&self, indices: &[usize]) -> SystemLayout {
        SystemLayout { parties: indices.iter().map(|&i| self.parties[i].clone()).collect() }
    }

    fn concat(&self, other: &SystemLayout) -> Result<SystemLayout> {
        SystemLayout::new(self.parties.iter().chain(&other.parties).map(|p| (p.label.clone(), p.dim)))
    }
}

impl fmt::Display for SystemLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.parties.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}:{}", p.label, p.dim)?;
        }
        Ok(())
    }
}

pub fn default_label(i: usize) -> String {
    if i < 26 {
        char::from(b'A' + i as u8).to_string()
    } else {
        alloc::format!("P{i}")
    }
}

#[inline]
pub fn full_mask(n: usize) -> u32 {
    if n >= 32 {
        u32::MAX
    } else {
        (1u32 << n) - 1
    }
}

pub fn mask_of(parties: &[usize]) -> u32 {
    parties.iter().fold(0, |m, &p| m | 1 << p)
}

pub fn parties_of(mask: u32) -> Vec<usize> {
    (0..32).filter(|i| mask >> i & 1 == 1).collect()
}

/// Size caps guarding against accidental exponential blow-up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_total_dim: usize,
    pub max_parties: usize,
    /// Largest partition family a minimisation may enumerate.
    pub max_family: usize,
    /// Party cap for the geometric (product-over-all-partitions) measures.
    pub max_geometric_parties: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_total_dim: 1 << 14, max_parties: 12, max_family: 1_000_000, max_geometric_parties: 9 }
    }
}

impl Limits {
    /// Only the structural ceiling of the subset masks remains.
    pub fn unbounded() -> Self {
        Limits {
            max_total_dim: usize::MAX,
            max_parties: MAX_PARTIES_HARD,
            max_family: usize::MAX,
            max_geometric_parties: MAX_PARTIES_HARD,
        }
    }

    pub fn check_layout(&self, layout: &SystemLayout) -> Result<()> {
        if layout.len() > self.max_parties {
            return Err(Error::SizeCap { what: "parties", value: layout.len(), cap: self.max_parties });
        }
        let mut dim: usize = 1;
        for p in layout.parties() {
            dim = dim.saturating_mul(p.dim);
        }
        if dim > self.max_total_dim {
            return Err(Error::SizeCap { what: "total dimension", value: dim, cap: self.max_total_dim });
        }
        Ok(())
    }
}

/// Odometer over the mixed-radix digits of a layout, party 0 most significant.
struct Digits<'a> {
    dims: &'a [usize],
    digits: Vec<usize>,
}

impl<'a> Digits<'a> {
    fn new(dims: &'a [usize]) -> Self {
        Digits { dims, digits: vec![0; dims.len()] }
    }

    fn advance(&mut self) {
        for p in (0..self.dims.len()).rev() {
            self.digits[p] += 1;
            if self.digits[p] < self.dims[p] {
                return;
            }
            self.digits[p] = 0;
        }
    }
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Unit-norm amplitude vector over a layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    layout: SystemLayout,
    amps: Vec<Complex64>,
}

impl PureState {
    /// Wraps amplitudes that are already normalised within [`NORM_TOL`].
    pub fn new(layout: SystemLayout, amps: Vec<Complex64>) -> Result<Self> {
        let expected = layout.total_dim();
        if amps.len() != expected {
            return Err(Error::LengthMismatch { expected, found: amps.len() });
        }
        let dev = (linalg::norm(&amps) - 1.0).abs();
        if dev > NORM_TOL {
            return Err(Error::NotNormalized(dev));
        }
        Ok(PureState { layout, amps })
    }

    /// Normalises `amps`; fails on the zero vector.
    pub fn normalized(layout: SystemLayout, mut amps: Vec<Complex64>) -> Result<Self> {
        let expected = layout.total_dim();
        if amps.len() != expected {
            return Err(Error::LengthMismatch { expected, found: amps.len() });
        }
        let n = linalg::norm(&amps);
        if !n.is_finite() || n <= 0.0 {
            return Err(Error::ZeroVector);
        }
        for a in &mut amps {
            *a /= n;
        }
        Ok(PureState { layout, amps })
    }

    /// Computational basis product state `|digits⟩`.
    pub fn basis(layout: SystemLayout, digits: &[usize]) -> Result<Self> {
        if digits.len() != layout.len() {
            return Err(Error::LengthMismatch { expected: layout.len(), found: digits.len() });
        }
        let mut idx = 0;
        for (i, &d) in digits.iter().enumerate() {
            if d >= layout.dim(i) {
                return Err(Error::InvalidParameter(alloc::format!("basis digit {d} for party {i}")));
            }
            idx = idx * layout.dim(i) + d;
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); layout.total_dim()];
        amps[idx] = Complex64::new(1.0, 0.0);
        Ok(PureState { layout, amps })
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn n_parties(&self) -> usize {
        self.layout.len()
    }

    /// `|⟨self|other⟩|²`; zero when the layouts' dimensions differ.
    pub fn fidelity(&self, other: &PureState) -> f64 {
        if self.amps.len() != other.amps.len() {
            return 0.0;
        }
        linalg::inner(&self.amps, &other.amps).norm_sqr()
    }

    /// `self ⊗ other`, parties of `other` appended after those of `self`.
    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        let layout = self.layout.concat(&other.layout)?;
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(PureState { layout, amps })
    }

    /// Party `i` of the output is party `perm[i]` of the input.
    pub fn permute_parties(&self, perm: &[usize]) -> Result<PureState> {
        let n = self.n_parties();
        if !is_permutation(perm, n) {
            return Err(Error::InvalidPermutation(n));
        }
        let layout = self.layout.select(perm);
        let out_strides = strides(&layout.dims());
        // input party p lands at output position inv[p]
        let mut inv = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let dims = self.layout.dims();
        let mut digits = Digits::new(&dims);
        let mut amps = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for a in &self.amps {
            let idx: usize = (0..n).map(|p| digits.digits[p] * out_strides[inv[p]]).sum();
            amps[idx] = *a;
            digits.advance();
        }
        Ok(PureState { layout, amps })
    }

    /// Each block of `partition` becomes one party; blocks keep global party
    /// order inside, block order is the partition's canonical order.
    pub fn regroup(&self, partition: &Partition) -> Result<PureState> {
        let n = self.n_parties();
        if !partition.covers_exactly(n) {
            return Err(Error::PartitionMismatch);
        }
        let blocks = partition.blocks();
        let mut block_of = vec![0; n];
        let mut inner_stride = vec![0; n];
        let mut parties = Vec::with_capacity(blocks.len());
        for (b, block) in blocks.iter().enumerate() {
            let mut dim = 1;
            let mut label = String::new();
            for &p in block.iter().rev() {
                block_of[p] = b;
                inner_stride[p] = dim;
                dim *= self.layout.dim(p);
            }
            for &p in block {
                label.push_str(self.layout.label(p));
            }
            parties.push((label, dim));
        }
        let layout = SystemLayout::new(parties)?;
        let out_strides = strides(&layout.dims());
        let dims = self.layout.dims();
        let mut digits = Digits::new(&dims);
        let mut amps = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for a in &self.amps {
            let idx: usize = (0..n).map(|p| digits.digits[p] * inner_stride[p] * out_strides[block_of[p]]).sum();
            amps[idx] = *a;
            digits.advance();
        }
        Ok(PureState { layout, amps })
    }

    /// Partial trace onto `keep`; the result lists kept parties in layout
    /// order regardless of the order given.
    pub fn reduced_density(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let n = self.n_parties();
        if keep.is_empty() {
            return Err(Error::EmptyKeep);
        }
        if let Some(&bad) = keep.iter().find(|&&p| p >= n) {
            return Err(Error::PartyOutOfRange { index: bad, n });
        }
        let mask = mask_of(keep);
        Ok(self.reduced_density_mask(mask))
    }

    pub(crate) fn reduced_density_mask(&self, mask: u32) -> DensityMatrix {
        let n = self.n_parties();
        let kept: Vec<usize> = (0..n).filter(|p| mask >> p & 1 == 1).collect();
        let traced: Vec<usize> = (0..n).filter(|p| mask >> p & 1 == 0).collect();
        let dims = self.layout.dims();
        let kdims: Vec<usize> = kept.iter().map(|&p| dims[p]).collect();
        let edims: Vec<usize> = traced.iter().map(|&p| dims[p]).collect();
        let kstr = strides(&kdims);
        let estr = strides(&edims);
        let dk: usize = kdims.iter().product();
        let de: usize = edims.iter().product();
        let mut kpos = vec![usize::MAX; n];
        let mut epos = vec![usize::MAX; n];
        for (i, &p) in kept.iter().enumerate() {
            kpos[p] = kstr[i];
        }
        for (i, &p) in traced.iter().enumerate() {
            epos[p] = estr[i];
        }
        // M[k][e] = ψ[k, e]
        let mut m = vec![Complex64::new(0.0, 0.0); dk * de];
        let mut digits = Digits::new(&dims);
        for a in &self.amps {
            let mut ki = 0;
            let mut ei = 0;
            for p in 0..n {
                let d = digits.digits[p];
                if kpos[p] != usize::MAX {
                    ki += d * kpos[p];
                } else {
                    ei += d * epos[p];
                }
            }
            m[ki * de + ei] = *a;
            digits.advance();
        }
        let mut rho = CMatrix::zeros(dk);
        for i in 0..dk {
            let ri = &m[i * de..(i + 1) * de];
            for j in i..dk {
                let rj = &m[j * de..(j + 1) * de];
                let z: Complex64 = ri.iter().zip(rj).map(|(x, y)| x * y.conj()).sum();
                if i == j {
                    rho.set(i, i, Complex64::new(z.re, 0.0));
                } else {
                    rho.set(i, j, z);
                    rho.set(j, i, z.conj());
                }
            }
        }
        DensityMatrix { layout: self.layout.select(&kept), matrix: rho }
    }

    /// The pure state carried by `keep` when its marginal is pure, i.e. when
    /// the complement is a whole tensor factor.
    pub fn marginal_state(&self, keep: &[usize]) -> Result<PureState> {
        let dm = self.reduced_density(keep)?;
        let purity = dm.purity();
        if purity < 1.0 - PURITY_TOL {
            return Err(Error::NotPureMarginal(purity));
        }
        Ok(dm.dominant_state())
    }

    /// Apply a unitary on one party.
    pub fn apply_local(&self, party: usize, u: &CMatrix) -> Result<PureState> {
        let n = self.n_parties();
        if party >= n {
            return Err(Error::PartyOutOfRange { index: party, n });
        }
        let d = self.layout.dim(party);
        if u.dim() != d {
            return Err(Error::LengthMismatch { expected: d, found: u.dim() });
        }
        let stride = strides(&self.layout.dims())[party];
        let mut amps = self.amps.clone();
        let total = self.amps.len();
        let mut col = vec![Complex64::new(0.0, 0.0); d];
        for base in 0..total {
            if !(base / stride).is_multiple_of(d) {
                continue;
            }
            for (j, c) in col.iter_mut().enumerate() {
                *c = self.amps[base + j * stride];
            }
            for i in 0..d {
                amps[base + i * stride] = (0..d).map(|j| u.get(i, j) * col[j]).sum();
            }
        }
        Ok(PureState { layout: self.layout.clone(), amps })
    }

    /// Multiply by a global phase so the first amplitude above `1e-12` in
    /// modulus is real and positive.
    pub fn canonical_phase(mut self) -> PureState {
        if let Some(a) = self.amps.iter().find(|a| a.norm() > 1e-12).copied() {
            let ph = a.conj() / a.norm();
            for x in &mut self.amps {
                *x *= ph;
            }
        }
        self
    }

    /// Same amplitudes under new party labels.
    pub fn relabel(mut self, labels: &[String]) -> Result<PureState> {
        self.layout = SystemLayout::new(labels.iter().zip(self.layout.parties()).map(|(l, p)| (l.clone(), p.dim)))?;
        Ok(self)
    }
}

pub fn is_permutation(perm: &[usize], n: usize) -> bool {
    if perm.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return false;
        }
        seen[p] = true;
    }
    true
}

/// Hermitian, positive semidefinite, unit-trace operator on a layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    layout: SystemLayout,
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(layout: SystemLayout, matrix: CMatrix) -> Result<Self> {
        if matrix.dim() != layout.total_dim() {
            return Err(Error::LengthMismatch { expected: layout.total_dim(), found: matrix.dim() });
        }
        let dev = matrix.hermitian_deviation();
        if dev > NORM_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = matrix.trace();
        let tdev = (tr - Complex64::new(1.0, 0.0)).norm();
        if tdev > NORM_TOL {
            return Err(Error::TraceNotOne(tdev));
        }
        Ok(DensityMatrix { layout, matrix })
    }

    pub fn from_pure(state: &PureState) -> Self {
        DensityMatrix { layout: state.layout.clone(), matrix: CMatrix::outer(&state.amps) }
    }

    /// `Σ pᵢ |ψᵢ⟩⟨ψᵢ|`; weights are normalised to sum to one.
    pub fn mixture(weights: &[f64], states: &[PureState]) -> Result<Self> {
        let first = states.first().ok_or(Error::ZeroVector)?;
        if weights.len() != states.len() {
            return Err(Error::LengthMismatch { expected: states.len(), found: weights.len() });
        }
        let total: f64 = weights.iter().sum();
        if !total.is_finite() || total <= 0.0 || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidParameter("mixture weights must be nonnegative, not all zero".to_owned()));
        }
        let mut m = CMatrix::zeros(first.amps.len());
        for (w, s) in weights.iter().zip(states) {
            if s.layout.dims() != first.layout.dims() {
                return Err(Error::LengthMismatch { expected: first.amps.len(), found: s.amps.len() });
            }
            let mut o = CMatrix::outer(&s.amps);
            o.scale(w / total);
            m.add_assign(&o);
        }
        DensityMatrix::new(first.layout.clone(), m)
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `Tr ρ²`
    pub fn purity(&self) -> f64 {
        self.matrix.frobenius_sq()
    }

    pub fn is_pure(&self) -> bool {
        self.purity() >= 1.0 - PURITY_TOL
    }

    /// Descending eigenvalues, clipped into `[0, 1]` and renormalised.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        let dev = self.matrix.hermitian_deviation();
        if dev > NORM_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let eig = linalg::hermitian_eigen(&self.matrix);
        clip_spectrum(eig.values)
    }

    /// Column of largest weight, normalised: the state itself when `ρ` is
    /// rank one.
    pub(crate) fn dominant_state(&self) -> PureState {
        let d = self.matrix.dim();
        let col = (0..d).max_by(|&i, &j| self.matrix.get(i, i).re.total_cmp(&self.matrix.get(j, j).re)).unwrap_or(0);
        let amps: Vec<Complex64> = (0..d).map(|r| self.matrix.get(r, col)).collect();
        PureState::normalized(self.layout.clone(), amps)
            .expect("a unit-trace PSD matrix has a nonzero column")
            .canonical_phase()
    }

    pub fn kron(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        Ok(DensityMatrix { layout: self.layout.concat(&other.layout)?, matrix: self.matrix.kron(&other.matrix) })
    }
}

pub(crate) fn clip_spectrum(mut values: Vec<f64>) -> Result<Vec<f64>> {
    for v in &mut values {
        if *v < -EIGEN_CLIP {
            return Err(Error::NegativeEigenvalue(*v));
        }
        *v = v.clamp(0.0, 1.0);
    }
    let total: f64 = values.iter().sum();
    if total > 0.0 {
        for v in &mut values {
            *v /= total;
        }
    }
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// One tensor factor of a [`StateSpec`].
#[derive(Debug, Clone, PartialEq)]
pub enum FactorSpec {
    /// `(1/√d) Σ_j |j…j⟩` over all labels.
    Ghz { labels: Vec<String>, dim: usize },
    /// `(1/√n) Σ_i |0…1ᵢ…0⟩` on qubits.
    W { labels: Vec<String> },
    /// `(1/√d) Σ_j |jj⟩` on two parties.
    MaxEnt { labels: Vec<String>, dim: usize },
    /// Explicit amplitudes, normalised on construction.
    Amplitudes { labels: Vec<String>, dims: Vec<usize>, amps: Vec<Complex64> },
}

impl FactorSpec {
    pub fn ghz(labels: &[&str], dim: usize) -> Self {
        FactorSpec::Ghz { labels: owned(labels), dim }
    }

    pub fn w(labels: &[&str]) -> Self {
        FactorSpec::W { labels: owned(labels) }
    }

    pub fn maxent(labels: &[&str], dim: usize) -> Self {
        FactorSpec::MaxEnt { labels: owned(labels), dim }
    }

    pub fn amplitudes(labels: &[&str], dims: &[usize], amps: Vec<Complex64>) -> Self {
        FactorSpec::Amplitudes { labels: owned(labels), dims: dims.to_vec(), amps }
    }

    /// Real amplitudes convenience constructor.
    pub fn real(labels: &[&str], dims: &[usize], re: &[f64]) -> Self {
        Self::amplitudes(labels, dims, re.iter().map(|r| Complex64::new(*r, 0.0)).collect())
    }

    /// A pure state as an amplitude factor (labels and dims taken from it).
    pub fn from_state(state: &PureState) -> Self {
        FactorSpec::Amplitudes {
            labels: state.layout.labels().into_iter().map(String::from).collect(),
            dims: state.layout.dims(),
            amps: state.amps.clone(),
        }
    }

    pub fn labels(&self) -> &[String] {
        match self {
            FactorSpec::Ghz { labels, .. }
            | FactorSpec::W { labels }
            | FactorSpec::MaxEnt { labels, .. }
            | FactorSpec::Amplitudes { labels, .. } => labels,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            FactorSpec::Ghz { .. } => "ghz",
            FactorSpec::W { .. } => "w",
            FactorSpec::MaxEnt { .. } => "maxent",
            FactorSpec::Amplitudes { .. } => "amplitudes",
        }
    }

    pub fn build(&self) -> Result<PureState> {
        let zero = Complex64::new(0.0, 0.0);
        match self {
            FactorSpec::Ghz { labels, dim } => {
                let n = labels.len();
                if n == 0 {
                    return Err(Error::LabelCount { kind: "ghz", expected: 1, found: 0 });
                }
                let layout = SystemLayout::new(labels.iter().map(|l| (l.clone(), *dim)))?;
                let mut amps = vec![zero; layout.total_dim()];
                // |j…j⟩ sits at j·(1 + d + d² + …)
                let step: usize = (0..n).map(|i| dim.pow(i as u32)).sum();
                let a = 1.0 / libm::sqrt(*dim as f64);
                for j in 0..*dim {
                    amps[j * step] = Complex64::new(a, 0.0);
                }
                PureState::normalized(layout, amps)
            }
            FactorSpec::W { labels } => {
                let n = labels.len();
                if n == 0 {
                    return Err(Error::LabelCount { kind: "w", expected: 1, found: 0 });
                }
                let layout = SystemLayout::new(labels.iter().map(|l| (l.clone(), 2)))?;
                let mut amps = vec![zero; layout.total_dim()];
                let a = 1.0 / libm::sqrt(n as f64);
                for i in 0..n {
                    amps[1 << (n - 1 - i)] = Complex64::new(a, 0.0);
                }
                PureState::normalized(layout, amps)
            }
            FactorSpec::MaxEnt { labels, dim } => {
                if labels.len() != 2 {
                    return Err(Error::LabelCount { kind: "maxent", expected: 2, found: labels.len() });
                }
                let layout = SystemLayout::new(labels.iter().map(|l| (l.clone(), *dim)))?;
                let mut amps = vec![zero; layout.total_dim()];
                let a = 1.0 / libm::sqrt(*dim as f64);
                for j in 0..*dim {
                    amps[j * dim + j] = Complex64::new(a, 0.0);
                }
                PureState::normalized(layout, amps)
            }
            FactorSpec::Amplitudes { labels, dims, amps } => {
                if labels.len() != dims.len() {
                    return Err(Error::LabelCount { kind: "amplitudes", expected: dims.len(), found: labels.len() });
                }
                let layout = SystemLayout::new(labels.iter().cloned().zip(dims.iter().copied()))?;
                PureState::normalized(layout, amps.clone())
            }
        }
    }
}

fn owned(labels: &[&str]) -> Vec<String> {
    labels.iter().map(|s| String::from(*s)).collect()
}

/// Ordered tensor-product description of a pure state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateSpec {
    pub factors: Vec<FactorSpec>,
}

impl StateSpec {
    pub fn new(factors: Vec<FactorSpec>) -> Self {
        StateSpec { factors }
    }

    pub fn n_parties(&self) -> usize {
        self.factors.iter().map(|f| f.labels().len()).sum()
    }

    /// Party index sets covered by each factor, in build order.
    pub fn factor_party_sets(&self) -> Vec<Vec<usize>> {
        let mut next = 0;
        self.factors
            .iter()
            .map(|f| {
                let len = f.labels().len();
                let set = (next..next + len).collect();
                next += len;
                set
            })
            .collect()
    }

    /// Specification of a built state as one amplitude factor per product
    /// component.
    pub fn from_factors(states: &[PureState]) -> Self {
        StateSpec { factors: states.iter().map(FactorSpec::from_state).collect() }
    }
}

/// Tensor product of the spec's factors under the default [`Limits`].
pub fn build_state(spec: &StateSpec) -> Result<PureState> {
    build_state_with(spec, &Limits::default())
}

pub fn build_state_with(spec: &StateSpec, limits: &Limits) -> Result<PureState> {
    let mut labels: Vec<&str> = Vec::new();
    let mut dims: Vec<(String, usize)> = Vec::new();
    for f in &spec.factors {
        for l in f.labels() {
            if labels.contains(&l.as_str()) {
                return Err(Error::DuplicateLabel(l.clone()));
            }
            labels.push(l);
        }
        let d = match f {
            FactorSpec::Ghz { dim, .. } | FactorSpec::MaxEnt { dim, .. } => vec![*dim; f.labels().len()],
            FactorSpec::W { labels } => vec![2; labels.len()],
            FactorSpec::Amplitudes { dims, .. } => dims.clone(),
        };
        dims.extend(f.labels().iter().cloned().zip(d));
    }
    if spec.factors.is_empty() {
        return Err(Error::EmptyLayout);
    }
    // cap check before any allocation
    limits.check_layout(&SystemLayout::new(dims)?)?;
    let mut iter = spec.factors.iter();
    let mut state = iter.next().expect("nonempty").build()?;
    for f in iter {
        state = state.tensor(&f.build()?)?;
    }
    Ok(state)
}

/// Haar-random pure state, deterministic in `seed`.
pub fn random_pure(layout: &SystemLayout, seed: u64) -> PureState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_pure_with(layout, &mut rng)
}

pub fn random_pure_with<R: Rng + ?Sized>(layout: &SystemLayout, rng: &mut R) -> PureState {
    loop {
        let amps: Vec<Complex64> = (0..layout.total_dim())
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        if let Ok(s) = PureState::normalized(layout.clone(), amps) {
            return s;
        }
    }
}

/// Haar-random `d × d` unitary (QR of a Ginibre matrix via Gram-Schmidt).
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    loop {
        let mut cols: Vec<Vec<Complex64>> = (0..d)
            .map(|_| (0..d).map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect())
            .collect();
        linalg::orthonormalize(&mut cols);
        if cols.len() == d {
            let mut u = CMatrix::zeros(d);
            for (j, c) in cols.iter().enumerate() {
                for (i, z) in c.iter().enumerate() {
                    u.set(i, j, *z);
                }
            }
            return u;
        }
    }
}

/// Lazily cached spectra of every marginal of one pure state, keyed by party
/// mask. Each marginal is diagonalised on whichever side of the cut has the
/// smaller dimension; the nonzero spectra agree for a pure global state.
pub struct MarginalCache<'a> {
    state: &'a PureState,
    store: SpectrumStore,
}

enum SpectrumStore {
    Dense(Vec<Option<Vec<f64>>>),
    Sparse(BTreeMap<u32, Vec<f64>>),
}

/// Above this many parties the cache switches to a sparse map.
const DENSE_CACHE_PARTIES: usize = 20;

impl<'a> MarginalCache<'a> {
    pub fn new(state: &'a PureState) -> Self {
        let n = state.n_parties();
        let store = if n <= DENSE_CACHE_PARTIES {
            SpectrumStore::Dense(vec![None; 1usize << n])
        } else {
            SpectrumStore::Sparse(BTreeMap::new())
        };
        MarginalCache { state, store }
    }

    pub fn state(&self) -> &PureState {
        self.state
    }

    pub fn spectrum(&mut self, mask: u32) -> Result<&[f64]> {
        let layout = &self.state.layout;
        let full = layout.full_mask();
        let mask = mask & full;
        let comp = full & !mask;
        let key = if mask == 0 || comp == 0 {
            mask
        } else if layout.mask_dim(comp) < layout.mask_dim(mask) {
            comp
        } else {
            mask
        };
        let state = self.state;
        let compute = || -> Result<Vec<f64>> {
            if key == 0 || key == full {
                Ok(vec![1.0])
            } else {
                state.reduced_density_mask(key).spectrum()
            }
        };
        match &mut self.store {
            SpectrumStore::Dense(v) => {
                if v[key as usize].is_none() {
                    v[key as usize] = Some(compute()?);
                }
                Ok(v[key as usize].as_deref().expect("filled above"))
            }
            SpectrumStore::Sparse(m) => {
                if let alloc::collections::btree_map::Entry::Vacant(e) = m.entry(key) {
                    e.insert(compute()?);
                }
                Ok(&m[&key])
            }
        }
    }

    pub fn purity(&mut self, mask: u32) -> Result<f64> {
        Ok(self.spectrum(mask)?.iter().map(|l| l * l).sum())
    }
}
