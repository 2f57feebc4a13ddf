//! Finest tensor-product factorisation of a pure state and the resulting
//! k-producibility classification.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::qstate::{mask_of, MarginalCache, PureState};
use crate::PURITY_TOL;

/// Minimum fidelity between the input and the product of recovered factors.
pub const RECONSTRUCTION_FIDELITY: f64 = 1.0 - 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FactorKind {
    Single,
    GenuinelyEntangled,
}

#[derive(Debug, Clone)]
pub struct Factor {
    /// Party indices of the input state, sorted.
    pub parties: Vec<usize>,
    /// Factor state over those parties, first nonzero amplitude real positive.
    pub state: PureState,
    pub kind: FactorKind,
}

impl Factor {
    pub fn size(&self) -> usize {
        self.parties.len()
    }
}

#[derive(Debug, Clone)]
pub struct FactorDecomposition {
    /// Ordered by smallest party index.
    pub factors: Vec<Factor>,
    pub n_parties: usize,
    /// Fidelity of the recovered product with the input state.
    pub fidelity: f64,
}

impl FactorDecomposition {
    /// Largest factor size: the least k for which the state is k-producible.
    pub fn producibility(&self) -> usize {
        self.factors.iter().map(Factor::size).max().unwrap_or(0)
    }

    pub fn is_genuine(&self) -> bool {
        self.factors.len() == 1 && self.n_parties > 1
    }

    pub fn partition(&self) -> Partition {
        Partition::new(self.factors.iter().map(|f| f.parties.clone()).collect())
            .expect("factor party sets are disjoint")
    }

    /// Factors of size at least `k`.
    pub fn at_least(&self, k: usize) -> impl Iterator<Item = &Factor> {
        self.factors.iter().filter(move |f| f.size() >= k)
    }

    /// Factor text form (`ABCD|EFG|H`) with labels from the input layout.
    pub fn to_text(&self, state: &PureState) -> String {
        self.partition().to_text(state.layout())
    }
}

/// Repeatedly peel off the smallest (then lexicographically first) party
/// subset whose marginal is pure within `tol`.
pub fn finest_factorization(state: &PureState, tol: f64) -> Result<FactorDecomposition> {
    let n = state.n_parties();
    let mut cache = MarginalCache::new(state);
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut sets: Vec<Vec<usize>> = Vec::new();
    while !remaining.is_empty() {
        let mut found = None;
        'size: for s in 1..remaining.len() {
            let mut combo: Vec<usize> = (0..s).collect();
            loop {
                let subset: Vec<usize> = combo.iter().map(|&i| remaining[i]).collect();
                if cache.purity(mask_of(&subset))? >= 1.0 - tol {
                    found = Some(subset);
                    break 'size;
                }
                if !next_combination(&mut combo, remaining.len()) {
                    break;
                }
            }
        }
        let subset = found.unwrap_or_else(|| remaining.clone());
        remaining.retain(|p| !subset.contains(p));
        sets.push(subset);
    }
    sets.sort_by_key(|s| s[0]);

    let mut factors = Vec::with_capacity(sets.len());
    for parties in sets {
        let dm = state.reduced_density_mask(mask_of(&parties));
        let fstate = dm.dominant_state();
        let kind = if parties.len() == 1 { FactorKind::Single } else { FactorKind::GenuinelyEntangled };
        factors.push(Factor { parties, state: fstate, kind });
    }

    // tensor back in factor order, then undo the party permutation
    let mut product = factors[0].state.clone();
    for f in &factors[1..] {
        product = product.tensor(&f.state)?;
    }
    let order: Vec<usize> = factors.iter().flat_map(|f| f.parties.iter().copied()).collect();
    let mut perm = alloc::vec![0; n];
    for (pos, &p) in order.iter().enumerate() {
        perm[p] = pos;
    }
    let product = product.permute_parties(&perm)?;
    let fidelity = product.fidelity(state);
    if fidelity < RECONSTRUCTION_FIDELITY {
        return Err(Error::Reconstruction(fidelity));
    }
    Ok(FactorDecomposition { factors, n_parties: n, fidelity })
}

/// Advance a sorted index combination over `0..n`; false when exhausted.
pub(crate) fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let s = combo.len();
    for i in (0..s).rev() {
        if combo[i] < n - s + i {
            combo[i] += 1;
            for j in i + 1..s {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    /// Smallest k for which the state is k-producible.
    pub producibility: usize,
    /// One factor covers every party.
    pub genuine: bool,
}

pub fn classify(state: &PureState) -> Result<Classification> {
    let dec = finest_factorization(state, PURITY_TOL)?;
    Ok(Classification { producibility: dec.producibility(), genuine: dec.is_genuine() })
}

/// Parties of every factor as masks; handy for pure-preservation checks.
pub fn factor_masks(dec: &FactorDecomposition) -> Vec<u32> {
    dec.factors.iter().map(|f| mask_of(&f.parties)).collect()
}

/// True when `mask` is a union of whole factors.
pub fn is_union_of_factors(dec: &FactorDecomposition, mask: u32) -> bool {
    factor_masks(dec).iter().all(|&f| f & mask == 0 || f & mask == f)
}
