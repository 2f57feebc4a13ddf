use kpem_core::audit::{random_composition, GeneratorConfig};
use kpem_core::measures::{measure, measure_value};
use kpem_core::partition::{count_k_fineness, KFineness};
use kpem_core::qstate::{build_state, random_pure_with, random_unitary};
use kpem_core::{
    finest_factorization, Limits, MeasureKind, MeasureSpec, Partition, PureState, ReducedFunction, SystemLayout,
    PURITY_TOL,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;
const ENT: ReducedFunction = ReducedFunction::Entropy;
const CON: ReducedFunction = ReducedFunction::Concurrence;

const KINDS: [MeasureKind; 11] = [
    MeasureKind::E(ENT),
    MeasureKind::E(CON),
    MeasureKind::CalE(ENT),
    MeasureKind::CalE(CON),
    MeasureKind::Eprime(ENT),
    MeasureKind::Eprime(CON),
    MeasureKind::C,
    MeasureKind::Cq(2.0),
    MeasureKind::Calpha(0.5),
    MeasureKind::CGq(2.0),
    MeasureKind::CGalpha(0.5),
];

fn haar(n: usize, rng: &mut ChaCha8Rng) -> PureState {
    let layout = SystemLayout::new((0..n).map(|i| (format!("P{i}"), rng.random_range(2..=3)))).unwrap();
    random_pure_with(&layout, rng)
}

/// Random product-form state and its producibility.
fn composition(n: usize, rng: &mut ChaCha8Rng) -> (PureState, usize) {
    let comp = random_composition(&GeneratorConfig::default(), n, 0, rng);
    let p = comp.factors.iter().map(PureState::n_parties).max().unwrap();
    (build_state(&comp.spec()).unwrap(), p)
}

fn proper_subset(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    loop {
        let pick: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
        if !pick.is_empty() && pick.len() < n {
            return pick;
        }
    }
}

fn value(kind: MeasureKind, k: usize, s: &PureState) -> f64 {
    measure_value(&MeasureSpec::new(kind, k), s, &Limits::default()).unwrap()
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    (0..a.len().max(b.len()))
        .map(|i| (a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schmidt_spectra_agree(seed in any::<u64>(), n in 2usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = haar(n, &mut rng);
        let side = proper_subset(n, &mut rng);
        let rest: Vec<usize> = (0..n).filter(|p| !side.contains(p)).collect();
        let a = s.reduced_density(&side).unwrap().spectrum().unwrap();
        let b = s.reduced_density(&rest).unwrap().spectrum().unwrap();
        prop_assert!(max_gap(&a, &b) <= TOL);
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn permutation_commutes_with_partial_trace(seed in any::<u64>(), n in 2usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = haar(n, &mut rng);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let t = s.permute_parties(&perm).unwrap();
        let keep = proper_subset(n, &mut rng);
        let original: Vec<usize> = keep.iter().map(|&i| perm[i]).collect();
        let a = t.reduced_density(&keep).unwrap();
        let b = s.reduced_density(&original).unwrap();
        prop_assert!(max_gap(&a.spectrum().unwrap(), &b.spectrum().unwrap()) <= TOL);
        prop_assert!((a.purity() - b.purity()).abs() <= TOL);
        for (i, &p) in keep.iter().enumerate() {
            prop_assert_eq!(t.layout().label(p), s.layout().label(perm[p]));
            prop_assert_eq!(a.layout().label(i), s.layout().label(perm[p]));
        }
    }

    #[test]
    fn regroup_preserves_block_marginals(seed in any::<u64>(), n in 2usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = haar(n, &mut rng);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let cut = rng.random_range(1..=n);
        let mut blocks = vec![order[..cut].to_vec()];
        if cut < n {
            blocks.push(order[cut..].to_vec());
        }
        let p = Partition::new(blocks).unwrap();
        let g = s.regroup(&p).unwrap();
        prop_assert_eq!(g.n_parties(), p.n_blocks());
        prop_assert_eq!(g.layout().total_dim(), s.layout().total_dim());
        for (j, block) in p.blocks().iter().enumerate() {
            let a = g.reduced_density(&[j]).unwrap();
            let b = s.reduced_density(block).unwrap();
            let gap = a.matrix().as_slice().iter().zip(b.matrix().as_slice()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            prop_assert!(gap <= 1e-12);
        }
    }

    #[test]
    fn ordering_chain_holds(seed in any::<u64>(), n in 3usize..=7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s, _) = composition(n, &mut rng);
        for h in [ENT, CON] {
            for k in 2..=n {
                let ep = value(MeasureKind::Eprime(h), k, &s);
                let e = value(MeasureKind::E(h), k, &s);
                let cal = value(MeasureKind::CalE(h), k, &s);
                prop_assert!(ep <= e + TOL && e <= cal + TOL, "{} k={}: {} {} {}", h, k, ep, e, cal);
            }
        }
    }

    #[test]
    fn vanishing_tracks_producibility(seed in any::<u64>(), n in 2usize..=7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s, p) = composition(n, &mut rng);
        for h in [ENT, CON] {
            for k in 2..=n {
                for kind in [MeasureKind::E(h), MeasureKind::CalE(h), MeasureKind::Eprime(h)] {
                    let v = value(kind, k, &s);
                    prop_assert_eq!(v > TOL, k <= p, "{} k={} p={} value {}", kind, k, p, v);
                }
            }
        }
    }

    #[test]
    fn local_unitaries_leave_measures_unchanged(seed in any::<u64>(), n in 2usize..=6, pick in 0usize..11) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s, _) = composition(n, &mut rng);
        let mut t = s.clone();
        for p in 0..n {
            t = t.apply_local(p, &random_unitary(s.layout().dim(p), &mut rng)).unwrap();
        }
        for k in 2..=n {
            let (a, b) = (value(KINDS[pick], k, &s), value(KINDS[pick], k, &t));
            prop_assert!((a - b).abs() <= TOL, "{} k={}: {} vs {}", KINDS[pick], k, a, b);
        }
    }

    #[test]
    fn factorization_is_permutation_equivariant(seed in any::<u64>(), n in 2usize..=7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s, p) = composition(n, &mut rng);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let t = s.permute_parties(&perm).unwrap();
        let a = finest_factorization(&s, PURITY_TOL).unwrap();
        let b = finest_factorization(&t, PURITY_TOL).unwrap();
        prop_assert_eq!(a.producibility(), p);
        // party i of t is party perm[i] of s
        let mapped = b.partition().map_parties(|i| perm[i]);
        prop_assert_eq!(mapped, a.partition());
        prop_assert!(a.fidelity >= 1.0 - 1e-8 && b.fidelity >= 1.0 - 1e-8);
    }

    #[test]
    fn minimum_is_located_exactly(seed in any::<u64>(), n in 2usize..=6, pick in 4usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = if rng.random_bool(0.5) { composition(n, &mut rng).0 } else { haar(n, &mut rng) };
        let kind = KINDS[pick];
        let h = kind.reduced_function();
        let parties: Vec<usize> = (0..n).collect();
        for k in 2..=n {
            let r = measure(&MeasureSpec::new(kind, k), &s, &Limits::default()).unwrap();
            let witness = r.witness_partition().unwrap();
            prop_assert!(witness.covers_exactly(n) && witness.fineness() < k);
            prop_assert!((r.recompute() - r.value).abs() <= 1e-12);
            let score = |p: &Partition| {
                let hs: Vec<f64> = p.blocks().iter().map(|b| h.evaluate(&s.reduced_density(b).unwrap()).unwrap()).collect();
                let sum: f64 = hs.iter().sum();
                match kind {
                    MeasureKind::Eprime(_) => 0.5 * sum,
                    MeasureKind::C => sum / hs.len() as f64,
                    _ => (sum / hs.len() as f64).sqrt(),
                }
            };
            let brute = KFineness::new(&parties, k - 1).unwrap().map(|p| score(&p)).fold(f64::INFINITY, f64::min);
            prop_assert!((brute - r.value).abs() <= TOL, "{} k={}: {} vs {}", kind, k, r.value, brute);
            prop_assert!((score(witness) - r.value).abs() <= TOL);
        }
    }

    #[test]
    fn census_matches_enumeration(n in 1usize..=8, k in 1usize..=8) {
        let parties: Vec<usize> = (0..n).collect();
        let members: Vec<Partition> = KFineness::new(&parties, k).unwrap().collect();
        prop_assert_eq!(members.len() as u128, count_k_fineness(n, k));
        let mut seen = std::collections::BTreeSet::new();
        for p in &members {
            prop_assert!(p.covers_exactly(n) && p.fineness() <= k);
            prop_assert!(seen.insert(p.blocks().to_vec()));
        }
    }
}
