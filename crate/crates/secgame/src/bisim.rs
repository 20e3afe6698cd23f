//! Probabilistic bisimulation on finite labelled transition systems.
//!
//! Two states are bisimilar when, for every action and every equivalence
//! class, they reach the class with equal total probability. The coarsest
//! such equivalence is computed by signature-based partition refinement:
//! states start grouped by their enabled-label sets and are repeatedly
//! split on their per-(label, block) probability signatures until no block
//! splits any more.

use std::collections::BTreeMap;

use thiserror::Error;

/// Probability equality tolerance; signatures are rounded to 12 decimal
/// digits so refinement stays deterministic under float noise.
pub const EPS_PROB: f64 = 1e-9;
const SIG_SCALE: f64 = 1e12;

/// Finite labelled transition system with probability-weighted transitions.
#[derive(Clone, Debug)]
pub struct Lts<L> {
    pub states: Vec<LtsState>,
    pub transitions: Vec<LtsTransition<L>>,
}

/// A state carries a debug name plus the ids of the game states it
/// represents (empty for intermediate interaction states, more than one
/// after quotienting merges).
#[derive(Clone, Debug, Default)]
pub struct LtsState {
    pub name: String,
    pub game_ids: Vec<u32>,
}

#[derive(Clone, Debug)]
pub struct LtsTransition<L> {
    pub src: usize,
    pub label: L,
    pub prob: f64,
    pub dst: usize,
}

impl<L> Lts<L> {
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    fn outgoing(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.states.len()];
        for (i, t) in self.transitions.iter().enumerate() {
            out[t.src].push(i);
        }
        out
    }
}

/// A partition of the state indices into disjoint covering blocks. Blocks
/// are numbered in order of their least member.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub block_of: Vec<usize>,
    pub blocks: Vec<Vec<usize>>,
}

impl Partition {
    fn from_keys<K: Ord>(keys: Vec<K>) -> Partition {
        let mut by_key: BTreeMap<&K, Vec<usize>> = BTreeMap::new();
        for (state, key) in keys.iter().enumerate() {
            by_key.entry(key).or_default().push(state);
        }
        let mut blocks: Vec<Vec<usize>> = by_key.into_values().collect();
        blocks.sort_by_key(|b| b[0]);
        let mut block_of = vec![0; keys.len()];
        for (b, members) in blocks.iter().enumerate() {
            for &s in members {
                block_of[s] = b;
            }
        }
        Partition { block_of, blocks }
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// True when `a` and `b` share a block.
    pub fn same_block(&self, a: usize, b: usize) -> bool {
        self.block_of[a] == self.block_of[b]
    }
}

#[derive(Debug, Error)]
pub enum BisimError {
    #[error("partition is not a bisimulation: states {0} and {1} share a block but differ on ({2}, block {3})")]
    NotABisimulation(usize, usize, String, usize),
}

type Signature<L> = Vec<(L, usize, i64)>;

fn signature<L: Clone + Ord>(
    lts: &Lts<L>,
    out: &[Vec<usize>],
    part: &Partition,
    state: usize,
) -> Signature<L> {
    let mut acc: BTreeMap<(L, usize), f64> = BTreeMap::new();
    for &t in &out[state] {
        let tr = &lts.transitions[t];
        *acc.entry((tr.label.clone(), part.block_of[tr.dst]))
            .or_insert(0.0) += tr.prob;
    }
    acc.into_iter()
        .map(|((l, b), p)| (l, b, (p * SIG_SCALE).round() as i64))
        .collect()
}

/// Coarsest probabilistic bisimulation of `lts`.
pub fn coarsest_bisimulation<L: Clone + Ord>(lts: &Lts<L>) -> Partition {
    let out = lts.outgoing();
    // Initial split on enabled-label sets: a necessary condition for
    // bisimilarity that keeps early iterations cheap.
    let initial_keys: Vec<Vec<L>> = (0..lts.states.len())
        .map(|s| {
            let mut labels: Vec<L> = out[s]
                .iter()
                .map(|&t| lts.transitions[t].label.clone())
                .collect();
            labels.sort();
            labels.dedup();
            labels
        })
        .collect();
    let mut part = Partition::from_keys(initial_keys);

    loop {
        let keys: Vec<(usize, Signature<L>)> = (0..lts.states.len())
            .map(|s| (part.block_of[s], signature(lts, &out, &part, s)))
            .collect();
        let refined = Partition::from_keys(keys);
        if refined.block_count() == part.block_count() {
            return refined;
        }
        debug_assert!(refined.block_count() > part.block_count());
        part = refined;
    }
}

/// Quotient system: one state per block, transition mass into a block
/// summed. Fails when `partition` is not a bisimulation for `lts`.
pub fn quotient<L: Clone + Ord + std::fmt::Debug>(
    lts: &Lts<L>,
    partition: &Partition,
) -> Result<Lts<L>, BisimError> {
    let out = lts.outgoing();
    // Precondition: all members of a block must share their signature.
    for members in &partition.blocks {
        let rep = members[0];
        let rep_sig = signature(lts, &out, partition, rep);
        for &s in &members[1..] {
            let sig = signature(lts, &out, partition, s);
            if sig != rep_sig {
                let diff = rep_sig
                    .iter()
                    .find(|entry| !sig.contains(entry))
                    .or_else(|| sig.iter().find(|entry| !rep_sig.contains(entry)));
                let (label, block) = diff
                    .map(|(l, b, _)| (format!("{l:?}"), *b))
                    .unwrap_or_else(|| ("<unknown>".into(), 0));
                return Err(BisimError::NotABisimulation(rep, s, label, block));
            }
        }
    }

    let states = partition
        .blocks
        .iter()
        .map(|members| {
            let mut game_ids: Vec<u32> = members
                .iter()
                .flat_map(|&s| lts.states[s].game_ids.iter().copied())
                .collect();
            game_ids.sort_unstable();
            game_ids.dedup();
            let name = lts.states[members[0]].name.clone();
            LtsState { name, game_ids }
        })
        .collect();

    let mut transitions = Vec::new();
    for (b, members) in partition.blocks.iter().enumerate() {
        let rep = members[0];
        let mut acc: BTreeMap<(L, usize), f64> = BTreeMap::new();
        for &t in &out[rep] {
            let tr = &lts.transitions[t];
            *acc.entry((tr.label.clone(), partition.block_of[tr.dst]))
                .or_insert(0.0) += tr.prob;
        }
        for ((label, dst), prob) in acc {
            transitions.push(LtsTransition {
                src: b,
                label,
                prob,
                dst,
            });
        }
    }
    Ok(Lts {
        states,
        transitions,
    })
}

/// Direct statement of the bisimulation condition, used by tests: for every
/// pair in a block, every label, every block, the reached mass agrees.
pub fn is_bisimulation<L: Clone + Ord>(lts: &Lts<L>, part: &Partition) -> bool {
    let out = lts.outgoing();
    part.blocks.iter().all(|members| {
        let rep_sig = signature(lts, &out, part, members[0]);
        members[1..]
            .iter()
            .all(|&s| signature(lts, &out, part, s) == rep_sig)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lts(n: usize, trans: &[(usize, &str, f64, usize)]) -> Lts<String> {
        Lts {
            states: (0..n)
                .map(|i| LtsState {
                    name: format!("s{i}"),
                    game_ids: vec![i as u32],
                })
                .collect(),
            transitions: trans
                .iter()
                .map(|&(src, l, prob, dst)| LtsTransition {
                    src,
                    label: l.to_string(),
                    prob,
                    dst,
                })
                .collect(),
        }
    }

    #[test]
    fn identical_behaviour_merges() {
        // Two states with the same (alpha, 1.0) edge onto the same target.
        let l = lts(3, &[(0, "alpha", 1.0, 2), (1, "alpha", 1.0, 2)]);
        let p = coarsest_bisimulation(&l);
        assert!(p.same_block(0, 1));
        assert!(!p.same_block(0, 2));
        assert_eq!(p.block_count(), 2);
    }

    #[test]
    fn probabilistic_split_distinguishes() {
        // P = [0.5]a.A + [0.5]a.B vs Q = [1]a.A with A and B inequivalent.
        // A enables `b`, B enables `c`, so block(A) != block(B).
        let l = lts(
            4,
            &[
                (0, "a", 0.5, 2),
                (0, "a", 0.5, 3),
                (1, "a", 1.0, 2),
                (2, "b", 1.0, 2),
                (3, "c", 1.0, 3),
            ],
        );
        let p = coarsest_bisimulation(&l);
        assert!(!p.same_block(0, 1));
    }

    #[test]
    fn mass_into_merged_class_sums() {
        // P = [0.5]a.A1 + [0.5]a.A2 with A1 ~ A2: quotient edge carries 1.0.
        let l = lts(3, &[(0, "a", 0.5, 1), (0, "a", 0.5, 2)]);
        let p = coarsest_bisimulation(&l);
        assert!(p.same_block(1, 2));
        let q = quotient(&l, &p).unwrap();
        let t: Vec<_> = q.transitions.iter().filter(|t| t.src == 0).collect();
        assert_eq!(t.len(), 1);
        assert!((t[0].prob - 1.0).abs() < EPS_PROB);
    }

    #[test]
    fn identity_partition_quotient_is_isomorphic() {
        let l = lts(2, &[(0, "a", 1.0, 1), (1, "b", 1.0, 0)]);
        let ident = Partition {
            block_of: vec![0, 1],
            blocks: vec![vec![0], vec![1]],
        };
        let q = quotient(&l, &ident).unwrap();
        assert_eq!(q.state_count(), 2);
        assert_eq!(q.transitions.len(), 2);
    }

    #[test]
    fn quotient_rejects_non_bisimulation() {
        let l = lts(2, &[(0, "a", 1.0, 1)]);
        let bogus = Partition {
            block_of: vec![0, 0],
            blocks: vec![vec![0, 1]],
        };
        assert!(quotient(&l, &bogus).is_err());
    }

    #[test]
    fn output_partition_satisfies_definition() {
        let l = lts(
            5,
            &[
                (0, "a", 1.0, 2),
                (1, "a", 1.0, 2),
                (2, "b", 0.3, 3),
                (2, "b", 0.7, 4),
                (3, "c", 1.0, 3),
                (4, "c", 1.0, 4),
            ],
        );
        let p = coarsest_bisimulation(&l);
        assert!(is_bisimulation(&l, &p));
        // 3 and 4 are bisimilar self-loopers, hence 0,1 merge too.
        assert!(p.same_block(3, 4));
        assert!(p.same_block(0, 1));
    }
}
