//! Client-grouped, label-stratified fold assignment.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::corpus::{binarize_labels, ScoreKey, Session};
use crate::error::{Error, Result};
use crate::seed::rng_for;

/// Largest tolerated gap between a fold's positive fraction and the corpus's.
pub const STRATIFICATION_TOLERANCE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    /// Fold of each session, in corpus order.
    pub fold_of: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

impl FoldAssignment {
    pub fn members(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    /// Largest absolute difference between a fold's positive fraction and the
    /// overall one, over non-empty folds.
    pub fn max_fraction_gap(&self, labels: &[u8]) -> f64 {
        let overall = labels.iter().map(|&l| f64::from(l)).sum::<f64>() / labels.len() as f64;
        (0..self.k)
            .filter_map(|f| {
                let m = self.members(f);
                (!m.is_empty()).then(|| {
                    let pos = m.iter().map(|&i| f64::from(labels[i])).sum::<f64>();
                    (pos / m.len() as f64 - overall).abs()
                })
            })
            .fold(0.0, f64::max)
    }
}

/// Greedy assignment: clients are shuffled, stably sorted by (sessions,
/// positives) descending, and each goes to the fold where it least increases
/// the squared relative deviation from the ideal fold size and positive
/// count. Ties go to the lowest fold index.
pub fn make_folds(sessions: &[Session], key: ScoreKey, k: usize, seed: u64) -> Result<FoldAssignment> {
    let labels: Vec<u8> = sessions.iter().map(|s| binarize_labels(s).get(key)).collect();
    let clients: Vec<&str> = sessions.iter().map(|s| s.client_id.as_str()).collect();
    assign_groups(&clients, &labels, k, seed)
}

/// [`make_folds`] on raw group ids and labels.
pub fn assign_groups(groups: &[&str], labels: &[u8], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k == 0 {
        return Err(Error::Validation("fold count must be positive".into()));
    }
    let mut by_client: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        by_client.entry(g).or_default().push(i);
    }
    if by_client.len() < k {
        return Err(Error::InfeasibleSplit {
            clients: by_client.len(),
            folds: k,
        });
    }
    let mut order: Vec<(usize, usize, Vec<usize>)> = by_client
        .into_values()
        .map(|members| {
            let pos = members.iter().filter(|&&i| labels[i] == 1).count();
            (members.len(), pos, members)
        })
        .collect();
    order.shuffle(&mut rng_for(seed, &[]));
    order.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)));

    let n = groups.len() as f64;
    let total_pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let ideal_size = n / k as f64;
    let ideal_pos = total_pos / k as f64;
    let cost = |size: f64, pos: f64| {
        let mut c = ((size - ideal_size) / ideal_size).powi(2);
        if ideal_pos > 0.0 {
            c += ((pos - ideal_pos) / ideal_pos).powi(2);
        }
        c
    };

    let mut size = vec![0.0; k];
    let mut pos = vec![0.0; k];
    let mut fold_of = vec![0; groups.len()];
    for (count, positives, members) in order {
        let (count, positives) = (count as f64, positives as f64);
        let mut best = 0;
        let mut best_delta = f64::INFINITY;
        for f in 0..k {
            let delta = cost(size[f] + count, pos[f] + positives) - cost(size[f], pos[f]);
            if delta < best_delta {
                best = f;
                best_delta = delta;
            }
        }
        size[best] += count;
        pos[best] += positives;
        for i in members {
            fold_of[i] = best;
        }
    }
    let assignment = FoldAssignment { fold_of, k, seed };
    let gap = assignment.max_fraction_gap(labels);
    if gap > STRATIFICATION_TOLERANCE {
        log::warn!("fold positive fractions deviate by up to {:.1} points", 100.0 * gap);
    }
    Ok(assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn symmetric_instance() {
        let names: Vec<String> = (0..10).map(|i| format!("c{i}")).collect();
        let groups: Vec<&str> = names.iter().map(String::as_str).collect();
        let labels: Vec<u8> = (0..10).map(|i| u8::from(i < 5)).collect();
        let a = assign_groups(&groups, &labels, 5, 3).unwrap();
        for f in 0..5 {
            let m = a.members(f);
            assert_eq!(m.len(), 2);
            assert_eq!(m.iter().filter(|&&i| labels[i] == 1).count(), 1);
        }
    }

    #[test]
    fn client_sessions_stay_together() {
        let groups = ["a", "a", "a", "b", "c", "d", "e", "f"];
        let labels = [1, 0, 1, 0, 1, 0, 1, 0];
        let a = assign_groups(&groups, &labels, 5, 0).unwrap();
        assert_eq!(a.fold_of[0], a.fold_of[1]);
        assert_eq!(a.fold_of[1], a.fold_of[2]);
    }

    #[test]
    fn too_few_clients() {
        let err = assign_groups(&["a", "b", "c"], &[0, 1, 0], 5, 0).unwrap_err();
        assert!(matches!(err, Error::InfeasibleSplit { clients: 3, folds: 5 }));
    }

    proptest! {
        #[test]
        fn grouping_and_coverage(
            client_of in prop::collection::vec(0usize..12, 12..80),
            label_bits in prop::collection::vec(0u8..2, 80),
            seed in any::<u64>(),
        ) {
            let names: Vec<String> = client_of.iter().map(|c| format!("c{c}")).collect();
            let groups: Vec<&str> = names.iter().map(String::as_str).collect();
            let labels = &label_bits[..groups.len()];
            let distinct: std::collections::BTreeSet<_> = client_of.iter().collect();
            prop_assume!(distinct.len() >= 5);
            let a = assign_groups(&groups, labels, 5, seed).unwrap();
            let b = assign_groups(&groups, labels, 5, seed).unwrap();
            prop_assert_eq!(&a, &b);
            for i in 0..groups.len() {
                prop_assert!(a.fold_of[i] < 5);
                for j in 0..groups.len() {
                    if groups[i] == groups[j] {
                        prop_assert_eq!(a.fold_of[i], a.fold_of[j]);
                    }
                }
            }
        }
    }
}
