use std::collections::BTreeSet;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::roster::EdgeList;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TieChurn {
    pub relation: String,
    pub from_wave: String,
    pub to_wave: String,
    pub shared: usize,
    pub union: usize,
    pub added: Vec<(String, String)>,
    pub removed: Vec<(String, String)>,
}

impl TieChurn {
    /// `|E1 ∩ E2| / |E1 ∪ E2|`; two empty lists are identical.
    pub fn jaccard(&self) -> Ratio<usize> {
        if self.union == 0 {
            Ratio::from_integer(1)
        } else {
            Ratio::new(self.shared, self.union)
        }
    }
}

fn pairs<S: Scalar>(e: &EdgeList<S>) -> BTreeSet<(String, String)> {
    e.edges.iter().filter(|e| e.weight > S::zero()).map(|e| (e.source.clone(), e.target.clone())).collect()
}

/// Tie persistence between two waves, ignoring weights.
pub fn wave_churn<S: Scalar>(before: &EdgeList<S>, after: &EdgeList<S>) -> TieChurn {
    let a = pairs(before);
    let b = pairs(after);
    TieChurn {
        relation: after.relation.clone(),
        from_wave: before.wave_id.clone(),
        to_wave: after.wave_id.clone(),
        shared: a.intersection(&b).count(),
        union: a.union(&b).count(),
        added: b.difference(&a).cloned().collect(),
        removed: a.difference(&b).cloned().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Score;

    fn list(wave: &str, edges: &[(&str, &str)]) -> EdgeList<Score> {
        let mut e = EdgeList::new("f", wave);
        for (a, b) in edges {
            e.push(*a, *b, Score::from_integer(1.into()));
        }
        e
    }

    #[test]
    fn jaccard_and_diffs() {
        let c = wave_churn(&list("w1", &[("A", "B"), ("B", "C")]), &list("w2", &[("B", "C"), ("C", "A")]));
        assert_eq!(c.jaccard(), Ratio::new(1, 3));
        assert_eq!(c.added, vec![("C".to_string(), "A".to_string())]);
        assert_eq!(c.removed, vec![("A".to_string(), "B".to_string())]);
    }

    #[test]
    fn empty_waves_are_identical() {
        assert_eq!(wave_churn(&list("w1", &[]), &list("w2", &[])).jaccard(), Ratio::from_integer(1));
        assert_eq!(wave_churn(&list("w1", &[("A", "B")]), &list("w2", &[])).jaccard(), Ratio::from_integer(0));
    }
}
