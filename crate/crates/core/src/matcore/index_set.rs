use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sorted set of distinct 1-based indices drawn from `[1, universe]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawIndexSet")]
pub struct IndexSet {
    universe: usize,
    members: Vec<usize>,
}

#[derive(Deserialize)]
struct RawIndexSet {
    universe: usize,
    members: Vec<usize>,
}

impl TryFrom<RawIndexSet> for IndexSet {
    type Error = Error;

    fn try_from(raw: RawIndexSet) -> Result<Self> {
        IndexSet::new(raw.universe, raw.members)
    }
}

impl IndexSet {
    /// Members may be given in any order; duplicates and out-of-range values are rejected.
    pub fn new(universe: usize, mut members: Vec<usize>) -> Result<Self> {
        if universe == 0 {
            return Err(Error::Index("universe must be positive".into()));
        }
        members.sort_unstable();
        if let Some(w) = members.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Index(format!("duplicate index {}", w[0])));
        }
        if let Some(&bad) = members.iter().find(|&&i| i == 0 || i > universe) {
            return Err(Error::Index(format!("index {bad} outside [1, {universe}]")));
        }
        Ok(Self { universe, members })
    }

    pub fn full(universe: usize) -> Self {
        Self {
            universe,
            members: (1..=universe).collect(),
        }
    }

    /// Build from 0-based positions.
    pub fn from_zero_based(universe: usize, positions: impl IntoIterator<Item = usize>) -> Result<Self> {
        Self::new(universe, positions.into_iter().map(|i| i + 1).collect())
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    pub fn zero_based(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().map(|i| i - 1)
    }

    pub fn complement(&self) -> IndexSet {
        IndexSet {
            universe: self.universe,
            members: (1..=self.universe).filter(|i| !self.contains(*i)).collect(),
        }
    }

    pub fn intersection_len(&self, other: &IndexSet) -> usize {
        let (mut a, mut b, mut n) = (0, 0, 0);
        while a < self.members.len() && b < other.members.len() {
            match self.members[a].cmp(&other.members[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    a += 1;
                    b += 1;
                }
            }
        }
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_members() {
        let s = IndexSet::new(5, vec![4, 1, 3]).unwrap();
        assert_eq!(s.members(), &[1, 3, 4]);
        assert!(IndexSet::new(5, vec![1, 1]).is_err());
        assert!(IndexSet::new(5, vec![0]).is_err());
        assert!(IndexSet::new(5, vec![6]).is_err());
    }

    #[test]
    fn complement_and_intersection() {
        let s = IndexSet::new(5, vec![2, 4]).unwrap();
        assert_eq!(s.complement().members(), &[1, 3, 5]);
        let t = IndexSet::new(5, vec![1, 2, 4, 5]).unwrap();
        assert_eq!(s.intersection_len(&t), 2);
        assert_eq!(s.zero_based().collect::<Vec<_>>(), vec![1, 3]);
    }
}
