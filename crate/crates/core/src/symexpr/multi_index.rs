use std::cmp::Ordering;
use std::fmt;

/// Multi-index over the independent variables: `counts[i]` derivatives in direction `i`.
///
/// Trailing zero counts are never stored, so two multi-indices are equal exactly when
/// they describe the same derivative.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    counts: Vec<u32>,
}

impl MultiIndex {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_counts(mut counts: Vec<u32>) -> Self {
        while counts.last() == Some(&0) {
            counts.pop();
        }
        Self { counts }
    }

    pub fn unit(i: usize) -> Self {
        let mut counts = vec![0; i + 1];
        counts[i] = 1;
        Self { counts }
    }

    /// Builds a multi-index from a list of directions, with repetition.
    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        let mut counts = Vec::new();
        for i in indices {
            if counts.len() <= i {
                counts.resize(i + 1, 0);
            }
            counts[i] += 1;
        }
        Self::from_counts(counts)
    }

    pub fn count(&self, i: usize) -> u32 {
        self.counts.get(i).copied().unwrap_or(0)
    }

    /// |α|
    pub fn order(&self) -> u32 {
        self.counts.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Highest direction index that occurs (+1), i.e. the minimal `n` this index lives in.
    pub fn width(&self) -> usize {
        self.counts.len()
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        let len = self.counts.len().max(other.counts.len());
        let counts = (0..len).map(|i| self.count(i) + other.count(i)).collect();
        MultiIndex::from_counts(counts)
    }

    pub fn with_index(&self, i: usize) -> MultiIndex {
        let mut counts = self.counts.clone();
        if counts.len() <= i {
            counts.resize(i + 1, 0);
        }
        counts[i] += 1;
        MultiIndex { counts }
    }

    pub fn without_index(&self, i: usize) -> Option<MultiIndex> {
        if self.count(i) == 0 {
            return None;
        }
        let mut counts = self.counts.clone();
        counts[i] -= 1;
        Some(MultiIndex::from_counts(counts))
    }

    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        if !other.divides(self) {
            return None;
        }
        let counts = (0..self.counts.len()).map(|i| self.count(i) - other.count(i)).collect();
        Some(MultiIndex::from_counts(counts))
    }

    /// `self ≤ other` componentwise: `other` is a derivative of `self`.
    pub fn divides(&self, other: &MultiIndex) -> bool {
        (0..self.counts.len()).all(|i| self.count(i) <= other.count(i))
    }

    pub fn max_index(&self) -> Option<usize> {
        if self.is_zero() {
            None
        } else {
            Some(self.counts.len() - 1)
        }
    }

    pub fn min_index(&self) -> Option<usize> {
        self.counts.iter().position(|&c| c > 0)
    }

    /// Nonzero `(direction, count)` pairs.
    pub fn entries(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i, c))
    }

    /// Directions with repetition, ascending.
    pub fn expand(&self) -> Vec<usize> {
        self.entries()
            .flat_map(|(i, c)| std::iter::repeat_n(i, c as usize))
            .collect()
    }

    /// Drops direction `i` entirely.
    pub fn without_direction(&self, i: usize) -> MultiIndex {
        let mut counts = self.counts.clone();
        if i < counts.len() {
            counts[i] = 0;
        }
        MultiIndex::from_counts(counts)
    }

    /// All multi-indices in `n` directions of exactly the given order, ascending.
    pub fn all_of_order(n: usize, order: u32) -> Vec<MultiIndex> {
        fn rec(n: usize, i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
            if i + 1 == n {
                cur.push(left);
                out.push(MultiIndex::from_counts(cur.clone()));
                cur.pop();
                return;
            }
            for c in (0..=left).rev() {
                cur.push(c);
                rec(n, i + 1, left - c, cur, out);
                cur.pop();
            }
        }
        if n == 0 {
            return if order == 0 { vec![MultiIndex::zero()] } else { vec![] };
        }
        let mut out = Vec::new();
        rec(n, 0, order, &mut Vec::new(), &mut out);
        out.sort();
        out
    }

    /// All multi-indices in `n` directions with order `≤ max_order`, ascending.
    pub fn all_up_to(n: usize, max_order: u32) -> Vec<MultiIndex> {
        (0..=max_order).flat_map(|k| MultiIndex::all_of_order(n, k)).collect()
    }
}

/// Graded order: lower total order first; within one order, more derivatives in
/// lower-numbered directions first (`xx < xy < yy`).
impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order().cmp(&other.order()).then_with(|| {
            let len = self.counts.len().max(other.counts.len());
            for i in 0..len {
                let (a, b) = (self.count(i), other.count(i));
                if a != b {
                    return b.cmp(&a);
                }
            }
            Ordering::Equal
        })
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.counts)
    }
}
