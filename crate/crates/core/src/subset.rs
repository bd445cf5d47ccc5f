//! Small bitmask sets over indices `0..n` (n ≤ 64).

use std::fmt;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Subset(pub u64);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub fn full(n: usize) -> Subset {
        if n >= 64 {
            Subset(u64::MAX)
        } else {
            Subset((1u64 << n) - 1)
        }
    }

    pub fn singleton(i: usize) -> Subset {
        Subset(1u64 << i)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(items: I) -> Subset {
        Subset(items.into_iter().fold(0u64, |acc, i| acc | (1u64 << i)))
    }

    pub fn contains(self, i: usize) -> bool {
        i < 64 && self.0 & (1u64 << i) != 0
    }

    pub fn insert(&mut self, i: usize) {
        self.0 |= 1u64 << i;
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: Subset) -> Subset {
        Subset(self.0 | other.0)
    }

    pub fn intersect(self, other: Subset) -> Subset {
        Subset(self.0 & other.0)
    }

    pub fn minus(self, other: Subset) -> Subset {
        Subset(self.0 & !other.0)
    }

    /// Complement within `0..n`.
    pub fn complement(self, n: usize) -> Subset {
        Subset::full(n).minus(self)
    }

    pub fn is_subset_of(self, other: Subset) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..64).filter(move |i| bits & (1u64 << i) != 0)
    }

    /// All subsets of `0..n` in increasing bitmask order, the empty set first.
    pub fn all(n: usize) -> impl Iterator<Item = Subset> {
        assert!(n < 64, "subset enumeration limited to 63 elements");
        (0..(1u64 << n)).map(Subset)
    }

    /// All subsets of `self`, in increasing bitmask order, the empty set first.
    pub fn subsets(self) -> impl Iterator<Item = Subset> {
        let mask = self.0;
        let mut next = Some(0u64);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == mask { None } else { Some((cur.wrapping_sub(mask)) & mask) };
            Some(Subset(cur))
        })
    }
}

impl fmt::Debug for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_of_mask_are_exhaustive_and_ordered() {
        let s = Subset::from_indices([0, 2, 3]);
        let all: Vec<_> = s.subsets().collect();
        assert_eq!(all.len(), 8);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert!(all.iter().all(|t| t.is_subset_of(s)));
        assert_eq!(Subset::EMPTY.subsets().count(), 1);
    }

    #[test]
    fn set_algebra() {
        let a = Subset::from_indices([0, 1]);
        let b = Subset::from_indices([1, 2]);
        assert_eq!(a.union(b), Subset::full(3));
        assert_eq!(a.intersect(b), Subset::singleton(1));
        assert_eq!(a.minus(b), Subset::singleton(0));
        assert_eq!(a.complement(3), Subset::singleton(2));
        assert_eq!(b.iter().collect::<Vec<_>>(), vec![1, 2]);
    }
}
