use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::Tag;

/// An ambiguity class: a set of induced tags, stored as a bitmask so that
/// identity is independent of insertion order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct AmbiguityClass(u128);

impl AmbiguityClass {
    /// Largest supported tagset.
    pub const MAX_TAGS: usize = 128;

    pub const fn empty() -> Self {
        AmbiguityClass(0)
    }

    pub fn full(num_tags: usize) -> Self {
        assert!(num_tags <= Self::MAX_TAGS);
        if num_tags == Self::MAX_TAGS {
            AmbiguityClass(u128::MAX)
        } else {
            AmbiguityClass((1u128 << num_tags) - 1)
        }
    }

    pub fn singleton(tag: Tag) -> Self {
        AmbiguityClass(1u128 << tag)
    }

    pub fn from_bits(bits: u128) -> Self {
        AmbiguityClass(bits)
    }

    pub fn bits(self) -> u128 {
        self.0
    }

    pub fn contains(self, tag: Tag) -> bool {
        (tag as usize) < Self::MAX_TAGS && self.0 >> tag & 1 == 1
    }

    pub fn with(self, tag: Tag) -> Self {
        AmbiguityClass(self.0 | 1u128 << tag)
    }

    pub fn toggled(self, tag: Tag) -> Self {
        AmbiguityClass(self.0 ^ 1u128 << tag)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: AmbiguityClass) -> bool {
        self.0 & !other.0 == 0
    }

    /// Member tags, ascending.
    pub fn iter(self) -> impl Iterator<Item = Tag> + Clone {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let t = bits.trailing_zeros();
                bits &= bits - 1;
                Some(t)
            }
        })
    }
}

impl FromIterator<Tag> for AmbiguityClass {
    fn from_iter<I: IntoIterator<Item = Tag>>(iter: I) -> Self {
        iter.into_iter().fold(Self::empty(), Self::with)
    }
}

impl fmt::Debug for AmbiguityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl fmt::Display for AmbiguityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for t in self.iter() {
            if !first {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
            first = false;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_identity_is_order_free() {
        let a: AmbiguityClass = [3, 1, 7].into_iter().collect();
        let b: AmbiguityClass = [7, 3, 1, 3].into_iter().collect();
        assert_eq!(a, b);
        assert_eq!(a.iter().collect::<Vec<_>>(), vec![1, 3, 7]);
        assert_eq!(a.to_string(), "1,3,7");
        assert_eq!(a.len(), 3);
    }

    #[test]
    fn toggles_and_bounds() {
        let full = AmbiguityClass::full(128);
        assert_eq!(full.len(), 128);
        assert!(full.contains(127));
        let c = AmbiguityClass::singleton(2).toggled(2);
        assert!(c.is_empty());
        assert!(AmbiguityClass::singleton(1).is_subset(AmbiguityClass::full(3)));
        assert!(!AmbiguityClass::singleton(4).is_subset(AmbiguityClass::full(3)));
    }
}
