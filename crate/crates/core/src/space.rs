//! Mixed-radix indexing over finite product spaces.
//!
//! Type profiles, message profiles and flattened strategy profiles are all
//! points of a product `R_0 x R_1 x ... x R_{k-1}`. Index order is row-major
//! with digit 0 most significant, so iterating indices `0..len` visits points
//! in lexicographic order.

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MixedRadix {
    radices: Vec<usize>,
}

impl MixedRadix {
    pub fn new(radices: Vec<usize>) -> Self {
        Self { radices }
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn digits(&self) -> usize {
        self.radices.len()
    }

    /// Number of points; `None` on overflow.
    pub fn checked_len(&self) -> Option<u128> {
        self.radices
            .iter()
            .try_fold(1u128, |acc, &r| acc.checked_mul(r as u128))
    }

    pub fn len(&self) -> usize {
        self.radices.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, point: &[usize]) -> bool {
        point.len() == self.radices.len() && point.iter().zip(&self.radices).all(|(d, r)| d < r)
    }

    /// Caller guarantees `contains(point)`.
    pub fn encode(&self, point: &[usize]) -> usize {
        debug_assert!(self.contains(point));
        point
            .iter()
            .zip(&self.radices)
            .fold(0, |acc, (&d, &r)| acc * r + d)
    }

    pub fn decode_into(&self, mut index: u128, out: &mut [usize]) {
        for (slot, &r) in out.iter_mut().zip(&self.radices).rev() {
            *slot = (index % r as u128) as usize;
            index /= r as u128;
        }
    }

    pub fn decode(&self, index: usize) -> Vec<usize> {
        let mut out = vec![0; self.radices.len()];
        self.decode_into(index as u128, &mut out);
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.len()).map(move |i| self.decode(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lexicographic_iteration() {
        let space = MixedRadix::new(vec![2, 3]);
        let points: Vec<_> = space.iter().collect();
        assert_eq!(points.len(), 6);
        assert_eq!(points[0], vec![0, 0]);
        assert_eq!(points[1], vec![0, 1]);
        assert_eq!(points[3], vec![1, 0]);
        let mut sorted = points.clone();
        sorted.sort();
        assert_eq!(points, sorted);
    }

    #[test]
    fn empty_product_has_one_point() {
        let space = MixedRadix::new(vec![]);
        assert_eq!(space.len(), 1);
        assert_eq!(space.iter().count(), 1);
    }

    proptest! {
        #[test]
        fn encode_inverts_decode(radices in prop::collection::vec(1usize..5, 0..5), seed in 0usize..10_000) {
            let space = MixedRadix::new(radices);
            let index = seed % space.len();
            let point = space.decode(index);
            prop_assert!(space.contains(&point));
            prop_assert_eq!(space.encode(&point), index);
        }
    }
}
