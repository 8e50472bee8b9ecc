//! Two-dimensional Halton sampling (bases 2 and 3, one-based indices).
//!
//! Sample `k` of the global stream is
//! `(radical_inverse(k, 2), radical_inverse(k, 3))` mapped affinely into the
//! target region. Parallel consumers split the stream by index windows, so
//! results never depend on how the work was partitioned.

use crate::geometry::{Point, Region};

pub const HALTON_BASES: (u64, u64) = (2, 3);

/// Base-`base` radical inverse of `index`, computed as one exact integer
/// ratio and a single correctly rounded division.
pub fn radical_inverse(index: u64, base: u64) -> f64 {
    assert!(base >= 2, "radical inverse needs base >= 2");
    let base = u128::from(base);
    let mut n = u128::from(index);
    let mut reversed: u128 = 0;
    let mut denom: u128 = 1;
    while n > 0 {
        reversed = reversed * base + n % base;
        denom *= base;
        n /= base;
    }
    reversed as f64 / denom as f64
}

/// Halton point with one-based `index` in the unit square.
pub fn halton_2d(index: u64) -> (f64, f64) {
    (radical_inverse(index, HALTON_BASES.0), radical_inverse(index, HALTON_BASES.1))
}

/// The `n` samples with indices `start_index .. start_index + n`.
pub fn sample_region(region: Region, n: usize, start_index: u64) -> Vec<Point> {
    QmcStream::starting_at(start_index).take(n).map(|(u, v)| region.lerp(u, v)).collect()
}

/// Iterator over the Halton stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QmcStream {
    next_index: u64,
}

impl QmcStream {
    pub fn new() -> Self {
        Self { next_index: 1 }
    }

    pub fn starting_at(index: u64) -> Self {
        assert!(index >= 1, "Halton indices are one-based");
        Self { next_index: index }
    }

    pub fn next_index(&self) -> u64 {
        self.next_index
    }
}

impl Default for QmcStream {
    fn default() -> Self {
        Self::new()
    }
}

impl Iterator for QmcStream {
    type Item = (f64, f64);

    fn next(&mut self) -> Option<Self::Item> {
        let out = halton_2d(self.next_index);
        self.next_index += 1;
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_examples() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert_eq!(radical_inverse(1, 3), 1.0 / 3.0);
        let base2 = [0.5, 0.25, 0.75, 0.125, 0.625, 0.375, 0.875, 0.0625, 0.5625];
        for (i, e) in base2.iter().enumerate() {
            assert_eq!(radical_inverse(i as u64 + 1, 2), *e);
        }
        let base3 =
            [1.0 / 3.0, 2.0 / 3.0, 1.0 / 9.0, 4.0 / 9.0, 7.0 / 9.0, 2.0 / 9.0, 5.0 / 9.0, 8.0 / 9.0, 1.0 / 27.0];
        for (i, e) in base3.iter().enumerate() {
            assert_eq!(radical_inverse(i as u64 + 1, 3), *e);
        }
    }

    #[test]
    fn first_local_sample() {
        let pts = sample_region(Region::local(), 1, 1);
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].x, 0.0);
        assert!((pts[0].y - (-10.0 + 20.0 / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn samples_stay_in_region_and_repeat() {
        let unit = Region::new(0.0, 1.0, 0.0, 1.0).unwrap();
        let a = sample_region(unit, 500, 1);
        assert!(a.iter().all(|&p| unit.contains(p)));
        assert_eq!(a, sample_region(unit, 500, 1));
    }

    #[test]
    fn stream_tracks_index() {
        let mut s = QmcStream::starting_at(6);
        s.next();
        assert_eq!(s.next_index(), 7);
        assert_eq!(QmcStream::default().next(), Some((0.5, 1.0 / 3.0)));
    }

    #[test]
    fn first_million_samples_are_distinct() {
        let mut seen = std::collections::HashSet::with_capacity(1 << 20);
        for (u, v) in QmcStream::new().take(1_000_000) {
            assert!(seen.insert((u.to_bits(), v.to_bits())));
        }
    }
}
