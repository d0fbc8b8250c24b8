//! Unscrambled Sobol low-discrepancy sequence (Joe–Kuo direction numbers).

use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::space::{ParameterSpace, ParameterVector};

const BITS: usize = 32;

/// `(degree, polynomial coefficients, initial direction integers)` for
/// dimensions 2..=21 of new-joe-kuo-6.21201. Dimension 1 is van der Corput.
const JOE_KUO: [(u32, u32, &[u32]); 20] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
    (6, 19, &[1, 1, 1, 15, 7, 5]),
    (6, 22, &[1, 3, 1, 15, 13, 25]),
    (6, 25, &[1, 1, 5, 5, 19, 61]),
    (7, 1, &[1, 3, 7, 11, 23, 15, 103]),
    (7, 4, &[1, 3, 7, 13, 13, 15, 69]),
];

/// Largest supported dimension.
pub const MAX_DIMENSION: usize = JOE_KUO.len() + 1;

fn direction_numbers(dim: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim == 0 {
        for (j, vj) in v.iter_mut().enumerate() {
            *vj = 1 << (BITS - 1 - j);
        }
        return v;
    }
    let (s, a, m) = JOE_KUO[dim - 1];
    let s = s as usize;
    for j in 0..s.min(BITS) {
        v[j] = m[j] << (BITS - 1 - j);
    }
    for j in s..BITS {
        let mut x = v[j - s] ^ (v[j - s] >> s);
        for k in 1..s {
            if (a >> (s - 1 - k)) & 1 == 1 {
                x ^= v[j - k];
            }
        }
        v[j] = x;
    }
    v
}

/// A stateful Sobol generator. The all-zeros point at index 0 is never
/// emitted; the first call to [`SobolSequence::next_point`] returns index 1.
#[derive(Debug, Clone)]
pub struct SobolSequence {
    directions: Vec<[u32; BITS]>,
    state: Vec<u32>,
    index: u64,
}

impl SobolSequence {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 || dimension > MAX_DIMENSION {
            return Err(Error::UnsupportedDimension {
                requested: dimension,
                max: MAX_DIMENSION,
            });
        }
        Ok(Self {
            directions: (0..dimension).map(direction_numbers).collect(),
            state: alloc::vec![0; dimension],
            index: 0,
        })
    }

    pub fn dimension(&self) -> usize {
        self.directions.len()
    }

    /// Index of the most recently emitted point (0 before the first call).
    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        // gray-code update: flip the direction number of the lowest zero bit of the previous index
        let c = self.index.trailing_ones() as usize;
        assert!(c < BITS, "Sobol sequence exhausted");
        self.index += 1;
        for (x, v) in self.state.iter_mut().zip(&self.directions) {
            *x ^= v[c];
        }
        self.state.iter().map(|&x| to_unit(x)).collect()
    }

    /// Point at an arbitrary index, without touching the counter.
    pub fn point_at(&self, index: u64) -> Vec<f64> {
        let gray = index ^ (index >> 1);
        self.directions
            .iter()
            .map(|v| {
                let mut x = 0u32;
                for (j, vj) in v.iter().enumerate() {
                    if (gray >> j) & 1 == 1 {
                        x ^= vj;
                    }
                }
                to_unit(x)
            })
            .collect()
    }

    /// Reserves the next `n` indices and returns the first one. The caller
    /// may then compute the block with [`Self::point_at`], e.g. in parallel.
    pub fn reserve(&mut self, n: u64) -> u64 {
        let first = self.index + 1;
        self.index += n;
        let gray = self.index ^ (self.index >> 1);
        for (x, v) in self.state.iter_mut().zip(&self.directions) {
            *x = 0;
            for (j, vj) in v.iter().enumerate() {
                if (gray >> j) & 1 == 1 {
                    *x ^= vj;
                }
            }
        }
        first
    }

    /// The next `n` points mapped onto `space`.
    pub fn sample(&mut self, space: &ParameterSpace, n: usize) -> Result<Vec<ParameterVector>> {
        check_dim(space.dim(), self.dimension())?;
        (0..n).map(|_| space.from_unit(&self.next_point())).collect()
    }
}

#[inline]
fn to_unit(x: u32) -> f64 {
    x as f64 / 4_294_967_296.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::ParameterSpec;
    use alloc::vec;

    #[test]
    fn first_points_dimension_one() {
        let mut s = SobolSequence::new(1).unwrap();
        let pts: Vec<f64> = (0..3).map(|_| s.next_point()[0]).collect();
        assert_eq!(pts, vec![0.5, 0.75, 0.25]);
    }

    #[test]
    fn unsupported_dimension() {
        assert!(matches!(
            SobolSequence::new(MAX_DIMENSION + 1),
            Err(Error::UnsupportedDimension { .. })
        ));
        assert!(SobolSequence::new(0).is_err());
    }

    #[test]
    fn point_at_and_reserve_agree_with_stream() {
        let mut a = SobolSequence::new(7).unwrap();
        let b = SobolSequence::new(7).unwrap();
        for i in 1..=300u64 {
            assert_eq!(a.next_point(), b.point_at(i));
        }
        let mut c = SobolSequence::new(7).unwrap();
        assert_eq!(c.reserve(300), 1);
        assert_eq!(c.next_point(), a.next_point());
    }

    #[test]
    fn sample_maps_onto_space() {
        let unit = ParameterSpace::new(vec![ParameterSpec::continuous("x", 0.0, 1.0).unwrap()])
            .unwrap();
        let mut s = SobolSequence::new(1).unwrap();
        assert_eq!(s.sample(&unit, 1).unwrap()[0].0, vec![0.5]);
        assert_eq!(s.index(), 1);

        let days = ParameterSpace::new(vec![ParameterSpec::integer_days("p", 0.0, 41.0).unwrap()])
            .unwrap();
        let cont = ParameterSpace::new(vec![ParameterSpec::continuous("p", 0.0, 41.0).unwrap()])
            .unwrap();
        let mut s = SobolSequence::new(1).unwrap();
        assert_eq!(s.sample(&days, 1).unwrap()[0][0], 21.0);
        let mut s = SobolSequence::new(1).unwrap();
        assert_eq!(s.sample(&cont, 1).unwrap()[0][0], 20.5);

        let mut s = SobolSequence::new(2).unwrap();
        assert!(matches!(s.sample(&unit, 1), Err(Error::Dimension { .. })));
    }
}
