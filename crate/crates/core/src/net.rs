//! Greedy farthest-point machinery: epsilon-nets and maximal separated sets.
//!
//! One O(n^2) insertion pass yields a point permutation whose prefixes are
//! simultaneously delta-nets (for every delta) and maximal t-separated sets
//! (for every t). Seeded at index 0, ties broken by lowest index, so every
//! downstream construction is deterministic.

use crate::scalar::Scalar;
use crate::spaces::FiniteMetricSpace;

/// Farthest-point insertion order over a space.
#[derive(Debug, Clone)]
pub struct FarthestPointOrder<T> {
    /// Point indices in insertion order; `order[0] == 0`.
    pub order: Vec<usize>,
    /// `insertion_dist[m]` is the distance of `order[m]` to the first `m`
    /// points at the moment it was inserted; `insertion_dist[0]` is infinity.
    /// Nonincreasing. The covering radius of the first `c` points is
    /// `insertion_dist[c]` (zero once all points are used).
    pub insertion_dist: Vec<T>,
}

impl<T: Scalar> FarthestPointOrder<T> {
    pub fn compute(space: &FiniteMetricSpace<T>) -> Self {
        let n = space.n();
        assert!(n > 0);
        let mut order = Vec::with_capacity(n);
        let mut insertion_dist = Vec::with_capacity(n);
        let mut min_dist = vec![T::infinity(); n];
        let mut used = vec![false; n];

        order.push(0);
        insertion_dist.push(T::infinity());
        used[0] = true;
        for v in 0..n {
            min_dist[v] = space.dist(0, v);
        }

        for _ in 1..n {
            let mut best = usize::MAX;
            let mut best_d = T::neg_infinity();
            for v in 0..n {
                if !used[v] && min_dist[v] > best_d {
                    best_d = min_dist[v];
                    best = v;
                }
            }
            order.push(best);
            insertion_dist.push(best_d);
            used[best] = true;
            for v in 0..n {
                let d = space.dist(best, v);
                if d < min_dist[v] {
                    min_dist[v] = d;
                }
            }
        }

        FarthestPointOrder { order, insertion_dist }
    }

    /// Smallest prefix whose covering radius is at most `delta`, as sorted
    /// point indices.
    pub fn net(&self, delta: T) -> Vec<usize> {
        let n = self.order.len();
        let mut count = n;
        for c in 1..n {
            if self.insertion_dist[c] <= delta {
                count = c;
                break;
            }
        }
        let mut pts: Vec<usize> = self.order[..count].to_vec();
        pts.sort_unstable();
        pts
    }

    /// Greedy maximal t-separated set (farthest-first), as sorted indices.
    pub fn separated_set(&self, t: T) -> Vec<usize> {
        let count = self
            .insertion_dist
            .iter()
            .take_while(|&&d| d >= t)
            .count()
            .max(1);
        let mut pts: Vec<usize> = self.order[..count].to_vec();
        pts.sort_unstable();
        pts
    }

    /// Covering radius of the prefix of length `count`.
    pub fn covering_radius(&self, count: usize) -> T {
        if count >= self.order.len() {
            T::zero()
        } else {
            self.insertion_dist[count]
        }
    }
}
