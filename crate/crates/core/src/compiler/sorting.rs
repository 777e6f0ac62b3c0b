//! Batcher odd-even merge sorting networks, descending.

/// A comparator `(a, b)` with `a < b` writes the max to `a` and the min to
/// `b`, so applying every comparator in order sorts descending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortingNetwork {
    width: usize,
    comparators: Vec<(usize, usize)>,
}

impl SortingNetwork {
    /// Batcher's odd-even merge sort for any width, `O(w log² w)`
    /// comparators.
    pub fn batcher(width: usize) -> Self {
        let mut comparators = Vec::new();
        let mut p = 1;
        while p < width {
            let mut k = p;
            while k >= 1 {
                let mut j = k % p;
                while j + k < width {
                    for i in 0..k.min(width - j - k) {
                        if (i + j) / (2 * p) == (i + j + k) / (2 * p) {
                            comparators.push((i + j, i + j + k));
                        }
                    }
                    j += 2 * k;
                }
                k /= 2;
            }
            p *= 2;
        }
        SortingNetwork { width, comparators }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn comparators(&self) -> &[(usize, usize)] {
        &self.comparators
    }

    /// Runs the network over a slice using a caller-supplied compare-exchange
    /// that returns `(max, min)`.
    pub fn apply<T>(&self, values: &mut [T], mut exchange: impl FnMut(&T, &T) -> (T, T)) {
        assert_eq!(values.len(), self.width, "network width mismatch");
        for &(a, b) in &self.comparators {
            let (hi, lo) = exchange(&values[a], &values[b]);
            values[a] = hi;
            values[b] = lo;
        }
    }

    /// Sorts an ordered slice descending with this network.
    pub fn sort_desc<T: Ord + Clone>(&self, values: &mut [T]) {
        self.apply(values, |a, b| {
            if a >= b {
                (a.clone(), b.clone())
            } else {
                (b.clone(), a.clone())
            }
        });
    }

    /// Longest chain of comparators touching a common wire.
    pub fn depth(&self) -> usize {
        let mut level = vec![0usize; self.width];
        for &(a, b) in &self.comparators {
            let d = level[a].max(level[b]) + 1;
            level[a] = d;
            level[b] = d;
        }
        level.into_iter().max().unwrap_or(0)
    }
}
