//! Binary indexed tree over nonnegative weights with O(log n) point update
//! and O(log n) sampling by cumulative weight.

#[derive(Debug, Clone)]
pub struct Fenwick {
    // tree[i] covers a dyadic block ending at i (1-based); index 0 unused
    tree: Vec<f64>,
    values: Vec<f64>,
    mask: usize,
}

impl Fenwick {
    pub fn new(values: Vec<f64>) -> Self {
        let n = values.len();
        let mut tree = vec![0.0; n + 1];
        for (i, &v) in values.iter().enumerate() {
            let mut j = i + 1;
            while j <= n {
                tree[j] += v;
                j += j & j.wrapping_neg();
            }
        }
        let mut mask = 1usize;
        while mask * 2 <= n {
            mask *= 2;
        }
        Fenwick { tree, values, mask }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.prefix_sum(self.values.len())
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Sum of the first `count` values.
    pub fn prefix_sum(&self, count: usize) -> f64 {
        let mut s = 0.0;
        let mut j = count;
        while j > 0 {
            s += self.tree[j];
            j -= j & j.wrapping_neg();
        }
        s
    }

    pub fn set(&mut self, i: usize, value: f64) {
        let delta = value - self.values[i];
        self.values[i] = value;
        let mut j = i + 1;
        while j <= self.values.len() {
            self.tree[j] += delta;
            j += j & j.wrapping_neg();
        }
    }

    /// Largest index i such that prefix_sum(i) <= target, i.e. the leaf whose
    /// cumulative bracket contains `target`. Requires 0 <= target < total().
    pub fn find(&self, mut target: f64) -> usize {
        let mut pos = 0usize;
        let mut step = self.mask;
        let n = self.values.len();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= target {
                target -= self.tree[next];
                pos = next;
            }
            step /= 2;
        }
        // pos is the count of leaves strictly before the selected one
        pos.min(n - 1)
    }

    /// Recompute the internal tree from the stored values (clears float drift).
    pub fn rebuild(&mut self) {
        *self = Fenwick::new(std::mem::take(&mut self.values));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_and_find() {
        let f = Fenwick::new(vec![0.5, 0.0, 2.0, 1.5]);
        assert!((f.total() - 4.0).abs() < 1e-15);
        assert!((f.prefix_sum(2) - 0.5).abs() < 1e-15);
        assert_eq!(f.find(0.0), 0);
        assert_eq!(f.find(0.49), 0);
        assert_eq!(f.find(0.5), 2); // zero-weight leaf skipped
        assert_eq!(f.find(2.49), 2);
        assert_eq!(f.find(2.5), 3);
        assert_eq!(f.find(3.999), 3);
    }

    #[test]
    fn update_keeps_sums() {
        let mut f = Fenwick::new(vec![1.0; 7]);
        f.set(3, 5.0);
        f.set(0, 0.0);
        assert!((f.total() - 10.0).abs() < 1e-15);
        assert!((f.prefix_sum(4) - 7.0).abs() < 1e-15);
        f.rebuild();
        assert!((f.total() - 10.0).abs() < 1e-15);
    }
}
