//! Catalogue of the unknown boundary probabilities.
//!
//! Layout (all 1-based slots):
//! `P(X_i = l, S=u)` for `i = 1..g1`, `l = 0..m-1`;
//! `P(X_i = l, S=b)` for `i = 1..g1`, `l = 1..m-1`;
//! `P(X_i = l)` for `i = g1+1..g1+g2-1`, `l = 0..m-1`;
//! `P(X_c = l)` for `l = 0..m-1`.
//! Total `m (g1+g2) + (m-1) g1`.

#[derive(Clone, Copy, Debug)]
pub struct UnknownIndex {
    pub g1: usize,
    pub g2: usize,
    pub m: usize,
}

impl UnknownIndex {
    pub fn new(g1: usize, g2: usize, m: usize) -> Self {
        UnknownIndex { g1, g2, m }
    }

    pub fn len(&self) -> usize {
        self.m * (self.g1 + self.g2) + (self.m - 1) * self.g1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `P(X_i = l, S=u)`, `i` in `1..=g1`, `l` in `0..m`.
    pub fn u(&self, i: usize, l: usize) -> usize {
        debug_assert!(i >= 1 && i <= self.g1 && l < self.m);
        (i - 1) * self.m + l
    }

    /// `P(X_i = l, S=b)`, `i` in `1..=g1`, `l` in `1..m`.
    pub fn b(&self, i: usize, l: usize) -> usize {
        debug_assert!(i >= 1 && i <= self.g1 && l >= 1 && l < self.m);
        self.g1 * self.m + (i - 1) * (self.m - 1) + (l - 1)
    }

    /// `P(X_i = l)` for mid-green slots `i` in `g1+1..=g1+g2-1`.
    pub fn mid(&self, i: usize, l: usize) -> usize {
        debug_assert!(i > self.g1 && i < self.g1 + self.g2 && l < self.m);
        self.g1 * self.m + self.g1 * (self.m - 1) + (i - self.g1 - 1) * self.m + l
    }

    /// `P(X_c = l)`.
    pub fn xc(&self, l: usize) -> usize {
        debug_assert!(l < self.m);
        self.len() - self.m + l
    }

    pub fn label(&self, k: usize) -> String {
        let m = self.m;
        let ublock = self.g1 * m;
        let bblock = ublock + self.g1 * (m - 1);
        let midblock = bblock + (self.g2.saturating_sub(1)) * m;
        if k < ublock {
            format!("P(X_{}={},u)", k / m + 1, k % m)
        } else if k < bblock {
            let k2 = k - ublock;
            format!("P(X_{}={},b)", k2 / (m - 1) + 1, k2 % (m - 1) + 1)
        } else if k < midblock {
            let k2 = k - bblock;
            format!("P(X_{}={})", self.g1 + 1 + k2 / m, k2 % m)
        } else {
            format!("P(X_c={})", k - midblock)
        }
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.len()).map(|k| self.label(k)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_a1_catalogue() {
        let idx = UnknownIndex::new(2, 4, 1);
        assert_eq!(idx.len(), 6);
        let labels = idx.labels();
        assert_eq!(
            labels,
            vec![
                "P(X_1=0,u)",
                "P(X_2=0,u)",
                "P(X_3=0)",
                "P(X_4=0)",
                "P(X_5=0)",
                "P(X_c=0)"
            ]
        );
    }

    #[test]
    fn multi_lane_count() {
        let idx = UnknownIndex::new(3, 2, 3);
        assert_eq!(idx.len(), 3 * 5 + 2 * 3);
        // Indices are a bijection onto 0..len.
        let mut seen = vec![false; idx.len()];
        for i in 1..=3 {
            for l in 0..3 {
                seen[idx.u(i, l)] = true;
            }
            for l in 1..3 {
                seen[idx.b(i, l)] = true;
            }
        }
        for i in 4..5 {
            for l in 0..3 {
                seen[idx.mid(i, l)] = true;
            }
        }
        for l in 0..3 {
            seen[idx.xc(l)] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }
}
