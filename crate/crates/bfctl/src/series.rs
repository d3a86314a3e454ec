//! Laurent polynomials with real coefficients and an explicit power offset.
//!
//! The PGF recursion divides by powers of `z`, so intermediate objects live
//! in `z^offset * R[z]`. Clearing by `z^(m*(g1+g2))` at the end turns the
//! overflow numerator and denominator into plain polynomials whose
//! coefficients this module produces exactly (up to arrival-pmf truncation).

#[derive(Clone, Debug, Default)]
pub struct Laurent {
    pub offset: i64,
    pub coeffs: Vec<f64>,
}

impl Laurent {
    pub fn zero() -> Self {
        Laurent {
            offset: 0,
            coeffs: Vec::new(),
        }
    }

    pub fn constant(v: f64) -> Self {
        if v == 0.0 {
            return Self::zero();
        }
        Laurent {
            offset: 0,
            coeffs: vec![v],
        }
    }

    /// The monomial `z^k` (k may be negative).
    pub fn monomial(k: i64) -> Self {
        Laurent {
            offset: k,
            coeffs: vec![1.0],
        }
    }

    pub fn from_poly(coeffs: Vec<f64>) -> Self {
        Laurent { offset: 0, coeffs }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    fn min_pow(&self) -> i64 {
        self.offset
    }

    fn max_pow(&self) -> i64 {
        self.offset + self.coeffs.len() as i64 - 1
    }

    pub fn add(&self, o: &Laurent) -> Laurent {
        if self.coeffs.is_empty() {
            return o.clone();
        }
        if o.coeffs.is_empty() {
            return self.clone();
        }
        let lo = self.min_pow().min(o.min_pow());
        let hi = self.max_pow().max(o.max_pow());
        let mut coeffs = vec![0.0; (hi - lo + 1) as usize];
        for (j, &c) in self.coeffs.iter().enumerate() {
            coeffs[(self.offset - lo) as usize + j] += c;
        }
        for (j, &c) in o.coeffs.iter().enumerate() {
            coeffs[(o.offset - lo) as usize + j] += c;
        }
        Laurent { offset: lo, coeffs }
    }

    pub fn sub(&self, o: &Laurent) -> Laurent {
        self.add(&o.scale(-1.0))
    }

    pub fn mul(&self, o: &Laurent) -> Laurent {
        if self.coeffs.is_empty() || o.coeffs.is_empty() {
            return Laurent::zero();
        }
        let mut coeffs = vec![0.0; self.coeffs.len() + o.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in o.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Laurent {
            offset: self.offset + o.offset,
            coeffs,
        }
    }

    pub fn scale(&self, k: f64) -> Laurent {
        Laurent {
            offset: self.offset,
            coeffs: self.coeffs.iter().map(|&c| c * k).collect(),
        }
    }

    /// Multiply by `z^k` (divide for negative `k`); exact.
    pub fn shift(&self, k: i64) -> Laurent {
        Laurent {
            offset: self.offset + k,
            coeffs: self.coeffs.clone(),
        }
    }

    /// Drop leading/trailing coefficients below `tol` in magnitude.
    pub fn trimmed(&self, tol: f64) -> Laurent {
        let mut lo = 0;
        let mut hi = self.coeffs.len();
        while lo < hi && self.coeffs[lo].abs() <= tol {
            lo += 1;
        }
        while hi > lo && self.coeffs[hi - 1].abs() <= tol {
            hi -= 1;
        }
        Laurent {
            offset: self.offset + lo as i64,
            coeffs: self.coeffs[lo..hi].to_vec(),
        }
    }

    /// Interpret as a plain polynomial `p[0] + p[1] z + ...`.
    ///
    /// Any residue at negative powers must be at round-off level; it is
    /// folded away after an assertion.
    pub fn into_polynomial(self) -> Vec<f64> {
        let t = self.trimmed(0.0);
        if t.coeffs.is_empty() {
            return vec![0.0];
        }
        if t.offset < 0 {
            let neg = &t.coeffs[..(-t.offset as usize).min(t.coeffs.len())];
            let worst = neg.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            debug_assert!(
                worst < 1e-9,
                "cleared Laurent object has negative-power residue {worst:e}"
            );
            let mut out = t.coeffs[(-t.offset as usize).min(t.coeffs.len())..].to_vec();
            if out.is_empty() {
                out.push(0.0);
            }
            return out;
        }
        let mut out = vec![0.0; t.offset as usize];
        out.extend_from_slice(&t.coeffs);
        out
    }
}

/// Evaluate a real-coefficient polynomial and derivatives 0..=order at `z`.
pub fn poly_derivatives(
    coeffs: &[f64],
    z: num_complex::Complex64,
    order: usize,
) -> Vec<num_complex::Complex64> {
    use num_complex::Complex64;
    // Horner-evaluate the successively differentiated polynomials.
    let mut work: Vec<Complex64> = coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect();
    let mut out = Vec::with_capacity(order + 1);
    for _ in 0..=order {
        if work.is_empty() {
            out.push(Complex64::ZERO);
            continue;
        }
        let mut acc = Complex64::ZERO;
        for &c in work.iter().rev() {
            acc = acc * z + c;
        }
        out.push(acc);
        for (k, slot) in work.iter_mut().enumerate() {
            *slot *= k as f64;
        }
        work.remove(0);
    }
    out
}
