//! Third-order complex jets: truncated Taylor expansions carrying a value
//! and three derivatives through arbitrary arithmetic.
//!
//! Jets are the single derivative mechanism in the crate; no finite
//! differences are used anywhere. `c[k]` stores `f^(k)(z0) / k!`.

use num_complex::Complex64;

pub const JET_ORDER: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub c: [Complex64; JET_ORDER],
}

impl Jet {
    pub fn constant(v: Complex64) -> Self {
        let mut c = [Complex64::ZERO; JET_ORDER];
        c[0] = v;
        Jet { c }
    }

    pub fn real(v: f64) -> Self {
        Self::constant(Complex64::new(v, 0.0))
    }

    /// The identity function `z` expanded at `z0`.
    pub fn var(z0: Complex64) -> Self {
        let mut c = [Complex64::ZERO; JET_ORDER];
        c[0] = z0;
        c[1] = Complex64::ONE;
        Jet { c }
    }

    pub fn value(&self) -> Complex64 {
        self.c[0]
    }

    pub fn d1(&self) -> Complex64 {
        self.c[1]
    }

    pub fn d2(&self) -> Complex64 {
        self.c[2] * 2.0
    }

    pub fn d3(&self) -> Complex64 {
        self.c[3] * 6.0
    }

    pub fn add(&self, o: &Jet) -> Jet {
        let mut c = self.c;
        for (a, b) in c.iter_mut().zip(&o.c) {
            *a += b;
        }
        Jet { c }
    }

    pub fn sub(&self, o: &Jet) -> Jet {
        let mut c = self.c;
        for (a, b) in c.iter_mut().zip(&o.c) {
            *a -= b;
        }
        Jet { c }
    }

    pub fn neg(&self) -> Jet {
        let mut c = self.c;
        for v in &mut c {
            *v = -*v;
        }
        Jet { c }
    }

    pub fn mul(&self, o: &Jet) -> Jet {
        let mut c = [Complex64::ZERO; JET_ORDER];
        for i in 0..JET_ORDER {
            for j in 0..JET_ORDER - i {
                c[i + j] += self.c[i] * o.c[j];
            }
        }
        Jet { c }
    }

    pub fn scale(&self, k: f64) -> Jet {
        let mut c = self.c;
        for v in &mut c {
            *v *= k;
        }
        Jet { c }
    }

    pub fn scale_c(&self, k: Complex64) -> Jet {
        let mut c = self.c;
        for v in &mut c {
            *v *= k;
        }
        Jet { c }
    }

    /// Series reciprocal; requires a nonzero leading coefficient.
    pub fn recip(&self) -> Jet {
        let a0 = self.c[0];
        debug_assert!(a0.norm() > 0.0, "jet reciprocal at zero");
        let inv0 = Complex64::ONE / a0;
        // 1/(a0 + e) = inv0 * (1 - e' + e'^2 - e'^3), e' = e / a0
        let e1 = self.c[1] * inv0;
        let e2 = self.c[2] * inv0;
        let e3 = self.c[3] * inv0;
        let mut c = [Complex64::ZERO; JET_ORDER];
        c[0] = inv0;
        c[1] = -e1 * inv0;
        c[2] = (e1 * e1 - e2) * inv0;
        c[3] = (2.0 * e1 * e2 - e1 * e1 * e1 - e3) * inv0;
        Jet { c }
    }

    pub fn div(&self, o: &Jet) -> Jet {
        self.mul(&o.recip())
    }

    pub fn exp(&self) -> Jet {
        let e0 = self.c[0].exp();
        // exp(a0 + h) = exp(a0) * (1 + h + h^2/2 + h^3/6), h nilpotent
        let h1 = self.c[1];
        let h2 = self.c[2];
        let h3 = self.c[3];
        let mut c = [Complex64::ZERO; JET_ORDER];
        c[0] = e0;
        c[1] = e0 * h1;
        c[2] = e0 * (h2 + h1 * h1 * 0.5);
        c[3] = e0 * (h3 + h1 * h2 + h1 * h1 * h1 / 6.0);
        Jet { c }
    }

    /// Integer power by binary squaring; negative exponents go through `recip`.
    pub fn powi(&self, n: i64) -> Jet {
        if n < 0 {
            return self.recip().powi(-n);
        }
        let mut acc = Jet::constant(Complex64::ONE);
        let mut base = *self;
        let mut e = n as u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }
}
