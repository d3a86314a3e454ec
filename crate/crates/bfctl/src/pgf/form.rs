//! The PGF recursion propagated as affine forms over an abstract
//! coefficient ring.
//!
//! One propagation routine serves two rings: order-3 complex jets (point
//! evaluation with derivatives, used for roots, the boundary system and
//! all performance measures) and Laurent polynomials (exact cleared
//! coefficients, used for root localisation and degenerate roots).
//!
//! Starting from the overflow PGF `X_{g1+g2}(z)` as the pure self term,
//! the red period gives `X_c`, then the first-green blocked/unblocked
//! recursion and the second-green steps close the cycle:
//! `X_{g1+g2}(z) = A(z) X_{g1+g2}(z) + B(z) . c`.

use super::unknowns::UnknownIndex;
use crate::jet::Jet;
use crate::model::ValidatedModel;
use crate::series::Laurent;
use num_complex::Complex64;

/// Coefficient ring for the propagation.
pub trait Ring: Clone {
    fn zero() -> Self;
    fn one() -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn scale(&self, k: f64) -> Self;
}

impl Ring for Jet {
    fn zero() -> Self {
        Jet::constant(Complex64::ZERO)
    }
    fn one() -> Self {
        Jet::constant(Complex64::ONE)
    }
    fn add(&self, o: &Self) -> Self {
        Jet::add(self, o)
    }
    fn sub(&self, o: &Self) -> Self {
        Jet::sub(self, o)
    }
    fn mul(&self, o: &Self) -> Self {
        Jet::mul(self, o)
    }
    fn scale(&self, k: f64) -> Self {
        Jet::scale(self, k)
    }
}

impl Ring for Laurent {
    fn zero() -> Self {
        Laurent::zero()
    }
    fn one() -> Self {
        Laurent::constant(1.0)
    }
    fn add(&self, o: &Self) -> Self {
        Laurent::add(self, o)
    }
    fn sub(&self, o: &Self) -> Self {
        Laurent::sub(self, o)
    }
    fn mul(&self, o: &Self) -> Self {
        Laurent::mul(self, o).trimmed(0.0)
    }
    fn scale(&self, k: f64) -> Self {
        Laurent::scale(self, k)
    }
}

/// Per-slot transform values in the chosen ring.
pub trait SlotValues {
    type V: Ring;
    /// Arrival PGF `Y_i` for slot `i` (1-based).
    fn y(&self, slot: usize) -> Self::V;
    /// Blocked-arrival PGF `Y_{i,b}`, slot `i <= g1`.
    fn yb(&self, slot: usize) -> Self::V;
    /// The scalar `Y_{i,b}(0)`.
    fn yb0(&self, slot: usize) -> f64;
    /// `z^{-k}`.
    fn z_inv(&self, k: usize) -> Self::V;
}

/// Point evaluation with jets; requires `z != 0`.
pub struct JetCtx<'a> {
    pub model: &'a ValidatedModel,
    pub z: Complex64,
}

impl<'a> JetCtx<'a> {
    pub fn new(model: &'a ValidatedModel, z: Complex64) -> Self {
        JetCtx { model, z }
    }
}

impl SlotValues for JetCtx<'_> {
    type V = Jet;
    fn y(&self, slot: usize) -> Jet {
        self.model.y[slot - 1].jet(self.z)
    }
    fn yb(&self, slot: usize) -> Jet {
        self.model.yb[slot - 1].jet(self.z)
    }
    fn yb0(&self, slot: usize) -> f64 {
        self.model.yb_at0(slot)
    }
    fn z_inv(&self, k: usize) -> Jet {
        Jet::var(self.z).powi(-(k as i64))
    }
}

/// Exact Laurent coefficients built from finely truncated pmfs.
pub struct SeriesCtx {
    y: Vec<Laurent>,
    yb: Vec<Laurent>,
    yb0: Vec<f64>,
}

impl SeriesCtx {
    pub fn new(model: &ValidatedModel) -> Self {
        let fine = 1e-15;
        let y: Vec<Laurent> = model
            .arrivals
            .iter()
            .map(|s| Laurent::from_poly(crate::transform::arrival_pmf(s, fine).weights))
            .collect();
        let yb = (0..model.g1)
            .map(|i| {
                // An explicit override takes precedence over the derived law.
                let weights = match &model.yb[i] {
                    crate::transform::Transform::Polynomial { coeffs } => coeffs.clone(),
                    _ => {
                        let base = crate::transform::arrival_pmf(&model.arrivals[i], fine);
                        crate::transform::blocked_arrival_pmf(&base, model.p[i]).weights
                    }
                };
                Laurent::from_poly(weights)
            })
            .collect();
        let yb0 = (1..=model.g1).map(|i| model.yb_at0(i)).collect();
        SeriesCtx { y, yb, yb0 }
    }
}

impl SlotValues for SeriesCtx {
    type V = Laurent;
    fn y(&self, slot: usize) -> Laurent {
        self.y[slot - 1].clone()
    }
    fn yb(&self, slot: usize) -> Laurent {
        self.yb[slot - 1].clone()
    }
    fn yb0(&self, slot: usize) -> f64 {
        self.yb0[slot - 1]
    }
    fn z_inv(&self, k: usize) -> Laurent {
        Laurent::monomial(-(k as i64))
    }
}

/// An affine expression `const + multiplier * X_overflow(z) + coeffs . c`.
#[derive(Clone, Debug)]
pub struct LinearForm<V> {
    pub const_term: V,
    pub multiplier: V,
    pub coeffs: Vec<V>,
}

impl<V: Ring> LinearForm<V> {
    pub fn zero(n: usize) -> Self {
        LinearForm {
            const_term: V::zero(),
            multiplier: V::zero(),
            coeffs: vec![V::zero(); n],
        }
    }

    /// The pure self term `X_overflow(z)`.
    pub fn self_term(n: usize) -> Self {
        LinearForm {
            const_term: V::zero(),
            multiplier: V::one(),
            coeffs: vec![V::zero(); n],
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        LinearForm {
            const_term: self.const_term.add(&o.const_term),
            multiplier: self.multiplier.add(&o.multiplier),
            coeffs: self
                .coeffs
                .iter()
                .zip(&o.coeffs)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn mul(&self, f: &V) -> Self {
        LinearForm {
            const_term: self.const_term.mul(f),
            multiplier: self.multiplier.mul(f),
            coeffs: self.coeffs.iter().map(|a| a.mul(f)).collect(),
        }
    }

    pub fn scale(&self, k: f64) -> Self {
        LinearForm {
            const_term: self.const_term.scale(k),
            multiplier: self.multiplier.scale(k),
            coeffs: self.coeffs.iter().map(|a| a.scale(k)).collect(),
        }
    }

    pub fn add_unknown(&mut self, idx: usize, v: V) {
        self.coeffs[idx] = self.coeffs[idx].add(&v);
    }
}

impl LinearForm<Jet> {
    /// Substitute a concrete overflow value and unknown vector.
    pub fn eval(&self, x: &Jet, c: &[f64]) -> Jet {
        let mut acc = self.const_term.add(&self.multiplier.mul(x));
        for (j, coef) in self.coeffs.iter().enumerate() {
            if c[j] != 0.0 {
                acc = acc.add(&coef.scale(c[j]));
            }
        }
        acc
    }
}

/// All per-slot forms of one cycle, linear in `(X_overflow(z), c)`.
pub struct CycleForms<V> {
    pub idx: UnknownIndex,
    /// `X_i` for `i = g1+g2+1 ..= c` (empty when `r = 0`); the last entry
    /// is `X_c`. When `r = 0`, `X_c` is the overflow form itself.
    pub red: Vec<LinearForm<V>>,
    /// `X_{i,u}` for `i = 1..=g1`.
    pub u: Vec<LinearForm<V>>,
    /// `X_{i,b}` for `i = 1..=g1`.
    pub b: Vec<LinearForm<V>>,
    /// `X_i` for `i = g1+1 ..= g1+g2`; the last entry is the overflow form.
    pub green: Vec<LinearForm<V>>,
}

impl<V: Ring> CycleForms<V> {
    /// The overflow self-coefficient `A(z)` and unknown row `B(z)`.
    pub fn overflow(&self) -> &LinearForm<V> {
        self.green.last().expect("g2 >= 1")
    }

    /// The form of `X_i(z)` for any slot `i` in `1..=c` (total PGF; the
    /// first-green slots sum their u and b partials).
    pub fn slot_total(&self, i: usize) -> LinearForm<V> {
        let g1 = self.u.len();
        let g2 = self.green.len();
        if i <= g1 {
            self.u[i - 1].add(&self.b[i - 1])
        } else if i <= g1 + g2 {
            self.green[i - g1 - 1].clone()
        } else {
            self.red[i - g1 - g2 - 1].clone()
        }
    }
}

/// Propagate one full cycle.
///
/// Seeds the overflow PGF as the self term, applies the plain-multiplication
/// red steps to reach `X_c`, then the first-green blocked/unblocked
/// recursion and the second-green service steps.
pub fn propagate_cycle<C: SlotValues>(model: &ValidatedModel, ctx: &C) -> CycleForms<C::V> {
    let idx = UnknownIndex::new(model.g1, model.g2, model.m);
    let n = idx.len();
    let m = model.m;
    let g1 = model.g1;
    let g2 = model.g2;

    // Red period: X_i = X_{i-1} Y_i.
    let mut red = Vec::with_capacity(model.r);
    let mut xc = LinearForm::<C::V>::self_term(n);
    for i in (g1 + g2 + 1)..=model.c {
        xc = xc.mul(&ctx.y(i));
        red.push(xc.clone());
    }

    let mut u_forms: Vec<LinearForm<C::V>> = Vec::with_capacity(g1);
    let mut b_forms: Vec<LinearForm<C::V>> = Vec::with_capacity(g1);

    for i in 1..=g1 {
        let pi = model.p[i - 1];
        let qi = model.q[i - 1];
        let pq = pi * qi;
        let y = ctx.y(i);
        let yb = ctx.yb(i);
        let yb0 = ctx.yb0(i);
        let y_zm = y.mul(&ctx.z_inv(m));

        let (prev_u, prev_b) = if i == 1 {
            (xc.clone(), LinearForm::zero(n))
        } else {
            (u_forms[i - 2].clone(), b_forms[i - 2].clone())
        };
        // Unknown ids of the previous slot's small-queue probabilities.
        let prev_u_id = |l: usize| if i == 1 { idx.xc(l) } else { idx.u(i - 1, l) };

        // Blocked partial PGF.
        let mut bi = prev_u.mul(&y).scale(pq);
        if i > 1 {
            bi = bi.add(&prev_b.mul(&y).scale(qi));
        }
        // Empty-queue entry: q_i (Y_b(z) - Y_b(0) - p_i Y(z)).
        let empty_b = yb.sub(&C::V::one().scale(yb0)).sub(&y.scale(pi)).scale(qi);
        bi.add_unknown(prev_u_id(0), empty_b);

        // Unblocked partial PGF.
        let mut ui = prev_u.mul(&y_zm).scale(1.0 - pq);
        if i > 1 {
            ui = ui.add(&prev_b.mul(&y_zm).scale(1.0 - qi));
        }
        for l in 1..m {
            let corr = C::V::one().sub(&y.mul(&ctx.z_inv(m - l)));
            ui.add_unknown(prev_u_id(l), corr.scale(1.0 - pq));
            if i > 1 {
                ui.add_unknown(idx.b(i - 1, l), corr.scale(1.0 - qi));
            }
        }
        let empty_u = C::V::one()
            .scale(1.0 - qi + qi * yb0)
            .sub(&y_zm.scale(1.0 - pq));
        ui.add_unknown(prev_u_id(0), empty_u);

        u_forms.push(ui);
        b_forms.push(bi);
    }

    // Second green part.
    let mut green = Vec::with_capacity(g2);
    let mut cur = if g1 == 0 {
        xc.clone()
    } else {
        u_forms[g1 - 1].add(&b_forms[g1 - 1])
    };
    for i in (g1 + 1)..=(g1 + g2) {
        let y = ctx.y(i);
        let y_zm = y.mul(&ctx.z_inv(m));
        let mut next = cur.mul(&y_zm);
        for l in 0..m {
            let corr = C::V::one().sub(&y.mul(&ctx.z_inv(m - l)));
            if i == g1 + 1 {
                if g1 == 0 {
                    next.add_unknown(idx.xc(l), corr);
                } else {
                    next.add_unknown(idx.u(g1, l), corr.clone());
                    if l >= 1 {
                        next.add_unknown(idx.b(g1, l), corr);
                    }
                }
            } else {
                next.add_unknown(idx.mid(i - 1, l), corr);
            }
        }
        green.push(next.clone());
        cur = next;
    }

    CycleForms {
        idx,
        red,
        u: u_forms,
        b: b_forms,
        green,
    }
}

/// Degree of the cleared denominator: `m (g1 + g2)`.
pub fn cleared_degree(model: &ValidatedModel) -> usize {
    model.m * (model.g1 + model.g2)
}

/// Exact polynomial coefficients of the cleared denominator and of each
/// cleared numerator column `z^M B_j(z)`.
pub struct ClearedPolys {
    pub denom: Vec<f64>,
    pub numer: Vec<Vec<f64>>,
}

pub fn cleared_polynomials(model: &ValidatedModel) -> ClearedPolys {
    let ctx = SeriesCtx::new(model);
    let forms = propagate_cycle(model, &ctx);
    let mm = cleared_degree(model) as i64;
    let overflow = forms.overflow();
    // z^M (1 - A)
    let denom = Laurent::monomial(mm)
        .sub(&overflow.multiplier.shift(mm))
        .trimmed(0.0)
        .into_polynomial();
    let numer = overflow
        .coeffs
        .iter()
        .map(|b| b.shift(mm).trimmed(0.0).into_polynomial())
        .collect();
    ClearedPolys { denom, numer }
}
