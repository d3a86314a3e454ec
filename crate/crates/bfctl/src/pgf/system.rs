//! Boundary linear system: root rows, the z = 1 normalisation row, and the
//! small-queue blocked-probability rows.

use super::form::{cleared_degree, propagate_cycle, CycleForms, JetCtx, LinearForm};
use super::roots::RootSet;
use super::unknowns::UnknownIndex;
use crate::error::SolveError;
use crate::jet::Jet;
use crate::model::ValidatedModel;
use crate::series::poly_derivatives;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;

pub struct AssembledSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

/// Build the K x K system. Every root except z = 1 contributes vanishing
/// rows of the cleared numerator (derivative rows for multiplicities,
/// real/imaginary split for conjugate pairs, of which only the upper-half
/// representative is used); z = 1 is replaced by the normalisation
/// `X_overflow(1) = 1` as a derivative ratio; blocked-probability rows
/// close the count for m > 1.
///
/// Fully blocked slots (`p_i q_i = 1`) degenerate the cleared denominator:
/// it gains origin roots whose numerator rows vanish identically, and the
/// same number of catalogue unknowns decouple from the overflow. Those
/// trivial rows are dropped and replaced by coefficient-identity rows
/// (every unknown is a power-series coefficient of a slot PGF, which is a
/// linear functional of the unknowns evaluated by contour quadrature).
pub fn assemble_system(
    model: &ValidatedModel,
    roots: &RootSet,
) -> Result<AssembledSystem, SolveError> {
    let idx = UnknownIndex::new(model.g1, model.g2, model.m);
    let k = idx.len();
    let mm = cleared_degree(model);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut rhs: Vec<f64> = Vec::with_capacity(k);

    for group in &roots.groups {
        if (group.z - Complex64::ONE).norm() == 0.0 {
            debug_assert_eq!(
                group.multiplicity, 1,
                "multiple unit root past the rho guard"
            );
            continue;
        }
        if group.z.im < -1e-12 {
            continue; // mirrored by its conjugate partner
        }
        let complex_pair = group.z.im > 1e-12;
        // Numerator derivative rows N_j^(d)(z) = (z^M B_j)^(d)(z).
        let use_poly = group.z.norm() < 0.3 || group.multiplicity > 3;
        let cols: Vec<Vec<Complex64>> = if use_poly {
            roots
                .polys
                .numer
                .iter()
                .map(|col| poly_derivatives(col, group.z, group.multiplicity - 1))
                .collect()
        } else {
            let ctx = JetCtx::new(model, group.z);
            let forms = propagate_cycle(model, &ctx);
            let zm = Jet::var(group.z).powi(mm as i64);
            forms
                .overflow()
                .coeffs
                .iter()
                .map(|b| {
                    let n = b.mul(&zm);
                    vec![n.value(), n.d1(), n.d2(), n.d3()]
                })
                .collect()
        };
        for d in 0..group.multiplicity {
            let re_row: Vec<f64> = cols.iter().map(|c| c[d].re).collect();
            push_nontrivial(&mut rows, &mut rhs, re_row);
            if complex_pair {
                let im_row: Vec<f64> = cols.iter().map(|c| c[d].im).collect();
                push_nontrivial(&mut rows, &mut rhs, im_row);
            }
        }
    }

    // Normalisation at z = 1: N'(1) . c = D'(1), falling back to the
    // second derivative ratio if the denominator has a repeated root at 1.
    {
        let ctx = JetCtx::new(model, Complex64::ONE);
        let forms = propagate_cycle(model, &ctx);
        let of = forms.overflow();
        let zm = Jet::var(Complex64::ONE).powi(mm as i64);
        let den = zm.mul(&Jet::constant(Complex64::ONE).sub(&of.multiplier));
        let order = if den.d1().norm() >= 1e-10 { 1 } else { 2 };
        let mut row = Vec::with_capacity(k);
        for b in &of.coeffs {
            let n = b.mul(&zm);
            let v = if order == 1 { n.d1() } else { n.d2() };
            debug_assert!(v.im.abs() < 1e-9);
            row.push(v.re);
        }
        let rhs_v = if order == 1 { den.d1() } else { den.d2() };
        rows.push(row);
        rhs.push(rhs_v.re);
    }

    // Blocked-probability boundary rows, (m-1) g1 of them.
    for i in 1..=model.g1 {
        let pq = model.p[i - 1] * model.q[i - 1];
        let q = model.q[i - 1];
        let y = &model.y_pmf[i - 1];
        let yb = &model.yb_pmf[i - 1];
        for kk in 1..model.m {
            let mut row = vec![0.0; k];
            row[idx.b(i, kk)] -= 1.0;
            for l in 1..=kk {
                if i == 1 {
                    row[idx.xc(l)] += pq * y.get(kk - l);
                } else {
                    row[idx.u(i - 1, l)] += pq * y.get(kk - l);
                    row[idx.b(i - 1, l)] += q * y.get(kk - l);
                }
            }
            let empty = if i == 1 { idx.xc(0) } else { idx.u(i - 1, 0) };
            row[empty] += q * yb.get(kk);
            rows.push(row);
            rhs.push(0.0);
        }
    }

    if rows.len() > k {
        return Err(SolveError::RootCountMismatch {
            expected: k,
            winding: rows.len() as i64,
        });
    }
    if rows.len() < k {
        // Degenerate configuration: pad with the coefficient identity of
        // every catalogue unknown and solve the consistent overdetermined
        // stack by least squares. For a structurally coupled unknown the
        // extraction reproduces the unknown itself and the row collapses
        // to round-off; only the informative rows are kept.
        for row in coefficient_identity_rows(model, roots, &idx)? {
            let sup = row.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            if sup > 1e-9 {
                rows.push(row);
                rhs.push(0.0);
            }
        }
        if rows.len() < k {
            return Err(SolveError::SingularSystem {
                cond: f64::INFINITY,
            });
        }
    }

    let matrix = DMatrix::from_fn(rows.len(), k, |r, c| rows[r][c]);
    Ok(AssembledSystem {
        matrix,
        rhs: DVector::from_vec(rhs),
    })
}

/// Root rows that vanish identically carry no information (spurious
/// origin roots of the over-cleared denominator); they are skipped.
fn push_nontrivial(rows: &mut Vec<Vec<f64>>, rhs: &mut Vec<f64>, row: Vec<f64>) {
    let sup = row.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if sup > 1e-13 {
        rows.push(row);
        rhs.push(0.0);
    }
}

/// For a catalogue unknown `P(X_i = l, ...)`, the identity
/// `c_target = [z^l] T(z)` with `T` the matching slot partial PGF is a
/// linear functional of the unknown vector: substituting
/// `X_overflow = B(z) . c / (1 - A(z))` into the slot form and applying
/// the coefficient-extraction quadrature `1/N sum_k T(z_k) z_k^-l` keeps
/// everything linear in `c`. The quadrature nodes are placed on a circle
/// chosen away from denominator roots; aliasing is below 1e-30. One row
/// is produced per catalogue unknown.
fn coefficient_identity_rows(
    model: &ValidatedModel,
    roots: &RootSet,
    idx: &UnknownIndex,
) -> Result<Vec<Vec<f64>>, SolveError> {
    let k = idx.len();
    let targets: Vec<usize> = (0..k).collect();

    // Pick a quadrature circle keeping clear of every root.
    let n_nodes = 192usize;
    let mut best = (0.0f64, 0.55f64, 0.0f64);
    for rho in [0.55, 0.62, 0.48, 0.7] {
        for phi in [0.0, 0.37, 0.81] {
            let mut min_d = f64::INFINITY;
            for kk in 0..n_nodes {
                let th = 2.0 * PI * (kk as f64 + phi) / n_nodes as f64;
                let z = rho * Complex64::new(th.cos(), th.sin());
                for g in &roots.groups {
                    min_d = min_d.min((g.z - z).norm());
                }
            }
            if min_d > best.0 {
                best = (min_d, rho, phi);
            }
        }
    }
    let (_, rho, phi) = best;

    // target -> (slot form selector, coefficient order)
    let locate = |j: usize| -> (usize, usize, usize) {
        // returns (kind, slot, l): kind 0=u, 1=b, 2=total slot, 3=xc
        let m = idx.m;
        let ublock = idx.g1 * m;
        let bblock = ublock + idx.g1 * (m - 1);
        let midblock = bblock + (idx.g2.saturating_sub(1)) * m;
        if j < ublock {
            (0, j / m + 1, j % m)
        } else if j < bblock {
            let t = j - ublock;
            (1, t / (m - 1) + 1, t % (m - 1) + 1)
        } else if j < midblock {
            let t = j - bblock;
            (2, idx.g1 + 1 + t / m, t % m)
        } else {
            (3, 0, j - midblock)
        }
    };

    let mut rows = vec![vec![0.0f64; k]; targets.len()];
    for node in 0..n_nodes {
        let th = 2.0 * PI * (node as f64 + phi) / n_nodes as f64;
        let z = rho * Complex64::new(th.cos(), th.sin());
        let ctx = JetCtx::new(model, z);
        let forms: CycleForms<Jet> = propagate_cycle(model, &ctx);
        let of = forms.overflow();
        let one_minus_a = Complex64::ONE - of.multiplier.value();
        // Per-column overflow values X_j(z) = B_j(z) / (1 - A(z)).
        let xcols: Vec<Complex64> = of.coeffs.iter().map(|b| b.value() / one_minus_a).collect();
        for (t, &target) in targets.iter().enumerate() {
            let (kind, slot, l) = locate(target);
            let form: LinearForm<Jet> = match kind {
                0 => forms.u[slot - 1].clone(),
                1 => forms.b[slot - 1].clone(),
                2 => forms.slot_total(slot),
                _ => forms.slot_total(model.c),
            };
            let a_t = form.multiplier.value();
            let weight = z.powi(-(l as i32)) / n_nodes as f64;
            for j in 0..k {
                let val = a_t * xcols[j] + form.coeffs[j].value();
                rows[t][j] += (val * weight).re;
            }
        }
    }
    for (t, &target) in targets.iter().enumerate() {
        rows[t][target] -= 1.0;
    }
    Ok(rows)
}

pub struct SystemSolution {
    pub unknowns: Vec<f64>,
    pub residual: f64,
    pub condition: f64,
}

/// Equilibrate and solve: LU with full pivoting for the square case, SVD
/// least squares for the consistent overdetermined stack of a degenerate
/// configuration. Conditioning is estimated on the scaled matrix.
pub fn solve_system(sys: &AssembledSystem) -> Result<SystemSolution, SolveError> {
    let rows = sys.matrix.nrows();
    let cols = sys.matrix.ncols();
    let mut a = sys.matrix.clone();
    let mut b = sys.rhs.clone();
    for r in 0..rows {
        let scale = a.row(r).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale > 0.0 {
            for c in 0..cols {
                a[(r, c)] /= scale;
            }
            b[r] /= scale;
        }
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let smin = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if condition > 1e12 {
        return Err(SolveError::SingularSystem { cond: condition });
    }
    let x = if rows == cols {
        a.clone()
            .full_piv_lu()
            .solve(&b)
            .ok_or(SolveError::SingularSystem { cond: condition })?
    } else {
        svd.solve(&b, 1e-13 * smax)
            .map_err(|_| SolveError::SingularSystem { cond: condition })?
    };
    let residual = (&a * &x - &b).amax();
    Ok(SystemSolution {
        unknowns: x.iter().cloned().collect(),
        residual,
        condition,
    })
}
