//! Kernels of the model transform: `1/|t|`, its doubly integrated form
//! `G^(2,2)` split into six components, a quadrature oracle for the integrated
//! family, and cached derivative tables used by softening.

pub mod expr;

use std::sync::OnceLock;

pub use expr::{KernelExpr, Monomial, Transcendental, MAX_DERIVATIVE_ORDER};

use crate::error::{Error, Result};
use crate::grid::Axis;
use crate::quadrature::integrate;

/// Highest derivative order kept in the cached tables.
pub const TABLE_ORDER: usize = 12;

pub fn model_kernel(t1: f64, t2: f64) -> Result<f64> {
    let r = t1.hypot(t2);
    if r == 0.0 {
        return Err(Error::Singular(t1, t2));
    }
    Ok(1.0 / r)
}

/// `G^(2,2)(t)`, continuous everywhere and zero on both axes.
#[inline]
pub fn integrated_kernel_22(t1: f64, t2: f64) -> f64 {
    let a1 = t1.abs();
    let a2 = t2.abs();
    let r = t1.hypot(t2);
    let mut v = (a1 * a1 * a1 + a2 * a2 * a2 - r * r * r) / 6.0;
    if a1 > 0.0 && a2 > 0.0 {
        v += 0.5 * t1 * t2 * (t1 * (t2 / a1).asinh() + t2 * (t1 / a2).asinh());
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
    Neither,
}

#[derive(Debug, Clone)]
pub struct KernelComponent {
    pub index: usize,
    pub expr: KernelExpr,
    pub parity: [Parity; 2],
    /// Axes along which the component is smooth enough to need no softening.
    pub smooth_axes: [bool; 2],
}

impl KernelComponent {
    pub fn eval(&self, t1: f64, t2: f64) -> Result<f64> {
        self.expr.eval(t1, t2)
    }

    pub fn is_smooth_along(&self, axis: Axis) -> bool {
        match axis {
            Axis::One => self.smooth_axes[0],
            Axis::Two => self.smooth_axes[1],
        }
    }
}

fn mono(abs1: i32, sgn1: bool, abs2: i32, sgn2: bool, radial: i32, factor: Transcendental) -> Monomial {
    Monomial {
        abs1,
        sgn1,
        abs2,
        sgn2,
        radial,
        factor,
    }
}

fn build_components() -> Vec<KernelComponent> {
    use Transcendental::*;
    let exprs = [
        KernelExpr::term(0.5, mono(2, false, 1, true, 0, AsinhT2OverAbsT1)),
        KernelExpr::term(-1.0 / 6.0, mono(2, false, 0, false, 1, One)),
        KernelExpr::term(1.0 / 6.0, mono(3, false, 0, false, 0, One)),
        KernelExpr::term(0.5, mono(1, true, 2, false, 0, AsinhT1OverAbsT2)),
        KernelExpr::term(-1.0 / 6.0, mono(0, false, 2, false, 1, One)),
        KernelExpr::term(1.0 / 6.0, mono(0, false, 3, false, 0, One)),
    ];
    exprs
        .into_iter()
        .enumerate()
        .map(|(index, expr)| KernelComponent {
            index,
            expr,
            parity: [Parity::Even, Parity::Even],
            smooth_axes: [index == 5, index == 2],
        })
        .collect()
}

/// The six components whose sum is `G^(2,2)`.
pub fn components() -> &'static [KernelComponent] {
    static C: OnceLock<Vec<KernelComponent>> = OnceLock::new();
    C.get_or_init(build_components)
}

/// `G^(2,2)` as a single expression.
pub fn integrated_kernel_expr() -> &'static KernelExpr {
    static E: OnceLock<KernelExpr> = OnceLock::new();
    E.get_or_init(|| {
        components()
            .iter()
            .fold(KernelExpr::zero(), |acc, c| acc.add(&c.expr))
    })
}

/// Sum of the components that need softening along axis 1 (all but the fifth).
pub fn axis1_soft_part() -> &'static KernelExpr {
    static E: OnceLock<KernelExpr> = OnceLock::new();
    E.get_or_init(|| {
        components()
            .iter()
            .filter(|c| !c.is_smooth_along(Axis::One))
            .fold(KernelExpr::zero(), |acc, c| acc.add(&c.expr))
    })
}

pub fn derive(e: &KernelExpr, axis: Axis, order: usize) -> Result<KernelExpr> {
    e.derive(axis, order)
}

/// `∂1^j` of [`axis1_soft_part`] for `j = 0..=TABLE_ORDER`.
pub fn axis1_derivatives() -> &'static [KernelExpr] {
    static T: OnceLock<Vec<KernelExpr>> = OnceLock::new();
    T.get_or_init(|| {
        let mut out = vec![axis1_soft_part().clone()];
        for j in 1..=TABLE_ORDER {
            let next = out[j - 1].derive(Axis::One, 1).expect("order within range");
            out.push(next);
        }
        out
    })
}

/// `∂1^j ∂2^k G^(2,2)` for `j, k = 0..=TABLE_ORDER`.
pub fn mixed_derivative(j: usize, k: usize) -> Result<&'static KernelExpr> {
    static T: OnceLock<Vec<Vec<KernelExpr>>> = OnceLock::new();
    if j > TABLE_ORDER || k > TABLE_ORDER {
        return Err(Error::InvalidOrder(j.max(k)));
    }
    let table = T.get_or_init(|| {
        let mut rows: Vec<Vec<KernelExpr>> = Vec::with_capacity(TABLE_ORDER + 1);
        let mut first = integrated_kernel_expr().clone();
        for _ in 0..=TABLE_ORDER {
            let mut row = Vec::with_capacity(TABLE_ORDER + 1);
            let mut e = first.clone();
            for _ in 0..=TABLE_ORDER {
                let next = e.derive(Axis::Two, 1).expect("order within range");
                row.push(e);
                e = next;
            }
            rows.push(row);
            first = first.derive(Axis::One, 1).expect("order within range");
        }
        rows
    });
    Ok(&table[j][k])
}

fn cauchy_weight(l: u32, span: f64) -> f64 {
    // (t - η)^(l-1) / (l-1)!
    let mut w = 1.0;
    for k in 1..l {
        w *= span / k as f64;
    }
    w
}

/// Recursively integrated kernel `G^l(t)` for `l ∈ {0,1,2}²`, computed by
/// nested adaptive quadrature of `1/|η|` with Cauchy repeated-integral
/// weights. `tol` bounds the absolute error.
pub fn kernel_family_oracle(l: (u32, u32), t: (f64, f64), tol: f64) -> Result<f64> {
    let (l1, l2) = l;
    let (t1, t2) = t;
    if l1 > 2 || l2 > 2 {
        return Err(Error::InvalidOrder(l1.max(l2) as usize));
    }
    if !(tol > 0.0) {
        return Err(Error::Quadrature(format!("tolerance must be positive, got {tol}")));
    }
    let line = |fixed: f64, lk: u32, tk: f64, itol: f64| -> Result<f64> {
        integrate(
            |eta| Ok(cauchy_weight(lk, tk - eta) * model_kernel(fixed, eta)?),
            0.0,
            tk,
            itol,
        )
    };
    match (l1, l2) {
        (0, 0) => model_kernel(t1, t2),
        (0, _) => line(t1, l2, t2, tol),
        (_, 0) => line(t2, l1, t1, tol),
        _ => {
            let inner_tol = 0.25 * tol / t1.abs().max(1.0).powi(l1 as i32);
            integrate(
                |eta1| Ok(cauchy_weight(l1, t1 - eta1) * line(eta1, l2, t2, inner_tol)?),
                0.0,
                t1,
                0.5 * tol,
            )
        }
    }
}

/// `η^l ln|η|`, the component dominating the smoothness of `G^l` along one axis.
pub fn principal_smoothness_component(l: u32, eta: f64) -> Result<f64> {
    if eta == 0.0 {
        return Err(Error::Singular(eta, 0.0));
    }
    Ok(eta.powi(l as i32) * eta.abs().ln())
}

/// [`principal_smoothness_component`] as an expression in `t1`.
pub fn principal_smoothness_expr(l: u32) -> KernelExpr {
    KernelExpr::term(
        1.0,
        mono(l as i32, l % 2 == 1, 0, false, 0, Transcendental::LnAbsT1),
    )
}
