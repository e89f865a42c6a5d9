//! High-precision evaluation of kernel expressions and of the uniformly
//! softened kernel, built from exact continuity inverses.

use dashu_float::round::mode::HalfEven;
use std::cell::RefCell;
use std::collections::HashMap;

use dashu_float::ops::Abs;
use dashu_float::FBig;
use dashu_int::IBig;
use mlmi::kernels::{
    axis1_derivatives, integrated_kernel_expr, mixed_derivative, KernelExpr, Monomial,
    Transcendental,
};
use mlmi::softening::{exact_inverse, unit_continuity_matrix, ContinuityParity};
use num_rational::BigRational;

pub type F = FBig<HalfEven>;

pub const PREC: usize = 128;

pub fn hp(x: f64) -> F {
    F::try_from(x).expect("finite").with_precision(PREC).value()
}

pub fn hp_int(n: i64) -> F {
    F::from(IBig::from(n)).with_precision(PREC).value()
}

pub fn hp_rational(q: &BigRational) -> F {
    let num: IBig = q.numer().to_string().parse().expect("integer");
    let den: IBig = q.denom().to_string().parse().expect("integer");
    F::from(num).with_precision(PREC).value() / F::from(den).with_precision(PREC).value()
}

fn zero() -> F {
    hp_int(0)
}

fn powi(base: &F, inv: &F, n: i32) -> F {
    let (b, k) = if n < 0 { (inv, -n) } else { (base, n) };
    let mut out = hp_int(1);
    for _ in 0..k {
        out = out * b;
    }
    out
}

/// Shared per-point quantities. Both coordinates must be nonzero.
pub struct Point {
    t1: F,
    t2: F,
    a1: F,
    a2: F,
    r: F,
    inv1: F,
    inv2: F,
    invr: F,
    asinh21: F,
    asinh12: F,
    ln1: F,
    ln2: F,
}

impl Point {
    pub fn new(t1: &F, t2: &F) -> Self {
        let a1 = t1.clone().abs();
        let a2 = t2.clone().abs();
        let r = (t1 * t1 + t2 * t2).sqrt();
        let one = hp_int(1);
        Self {
            inv1: &one / &a1,
            inv2: &one / &a2,
            invr: &one / &r,
            asinh21: (t2 / &a1).asinh(),
            asinh12: (t1 / &a2).asinh(),
            ln1: a1.ln(),
            ln2: a2.ln(),
            t1: t1.clone(),
            t2: t2.clone(),
            a1,
            a2,
            r,
        }
    }
}

/// An expression with its coefficients converted once.
pub struct HpExpr(Vec<(Monomial, F)>);

impl HpExpr {
    pub fn new(e: &KernelExpr) -> Self {
        Self(e.terms().map(|(m, &c)| (*m, hp(c))).collect())
    }
}

pub fn eval(e: &KernelExpr, t1: &F, t2: &F) -> F {
    eval_at(&HpExpr::new(e), &Point::new(t1, t2))
}

pub fn eval_at(e: &HpExpr, p: &Point) -> F {
    let mut sum = zero();
    for (m, c) in &e.0 {
        let mut v = powi(&p.a1, &p.inv1, m.abs1) * powi(&p.a2, &p.inv2, m.abs2) * powi(&p.r, &p.invr, m.radial);
        if m.sgn1 && p.t1 < zero() {
            v = -v;
        }
        if m.sgn2 && p.t2 < zero() {
            v = -v;
        }
        v = match m.factor {
            Transcendental::One => v,
            Transcendental::AsinhT2OverAbsT1 => v * &p.asinh21,
            Transcendental::AsinhT1OverAbsT2 => v * &p.asinh12,
            Transcendental::LnAbsT1 => v * &p.ln1,
            Transcendental::LnAbsT2 => v * &p.ln2,
        };
        sum += c * v;
    }
    sum
}

fn even_poly(c: &[F], u: &F) -> F {
    let u2 = u * u;
    let mut acc = zero();
    for a in c.iter().rev() {
        acc = acc * &u2 + a;
    }
    acc
}

/// `G^(2,2)` softened with the same order `p` and band `b` on both axes.
pub struct SoftKernel {
    b: F,
    minv: Vec<Vec<F>>,
    corner: Vec<Vec<F>>,
    derivatives: Vec<HpExpr>,
    original: HpExpr,
    /// Line coefficients by the bits of the other coordinate.
    lines: RefCell<HashMap<u64, Vec<F>>>,
}

impl SoftKernel {
    pub fn new(p: usize, b: f64) -> Self {
        let exact = exact_inverse(&unit_continuity_matrix(p, ContinuityParity::Even)).expect("invertible");
        let minv: Vec<Vec<F>> = exact.iter().map(|row| row.iter().map(hp_rational).collect()).collect();
        let bh = hp(b);
        let mut d = vec![vec![zero(); p]; p];
        let point = Point::new(&bh, &bh);
        for (j, row) in d.iter_mut().enumerate() {
            for (l, v) in row.iter_mut().enumerate() {
                let scale = powi(&bh, &bh, (j + l) as i32);
                *v = eval_at(&HpExpr::new(mixed_derivative(j, l).expect("order")), &point) * scale;
            }
        }
        let left: Vec<Vec<F>> = (0..p)
            .map(|i| (0..p).map(|l| (0..p).fold(zero(), |s, j| s + &minv[i][j] * &d[j][l])).collect())
            .collect();
        let corner = (0..p)
            .map(|i| (0..p).map(|k| (0..p).fold(zero(), |s, l| s + &left[i][l] * &minv[k][l])).collect())
            .collect();
        Self {
            b: bh,
            minv,
            corner,
            derivatives: axis1_derivatives().iter().take(p).map(HpExpr::new).collect(),
            original: HpExpr::new(integrated_kernel_expr()),
            lines: RefCell::new(HashMap::new()),
        }
    }

    /// Polynomial of the band along axis 1 on the line `t2 = other`, with the
    /// part smooth along axis 1 added back.
    fn axis1_value(&self, t1: &F, other: &F) -> F {
        let key = other.to_f64().value().to_bits();
        let mut lines = self.lines.borrow_mut();
        let alpha = lines.entry(key).or_insert_with(|| {
            let point = Point::new(&self.b, other);
            let rhs: Vec<F> = self
                .derivatives
                .iter()
                .enumerate()
                .map(|(j, e)| eval_at(e, &point) * powi(&self.b, &self.b, j as i32))
                .collect();
            self.minv
                .iter()
                .map(|row| row.iter().zip(&rhs).fold(zero(), |s, (m, r)| s + m * r))
                .collect()
        });
        let a = other.clone().abs();
        even_poly(alpha, &(t1 / &self.b)) + &a * &a * &a / hp_int(6)
    }

    fn corner_value(&self, t1: &F, t2: &F) -> F {
        let v = t2 / &self.b;
        let inner: Vec<F> = self.corner.iter().map(|row| even_poly(row, &v)).collect();
        even_poly(&inner, &(t1 / &self.b))
    }

    /// Value with the band membership of each coordinate given explicitly, so
    /// either one-sided branch can be evaluated on a band edge.
    pub fn branch(&self, t1: &F, t2: &F, in1: bool, in2: bool) -> F {
        match (in1, in2) {
            (true, true) => self.corner_value(t1, t2),
            (true, false) => self.axis1_value(t1, t2),
            (false, true) => self.axis1_value(t2, t1),
            (false, false) => eval_at(&self.original, &Point::new(t1, t2)),
        }
    }

    pub fn value(&self, t1: &F, t2: &F) -> F {
        let in1 = t1.clone().abs() <= self.b;
        let in2 = t2.clone().abs() <= self.b;
        self.branch(t1, t2, in1, in2)
    }
}
