//! A minimal expression algebra for the integrated kernels and all their
//! partial derivatives.
//!
//! Every expression is kept as a sum of terms
//! `c · |t1|^a1 · sgn(t1)^σ1 · |t2|^a2 · sgn(t2)^σ2 · r^q · T`, with
//! `r = (t1² + t2²)^(1/2)` and `T` one of a handful of transcendental factors.
//! The set is closed under `∂/∂t1` and `∂/∂t2`, so derivatives of any order
//! are again plain term lists. Like terms are merged.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::grid::Axis;

/// Highest derivative order accepted by [`KernelExpr::derive`].
pub const MAX_DERIVATIVE_ORDER: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Transcendental {
    One,
    /// `asinh(t2 / |t1|)`
    AsinhT2OverAbsT1,
    /// `asinh(t1 / |t2|)`
    AsinhT1OverAbsT2,
    /// `ln|t1|`
    LnAbsT1,
    /// `ln|t2|`
    LnAbsT2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    pub abs1: i32,
    pub sgn1: bool,
    pub abs2: i32,
    pub sgn2: bool,
    pub radial: i32,
    pub factor: Transcendental,
}

impl Monomial {
    pub const ONE: Monomial = Monomial {
        abs1: 0,
        sgn1: false,
        abs2: 0,
        sgn2: false,
        radial: 0,
        factor: Transcendental::One,
    };

    fn with(mut self, f: impl FnOnce(&mut Monomial)) -> Monomial {
        f(&mut self);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct KernelExpr {
    terms: BTreeMap<Monomial, f64>,
}

/// Per-point quantities shared by all terms of an evaluation.
#[derive(Debug, Clone, Copy)]
struct Point {
    t1: f64,
    t2: f64,
    a1: f64,
    a2: f64,
    r: f64,
}

impl KernelExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::term(c, Monomial::ONE)
    }

    pub fn term(c: f64, m: Monomial) -> Self {
        let mut e = Self::zero();
        e.push(c, m);
        e
    }

    /// The coordinate `t1` or `t2`.
    pub fn coordinate(axis: Axis) -> Self {
        Self::term(
            1.0,
            match axis {
                Axis::One => Monomial::ONE.with(|m| {
                    m.abs1 = 1;
                    m.sgn1 = true
                }),
                Axis::Two => Monomial::ONE.with(|m| {
                    m.abs2 = 1;
                    m.sgn2 = true
                }),
            },
        )
    }

    fn push(&mut self, c: f64, m: Monomial) {
        if c == 0.0 {
            return;
        }
        let slot = self.terms.entry(m).or_insert(0.0);
        *slot += c;
        if *slot == 0.0 {
            self.terms.remove(&m);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &f64)> {
        self.terms.iter()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.push(*c, *m);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            out.push(c * s, *m);
        }
        out
    }

    /// Product with a transcendental-free monomial expression `c·m`.
    pub fn mul_monomial(&self, c: f64, m: Monomial) -> Self {
        assert_eq!(m.factor, Transcendental::One, "only algebraic multipliers");
        let mut out = Self::zero();
        for (t, tc) in &self.terms {
            out.push(
                tc * c,
                Monomial {
                    abs1: t.abs1 + m.abs1,
                    sgn1: t.sgn1 ^ m.sgn1,
                    abs2: t.abs2 + m.abs2,
                    sgn2: t.sgn2 ^ m.sgn2,
                    radial: t.radial + m.radial,
                    factor: t.factor,
                },
            );
        }
        out
    }

    /// Keeps only the terms carrying the transcendental factor `f`, with the
    /// factor replaced by one.
    pub fn coefficient_of(&self, f: Transcendental) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            if m.factor == f {
                out.push(*c, Monomial { factor: Transcendental::One, ..*m });
            }
        }
        out
    }

    /// Swaps the roles of `t1` and `t2`.
    pub fn swapped(&self) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            out.push(
                *c,
                Monomial {
                    abs1: m.abs2,
                    sgn1: m.sgn2,
                    abs2: m.abs1,
                    sgn2: m.sgn1,
                    radial: m.radial,
                    factor: match m.factor {
                        Transcendental::One => Transcendental::One,
                        Transcendental::AsinhT2OverAbsT1 => Transcendental::AsinhT1OverAbsT2,
                        Transcendental::AsinhT1OverAbsT2 => Transcendental::AsinhT2OverAbsT1,
                        Transcendental::LnAbsT1 => Transcendental::LnAbsT2,
                        Transcendental::LnAbsT2 => Transcendental::LnAbsT1,
                    },
                },
            );
        }
        out
    }

    fn derive_once(&self, axis: Axis) -> Self {
        use Transcendental::*;
        let mut out = Self::zero();
        for (m, &c) in &self.terms {
            let (own_abs, own_sgn) = match axis {
                Axis::One => (m.abs1, m.sgn1),
                Axis::Two => (m.abs2, m.sgn2),
            };
            // |t|^a sgn^σ  ->  a |t|^(a-1) sgn^(σ+1)
            if own_abs != 0 {
                out.push(
                    c * own_abs as f64,
                    m.with(|n| match axis {
                        Axis::One => {
                            n.abs1 -= 1;
                            n.sgn1 = !own_sgn
                        }
                        Axis::Two => {
                            n.abs2 -= 1;
                            n.sgn2 = !own_sgn
                        }
                    }),
                );
            }
            // r^q  ->  q r^(q-2) t_k
            if m.radial != 0 {
                out.push(
                    c * m.radial as f64,
                    m.with(|n| {
                        n.radial -= 2;
                        match axis {
                            Axis::One => {
                                n.abs1 += 1;
                                n.sgn1 = !n.sgn1
                            }
                            Axis::Two => {
                                n.abs2 += 1;
                                n.sgn2 = !n.sgn2
                            }
                        }
                    }),
                );
            }
            let plain = m.with(|n| n.factor = One);
            match (m.factor, axis) {
                (One, _) | (LnAbsT2, Axis::One) | (LnAbsT1, Axis::Two) => {}
                (AsinhT2OverAbsT1, Axis::Two) | (AsinhT1OverAbsT2, Axis::One) => {
                    out.push(c, plain.with(|n| n.radial -= 1));
                }
                (AsinhT2OverAbsT1, Axis::One) => {
                    // -t2 sgn(t1) / (|t1| r)
                    out.push(
                        -c,
                        plain.with(|n| {
                            n.abs1 -= 1;
                            n.sgn1 = !n.sgn1;
                            n.abs2 += 1;
                            n.sgn2 = !n.sgn2;
                            n.radial -= 1
                        }),
                    );
                }
                (AsinhT1OverAbsT2, Axis::Two) => {
                    out.push(
                        -c,
                        plain.with(|n| {
                            n.abs2 -= 1;
                            n.sgn2 = !n.sgn2;
                            n.abs1 += 1;
                            n.sgn1 = !n.sgn1;
                            n.radial -= 1
                        }),
                    );
                }
                (LnAbsT1, Axis::One) => out.push(
                    c,
                    plain.with(|n| {
                        n.abs1 -= 1;
                        n.sgn1 = !n.sgn1
                    }),
                ),
                (LnAbsT2, Axis::Two) => out.push(
                    c,
                    plain.with(|n| {
                        n.abs2 -= 1;
                        n.sgn2 = !n.sgn2
                    }),
                ),
            }
        }
        out
    }

    /// Exact partial derivative of the given order along `axis`.
    pub fn derive(&self, axis: Axis, order: usize) -> Result<Self> {
        if order > MAX_DERIVATIVE_ORDER {
            return Err(Error::InvalidOrder(order));
        }
        let mut e = self.clone();
        for _ in 0..order {
            e = e.derive_once(axis);
        }
        Ok(e)
    }

    /// Evaluates at `(t1, t2)`. On a coordinate axis a term whose power of
    /// that coordinate is positive is taken as its limit, zero; a term that is
    /// genuinely unbounded or discontinuous there is an error.
    pub fn eval(&self, t1: f64, t2: f64) -> Result<f64> {
        let p = Point {
            t1,
            t2,
            a1: t1.abs(),
            a2: t2.abs(),
            r: t1.hypot(t2),
        };
        let mut sum = 0.0;
        for (m, c) in &self.terms {
            match term_value(m, &p) {
                Some(v) => sum += c * v,
                None => return Err(Error::Singular(t1, t2)),
            }
        }
        Ok(sum)
    }
}

fn term_value(m: &Monomial, p: &Point) -> Option<f64> {
    use Transcendental::*;
    if (p.a1 == 0.0 && m.abs1 > 0) || (p.a2 == 0.0 && m.abs2 > 0) {
        return Some(0.0);
    }
    if p.a1 == 0.0 && (m.abs1 < 0 || m.sgn1) || p.a2 == 0.0 && (m.abs2 < 0 || m.sgn2) {
        return None;
    }
    if p.r == 0.0 && m.radial > 0 {
        return Some(0.0);
    }
    let mut v = p.a1.powi(m.abs1) * p.a2.powi(m.abs2) * p.r.powi(m.radial);
    if m.sgn1 && p.t1 < 0.0 {
        v = -v;
    }
    if m.sgn2 && p.t2 < 0.0 {
        v = -v;
    }
    v *= match m.factor {
        One => 1.0,
        AsinhT2OverAbsT1 => (p.t2 / p.a1).asinh(),
        AsinhT1OverAbsT2 => (p.t1 / p.a2).asinh(),
        LnAbsT1 => p.a1.ln(),
        LnAbsT2 => p.a2.ln(),
    };
    v.is_finite().then_some(v)
}

fn fmt_power(f: &mut fmt::Formatter<'_>, name: &str, a: i32) -> fmt::Result {
    match a {
        0 => Ok(()),
        1 => write!(f, "·{name}"),
        _ => write!(f, "·{name}^{a}"),
    }
}

impl fmt::Display for KernelExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}")?;
            fmt_power(f, "|t1|", m.abs1)?;
            if m.sgn1 {
                write!(f, "·sgn(t1)")?;
            }
            fmt_power(f, "|t2|", m.abs2)?;
            if m.sgn2 {
                write!(f, "·sgn(t2)")?;
            }
            fmt_power(f, "r", m.radial)?;
            match m.factor {
                Transcendental::One => {}
                Transcendental::AsinhT2OverAbsT1 => write!(f, "·asinh(t2/|t1|)")?,
                Transcendental::AsinhT1OverAbsT2 => write!(f, "·asinh(t1/|t2|)")?,
                Transcendental::LnAbsT1 => write!(f, "·ln|t1|")?,
                Transcendental::LnAbsT2 => write!(f, "·ln|t2|")?,
            }
        }
        Ok(())
    }
}
