//! Softened kernels. Inside a band `|t_k| ≤ mH` the integrated kernel is
//! replaced by an even polynomial in `t_k` that matches the kernel and its
//! first `p - 1` derivatives at the band edge; in the square where both bands
//! overlap the polynomial is bivariate.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::grid::{Array2, Axis, MAX_ORDER};
use crate::kernels::{
    axis1_derivatives, integrated_kernel_22, mixed_derivative, principal_smoothness_expr,
    KernelComponent, KernelExpr, Transcendental,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SofteningParams {
    p: usize,
    m: u32,
    mesh: f64,
}

impl SofteningParams {
    /// Order `p` (even, `2..=12`), distance `m` in coarse meshes, coarse mesh `H`.
    pub fn new(p: usize, m: u32, mesh: f64) -> Result<Self> {
        if p < 2 || p > MAX_ORDER || p % 2 != 0 {
            return Err(Error::InvalidOrder(p));
        }
        if !(mesh > 0.0 && mesh.is_finite()) {
            return Err(Error::InvalidParams(format!("mesh {mesh} must be positive")));
        }
        if m as f64 * mesh >= 2.0 * std::f64::consts::SQRT_2 {
            return Err(Error::InvalidParams(format!(
                "band {m}·{mesh} exceeds the domain diameter"
            )));
        }
        Ok(Self { p, m, mesh })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    /// Half-width `mH` of the softening band.
    pub fn band(&self) -> f64 {
        self.m as f64 * self.mesh
    }

    pub fn is_active(&self) -> bool {
        self.m > 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContinuityParity {
    Even,
    Odd,
}

impl ContinuityParity {
    fn offset(self) -> usize {
        match self {
            ContinuityParity::Even => 0,
            ContinuityParity::Odd => 1,
        }
    }
}

fn falling_factorial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    ((n - k + 1)..=n).fold(BigInt::one(), |acc, v| acc * BigInt::from(v))
}

/// `b(i, j) = (2j+odd)! / (2j+odd-i)!`: the `i`-th derivative of
/// `t^(2j+odd)` at `t = 1`, zero when the derivative order exceeds the degree.
pub fn b_entry(i: usize, j: usize, parity: ContinuityParity) -> BigInt {
    falling_factorial(2 * j + parity.offset(), i)
}

/// Exact unit-scaled continuity matrix, row = derivative order, column = basis power.
pub fn unit_continuity_matrix(p: usize, parity: ContinuityParity) -> Vec<Vec<BigRational>> {
    (0..p)
        .map(|i| {
            (0..p)
                .map(|j| BigRational::from_integer(b_entry(i, j, parity)))
                .collect()
        })
        .collect()
}

/// Continuity matrix at the band edge: entry `(j, i)` is the `j`-th derivative
/// of `t^e(i)` at `t = mH`, with `e(i) = 2i` (even) or `2i + 1` (odd).
pub fn continuity_matrix(p: usize, mh: f64, parity: ContinuityParity) -> Result<Vec<Vec<f64>>> {
    if p == 0 || p > MAX_ORDER {
        return Err(Error::InvalidOrder(p));
    }
    if !(mh > 0.0) {
        return Err(Error::InvalidParams(format!("band {mh} must be positive")));
    }
    exact_inverse(&unit_continuity_matrix(p, parity))?;
    Ok((0..p)
        .map(|j| {
            (0..p)
                .map(|i| {
                    let e = 2 * i + parity.offset();
                    let b = b_entry(j, i, parity).to_f64().unwrap_or(f64::INFINITY);
                    if b == 0.0 {
                        0.0
                    } else {
                        b * mh.powi(e as i32 - j as i32)
                    }
                })
                .collect()
        })
        .collect())
}

/// Gauss–Jordan inverse in exact rational arithmetic.
pub fn exact_inverse(a: &[Vec<BigRational>]) -> Result<Vec<Vec<BigRational>>> {
    let n = a.len();
    let mut m: Vec<Vec<BigRational>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| {
                if i == j {
                    BigRational::one()
                } else {
                    BigRational::zero()
                }
            }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| !m[r][col].is_zero())
            .ok_or(Error::SingularSystem(n))?;
        m.swap(col, pivot);
        let inv = m[col][col].recip();
        for v in m[col].iter_mut() {
            *v = &*v * &inv;
        }
        for r in 0..n {
            if r != col && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                let pivot_row = m[col].clone();
                for (v, pv) in m[r].iter_mut().zip(&pivot_row) {
                    *v = &*v - &f * pv;
                }
            }
        }
    }
    Ok(m.into_iter().map(|row| row[n..].to_vec()).collect())
}

fn to_f64_matrix(a: &[Vec<BigRational>]) -> Vec<Vec<f64>> {
    a.iter()
        .map(|row| row.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect())
        .collect()
}

/// Inverse of the unit-scaled even continuity matrix as `f64`, exact up to rounding.
pub fn unit_inverse(p: usize, parity: ContinuityParity) -> Result<Vec<Vec<f64>>> {
    Ok(to_f64_matrix(&exact_inverse(&unit_continuity_matrix(p, parity))?))
}

/// Largest-magnitude entry ratio helper: `‖M‖∞ ‖M⁻¹‖∞` for a dense matrix.
pub fn condition_number_inf(m: &[Vec<f64>]) -> Result<f64> {
    let exact: Vec<Vec<BigRational>> = m
        .iter()
        .map(|row| {
            row.iter()
                .map(|&v| BigRational::from_float(v).ok_or(Error::SingularSystem(m.len())))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let inv = to_f64_matrix(&exact_inverse(&exact)?);
    let norm = |a: &[Vec<f64>]| {
        a.iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    Ok(norm(m) * norm(&inv))
}

fn solve_unit(minv: &[Vec<f64>], rhs: &[f64]) -> Vec<f64> {
    minv.iter()
        .map(|row| row.iter().zip(rhs).map(|(a, b)| a * b).sum())
        .collect()
}

/// Even polynomial `Σ c_i u^(2i)`.
#[inline]
fn even_poly(c: &[f64], u: f64) -> f64 {
    let u2 = u * u;
    c.iter().rev().fold(0.0, |acc, v| acc * u2 + v)
}

fn edge_derivatives(
    e: &KernelExpr,
    axis: Axis,
    p: usize,
    band: f64,
    other: f64,
) -> Result<Vec<f64>> {
    let mut d = e.clone();
    let mut out = Vec::with_capacity(p);
    let mut scale = 1.0;
    for _ in 0..p {
        let v = match axis {
            Axis::One => d.eval(band, other)?,
            Axis::Two => d.eval(other, band)?,
        };
        out.push(scale * v);
        d = d.derive(axis, 1)?;
        scale *= band;
    }
    Ok(out)
}

/// Coefficients `α_i` of the even softening polynomial `Σ α_i (t_k/mH)^(2i)`
/// of an expression along `axis`, with the other coordinate fixed. If
/// `factor` is given only the terms carrying that transcendental factor are
/// used, with the factor itself set to one.
pub fn expr_line_coefficients(
    e: &KernelExpr,
    axis: Axis,
    params: &SofteningParams,
    other: f64,
    factor: Option<Transcendental>,
) -> Result<Vec<f64>> {
    if !params.is_active() {
        return Err(Error::InvalidParams("softening with m = 0".into()));
    }
    let minv = unit_inverse(params.p, ContinuityParity::Even)?;
    let rhs = match factor {
        None => edge_derivatives(e, axis, params.p, params.band(), other)?,
        Some(f) => {
            let mut d = e.clone();
            let mut out = Vec::with_capacity(params.p);
            let mut scale = 1.0;
            for _ in 0..params.p {
                let part = d.coefficient_of(f);
                out.push(
                    scale
                        * match axis {
                            Axis::One => part.eval(params.band(), other)?,
                            Axis::Two => part.eval(other, params.band())?,
                        },
                );
                d = d.derive(axis, 1)?;
                scale *= params.band();
            }
            out
        }
    };
    Ok(solve_unit(&minv, &rhs))
}

/// Softened value of one component along `axis` at a point inside the band.
/// Components that are smooth along `axis` are returned unchanged.
pub fn soften_axis(
    component: &KernelComponent,
    axis: Axis,
    params: &SofteningParams,
    t: (f64, f64),
) -> Result<f64> {
    let (tk, other) = match axis {
        Axis::One => t,
        Axis::Two => (t.1, t.0),
    };
    if tk.abs() > params.band() {
        return Err(Error::InvalidParams(format!(
            "|t_k| = {} lies outside the band {}",
            tk.abs(),
            params.band()
        )));
    }
    if component.is_smooth_along(axis) {
        return component.eval(t.0, t.1);
    }
    let c = expr_line_coefficients(&component.expr, axis, params, other, None)?;
    Ok(even_poly(&c, tk / params.band()))
}

/// Coefficients `C_ik` of the bivariate softening polynomial
/// `Σ C_ik (t1/b1)^(2i) (t2/b2)^(2k)` of an expression.
pub fn corner_coefficients(
    e: &KernelExpr,
    p1: &SofteningParams,
    p2: &SofteningParams,
) -> Result<Vec<Vec<f64>>> {
    let (b1, b2) = (p1.band(), p2.band());
    let mut d = Vec::with_capacity(p1.p);
    let mut row_expr = e.clone();
    for j in 0..p1.p {
        let r = edge_derivatives(&row_expr, Axis::Two, p2.p, b2, b1)?;
        d.push(r.into_iter().map(|v| v * b1.powi(j as i32)).collect::<Vec<_>>());
        row_expr = row_expr.derive(Axis::One, 1)?;
    }
    corner_from_edge_table(&d, p1, p2)
}

fn corner_from_edge_table(
    d: &[Vec<f64>],
    p1: &SofteningParams,
    p2: &SofteningParams,
) -> Result<Vec<Vec<f64>>> {
    let m1 = unit_inverse(p1.p, ContinuityParity::Even)?;
    let m2 = unit_inverse(p2.p, ContinuityParity::Even)?;
    // C = M1⁻¹ D M2⁻ᵀ
    let left: Vec<Vec<f64>> = (0..p1.p)
        .map(|i| {
            (0..p2.p)
                .map(|l| (0..p1.p).map(|j| m1[i][j] * d[j][l]).sum())
                .collect()
        })
        .collect();
    Ok((0..p1.p)
        .map(|i| {
            (0..p2.p)
                .map(|k| (0..p2.p).map(|l| left[i][l] * m2[k][l]).sum())
                .collect()
        })
        .collect())
}

/// Doubly softened `G^(2,2)` in the square `|t1| ≤ b1`, `|t2| ≤ b2`.
pub fn soften_double(p1: &SofteningParams, p2: &SofteningParams, t: (f64, f64)) -> Result<f64> {
    if t.0.abs() > p1.band() || t.1.abs() > p2.band() {
        return Err(Error::InvalidParams(format!(
            "({}, {}) lies outside the central square",
            t.0, t.1
        )));
    }
    let k = SoftenedKernel::new(Some(*p1), Some(*p2))?;
    Ok(k.value(t.0, t.1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SofteningRegion {
    /// Softened along axis 1 only.
    Axis1,
    /// Softened along axis 2 only.
    Axis2,
    /// Inside both bands.
    Both,
    /// Original kernel.
    Original,
}

/// `G^(2,2)` softened along either, both, or neither axis.
#[derive(Debug, Clone)]
pub struct SoftenedKernel {
    params: [Option<SofteningParams>; 2],
    minv: [Vec<Vec<f64>>; 2],
    corner: Vec<Vec<f64>>,
}

impl SoftenedKernel {
    /// Params with `m = 0` are treated as no softening on that axis.
    pub fn new(axis1: Option<SofteningParams>, axis2: Option<SofteningParams>) -> Result<Self> {
        let params = [axis1.filter(|q| q.is_active()), axis2.filter(|q| q.is_active())];
        let mut minv = [Vec::new(), Vec::new()];
        for (k, q) in params.iter().enumerate() {
            if let Some(q) = q {
                minv[k] = unit_inverse(q.p, ContinuityParity::Even)?;
            }
        }
        let corner = match (params[0], params[1]) {
            (Some(a), Some(b)) => {
                let (b1, b2) = (a.band(), b.band());
                let mut d = Vec::with_capacity(a.p);
                for j in 0..a.p {
                    let mut row = Vec::with_capacity(b.p);
                    for l in 0..b.p {
                        let v = mixed_derivative(j, l)?.eval(b1, b2)?;
                        row.push(v * b1.powi(j as i32) * b2.powi(l as i32));
                    }
                    d.push(row);
                }
                corner_from_edge_table(&d, &a, &b)?
            }
            _ => Vec::new(),
        };
        Ok(Self {
            params,
            minv,
            corner,
        })
    }

    pub fn uniform(params: Option<SofteningParams>) -> Result<Self> {
        Self::new(params, params)
    }

    pub fn original() -> Self {
        Self {
            params: [None, None],
            minv: [Vec::new(), Vec::new()],
            corner: Vec::new(),
        }
    }

    pub fn params(&self, axis: Axis) -> Option<SofteningParams> {
        match axis {
            Axis::One => self.params[0],
            Axis::Two => self.params[1],
        }
    }

    pub fn band(&self, axis: Axis) -> f64 {
        self.params(axis).map_or(0.0, |q| q.band())
    }

    pub fn is_original(&self) -> bool {
        self.params.iter().all(Option::is_none)
    }

    /// Coefficients of the bivariate polynomial in the central square.
    pub fn corner(&self) -> &[Vec<f64>] {
        &self.corner
    }

    pub fn region(&self, t1: f64, t2: f64) -> SofteningRegion {
        let in1 = self.params[0].is_some_and(|q| t1.abs() <= q.band());
        let in2 = self.params[1].is_some_and(|q| t2.abs() <= q.band());
        match (in1, in2) {
            (true, true) => SofteningRegion::Both,
            (true, false) => SofteningRegion::Axis1,
            (false, true) => SofteningRegion::Axis2,
            (false, false) => SofteningRegion::Original,
        }
    }

    /// Softening coefficients along `axis` on the line where the other
    /// coordinate equals `other`. Requires softening on `axis`.
    pub fn line_coefficients(&self, axis: Axis, other: f64) -> Vec<f64> {
        let k = match axis {
            Axis::One => 0,
            Axis::Two => 1,
        };
        let q = self.params[k].expect("softening active on this axis");
        let b = q.band();
        // Axis 2 follows from axis 1 by the t1 <-> t2 symmetry of G.
        let table = axis1_derivatives();
        let mut rhs = Vec::with_capacity(q.p);
        let mut scale = 1.0;
        for e in table.iter().take(q.p) {
            let v = e
                .eval(b, other)
                .expect("band edge lies off both axes of the derivative terms");
            rhs.push(scale * v);
            scale *= b;
        }
        solve_unit(&self.minv[k], &rhs)
    }

    #[inline]
    fn smooth_part(t: f64) -> f64 {
        t.abs().powi(3) / 6.0
    }

    pub fn value(&self, t1: f64, t2: f64) -> f64 {
        match self.region(t1, t2) {
            SofteningRegion::Original => integrated_kernel_22(t1, t2),
            SofteningRegion::Axis1 => {
                let c = self.line_coefficients(Axis::One, t2);
                even_poly(&c, t1 / self.band(Axis::One)) + Self::smooth_part(t2)
            }
            SofteningRegion::Axis2 => {
                let c = self.line_coefficients(Axis::Two, t1);
                even_poly(&c, t2 / self.band(Axis::Two)) + Self::smooth_part(t1)
            }
            SofteningRegion::Both => self.corner_value(t1, t2),
        }
    }

    fn corner_value(&self, t1: f64, t2: f64) -> f64 {
        let u1 = t1 / self.band(Axis::One);
        let u2 = t2 / self.band(Axis::Two);
        let inner: Vec<f64> = self.corner.iter().map(|row| even_poly(row, u2)).collect();
        even_poly(&inner, u1)
    }

    /// Values at `t = (d1·h, d2·h)` for `d1 ∈ rows`, `d2 ∈ cols`. Line
    /// coefficients are computed once per line.
    pub fn table(&self, h: f64, rows: std::ops::Range<i64>, cols: std::ops::Range<i64>) -> Array2 {
        self.table_mesh((h, h), rows, cols)
    }

    /// As [`Self::table`] with `t = (d1·h1, d2·h2)`.
    pub fn table_mesh(
        &self,
        (h1, h2): (f64, f64),
        rows: std::ops::Range<i64>,
        cols: std::ops::Range<i64>,
    ) -> Array2 {
        let nr = (rows.end - rows.start).max(0) as usize;
        let nc = (cols.end - cols.start).max(0) as usize;
        let b1 = self.band(Axis::One);
        let b2 = self.band(Axis::Two);
        let in1 = |t: f64| self.params[0].is_some() && t.abs() <= b1;
        let in2 = |t: f64| self.params[1].is_some() && t.abs() <= b2;
        let col_coeffs: Vec<Option<Vec<f64>>> = cols
            .clone()
            .map(|d2| {
                let t2 = d2 as f64 * h2;
                (self.params[0].is_some() && !in2(t2))
                    .then(|| self.line_coefficients(Axis::One, t2))
            })
            .collect();
        let mut out = Array2::zeros(nr, nc);
        for (i, d1) in rows.enumerate() {
            let t1 = d1 as f64 * h1;
            let row_coeffs = (self.params[1].is_some() && !in1(t1))
                .then(|| self.line_coefficients(Axis::Two, t1));
            let row = out.row_mut(i);
            for (j, d2) in cols.clone().enumerate() {
                let t2 = d2 as f64 * h2;
                row[j] = match (in1(t1), in2(t2)) {
                    (false, false) => integrated_kernel_22(t1, t2),
                    (true, false) => {
                        let c = col_coeffs[j].as_ref().expect("coefficients present");
                        even_poly(c, t1 / b1) + Self::smooth_part(t2)
                    }
                    (false, true) => {
                        let c = row_coeffs.as_ref().expect("coefficients present");
                        even_poly(c, t2 / b2) + Self::smooth_part(t1)
                    }
                    (true, true) => self.corner_value(t1, t2),
                };
            }
        }
        out
    }
}

fn psc_poly_coefficients(l: u32, p: usize, mh: f64) -> Result<(Vec<f64>, ContinuityParity)> {
    if p == 0 || p > MAX_ORDER {
        return Err(Error::InvalidOrder(p));
    }
    if !(mh > 0.0) {
        return Err(Error::InvalidParams(format!("band {mh} must be positive")));
    }
    let parity = if l % 2 == 0 {
        ContinuityParity::Even
    } else {
        ContinuityParity::Odd
    };
    let binv = unit_inverse(p, parity)?;
    let rhs = edge_derivatives(&principal_smoothness_expr(l), Axis::One, p, mh, 0.0)?;
    Ok((solve_unit(&binv, &rhs), parity))
}

/// `q`-th derivative of the softened principal smoothness component
/// `η^l ln|η|` (order-`p` softening, band `mH`) at `η ∈ [0, mH]`.
pub fn softened_psc(l: u32, p: usize, mh: f64, q: usize, eta: f64) -> Result<f64> {
    if !(0.0..=mh).contains(&eta) {
        return Err(Error::InvalidParams(format!("η = {eta} outside [0, {mh}]")));
    }
    let (a, parity) = psc_poly_coefficients(l, p, mh)?;
    let mut sum = 0.0;
    for (i, ai) in a.iter().enumerate() {
        let b = b_entry(q, i, parity);
        if b.is_zero() {
            continue;
        }
        let e = 2 * i + parity.offset();
        let bf = b.to_f64().unwrap_or(f64::INFINITY);
        sum += ai * bf * mh.powi(-(e as i32)) * eta.powi(e as i32 - q as i32);
    }
    Ok(sum)
}

/// `p`-th derivative of the order-`p` softened principal smoothness component.
pub fn softened_psc_derivative(l: u32, p: usize, mh: f64, eta: f64) -> Result<f64> {
    softened_psc(l, p, mh, p, eta)
}
