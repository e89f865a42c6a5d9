//! Uniform vertex-centred grids on `[-1, 1]²`, nodal data, and the central
//! Lagrange interpolation and anterpolation operators between a grid and its
//! factor-two coarsening along one axis.

use std::collections::HashMap;
use std::ops::{Index, IndexMut};

use num_rational::Ratio;

use crate::error::{Error, Result};

/// Finest level supported by [`GridSpec`].
pub const MAX_LEVEL: u32 = 14;

/// Highest interpolation order accepted by the transfer operators.
pub const MAX_ORDER: usize = 12;

/// Uniform grid on `[-1, 1]²` with `2^level + 1` nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridSpec {
    level: u32,
}

impl GridSpec {
    pub fn new(level: u32) -> Result<Self> {
        if !(1..=MAX_LEVEL).contains(&level) {
            return Err(Error::InvalidLevel(level));
        }
        Ok(Self { level })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn nodes_per_axis(&self) -> usize {
        (1usize << self.level) + 1
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_axis() * self.nodes_per_axis()
    }

    /// Mesh width `2^(1 - level)`; exact in binary floating point.
    pub fn mesh(&self) -> f64 {
        mesh_of_level(self.level)
    }

    pub fn coord(&self, j: usize) -> f64 {
        -1.0 + j as f64 * self.mesh()
    }

    pub fn coarser(&self) -> Option<Self> {
        Self::new(self.level.checked_sub(1)?).ok()
    }

    pub fn finer(&self) -> Option<Self> {
        Self::new(self.level + 1).ok()
    }
}

/// Mesh width of a level, also for levels outside the grid range.
pub fn mesh_of_level(level: u32) -> f64 {
    2.0 / (1u64 << level) as f64
}

pub fn make_grid(level: u32) -> Result<GridSpec> {
    GridSpec::new(level)
}

/// Dense row-major 2-D array. Rows run along axis 1, columns along axis 2.
#[derive(Debug, Clone, PartialEq)]
pub struct Array2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Array2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::SizeMismatch(format!(
                "{} values for a {rows}x{cols} array",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transposed(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in add_assign");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn dot(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in dot");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(mean of squares)^(1/2)`, the normalized l2 norm used for error tables.
    pub fn rms(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        (self.data.iter().map(|v| v * v).sum::<f64>() / self.data.len() as f64).sqrt()
    }

    /// Normalized l2 distance `(1/n Σ |a - b|²)^(1/2)`.
    pub fn rms_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in rms_distance");
        let n = self.data.len().max(1) as f64;
        let sum: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        (sum / n).sqrt()
    }
}

impl Index<(usize, usize)> for Array2 {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Array2 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Real nodal values on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    spec: GridSpec,
    values: Array2,
}

impl GridFunction {
    pub fn new(spec: GridSpec, values: Array2) -> Result<Self> {
        let n = spec.nodes_per_axis();
        if values.shape() != (n, n) {
            return Err(Error::SizeMismatch(format!(
                "{:?} values for a grid with {n} nodes per axis",
                values.shape()
            )));
        }
        if let Some(bad) = values.as_slice().iter().find(|v| !v.is_finite()) {
            return Err(Error::SizeMismatch(format!("non-finite nodal value {bad}")));
        }
        Ok(Self { spec, values })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        let n = spec.nodes_per_axis();
        Self {
            spec,
            values: Array2::zeros(n, n),
        }
    }

    /// Samples `f(y1, y2)` at every node.
    pub fn from_fn(spec: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = spec.nodes_per_axis();
        let values = Array2::from_fn(n, n, |i, j| f(spec.coord(i), spec.coord(j)));
        Self { spec, values }
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn values(&self) -> &Array2 {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2 {
        &mut self.values
    }

    pub fn into_values(self) -> Array2 {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// Restriction by injection onto a coarser grid whose nodes are a subset.
    pub fn inject(&self, coarse: GridSpec) -> Result<GridFunction> {
        if coarse.level() > self.spec.level() {
            return Err(Error::SizeMismatch(format!(
                "cannot inject level {} onto finer level {}",
                self.spec.level(),
                coarse.level()
            )));
        }
        let stride = 1usize << (self.spec.level() - coarse.level());
        let n = coarse.nodes_per_axis();
        let values = Array2::from_fn(n, n, |i, j| self.values[(i * stride, j * stride)]);
        Ok(GridFunction {
            spec: coarse,
            values,
        })
    }

    pub fn rms_distance(&self, other: &GridFunction) -> Result<f64> {
        if self.spec != other.spec {
            return Err(Error::SizeMismatch(format!(
                "levels {} and {}",
                self.spec.level(),
                other.spec.level()
            )));
        }
        Ok(self.values.rms_distance(&other.values))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    One,
    Two,
}

/// Position of a fine node relative to the coarse grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeParity {
    Coincident,
    Midpoint,
}

fn check_order(p: usize) -> Result<()> {
    if p < 2 || p > MAX_ORDER || p % 2 != 0 {
        return Err(Error::InvalidOrder(p));
    }
    Ok(())
}

/// Lagrange basis weights for the nodes `0, 1, .., len - 1` evaluated at
/// `x = x_twice / 2`, computed in exact rational arithmetic.
fn lagrange_weights_half(len: usize, x_twice: i64) -> Vec<f64> {
    let x = Ratio::new(x_twice as i128, 2);
    (0..len as i128)
        .map(|k| {
            let mut w = Ratio::from_integer(1i128);
            for m in 0..len as i128 {
                if m != k {
                    w *= (x - Ratio::from_integer(m)) / Ratio::from_integer(k - m);
                }
            }
            *w.numer() as f64 / *w.denom() as f64
        })
        .collect()
}

/// Central order-`p` weights for a fine node. For a midpoint the `p` coarse
/// nodes sit symmetrically around it; a coincident node gets the unit stencil
/// with its `1` at index `p/2 - 1`.
pub fn interpolation_weights(p: usize, parity: NodeParity) -> Result<Vec<f64>> {
    check_order(p)?;
    Ok(match parity {
        NodeParity::Midpoint => lagrange_weights_half(p, p as i64 - 1),
        NodeParity::Coincident => {
            let mut w = vec![0.0; p];
            w[p / 2 - 1] = 1.0;
            w
        }
    })
}

/// Stencils for every midpoint of a factor-two refinement of a 1-D grid with
/// `coarse_len` nodes. Stencils near the ends shift inward so they keep their
/// order; if the coarse grid has fewer than `p` nodes all of them are used.
#[derive(Debug, Clone)]
pub struct Prolongation {
    coarse_len: usize,
    order: usize,
    starts: Vec<usize>,
    weights: Vec<Vec<f64>>,
}

impl Prolongation {
    pub fn new(coarse_len: usize, p: usize) -> Result<Self> {
        check_order(p)?;
        if coarse_len < 2 {
            return Err(Error::SizeMismatch(format!(
                "a coarse axis needs at least 2 nodes, got {coarse_len}"
            )));
        }
        let order = p.min(coarse_len);
        let mut cache: HashMap<usize, Vec<f64>> = HashMap::new();
        let mut starts = Vec::with_capacity(coarse_len - 1);
        let mut weights = Vec::with_capacity(coarse_len - 1);
        for j in 0..coarse_len - 1 {
            let start = (j as isize + 1 - (order / 2) as isize)
                .clamp(0, (coarse_len - order) as isize) as usize;
            let rel = j - start;
            let w = cache
                .entry(rel)
                .or_insert_with(|| lagrange_weights_half(order, 2 * rel as i64 + 1))
                .clone();
            starts.push(start);
            weights.push(w);
        }
        Ok(Self {
            coarse_len,
            order,
            starts,
            weights,
        })
    }

    pub fn coarse_len(&self) -> usize {
        self.coarse_len
    }

    pub fn fine_len(&self) -> usize {
        2 * self.coarse_len - 1
    }

    /// Order actually used, `min(p, coarse_len)`.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Multiply-adds of one sweep across `other_len` lines; coincident nodes
    /// are copies and cost nothing.
    pub fn op_count(&self, other_len: usize) -> u64 {
        ((self.coarse_len - 1) * other_len * self.order) as u64
    }

    fn prolong_line(&self, coarse: &[f64], fine: &mut [f64]) {
        for (j, &c) in coarse.iter().enumerate() {
            fine[2 * j] = c;
        }
        for (j, (start, w)) in self.starts.iter().zip(&self.weights).enumerate() {
            fine[2 * j + 1] = w
                .iter()
                .zip(&coarse[*start..*start + w.len()])
                .map(|(a, b)| a * b)
                .sum();
        }
    }

    fn restrict_line(&self, fine: &[f64], coarse: &mut [f64]) {
        for (j, c) in coarse.iter_mut().enumerate() {
            *c = fine[2 * j];
        }
        for (j, (start, w)) in self.starts.iter().zip(&self.weights).enumerate() {
            let v = fine[2 * j + 1];
            for (c, wk) in coarse[*start..*start + w.len()].iter_mut().zip(w) {
                *c += wk * v;
            }
        }
    }
}

/// Interpolates along `axis` from a grid to its factor-two refinement.
pub fn interpolate_axis(coarse: &Array2, p: usize, axis: Axis) -> Result<Array2> {
    match axis {
        Axis::One => {
            let op = Prolongation::new(coarse.rows(), p)?;
            let cols = coarse.cols();
            let mut fine = Array2::zeros(op.fine_len(), cols);
            for j in 0..coarse.rows() {
                fine.row_mut(2 * j).copy_from_slice(coarse.row(j));
            }
            for (j, (start, w)) in op.starts.iter().zip(&op.weights).enumerate() {
                let mut acc = vec![0.0; cols];
                for (k, wk) in w.iter().enumerate() {
                    for (a, b) in acc.iter_mut().zip(coarse.row(start + k)) {
                        *a += wk * b;
                    }
                }
                fine.row_mut(2 * j + 1).copy_from_slice(&acc);
            }
            Ok(fine)
        }
        Axis::Two => {
            let op = Prolongation::new(coarse.cols(), p)?;
            let mut fine = Array2::zeros(coarse.rows(), op.fine_len());
            for i in 0..coarse.rows() {
                op.prolong_line(coarse.row(i), fine.row_mut(i));
            }
            Ok(fine)
        }
    }
}

fn coarse_len_of(fine_len: usize) -> Result<usize> {
    if fine_len < 3 || fine_len % 2 == 0 {
        return Err(Error::SizeMismatch(format!(
            "an axis of {fine_len} nodes is not a factor-two refinement"
        )));
    }
    Ok((fine_len + 1) / 2)
}

/// Anterpolation along `axis`: the exact transpose of [`interpolate_axis`].
pub fn anterpolate_axis(fine: &Array2, p: usize, axis: Axis) -> Result<Array2> {
    match axis {
        Axis::One => {
            let op = Prolongation::new(coarse_len_of(fine.rows())?, p)?;
            let cols = fine.cols();
            let mut coarse = Array2::zeros(op.coarse_len(), cols);
            for j in 0..op.coarse_len() {
                coarse.row_mut(j).copy_from_slice(fine.row(2 * j));
            }
            for (j, (start, w)) in op.starts.iter().zip(&op.weights).enumerate() {
                let src = fine.row(2 * j + 1).to_vec();
                for (k, wk) in w.iter().enumerate() {
                    for (c, s) in coarse.row_mut(start + k).iter_mut().zip(&src) {
                        *c += wk * s;
                    }
                }
            }
            Ok(coarse)
        }
        Axis::Two => {
            let op = Prolongation::new(coarse_len_of(fine.cols())?, p)?;
            let mut coarse = Array2::zeros(fine.rows(), op.coarse_len());
            for i in 0..fine.rows() {
                op.restrict_line(fine.row(i), coarse.row_mut(i));
            }
            Ok(coarse)
        }
    }
}

/// Operation count of one interpolation or anterpolation sweep along `axis`
/// of an array whose coarse side has shape `coarse_shape`.
pub fn transfer_op_count(coarse_shape: (usize, usize), p: usize, axis: Axis) -> Result<u64> {
    let (along, other) = match axis {
        Axis::One => coarse_shape,
        Axis::Two => (coarse_shape.1, coarse_shape.0),
    };
    Ok(Prolongation::new(along, p)?.op_count(other))
}
