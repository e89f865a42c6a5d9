//! Second-order discretization of the model transform: the test function,
//! the `U` stencil, dense multisummation, and the extrapolated reference.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::counter::OpCounter;
use crate::error::{Error, Result};
use crate::grid::{Array2, GridFunction, GridSpec};
use crate::kernels::integrated_kernel_22;

/// One factor of the test function, `-1/3 + s² - (2/3)|s|³` on `|s| ≤ 1`.
pub fn profile(s: f64) -> f64 {
    let a = s.abs();
    if a > 1.0 {
        0.0
    } else {
        -1.0 / 3.0 + a * a - 2.0 / 3.0 * a * a * a
    }
}

/// The model source `u(y) = f(10 y1 / 9) f(10 y2 / 9)`.
pub fn model_u(y1: f64, y2: f64) -> f64 {
    profile(10.0 * y1 / 9.0) * profile(10.0 * y2 / 9.0)
}

pub fn sample_u(grid: GridSpec) -> GridFunction {
    GridFunction::from_fn(grid, model_u)
}

/// Weights `U_j` of the discrete transform on one grid; zero on the outer ring.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTransformInput {
    weights: GridFunction,
}

impl DiscreteTransformInput {
    pub fn new(weights: GridFunction) -> Result<Self> {
        let n = weights.spec().nodes_per_axis();
        let v = weights.values();
        let ring_zero = (0..n).all(|i| {
            v[(i, 0)] == 0.0 && v[(i, n - 1)] == 0.0 && v[(0, i)] == 0.0 && v[(n - 1, i)] == 0.0
        });
        if !ring_zero {
            return Err(Error::SizeMismatch(
                "weights must vanish on the boundary ring".into(),
            ));
        }
        Ok(Self { weights })
    }

    pub fn grid(&self) -> GridSpec {
        self.weights.spec()
    }

    pub fn weights(&self) -> &GridFunction {
        &self.weights
    }

    pub fn boundary_zeroed(&self) -> bool {
        true
    }
}

/// Applies `[1 -2 1; -2 4 -2; 1 -2 1] / h²` at every interior node.
pub fn build_input(u: &GridFunction) -> DiscreteTransformInput {
    let spec = u.spec();
    let n = spec.nodes_per_axis();
    let h = spec.mesh();
    let v = u.values();
    let w = Array2::from_fn(n, n, |i, j| {
        if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
            return 0.0;
        }
        let d2 = |r: usize| v[(r, j - 1)] - 2.0 * v[(r, j)] + v[(r, j + 1)];
        (d2(i - 1) - 2.0 * d2(i) + d2(i + 1)) / (h * h)
    });
    DiscreteTransformInput {
        weights: GridFunction::new(spec, w).expect("shape matches the grid"),
    }
}

/// Weights `U^{h,l}` for `l ∈ {1,2}²` from their general definition with a
/// bilinear interpolant per cell. Only `l = (2, 2)` is nonzero for `s = 2`.
pub fn general_stencil_weights(u: &GridFunction, l: (u32, u32)) -> Result<Array2> {
    for lk in [l.0, l.1] {
        if !(1..=2).contains(&lk) {
            return Err(Error::InvalidOrder(lk as usize));
        }
    }
    let n = u.spec().nodes_per_axis();
    let h = u.spec().mesh();
    // 1-D: Σ_{a=0,1} (-1)^a ũ_{j-a}^{(l-1)}(y_j) on cell-wise linear data.
    let axis_op = |line: &dyn Fn(usize) -> f64, j: usize, lk: u32| -> f64 {
        let cell_value_at_left = |c: usize| line(c);
        let cell_value_at_right = |c: usize| line(c + 1);
        let slope = |c: usize| (line(c + 1) - line(c)) / h;
        match lk {
            1 => cell_value_at_left(j) - cell_value_at_right(j - 1),
            _ => slope(j) - slope(j - 1),
        }
    };
    let v = u.values();
    Ok(Array2::from_fn(n, n, |i, j| {
        if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
            return 0.0;
        }
        let along2 = |r: usize| axis_op(&|c| v[(r, c)], j, l.1);
        axis_op(&along2, i, l.0)
    }))
}

/// Kernel values at all offsets `t = (d1 h, d2 h)`, `|d_k| ≤ n - 1`, stored
/// at index `(d1 + n - 1, d2 + n - 1)`.
pub fn offset_table(kernel: &(dyn Fn(f64, f64) -> f64 + Sync), h: f64, n: usize) -> Array2 {
    let m = 2 * n - 1;
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|a| {
            let t1 = (a as f64 - (n - 1) as f64) * h;
            (0..m)
                .map(|b| kernel(t1, (b as f64 - (n - 1) as f64) * h))
                .collect()
        })
        .collect();
    Array2::from_vec(m, m, rows.concat()).expect("square table")
}

/// `S_i = Σ_j T[j - i] U_j` by direct summation; `table` as in [`offset_table`].
pub fn correlate_direct(table: &Array2, weights: &Array2) -> Array2 {
    let (n1, n2) = weights.shape();
    let c1 = (table.rows() + 1) / 2 - 1;
    let c2 = (table.cols() + 1) / 2 - 1;
    let rows: Vec<Vec<f64>> = (0..n1)
        .into_par_iter()
        .map(|i1| {
            (0..n2)
                .map(|i2| {
                    let mut s = 0.0;
                    for j1 in 0..n1 {
                        let t = &table.row(j1 + c1 - i1)[c2 - i2..c2 - i2 + n2];
                        s += t.iter().zip(weights.row(j1)).map(|(a, b)| a * b).sum::<f64>();
                    }
                    s
                })
                .collect()
        })
        .collect();
    Array2::from_vec(n1, n2, rows.concat()).expect("shape preserved")
}

fn transpose_complex(data: &[Complex<f64>], m: usize) -> Vec<Complex<f64>> {
    let mut out = vec![Complex::new(0.0, 0.0); m * m];
    const B: usize = 32;
    for ib in (0..m).step_by(B) {
        for jb in (0..m).step_by(B) {
            for i in ib..(ib + B).min(m) {
                for j in jb..(jb + B).min(m) {
                    out[j * m + i] = data[i * m + j];
                }
            }
        }
    }
    out
}

/// Forward 2-D transform, result left in transposed layout.
fn fft2_forward(mut data: Vec<Complex<f64>>, m: usize, fft: &Arc<dyn Fft<f64>>) -> Vec<Complex<f64>> {
    fft.process(&mut data);
    let mut t = transpose_complex(&data, m);
    fft.process(&mut t);
    t
}

fn fft2_inverse(data: Vec<Complex<f64>>, m: usize, ifft: &Arc<dyn Fft<f64>>) -> Vec<Complex<f64>> {
    let mut d = data;
    ifft.process(&mut d);
    let mut t = transpose_complex(&d, m);
    ifft.process(&mut t);
    t
}

/// Same result as [`correlate_direct`] for a square grid, by cyclic FFT
/// convolution of size `2(n - 1)`. The table must be even in each offset.
pub fn correlate_fft(table: &Array2, weights: &Array2) -> Result<Array2> {
    let n = weights.rows();
    if weights.cols() != n || table.shape() != (2 * n - 1, 2 * n - 1) || n < 2 {
        return Err(Error::SizeMismatch(format!(
            "table {:?} for weights {:?}",
            table.shape(),
            weights.shape()
        )));
    }
    let m = 2 * (n - 1);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    let c = n - 1;
    let wrap = |e: usize| -> usize {
        // cyclic index e ∈ [0, m) to the signed offset -e mod m in [-(n-1), n-1]
        let neg = (m - e) % m;
        if neg > c {
            neg + c - m
        } else {
            neg + c
        }
    };
    let mut k = vec![Complex::new(0.0, 0.0); m * m];
    for e1 in 0..m {
        let row = table.row(wrap(e1));
        for e2 in 0..m {
            k[e1 * m + e2] = Complex::new(row[wrap(e2)], 0.0);
        }
    }
    let mut u = vec![Complex::new(0.0, 0.0); m * m];
    for i in 0..n {
        for j in 0..n {
            u[i * m + j] = Complex::new(weights[(i, j)], 0.0);
        }
    }
    let kf = fft2_forward(k, m, &fwd);
    let mut uf = fft2_forward(u, m, &fwd);
    for (a, b) in uf.iter_mut().zip(&kf) {
        *a *= b;
    }
    let s = fft2_inverse(uf, m, &inv);
    let scale = 1.0 / (m * m) as f64;
    Ok(Array2::from_fn(n, n, |i, j| s[i * m + j].re * scale))
}

/// `S(x_i) = Σ_j kernel(y_j - x_i) U_j` by brute force, counting one
/// operation per source node (boundary ring included) and evaluation point.
pub fn direct_multisum(
    kernel: &(dyn Fn(f64, f64) -> f64 + Sync),
    input: &DiscreteTransformInput,
    eval_grid: GridSpec,
    counter: &mut OpCounter,
) -> Result<GridFunction> {
    let src = input.grid();
    let w = input.weights().values();
    let values = if eval_grid == src {
        let table = offset_table(kernel, src.mesh(), src.nodes_per_axis());
        correlate_direct(&table, w)
    } else {
        let ne = eval_grid.nodes_per_axis();
        let ns = src.nodes_per_axis();
        let rows: Vec<Vec<f64>> = (0..ne)
            .into_par_iter()
            .map(|i1| {
                let x1 = eval_grid.coord(i1);
                (0..ne)
                    .map(|i2| {
                        let x2 = eval_grid.coord(i2);
                        let mut s = 0.0;
                        for j1 in 0..ns {
                            let t1 = src.coord(j1) - x1;
                            for j2 in 0..ns {
                                s += kernel(t1, src.coord(j2) - x2) * w[(j1, j2)];
                            }
                        }
                        s
                    })
                    .collect()
            })
            .collect();
        Array2::from_vec(ne, ne, rows.concat())?
    };
    counter.coarse += (eval_grid.node_count() * src.node_count()) as u64;
    GridFunction::new(eval_grid, values)
}

/// Discrete transform `S_K` of a source function with the integrated kernel,
/// on the level-`k` grid, via FFT.
pub fn discrete_transform(k: u32, u: &(dyn Fn(f64, f64) -> f64 + Sync)) -> Result<GridFunction> {
    let spec = GridSpec::new(k)?;
    let input = build_input(&GridFunction::from_fn(spec, u));
    let table = offset_table(&integrated_kernel_22, spec.mesh(), spec.nodes_per_axis());
    GridFunction::new(spec, correlate_fft(&table, input.weights().values())?)
}

/// Highest level accepted by [`reference_solution`]; the reference needs
/// transforms two levels finer.
pub const MAX_REFERENCE_LEVEL: u32 = 9;

/// Extrapolated values `(4 S_{k+2} - S_{k+1}) / 3` on the level-`k` nodes for
/// an arbitrary source, together with the raw transforms used.
pub fn reference_solution_for(
    k: u32,
    u: &(dyn Fn(f64, f64) -> f64 + Sync),
) -> Result<GridFunction> {
    if k > MAX_REFERENCE_LEVEL {
        return Err(Error::InvalidLevel(k));
    }
    let spec = GridSpec::new(k)?;
    let s0 = discrete_transform(k, u)?;
    let s1 = discrete_transform(k + 1, u)?.inject(spec)?;
    let s2 = discrete_transform(k + 2, u)?.inject(spec)?;
    let n = spec.nodes_per_axis();
    let r = Array2::from_fn(n, n, |i, j| (4.0 * s2.get(i, j) - s1.get(i, j)) / 3.0);
    let reference = GridFunction::new(spec, r)?;
    // Second-order consistency: the level-k error should be about sixteen
    // times the level-(k+2) error.
    let coarse_err = s0.rms_distance(&reference)?;
    let fine_err = s2.rms_distance(&reference)?;
    if coarse_err > 0.0 || fine_err > 0.0 {
        let ratio = coarse_err / (16.0 * fine_err);
        if !(1.0 / 1.5..=1.5).contains(&ratio) {
            return Err(Error::Inconsistent(format!(
                "level {k}: ‖S_K - R‖ = {coarse_err:.3e}, 16‖S_(K+2) - R‖ = {:.3e}",
                16.0 * fine_err
            )));
        }
    }
    Ok(reference)
}

/// Reference `Gu` for the model source on level `k`.
pub fn reference_solution(k: u32) -> Result<GridFunction> {
    reference_solution_for(k, &model_u)
}

/// Normalized l2 error `(1/n Σ |a - b|²)^(1/2)`.
pub fn l2_error(a: &GridFunction, b: &GridFunction) -> Result<f64> {
    a.rms_distance(b)
}
