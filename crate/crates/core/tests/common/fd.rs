//! One-sided finite differences with exact rational weights and Richardson
//! extrapolation.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

fn q(v: i64) -> BigRational {
    BigRational::from(BigInt::from(v))
}

/// Weights `w[k]` with `f^(j)(0) ≈ Σ w[k] f(x[k])` for integer nodes `x`
/// (Fornberg's recursion, exact).
pub fn fornberg(nodes: &[i64], order: usize) -> Vec<BigRational> {
    let n = nodes.len();
    let x: Vec<BigRational> = nodes.iter().map(|&v| q(v)).collect();
    let mut c = vec![vec![BigRational::zero(); order + 1]; n];
    c[0][0] = BigRational::one();
    let mut c1 = BigRational::one();
    for i in 1..n {
        let mut c2 = BigRational::one();
        for j in 0..i {
            let c3 = &x[i] - &x[j];
            c2 = &c2 * &c3;
            for k in (0..=i.min(order)).rev() {
                let km = q(k as i64);
                if j == i - 1 {
                    let lower = if k > 0 { &km * &c[i - 1][k - 1] } else { BigRational::zero() };
                    c[i][k] = &c1 / &c2 * (lower - &x[j] * &c[i - 1][k]);
                }
                let lower = if k > 0 { &km * &c[j][k - 1] } else { BigRational::zero() };
                c[j][k] = (&x[i] * &c[j][k] - lower) / &c3;
            }
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order].clone()).collect()
}

/// Nodes `0, s, 2s, ..` in units of the step for a one-sided stencil of
/// accuracy order `acc`; `s = ±1` selects the side.
pub fn one_sided_nodes(order: usize, acc: usize, side: i64) -> Vec<i64> {
    (0..(order + acc) as i64).map(|k| side * k).collect()
}
