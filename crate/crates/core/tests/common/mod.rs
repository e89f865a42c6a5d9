#![allow(dead_code)]

pub mod fd;
pub mod hp;

use std::cell::RefCell;
use std::collections::HashMap;

use hp::{hp, hp_int, hp_rational, SoftKernel, F};

/// Accuracy order of each one-sided stencil before extrapolation.
pub const FD_ACCURACY: usize = 14;

/// Which band edge a line crosses: `t1 = b` at fixed `t2`, or `t2 = b` at
/// fixed `t1`.
#[derive(Debug, Clone, Copy)]
pub enum Crossing {
    Axis1 { t2: f64 },
    Axis2 { t1: f64 },
}

thread_local! {
    static STENCILS: RefCell<HashMap<(usize, usize, i64), Vec<F>>> = RefCell::new(HashMap::new());
}

fn stencil(order: usize, acc: usize, side: i64) -> Vec<F> {
    STENCILS.with(|cache| {
        cache
            .borrow_mut()
            .entry((order, acc, side))
            .or_insert_with(|| {
                fd::fornberg(&fd::one_sided_nodes(order, acc, side), order)
                    .iter()
                    .map(hp_rational)
                    .collect()
            })
            .clone()
    })
}

/// One-sided derivatives of orders `0..orders` at the edge `x = b` of the
/// function `f(x, inside)`, Richardson-extrapolated from steps `step` and
/// `step / 2`. `side = -1` approaches from inside the band.
pub fn one_sided_derivatives(
    f: &dyn Fn(&F, bool) -> F,
    b: f64,
    step: f64,
    orders: usize,
    side: i64,
) -> Vec<f64> {
    let acc = FD_ACCURACY;
    let inside = side < 0;
    let half = hp(step) / hp_int(2);
    let count = 2 * (orders + acc);
    let samples: Vec<F> = (0..count as i64)
        .map(|k| f(&(hp(b) + &half * hp_int(side * k)), inside))
        .collect();
    let gain = hp_int(1 << acc);
    (0..orders)
        .map(|j| {
            let w = stencil(j, acc, side);
            let apply = |stride: usize, h: &F| -> F {
                let mut s = hp_int(0);
                for (k, wk) in w.iter().enumerate() {
                    s += wk * &samples[k * stride];
                }
                let mut hj = hp_int(1);
                for _ in 0..j {
                    hj = hj * h;
                }
                s / hj
            };
            let coarse = apply(2, &hp(step));
            let fine = apply(1, &half);
            ((&gain * fine - coarse) / (&gain - hp_int(1))).to_f64().value()
        })
        .collect()
}

/// `|left - right| / scale_j` for orders `0..orders` across one band edge
/// of the doubly softened kernel, with `scale_j = max(|left|, |right|, b^(3-j))`.
pub fn edge_jumps(kernel: &SoftKernel, b: f64, crossing: Crossing, orders: usize) -> Vec<f64> {
    let step = b / 64.0;
    let f: Box<dyn Fn(&F, bool) -> F + '_> = match crossing {
        Crossing::Axis1 { t2 } => {
            let t2h = hp(t2);
            let in2 = t2.abs() <= b;
            Box::new(move |x: &F, inside: bool| kernel.branch(x, &t2h, inside, in2))
        }
        Crossing::Axis2 { t1 } => {
            let t1h = hp(t1);
            let in1 = t1.abs() <= b;
            Box::new(move |x: &F, inside: bool| kernel.branch(&t1h, x, in1, inside))
        }
    };
    let left = one_sided_derivatives(&*f, b, step, orders, -1);
    let right = one_sided_derivatives(&*f, b, step, orders, 1);
    (0..orders)
        .map(|j| {
            let scale = left[j].abs().max(right[j].abs()).max(b.powi(3 - j as i32));
            (left[j] - right[j]).abs() / scale
        })
        .collect()
}
