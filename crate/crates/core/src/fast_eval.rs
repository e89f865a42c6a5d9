//! Fast multilevel evaluation of the discrete transform: anterpolate the
//! weights down the level chain, sum directly on the coarsest grid, then
//! interpolate back up, adding local corrections wherever the kernel was
//! softened.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::counter::OpCounter;
use crate::discretization::{correlate_direct, correlate_fft, DiscreteTransformInput};
use crate::error::{Error, Result};
use crate::grid::{
    anterpolate_axis, interpolate_axis, mesh_of_level, Array2, Axis, Prolongation,
    GridFunction, GridSpec,
};
use crate::softening::{SoftenedKernel, SofteningParams};
use crate::transfer_params::TransferSchedule;

/// Coarsest-grid size above which the dense sum switches to FFT convolution.
const FFT_THRESHOLD: usize = 65;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CorrectionStrategy {
    /// Skip all corrections.
    None,
    /// Sum the corrections over the full cross-shaped band.
    Direct,
    /// Split each correction into a central square and two strips; the
    /// strips are transferred along their smooth direction.
    Multilevel,
}

impl fmt::Display for CorrectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Direct => "direct",
            Self::Multilevel => "multilevel",
        })
    }
}

impl FromStr for CorrectionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "direct" => Ok(Self::Direct),
            "multilevel" => Ok(Self::Multilevel),
            other => Err(Error::InvalidParams(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Softening of the kernel summed on one level, shared by both axes;
/// `None` is the original kernel.
pub type Scale = Option<SofteningParams>;

fn band_of(s: &Scale) -> f64 {
    s.map_or(0.0, |q| q.band())
}

fn kernel(a1: Scale, a2: Scale) -> Result<SoftenedKernel> {
    SoftenedKernel::new(a1, a2)
}

/// Kernel scale used on every level of a schedule, indexed by
/// `level - schedule.coarse()`. A step with `m = 0` keeps the scale of the
/// finer level.
pub fn level_scales(schedule: &TransferSchedule) -> Result<Vec<Scale>> {
    let lo = schedule.coarse();
    let mut scales = vec![None; (schedule.fine() - lo + 1) as usize];
    for level in (lo + 1..=schedule.fine()).rev() {
        let (p, m) = schedule.step(level).expect("level inside the schedule");
        let finer = scales[(level - lo) as usize];
        scales[(level - 1 - lo) as usize] = if m > 0 {
            Some(SofteningParams::new(p, m, mesh_of_level(level - 1))?)
        } else {
            finer
        };
    }
    Ok(scales)
}

/// `C(fine) - C(coarse)` for two doubly softened kernels; vanishes outside
/// the cross of half-width [`KernelDifference::band`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelDifference {
    fine: Scale,
    coarse: Scale,
}

impl KernelDifference {
    pub fn new(fine: Scale, coarse: Scale) -> Result<Self> {
        let fine = fine.filter(|q| q.is_active());
        let coarse = coarse.filter(|q| q.is_active());
        if fine.is_some() && coarse.is_none() {
            return Err(Error::InvalidParams(
                "the coarse scale of a correction cannot be the original kernel".into(),
            ));
        }
        Ok(Self { fine, coarse })
    }

    pub fn fine(&self) -> Scale {
        self.fine
    }

    pub fn coarse(&self) -> Scale {
        self.coarse
    }

    pub fn is_zero(&self) -> bool {
        self.fine == self.coarse
    }

    pub fn band(&self) -> f64 {
        band_of(&self.fine).max(band_of(&self.coarse))
    }

    pub fn value(&self, t1: f64, t2: f64) -> Result<f64> {
        if self.is_zero() {
            return Ok(0.0);
        }
        Ok(kernel(self.fine, self.fine)?.value(t1, t2) - kernel(self.coarse, self.coarse)?.value(t1, t2))
    }
}

/// Largest offset `d ≤ n - 1` with `d·h` strictly inside `band`.
fn band_width(band: f64, h: f64, n: usize) -> usize {
    if band <= 0.0 {
        return 0;
    }
    let w = ((band / h) * (1.0 - 1e-12)).ceil() as i64 - 1;
    (w.max(0) as usize).min(n - 1)
}

/// Number of index pairs `(i, i + a)` with `|a| ≤ w` inside `0..n`.
fn pairs_1d(n: usize, w: usize) -> u64 {
    let (n, w) = (n as u64, w.min(n.saturating_sub(1)) as u64);
    n * (2 * w + 1) - w * (w + 1)
}

/// `out[i][j] = Σ table[a + w1][b + w2] src[i + a][j + b]` over `|a| ≤ w1`,
/// `|b| ≤ w2`, dropping terms outside `src`. The table has odd dimensions.
fn local_correlate(table: &Array2, src: &Array2) -> Array2 {
    let (n1, n2) = src.shape();
    let w1 = (table.rows() / 2) as i64;
    let w2 = (table.cols() / 2) as i64;
    let rows: Vec<Vec<f64>> = (0..n1 as i64)
        .into_par_iter()
        .map(|i| {
            let mut out = vec![0.0; n2];
            for a in (-w1).max(-i)..=w1.min(n1 as i64 - 1 - i) {
                let t = table.row((a + w1) as usize);
                let s = src.row((i + a) as usize);
                for (j, o) in out.iter_mut().enumerate() {
                    let j = j as i64;
                    let lo = (-w2).max(-j);
                    let hi = w2.min(n2 as i64 - 1 - j);
                    let tt = &t[(lo + w2) as usize..=(hi + w2) as usize];
                    let ss = &s[(j + lo) as usize..=(j + hi) as usize];
                    *o += tt.iter().zip(ss).map(|(x, y)| x * y).sum::<f64>();
                }
            }
            out
        })
        .collect();
    Array2::from_vec(n1, n2, rows.concat()).expect("shape preserved")
}

fn diff_table(
    plus: &[&SoftenedKernel],
    minus: &[&SoftenedKernel],
    mesh: (f64, f64),
    w: (usize, usize),
) -> Array2 {
    let r = -(w.0 as i64)..w.0 as i64 + 1;
    let c = -(w.1 as i64)..w.1 as i64 + 1;
    let mut t = Array2::zeros(2 * w.0 + 1, 2 * w.1 + 1);
    for k in plus {
        t.add_assign(&k.table_mesh(mesh, r.clone(), c.clone()));
    }
    for k in minus {
        let v = k.table_mesh(mesh, r.clone(), c.clone());
        for (a, b) in t.as_mut_slice().iter_mut().zip(v.as_slice()) {
            *a -= b;
        }
    }
    t
}

/// Treatment of transfer stencils at the domain edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryTreatment {
    /// Coarse grids extend beyond the domain far enough that every
    /// interpolation stencil is central.
    #[default]
    Extended,
    /// Coarse grids only cover the fine grid; stencils near the edge shift
    /// inward.
    Shifted,
}

impl BoundaryTreatment {
    /// Nodes beyond each domain edge on the coarse side of a step of order
    /// `p`, given `fine_margin` nodes on the fine side.
    pub fn coarse_margin(self, fine_margin: usize, p: usize) -> usize {
        match self {
            Self::Shifted => fine_margin.div_ceil(2),
            Self::Extended => fine_margin.div_ceil(2) + p / 2 - 1,
        }
    }
}

/// One factor-two step along an axis between lines that extend `fine_margin`
/// and `coarse_margin` nodes beyond the domain.
#[derive(Debug, Clone, Copy)]
struct AxisStep {
    fine_len: usize,
    coarse_len: usize,
    offset: usize,
    p: usize,
}

impl AxisStep {
    fn new(fine_len: usize, fine_margin: usize, coarse_margin: usize, p: usize) -> Result<Self> {
        let inner = fine_len
            .checked_sub(2 * fine_margin)
            .filter(|n| *n >= 3 && n % 2 == 1)
            .ok_or_else(|| Error::SizeMismatch(format!("line of {fine_len} nodes")))?;
        if 2 * coarse_margin < fine_margin {
            return Err(Error::SizeMismatch(format!(
                "coarse margin {coarse_margin} does not cover fine margin {fine_margin}"
            )));
        }
        Ok(Self {
            fine_len,
            coarse_len: (inner + 1) / 2 + 2 * coarse_margin,
            offset: 2 * coarse_margin - fine_margin,
            p,
        })
    }

    fn padded_len(&self) -> usize {
        2 * self.coarse_len - 1
    }

    fn restrict(&self, a: &Array2, axis: Axis) -> Result<Array2> {
        let padded = pad_axis(a, axis, self.padded_len(), self.offset);
        anterpolate_axis(&padded, self.p, axis)
    }

    fn prolong(&self, a: &Array2, axis: Axis) -> Result<Array2> {
        let fine = interpolate_axis(a, self.p, axis)?;
        Ok(crop_axis(&fine, axis, self.offset, self.fine_len))
    }

    /// Operations of one sweep over the nodes that belong to the fine line.
    fn op_count(&self, other_len: usize) -> Result<u64> {
        let order = Prolongation::new(self.coarse_len, self.p)?.order() as u64;
        let midpoints = (self.offset..self.offset + self.fine_len)
            .filter(|i| i % 2 == 1)
            .count() as u64;
        Ok(midpoints * other_len as u64 * order)
    }
}

fn pad_axis(a: &Array2, axis: Axis, len: usize, offset: usize) -> Array2 {
    match axis {
        Axis::One => {
            let mut out = Array2::zeros(len, a.cols());
            for i in 0..a.rows() {
                out.row_mut(i + offset).copy_from_slice(a.row(i));
            }
            out
        }
        Axis::Two => {
            let mut out = Array2::zeros(a.rows(), len);
            for i in 0..a.rows() {
                out.row_mut(i)[offset..offset + a.cols()].copy_from_slice(a.row(i));
            }
            out
        }
    }
}

fn crop_axis(a: &Array2, axis: Axis, start: usize, len: usize) -> Array2 {
    match axis {
        Axis::One => Array2::from_fn(len, a.cols(), |i, j| a[(i + start, j)]),
        Axis::Two => Array2::from_fn(a.rows(), len, |i, j| a[(i, j + start)]),
    }
}

fn check_square(grid: GridSpec, u: &Array2) -> Result<()> {
    let n = grid.nodes_per_axis();
    if u.shape() != (n, n) {
        return Err(Error::SizeMismatch(format!(
            "weights {:?} on a grid of {n} nodes per axis",
            u.shape()
        )));
    }
    Ok(())
}

fn direct_on_mesh(
    h: f64,
    diff: &KernelDifference,
    u: &Array2,
    counter: &mut OpCounter,
) -> Result<Array2> {
    let n = u.rows();
    if diff.is_zero() {
        return Ok(Array2::zeros(n, n));
    }
    let w = band_width(diff.band(), h, n);
    let full = n - 1;
    let fine = kernel(diff.fine, diff.fine)?;
    let coarse = kernel(diff.coarse, diff.coarse)?;
    // Strip |d1| ≤ w over all d2, then the rest of the strip |d2| ≤ w.
    let rows = diff_table(&[&fine], &[&coarse], (h, h), (w, full));
    let mut cols = diff_table(&[&fine], &[&coarse], (h, h), (full, w));
    for a in full - w..=full + w {
        cols.row_mut(a).fill(0.0);
    }
    let mut out = local_correlate(&rows, u);
    out.add_assign(&local_correlate(&cols, u));
    let strip = pairs_1d(n, w) * pairs_1d(n, full);
    counter.corrections += 2 * strip - pairs_1d(n, w).pow(2);
    Ok(out)
}

/// Correction `Σ_j D(y_j - x_i) U_j` summed over the full cross where the
/// kernel difference can be nonzero.
pub fn correction_direct(
    grid: GridSpec,
    diff: &KernelDifference,
    u: &Array2,
    counter: &mut OpCounter,
) -> Result<Array2> {
    check_square(grid, u)?;
    direct_on_mesh(grid.mesh(), diff, u, counter)
}

/// One semi-coarsening step of a strip: the axis-2 softening on the coarse
/// side and the transfer order.
#[derive(Debug, Clone, Copy)]
struct SemiStep {
    scale: SofteningParams,
    p: usize,
}

/// Axis-2 softenings of the strip kernel on the semi-coarsened levels below
/// `level`; entry `i` belongs to level `level - 1 - i`.
fn semi_scales(level: u32, first: SofteningParams, semi: &[(usize, u32)]) -> Result<Vec<SemiStep>> {
    let mut out = vec![SemiStep {
        scale: first,
        p: first.p(),
    }];
    let mut current = first;
    for (i, &(p, m)) in semi.iter().enumerate() {
        let target = level
            .checked_sub(2 + i as u32)
            .filter(|&l| l >= 1)
            .ok_or_else(|| Error::Schedule(format!("semi chain too long below level {level}")))?;
        if m > 0 {
            current = SofteningParams::new(p, m, mesh_of_level(target))?;
        }
        out.push(SemiStep { scale: current, p });
    }
    Ok(out)
}

/// Where a correction is evaluated: level, margin of the arrays beyond the
/// domain, and how the strip lines are bounded.
#[derive(Debug, Clone, Copy)]
struct LevelFrame {
    level: u32,
    margin: usize,
    strip_boundary: BoundaryTreatment,
}

/// Strip part `Σ_{|d1| ≤ w1} Σ_{j2} E(d1 h, y2 - x2) U` with
/// `E = C(s, b) - C(b, b)`, smooth along axis 2, transferred along axis 2.
fn strip_along_axis2(
    frame: LevelFrame,
    diff: &KernelDifference,
    semi: &[(usize, u32)],
    u: &Array2,
    counter: &mut OpCounter,
) -> Result<Array2> {
    let level = frame.level;
    let n = u.rows();
    let h = mesh_of_level(level);
    let b = diff.coarse.expect("nonzero difference has a coarse scale");
    let w1 = band_width(diff.band(), h, n);
    let chain = semi_scales(level, b, semi)?;
    let strip_kernel = |a2: SofteningParams| -> Result<(SoftenedKernel, SoftenedKernel)> {
        Ok((kernel(diff.fine, Some(a2))?, kernel(diff.coarse, Some(a2))?))
    };

    // weights[i + 1] and steps[i] belong to semi level `level - 1 - i`.
    let mut weights = vec![u.clone()];
    let mut steps = Vec::with_capacity(chain.len());
    let mut margin = frame.margin;
    for st in &chain {
        let coarse_margin = frame.strip_boundary.coarse_margin(margin, st.p);
        let fine = weights.last().expect("nonempty");
        let step = AxisStep::new(fine.cols(), margin, coarse_margin, st.p)?;
        counter.transfers += step.op_count(n)?;
        let next = step.restrict(fine, Axis::Two)?;
        weights.push(next);
        steps.push(step);
        margin = coarse_margin;
    }

    let bottom_level = level - chain.len() as u32;
    let bottom = weights.last().expect("nonempty");
    let nb = bottom.cols();
    let (kp, km) = strip_kernel(chain.last().expect("nonempty").scale)?;
    let table = diff_table(&[&kp], &[&km], (h, mesh_of_level(bottom_level)), (w1, nb - 1));
    let mut t = local_correlate(&table, bottom);
    counter.corrections += pairs_1d(n, w1) * pairs_1d(nb, nb - 1);

    for i in (0..chain.len() - 1).rev() {
        let scale = chain[i].scale;
        let below = chain[i + 1].scale;
        t = steps[i + 1].prolong(&t, Axis::Two)?;
        counter.transfers += steps[i + 1].op_count(n)?;
        if below != scale {
            let hs = mesh_of_level(level - 1 - i as u32);
            let w2 = band_width(scale.band().max(below.band()), hs, t.cols());
            let (ap, am) = strip_kernel(scale)?;
            let (bp, bm) = strip_kernel(below)?;
            let table = diff_table(&[&ap, &bm], &[&am, &bp], (h, hs), (w1, w2));
            t.add_assign(&local_correlate(&table, &weights[i + 1]));
            counter.corrections += pairs_1d(n, w1) * pairs_1d(t.cols(), w2);
        }
    }
    counter.transfers += steps[0].op_count(n)?;
    steps[0].prolong(&t, Axis::Two)
}

fn multilevel_on_frame(
    frame: LevelFrame,
    diff: &KernelDifference,
    semi: &[(usize, u32)],
    u: &Array2,
    counter: &mut OpCounter,
) -> Result<Array2> {
    let n = u.rows();
    if diff.is_zero() {
        return Ok(Array2::zeros(n, n));
    }
    let h = mesh_of_level(frame.level);
    let w = band_width(diff.band(), h, n);
    let (s, b) = (diff.fine, diff.coarse);
    // Central square: C(s,s) - C(s,b) - C(b,s) + C(b,b).
    let ss = kernel(s, s)?;
    let sb = kernel(s, b)?;
    let bs = kernel(b, s)?;
    let bb = kernel(b, b)?;
    let q = diff_table(&[&ss, &bb], &[&sb, &bs], (h, h), (w, w));
    let mut out = local_correlate(&q, u);
    counter.corrections += pairs_1d(n, w).pow(2);

    out.add_assign(&strip_along_axis2(frame, diff, semi, u, counter)?);
    // The other strip by the t1 <-> t2 symmetry of the kernel.
    let across = strip_along_axis2(frame, diff, semi, &u.transposed(), counter)?;
    out.add_assign(&across.transposed());
    Ok(out)
}

/// Same correction as [`correction_direct`], with the strips evaluated by
/// transfers to grids that are coarse across the strip. `semi` lists `(p, m)`
/// for the coarsening steps below `grid.level() - 1` used for the strips.
pub fn correction_multilevel(
    grid: GridSpec,
    diff: &KernelDifference,
    semi: &[(usize, u32)],
    u: &Array2,
    counter: &mut OpCounter,
) -> Result<Array2> {
    check_square(grid, u)?;
    let frame = LevelFrame {
        level: grid.level(),
        margin: 0,
        strip_boundary: EvalOptions::default().strip_boundary,
    };
    multilevel_on_frame(frame, diff, semi, u, counter)
}

/// Output of [`evaluate_fast`].
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub values: GridFunction,
    pub ops: OpCounter,
}

impl EvalReport {
    /// Operations per node of the evaluation grid.
    pub fn ops_per_node(&self) -> f64 {
        self.ops.total() as f64 / self.values.spec().node_count() as f64
    }
}

fn coarse_sum(h: f64, scale: Scale, u: &Array2, counter: &mut OpCounter) -> Result<Array2> {
    let n = u.rows();
    let r = -(n as i64 - 1)..n as i64;
    let table = kernel(scale, scale)?.table(h, r.clone(), r);
    counter.coarse += (n * n * n * n) as u64;
    if n > FFT_THRESHOLD {
        correlate_fft(&table, u)
    } else {
        Ok(correlate_direct(&table, u))
    }
}

/// Fast evaluation of the discrete transform on the input grid, with direct
/// summation on `schedule.coarse()`.
pub fn evaluate_fast(
    input: &DiscreteTransformInput,
    schedule: &TransferSchedule,
    strategy: CorrectionStrategy,
) -> Result<EvalReport> {
    let options = EvalOptions {
        strategy,
        ..EvalOptions::default()
    };
    evaluate_fast_with(input, schedule, &options)
}

/// Knobs of [`evaluate_fast_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    pub strategy: CorrectionStrategy,
    /// Boundary of the coarse grids of the main chain.
    pub boundary: BoundaryTreatment,
    /// Boundary of the semi-coarsened lines used for the correction strips.
    pub strip_boundary: BoundaryTreatment,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            strategy: CorrectionStrategy::Multilevel,
            boundary: BoundaryTreatment::Extended,
            strip_boundary: BoundaryTreatment::Shifted,
        }
    }
}

pub fn evaluate_fast_with(
    input: &DiscreteTransformInput,
    schedule: &TransferSchedule,
    options: &EvalOptions,
) -> Result<EvalReport> {
    let EvalOptions {
        strategy,
        boundary,
        strip_boundary,
    } = *options;
    let fine = schedule.fine();
    let lo = schedule.coarse();
    if input.grid().level() != fine {
        return Err(Error::SizeMismatch(format!(
            "input on level {} for a schedule from level {fine}",
            input.grid().level()
        )));
    }
    let scales = level_scales(schedule)?;
    let p_onto = |level: u32| schedule.step(level).expect("level inside the schedule").0;
    let mut ops = OpCounter::new();

    // Index i belongs to level fine - i.
    let mut margins = vec![0usize];
    let mut weights = vec![input.weights().values().clone()];
    let mut steps = Vec::new();
    for level in (lo + 1..=fine).rev() {
        let p = p_onto(level);
        let fm = *margins.last().expect("nonempty");
        let cm = boundary.coarse_margin(fm, p);
        let u = weights.last().expect("nonempty");
        let step = AxisStep::new(u.rows(), fm, cm, p)?;
        let a = step.restrict(u, Axis::One)?;
        ops.transfers += step.op_count(u.cols())?;
        let b = step.restrict(&a, Axis::Two)?;
        ops.transfers += step.op_count(a.rows())?;
        margins.push(cm);
        weights.push(b);
        steps.push(step);
    }

    let mut s = coarse_sum(
        mesh_of_level(lo),
        scales[0],
        weights.last().expect("nonempty"),
        &mut ops,
    )?;

    for level in lo + 1..=fine {
        let idx = (fine - level) as usize;
        let step = steps[idx];
        let a = step.prolong(&s, Axis::One)?;
        ops.transfers += step.op_count(s.cols())?;
        s = step.prolong(&a, Axis::Two)?;
        ops.transfers += step.op_count(a.rows())?;

        let diff = KernelDifference::new(
            scales[(level - lo) as usize],
            scales[(level - 1 - lo) as usize],
        )?;
        if diff.is_zero() {
            continue;
        }
        let u = &weights[idx];
        let frame = LevelFrame {
            level,
            margin: margins[idx],
            strip_boundary,
        };
        let corr = match strategy {
            CorrectionStrategy::None => continue,
            CorrectionStrategy::Direct => direct_on_mesh(mesh_of_level(level), &diff, u, &mut ops)?,
            CorrectionStrategy::Multilevel => {
                let semi: Vec<(usize, u32)> = (lo + 1..level)
                    .rev()
                    .map(|l| schedule.step(l).expect("level inside the schedule"))
                    .collect();
                multilevel_on_frame(frame, &diff, &semi, u, &mut ops)?
            }
        };
        s.add_assign(&corr);
    }

    Ok(EvalReport {
        values: GridFunction::new(input.grid(), s)?,
        ops,
    })
}
