//! Choice of the transfer order `p` and softening distance `m` for every
//! coarsening step, from the work model and the accuracy requirement.

use crate::error::{Error, Result};
use crate::grid::{mesh_of_level, MAX_LEVEL, MAX_ORDER};
use crate::softening::SofteningParams;

/// Interpolation-geometry constant of central interpolation.
pub const GAMMA2: f64 = 0.5;
/// Integration order of the kernel along each axis.
pub const KERNEL_L: i32 = 2;
/// Discretization order along each axis.
pub const DISCRETIZATION_S: i32 = 2;
pub const DIMENSION: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamConfig {
    /// Accuracy knob; lower values raise `p` and `m`.
    pub c_a: f64,
}

impl Default for ParamConfig {
    fn default() -> Self {
        Self { c_a: 0.0 }
    }
}

/// `ln g` for fine level `k` and coarse level `l` of one coarsening step.
pub fn ln_g(k: u32, l: u32, cfg: &ParamConfig) -> Result<f64> {
    if l >= k {
        return Err(Error::Schedule(format!("coarse level {l} must lie below {k}")));
    }
    let ln_h = mesh_of_level(k).ln();
    let ln_coarse = mesh_of_level(l).ln();
    let h_power = DISCRETIZATION_S - DIMENSION * (DISCRETIZATION_S - KERNEL_L);
    Ok(cfg.c_a + h_power as f64 * ln_h - (KERNEL_L + 1) as f64 * ln_coarse)
}

/// Fixed point of `χ = (32/3) γ2 e^(1/χ) / H̄`.
pub fn solve_chi(hbar: f64, gamma2: f64) -> Result<f64> {
    if !(hbar > 0.0 && hbar < 1.0) || !(gamma2 > 0.0) {
        return Err(Error::InvalidParams(format!("H̄ = {hbar}, γ2 = {gamma2}")));
    }
    let base = 32.0 / 3.0 * gamma2 / hbar;
    let mut chi = base;
    for _ in 0..200 {
        let next = base * (1.0 / chi).exp();
        if (next - chi).abs() <= 1e-14 * next {
            return Ok(next);
        }
        chi = next;
    }
    Err(Error::InvalidParams(format!(
        "fixed point for H̄ = {hbar} did not converge"
    )))
}

/// `(p, m)` for the coarsening step onto level `l_step` in a transform whose
/// finest level is `k`.
pub fn select_params(k: u32, l_step: u32, cfg: &ParamConfig) -> Result<(usize, u32)> {
    let lng = ln_g(k, l_step, cfg)?;
    let hbar = mesh_of_level(l_step) / 2.0;
    let chi = solve_chi(hbar, GAMMA2)?;
    let p_min = (KERNEL_L + 2) as usize;
    let p_star = -chi / (chi + 1.0) * lng + (KERNEL_L + 1) as f64;
    if p_star < p_min as f64 {
        return Ok((p_min, 0));
    }
    let p = 2 * (p_star / 2.0 + 1.0).floor() as usize;
    if p > MAX_ORDER {
        return Err(Error::InvalidParams(format!(
            "order {p} exceeds the supported maximum {MAX_ORDER}"
        )));
    }
    let m = (0.5 + 3.0 / 32.0 * hbar / GAMMA2 * chi * (p as f64 - (KERNEL_L + 1) as f64)).floor();
    Ok((p, m as u32))
}

/// True when the coarse mesh `coarse_mesh` is fine enough, relative to the
/// fine mesh of level `k`, that transfer with `p = l + 2` and no softening
/// meets the accuracy requirement. This is the `m = 0` branch of
/// [`select_params`], written as `H³/h² ≤ e^(c_a + 1 + 1/χ)`.
pub fn no_softening_admissible(coarse_mesh: f64, k: u32, cfg: &ParamConfig) -> Result<bool> {
    let h = mesh_of_level(k);
    let chi = solve_chi(coarse_mesh / 2.0, GAMMA2)?;
    let lhs = (KERNEL_L + 1) as f64 * coarse_mesh.ln()
        - (DISCRETIZATION_S - DIMENSION * (DISCRETIZATION_S - KERNEL_L)) as f64 * h.ln();
    Ok(lhs < cfg.c_a + 1.0 + 1.0 / chi)
}

/// Operations per fine node of one coarsening step in `d` dimensions.
pub fn work_estimate(p: usize, m: u32, hbar: f64, d: i32) -> f64 {
    2.0 * (1.0 - 2f64.powi(-d)) * p as f64 + 4.0 * d as f64 * m as f64 * hbar.powi(1 - d)
}

/// Limit of the work per fine node when every step uses `p_bar` without
/// softening and the coarsest sum costs about one operation per fine node.
pub fn asymptotic_work(p_bar: usize) -> f64 {
    let per_step = work_estimate(p_bar, 0, 0.5, DIMENSION);
    let geometric = 1.0 / (1.0 - 2f64.powi(-DIMENSION));
    per_step * geometric + 1.0
}

/// Per-step `(p, m)` for the coarsening chain from level `fine` down to `coarse`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferSchedule {
    fine: u32,
    coarse: u32,
    /// `steps[i]` belongs to the step from level `fine - i` to `fine - i - 1`.
    steps: Vec<(usize, u32)>,
}

impl TransferSchedule {
    pub fn new(fine: u32, coarse: u32, steps: Vec<(usize, u32)>) -> Result<Self> {
        if fine > MAX_LEVEL || coarse > fine || coarse < 1 {
            return Err(Error::Schedule(format!("levels {fine} -> {coarse}")));
        }
        if steps.len() != (fine - coarse) as usize {
            return Err(Error::Schedule(format!(
                "{} steps given for {} coarsenings",
                steps.len(),
                fine - coarse
            )));
        }
        if let Some(&(p, _)) = steps.iter().find(|(p, _)| *p < 2 || *p > MAX_ORDER || p % 2 != 0) {
            return Err(Error::InvalidOrder(p));
        }
        for (i, &(p, m)) in steps.iter().enumerate() {
            if m > 0 {
                SofteningParams::new(p, m, mesh_of_level(fine - 1 - i as u32))?;
            }
        }
        Ok(Self { fine, coarse, steps })
    }

    /// Schedule chosen by [`select_params`] for every step.
    pub fn optimal(fine: u32, coarse: u32, cfg: &ParamConfig) -> Result<Self> {
        if coarse > fine {
            return Err(Error::Schedule(format!("levels {fine} -> {coarse}")));
        }
        let steps = (coarse..fine)
            .rev()
            .map(|l| select_params(fine, l, cfg))
            .collect::<Result<Vec<_>>>()?;
        Self::new(fine, coarse, steps)
    }

    /// The same `(p, m)` on every step.
    pub fn uniform(fine: u32, coarse: u32, p: usize, m: u32) -> Result<Self> {
        Self::new(fine, coarse, vec![(p, m); fine.saturating_sub(coarse) as usize])
    }

    pub fn fine(&self) -> u32 {
        self.fine
    }

    pub fn coarse(&self) -> u32 {
        self.coarse
    }

    /// `(p, m)` of the step from `level` to `level - 1`.
    pub fn step(&self, level: u32) -> Option<(usize, u32)> {
        if level > self.fine || level <= self.coarse {
            return None;
        }
        self.steps.get((self.fine - level) as usize).copied()
    }

    pub fn steps(&self) -> &[(usize, u32)] {
        &self.steps
    }

    pub fn has_softening(&self) -> bool {
        self.steps.iter().any(|&(_, m)| m > 0)
    }
}
