use serde::{Deserialize, Serialize};

use super::ansatz::PolaronAnsatz;
use super::gaussian::pair_table;
use super::simplex::{nelder_mead, newton_polish, Minimum, SimplexOptions};
use crate::error::{QrmError, Result};
use crate::model::ModelParams;

const ZETA_BOUND: f64 = 4.0;
const LN_XI_BOUND: f64 = 5.0;
const JUMP_FACTOR: f64 = 10.0;
const MIN_RAW_NORM: f64 = 1e-3;

/// Low-frequency displacement `ζ = √(1 − ḡ⁻⁴)` above `ḡ = 1`, zero below.
pub fn zeta_semiclassical(gbar: f64) -> f64 {
    if gbar > 1.0 {
        (1.0 - gbar.powi(-4)).sqrt()
    } else {
        0.0
    }
}

fn objective(params: &ModelParams) -> impl Fn(&[f64]) -> f64 + '_ {
    move |v: &[f64]| {
        if v[1].abs() > ZETA_BOUND || v[2].abs() > ZETA_BOUND || v[3].abs() > LN_XI_BOUND || v[4].abs() > LN_XI_BOUND {
            return f64::MAX;
        }
        let c = [v[0], v[1], v[2], v[3], v[4]];
        let raw = PolaronAnsatz::from_coords_unnormalized(params, &c);
        // near-cancelling weights amplify round-off in the normalized energy
        if raw.norm_sq(params) < MIN_RAW_NORM {
            return f64::MAX;
        }
        PolaronAnsatz::from_coords(params, &c).energy_unchecked(params)
    }
}

fn seeds(params: &ModelParams, warm: Option<&PolaronAnsatz>) -> Vec<[f64; 5]> {
    let zs = zeta_semiclassical(params.g_bar());
    let split = if zs > 0.05 { zs } else { 0.5 };
    let q = std::f64::consts::FRAC_PI_4;
    let mut s = vec![
        [q, 0.0, 0.0, 0.0, (0.8f64).ln()],
        [q, split, -split, 0.0, 0.0],
        [0.15, split, -split, 0.0, 0.0],
        [q, 0.35, -0.1, -0.05, -0.05],
        [0.3, split.max(0.5), 0.0, 0.0, 0.0],
        [q, 1.0, 0.2, -0.3, 0.0],
    ];
    if let Some(w) = warm {
        s.insert(0, w.coords());
    }
    s
}

fn run_from(params: &ModelParams, seed: &[f64; 5]) -> Minimum {
    let f = objective(params);
    let opts = SimplexOptions::default();
    let mut m = nelder_mead(&f, seed, &opts);
    // restart from the best vertex with a fresh simplex until no progress
    for _ in 0..3 {
        let r = nelder_mead(
            &f,
            &m.x,
            &SimplexOptions {
                initial_step: 0.02,
                ..opts
            },
        );
        let improved = r.f < m.f - 1e-15;
        let evals = m.evals + r.evals;
        m = Minimum { evals, ..r };
        if !improved {
            break;
        }
    }
    newton_polish(&f, &m, 25)
}

fn to_ansatz(params: &ModelParams, m: &Minimum) -> PolaronAnsatz {
    PolaronAnsatz::from_coords(params, &[m.x[0], m.x[1], m.x[2], m.x[3], m.x[4]])
}

/// Multi-start minimization of the two-polaron energy. The result uses the
/// canonical labelling (`|α| ≥ |β|`, `α ≥ 0`).
pub fn optimize(params: &ModelParams, warm_start: Option<&PolaronAnsatz>) -> Result<PolaronAnsatz> {
    optimize_raw(params, warm_start).map(|a| a.canonical())
}

fn optimize_raw(params: &ModelParams, warm_start: Option<&PolaronAnsatz>) -> Result<PolaronAnsatz> {
    params.validate()?;
    let mut best: Option<Minimum> = None;
    let mut iterations = 0;
    for seed in seeds(params, warm_start) {
        let m = run_from(params, &seed);
        iterations += m.evals;
        if best.as_ref().is_none_or(|b| m.f < b.f) {
            best = Some(m);
        }
    }
    let best = best.expect("at least one seed");
    if !best.converged || !best.f.is_finite() {
        return Err(QrmError::OptimizerNonConvergence {
            iterations,
            best_energy: best.f,
        });
    }
    Ok(to_ansatz(params, &best))
}

/// Ansätze along an ascending `ḡ` grid at fixed `(ω, Ω)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolaronSweep {
    pub omega: f64,
    pub splitting: f64,
    pub gbar: Vec<f64>,
    pub states: Vec<PolaronAnsatz>,
    pub energies: Vec<f64>,
    /// Indices `k` where the branch jumped between `k − 1` and `k`.
    pub discontinuities: Vec<usize>,
}

impl PolaronSweep {
    pub fn params(&self, index: usize) -> ModelParams {
        ModelParams {
            omega: self.omega,
            splitting: self.splitting,
            g: 0.0,
        }
        .with_gbar(self.gbar[index])
    }

    pub fn len(&self) -> usize {
        self.gbar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gbar.is_empty()
    }

    /// Index of the polaron carrying the larger weight at the end of the
    /// sweep; labels are continuous so this is the main polaron throughout
    /// the split phase.
    pub fn main_label(&self) -> usize {
        match self.states.last() {
            Some(s) if s.beta.abs() > s.alpha.abs() => 1,
            _ => 0,
        }
    }
}

/// Sequential warm-started optimization along `gbar_grid`.
///
/// Every point is also multi-started; the lower minimum wins and is
/// relabelled to stay as close as possible to its predecessor. A parameter
/// jump larger than ten times the preceding step is recorded as a branch
/// discontinuity.
pub fn continuation_sweep(omega: f64, splitting: f64, gbar_grid: &[f64]) -> Result<PolaronSweep> {
    if gbar_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(QrmError::domain("ḡ grid must be strictly ascending"));
    }
    let base = ModelParams::new(omega, splitting, 0.0)?;
    if !(splitting > 0.0) {
        return Err(QrmError::domain("polaron sweeps need a positive splitting"));
    }
    let mut states: Vec<PolaronAnsatz> = Vec::with_capacity(gbar_grid.len());
    let mut energies = Vec::with_capacity(gbar_grid.len());
    let mut discontinuities = Vec::new();
    let mut last_step = f64::NAN;
    for (k, &gb) in gbar_grid.iter().enumerate() {
        let p = base.with_gbar(gb);
        let prev = states.last().copied();
        let found = optimize_raw(&p, prev.as_ref()).map_err(|e| QrmError::at_index(k, e))?;
        let state = match prev {
            Some(r) => found.aligned_to(&r),
            None => found.canonical(),
        };
        if let Some(r) = prev {
            let step = state.distance(&r);
            if k >= 2 && step > JUMP_FACTOR * last_step && step > 1e-3 {
                log::warn!("branch discontinuity at ḡ = {gb} (step {step:.3e} vs {last_step:.3e})");
                discontinuities.push(k);
            }
            last_step = step;
        }
        energies.push(state.energy(&p).map_err(|e| QrmError::at_index(k, e))?);
        states.push(state);
    }
    Ok(PolaronSweep {
        omega,
        splitting,
        gbar: gbar_grid.to_vec(),
        states,
        energies,
        discontinuities,
    })
}

/// Finite-difference flows of the variational parameters at one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterDerivatives {
    pub gbar: f64,
    pub dweight: [f64; 2],
    pub dzeta: [f64; 2],
    pub d2zeta: [f64; 2],
    pub dxi: [f64; 2],
    /// `dx_i/dḡ = (ζ_i′ ḡ + ζ_i) √(Ω/2ω)`.
    pub dx: [f64; 2],
}

impl ParameterDerivatives {
    /// All flows zero (a frozen ansatz).
    pub fn frozen(gbar: f64) -> Self {
        ParameterDerivatives {
            gbar,
            dweight: [0.0; 2],
            dzeta: [0.0; 2],
            d2zeta: [0.0; 2],
            dxi: [0.0; 2],
            dx: [0.0; 2],
        }
    }
}

/// Three-point first and second derivative weights on a possibly
/// non-uniform stencil `(x₋, x₀, x₊)`.
pub(crate) fn stencil(xm: f64, x0: f64, xp: f64) -> ([f64; 3], [f64; 3]) {
    let h1 = x0 - xm;
    let h2 = xp - x0;
    let first = [-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2))];
    let second = [2.0 / (h1 * (h1 + h2)), -2.0 / (h1 * h2), 2.0 / (h2 * (h1 + h2))];
    (first, second)
}

pub fn parameter_derivatives(sweep: &PolaronSweep, index: usize) -> Result<ParameterDerivatives> {
    let invalid = |reason: &str| QrmError::DerivativeInvalid {
        index,
        reason: reason.to_string(),
    };
    if index == 0 || index + 1 >= sweep.len() {
        return Err(invalid("needs neighbours on both sides"));
    }
    if sweep.discontinuities.contains(&index) || sweep.discontinuities.contains(&(index + 1)) {
        return Err(invalid("branch discontinuity in the stencil"));
    }
    let (d1, d2) = stencil(sweep.gbar[index - 1], sweep.gbar[index], sweep.gbar[index + 1]);
    let nb = [&sweep.states[index - 1], &sweep.states[index], &sweep.states[index + 1]];
    let apply = |w: &[f64; 3], f: &dyn Fn(&PolaronAnsatz) -> f64| -> f64 {
        w.iter().zip(nb.iter()).map(|(c, s)| c * f(s)).sum()
    };
    let zeta = [|s: &PolaronAnsatz| s.zeta_alpha, |s: &PolaronAnsatz| s.zeta_beta];
    let xi = [|s: &PolaronAnsatz| s.xi_alpha, |s: &PolaronAnsatz| s.xi_beta];
    let mut out = ParameterDerivatives::frozen(sweep.gbar[index]);
    let scale = (sweep.splitting / (2.0 * sweep.omega)).sqrt();
    let here = nb[1].zetas();
    for i in 0..2 {
        out.dzeta[i] = apply(&d1, &zeta[i]);
        out.d2zeta[i] = apply(&d2, &zeta[i]);
        out.dxi[i] = apply(&d1, &xi[i]);
        out.dx[i] = (out.dzeta[i] * out.gbar + here[i]) * scale;
    }
    // The weight angle θ is differenced; the weights follow from the
    // normalization so that d⟨ψ|ψ⟩/dḡ vanishes identically.
    let theta0 = nb[1].coords()[0];
    let unwrap = |t: f64| t - std::f64::consts::TAU * ((t - theta0) / std::f64::consts::TAU).round();
    let dtheta = apply(&d1, &|s: &PolaronAnsatz| unwrap(s.coords()[0]));
    let p = sweep.params(index);
    let [pa, pb] = nb[1].polarons(&p)?;
    let t = pair_table(&pa, &pb);
    let (b, a) = theta0.sin_cos();
    let (da, db) = (-b * dtheta, a * dtheta);
    let ds = t.dx_l * out.dx[0] + t.dx_r * out.dx[1] + t.dxi_l * out.dxi[0] + t.dxi_r * out.dxi[1];
    let n = 1.0 + 2.0 * a * b * t.s;
    let dn = 2.0 * (da * b + a * db) * t.s + 2.0 * a * b * ds;
    out.dweight = [
        da / n.sqrt() - 0.5 * a * dn / n.powf(1.5),
        db / n.sqrt() - 0.5 * b * dn / n.powf(1.5),
    ];
    if out.dweight.iter().chain(&out.dzeta).chain(&out.dxi).any(|v| !v.is_finite()) {
        return Err(invalid("non-finite derivative"));
    }
    Ok(out)
}
