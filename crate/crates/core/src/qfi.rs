//! Quantum Fisher information of the ground state with respect to the
//! coupling, from exact diagonalization and from the polaron ansatz.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::critical::{CriticalEstimate, CriticalMethod};
use crate::ed::{ground_state, ground_state_at_cutoff, sector_state, ConvergenceReport, EdOptions, QuantumState};
use crate::error::{QrmError, Result};
use crate::model::{ModelParams, Parity};
use crate::polaron::{
    continuation_sweep, derivative_overlaps, parameter_derivatives, ParameterDerivatives, PolaronAnsatz, PolaronSweep,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QfiMethod {
    Ed,
    PpFull,
    PpSimplified,
}

impl QfiMethod {
    pub fn name(self) -> &'static str {
        match self {
            QfiMethod::Ed => "ED",
            QfiMethod::PpFull => "PP-full",
            QfiMethod::PpSimplified => "PP-simplified",
        }
    }
}

impl fmt::Display for QfiMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QfiMethod {
    type Err = QrmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ed" => Ok(QfiMethod::Ed),
            "pp" | "pp-full" => Ok(QfiMethod::PpFull),
            "pp-simplified" => Ok(QfiMethod::PpSimplified),
            _ => Err(QrmError::UnknownVariant(s.to_string())),
        }
    }
}

/// One QFI evaluation. Derivative terms are with respect to `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QfiSample {
    pub g: f64,
    pub gbar: f64,
    /// `F_Q` with respect to `g`.
    pub f_q_g: f64,
    /// `F_Q` with respect to `ḡ`, `= F_Q(g)·g_c0²`.
    pub f_q_gbar: f64,
    pub method: QfiMethod,
    /// `⟨ψ′|ψ⟩`.
    pub first_derivative_term: f64,
    /// `⟨ψ′|ψ′⟩`.
    pub derivative_norm_sq: f64,
    /// Gap to the next level of the ground-state parity sector (ED only).
    pub gap: Option<f64>,
    pub report: Option<ConvergenceReport>,
}

impl QfiSample {
    fn from_terms(params: &ModelParams, method: QfiMethod, overlap: f64, norm_sq: f64) -> Self {
        let gc0 = params.gc0();
        let f = 4.0 * (norm_sq - overlap * overlap);
        QfiSample {
            g: params.g,
            gbar: params.g_bar(),
            f_q_g: f,
            f_q_gbar: f * gc0 * gc0,
            method,
            first_derivative_term: overlap,
            derivative_norm_sq: norm_sq,
            gap: None,
            report: None,
        }
    }

    /// Fidelity susceptibility `χ_F = F_Q/4` (w.r.t. `g`).
    pub fn susceptibility(&self) -> f64 {
        self.f_q_g / 4.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QfiOptions {
    /// Finite-difference step in units of `g_c0`.
    pub step_gbar: f64,
    pub ed: EdOptions,
    /// Halve the step while the extrapolated and plain central estimates
    /// differ by more than this (relative).
    pub refine_tol: f64,
    pub max_halvings: usize,
    /// Also solve at twice the cutoff and report the relative change of `F_Q`.
    pub check_cutoff: bool,
}

impl Default for QfiOptions {
    fn default() -> Self {
        QfiOptions {
            step_gbar: 1e-4,
            ed: EdOptions::default(),
            refine_tol: 1e-4,
            max_halvings: 4,
            check_cutoff: false,
        }
    }
}

/// Ground state at a possibly negative coupling: `ψ(−g) = (−1)^{a†a} ψ(g)`.
fn signed_state(params: &ModelParams, g: f64, cutoff: usize) -> Result<QuantumState> {
    let mut s = ground_state_at_cutoff(&params.with_g(g.abs()), cutoff)?;
    if g < 0.0 {
        for c in [&mut s.coeffs_plus, &mut s.coeffs_minus] {
            c.iter_mut().skip(1).step_by(2).for_each(|v| *v = -*v);
        }
    }
    Ok(s)
}

fn dot(a: &QuantumState, b: &QuantumState) -> f64 {
    a.overlap(b)
}

struct EdTerms {
    overlap: f64,
    norm_sq: f64,
    f_central: f64,
    f_extrapolated: f64,
    gap: f64,
}

fn ed_terms(params: &ModelParams, h: f64, cutoff: usize) -> Result<EdTerms> {
    let g = params.g;
    let center = signed_state(params, g, cutoff)?;
    let mut side = Vec::with_capacity(4);
    for k in [-2.0, -1.0, 1.0, 2.0] {
        let mut s = signed_state(params, g + k * h, cutoff)?;
        let ov = dot(&center, &s);
        if ov.abs() < 0.5 {
            return Err(QrmError::StepTooLarge { overlap: ov });
        }
        if ov < 0.0 {
            s.negate();
        }
        side.push(s);
    }
    let n = center.coeffs_plus.len();
    let combine = |w: [f64; 4], denom: f64, pick: fn(&QuantumState) -> &Vec<f64>| -> Vec<f64> {
        (0..n)
            .map(|i| side.iter().zip(w).map(|(s, c)| c * pick(s)[i]).sum::<f64>() / denom)
            .collect::<Vec<f64>>()
    };
    fn plus(s: &QuantumState) -> &Vec<f64> {
        &s.coeffs_plus
    }
    fn minus(s: &QuantumState) -> &Vec<f64> {
        &s.coeffs_minus
    }
    let d5 = [
        combine([1.0, -8.0, 8.0, -1.0], 12.0 * h, plus),
        combine([1.0, -8.0, 8.0, -1.0], 12.0 * h, minus),
    ];
    let d3 = [
        combine([0.0, -1.0, 1.0, 0.0], 2.0 * h, plus),
        combine([0.0, -1.0, 1.0, 0.0], 2.0 * h, minus),
    ];
    let inner = |a: &[Vec<f64>; 2], b: &[Vec<f64>; 2]| -> f64 {
        0.5 * (a[0].iter().zip(&b[0]).map(|(x, y)| x * y).sum::<f64>()
            + a[1].iter().zip(&b[1]).map(|(x, y)| x * y).sum::<f64>())
    };
    let psi = [center.coeffs_plus.clone(), center.coeffs_minus.clone()];
    let (ov5, nn5) = (inner(&d5, &psi), inner(&d5, &d5));
    let (ov3, nn3) = (inner(&d3, &psi), inner(&d3, &d3));
    Ok(EdTerms {
        overlap: ov5,
        norm_sq: nn5,
        f_central: 4.0 * (nn3 - ov3 * ov3),
        f_extrapolated: 4.0 * (nn5 - ov5 * ov5),
        gap: center.sector_gap,
    })
}

/// QFI of the exact ground state at `params.g` by a gauge-aligned
/// five-point central difference at a common photon cutoff.
pub fn qfi_ed(params: &ModelParams, opts: &QfiOptions) -> Result<QfiSample> {
    params.validate()?;
    if !(opts.step_gbar > 0.0) {
        return Err(QrmError::domain("finite-difference step must be > 0"));
    }
    let gc0 = params.gc0();
    if !(gc0 > 0.0) {
        return Err(QrmError::domain("QFI in ḡ needs ω, Ω > 0"));
    }
    let mut h = opts.step_gbar * gc0;
    let top = params.with_g(params.g + 2.0 * h);
    let (_, report) = ground_state(&top, &opts.ed)?;
    let cutoff = report.final_cutoff;

    let mut terms = ed_terms(params, h, cutoff)?;
    for _ in 0..opts.max_halvings {
        let rel = (terms.f_extrapolated - terms.f_central).abs() / terms.f_extrapolated.abs().max(f64::MIN_POSITIVE);
        if rel <= opts.refine_tol {
            break;
        }
        h /= 2.0;
        terms = ed_terms(params, h, cutoff)?;
    }
    if terms.gap < 1e-8 * params.splitting {
        log::warn!(
            "near-degenerate ground state at g = {} (gap {:.3e}); ⟨ψ′|ψ⟩ = 0 may not hold",
            params.g,
            terms.gap
        );
    }
    let mut report = report;
    if opts.check_cutoff {
        let doubled = ed_terms(params, h, 2 * cutoff)?;
        report.qfi_delta = Some((doubled.f_extrapolated - terms.f_extrapolated).abs() / terms.f_extrapolated.abs());
    }
    let mut s = QfiSample::from_terms(params, QfiMethod::Ed, terms.overlap, terms.norm_sq);
    s.gap = Some(terms.gap);
    s.report = Some(report);
    Ok(s)
}

/// QFI at plain central-difference step `h` (in `g` units) at a fixed
/// cutoff; used for step-refinement studies.
pub fn qfi_ed_central(params: &ModelParams, h: f64, cutoff: usize) -> Result<f64> {
    Ok(ed_terms(params, h, cutoff)?.f_central)
}

/// Fidelity susceptibility `χ_F = F_Q/4` at `params.g`.
pub fn fidelity_susceptibility(params: &ModelParams, opts: &QfiOptions) -> Result<f64> {
    Ok(qfi_ed(params, opts)?.susceptibility())
}

/// `|⟨ψ(g)|ψ(g+δ)⟩|` at a common converged cutoff.
pub fn fidelity(params: &ModelParams, delta: f64, ed: &EdOptions) -> Result<f64> {
    let far = params.with_g((params.g + delta).max(params.g));
    let (_, rep) = ground_state(&far, ed)?;
    let a = ground_state_at_cutoff(params, rep.final_cutoff)?;
    let b = signed_state(params, params.g + delta, rep.final_cutoff)?;
    Ok(dot(&a, &b).abs())
}

/// First excited level of the ground-state sector minus the ground level.
pub fn sector_gap(params: &ModelParams, cutoff: usize) -> Result<f64> {
    Ok(sector_state(params, cutoff, Parity::Odd, 0)?.sector_gap)
}

fn pp_terms(state: &PolaronAnsatz, params: &ModelParams, d: &ParameterDerivatives) -> Result<(f64, f64)> {
    let t = derivative_overlaps(state, params)?;
    let w = state.weights();
    let dw = d.dweight;
    let (dx, dk) = (d.dx, d.dxi);
    let mut first = 0.0;
    let mut second = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let e = &t[i][j];
            let bra = e.dx_l * dx[i] + e.dxi_l * dk[i];
            let ket = e.dx_r * dx[j] + e.dxi_r * dk[j];
            let both = e.dx_dx * dx[i] * dx[j]
                + e.dx_dxi * dx[i] * dk[j]
                + e.dxi_dx * dk[i] * dx[j]
                + e.dxi_dxi * dk[i] * dk[j];
            first += w[i] * w[j] * bra + dw[i] * w[j] * e.s;
            second += w[i] * w[j] * both + dw[i] * dw[j] * e.s + w[i] * dw[j] * bra + dw[i] * w[j] * ket;
        }
    }
    Ok((first, second))
}

/// Polaron QFI assembled from closed-form overlaps and the parameter flows
/// at `index` of a continuation sweep.
pub fn qfi_pp_full(sweep: &PolaronSweep, index: usize) -> Result<QfiSample> {
    let d = parameter_derivatives(sweep, index)?;
    qfi_pp_with(&sweep.states[index], &sweep.params(index), &d)
}

/// Same assembly for explicitly supplied flows.
pub fn qfi_pp_with(state: &PolaronAnsatz, params: &ModelParams, d: &ParameterDerivatives) -> Result<QfiSample> {
    let (first, second) = pp_terms(state, params, d)?;
    let gc0 = params.gc0();
    // flows are per unit ḡ; convert to per unit g
    Ok(QfiSample::from_terms(
        params,
        QfiMethod::PpFull,
        first / gc0,
        second / (gc0 * gc0),
    ))
}

/// Leading-order polaron QFI near the transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplifiedQfi {
    pub sample: QfiSample,
    /// `(Ω/ω)(ζ′ḡ + ζ)² ξ`.
    pub leading: f64,
    /// `m_F v̄²/2`.
    pub kinetic: f64,
    /// `m_F = 2(Ω/ω) ξ`.
    pub mass: f64,
    /// `v̄ = d(ζḡ)/dḡ`.
    pub velocity: f64,
}

pub fn simplified_forms(omega: f64, splitting: f64, gbar: f64, zeta: f64, dzeta: f64, xi: f64) -> (f64, f64, f64, f64) {
    let v = dzeta * gbar + zeta;
    let leading = splitting / omega * v * v * xi;
    let mass = 2.0 * splitting / omega * xi;
    (leading, 0.5 * mass * v * v, mass, v)
}

pub fn qfi_pp_simplified(sweep: &PolaronSweep, index: usize) -> Result<SimplifiedQfi> {
    let d = parameter_derivatives(sweep, index)?;
    let main = sweep.main_label();
    let s = &sweep.states[index];
    let (leading, kinetic, mass, velocity) = simplified_forms(
        sweep.omega,
        sweep.splitting,
        sweep.gbar[index],
        s.zetas()[main],
        d.dzeta[main],
        s.xis()[main],
    );
    let p = sweep.params(index);
    let gc0 = p.gc0();
    let sample = QfiSample {
        g: p.g,
        gbar: sweep.gbar[index],
        f_q_g: leading / (gc0 * gc0),
        f_q_gbar: leading,
        method: QfiMethod::PpSimplified,
        first_derivative_term: 0.0,
        derivative_norm_sq: leading / (4.0 * gc0 * gc0),
        gap: None,
        report: None,
    };
    Ok(SimplifiedQfi {
        sample,
        leading,
        kinetic,
        mass,
        velocity,
    })
}

/// Polaron QFI at a single `ḡ` from a three-point local sweep of half
/// width `delta`.
pub fn qfi_pp_at(omega: f64, splitting: f64, gbar: f64, delta: f64) -> Result<QfiSample> {
    let sweep = continuation_sweep(omega, splitting, &[gbar - delta, gbar, gbar + delta])?;
    qfi_pp_full(&sweep, 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakEstimate {
    pub g_cf: f64,
    pub gbar_cf: f64,
    /// Peak value of `F_Q(ḡ)`.
    pub f_q_max: f64,
    pub bracket_width: f64,
    pub method: QfiMethod,
    /// No interior maximum in the scan range; `g_cf` is the scan argmax.
    pub flat: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakOptions {
    pub gbar_min: f64,
    pub gbar_max: f64,
    pub scan_points: usize,
    pub tol: f64,
    pub qfi: QfiOptions,
    /// Half width of the local polaron sweep used per evaluation.
    pub pp_delta: f64,
}

impl Default for PeakOptions {
    fn default() -> Self {
        PeakOptions {
            gbar_min: 0.5,
            gbar_max: 3.0,
            scan_points: 41,
            tol: 1e-4,
            qfi: QfiOptions::default(),
            pp_delta: 2e-3,
        }
    }
}

/// `F_Q(ḡ)` by the requested method.
pub fn qfi_at_gbar(omega: f64, splitting: f64, gbar: f64, method: QfiMethod, opts: &PeakOptions) -> Result<f64> {
    match method {
        QfiMethod::Ed => Ok(qfi_ed(&ModelParams::from_gbar(omega, splitting, gbar)?, &opts.qfi)?.f_q_gbar),
        QfiMethod::PpFull => Ok(qfi_pp_at(omega, splitting, gbar, opts.pp_delta)?.f_q_gbar),
        QfiMethod::PpSimplified => Err(QrmError::domain("peak search supports ED and PP-full")),
    }
}

/// Maximize a unimodal function on `[lo, hi]` by golden-section search.
pub fn golden_max<F: FnMut(f64) -> Result<f64>>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<(f64, f64)> {
    let inv = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv * (hi - lo);
    let mut b = lo + inv * (hi - lo);
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    while hi - lo > tol {
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv * (hi - lo);
            fa = f(a)?;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv * (hi - lo);
            fb = f(b)?;
        }
    }
    Ok(if fa >= fb { (a, fa) } else { (b, fb) })
}

/// Location of the QFI maximum: coarse scan, bracket, golden-section refine.
pub fn find_peak(omega: f64, splitting: f64, method: QfiMethod, opts: &PeakOptions) -> Result<PeakEstimate> {
    ModelParams::new(omega, splitting, 0.0)?;
    if !(opts.gbar_max > opts.gbar_min && opts.gbar_min >= 0.0 && opts.scan_points >= 3) {
        return Err(QrmError::domain("peak scan needs 0 ≤ ḡ_min < ḡ_max and ≥ 3 points"));
    }
    let n = opts.scan_points;
    let step = (opts.gbar_max - opts.gbar_min) / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|k| opts.gbar_min + k as f64 * step).collect();
    let values = grid
        .iter()
        .map(|&gb| qfi_at_gbar(omega, splitting, gb, method, opts))
        .collect::<Result<Vec<f64>>>()?;
    scan_and_refine(omega, splitting, method, opts, &grid, &values)
}

/// Refinement stage of [`find_peak`] given precomputed scan values.
pub fn scan_and_refine(
    omega: f64,
    splitting: f64,
    method: QfiMethod,
    opts: &PeakOptions,
    grid: &[f64],
    values: &[f64],
) -> Result<PeakEstimate> {
    let n = grid.len();
    let k = (0..n).max_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    let gc0 = (omega * splitting).sqrt() / 2.0;
    if k == 0 || k == n - 1 {
        log::warn!("flat QFI peak at ω/Ω = {}: no interior maximum in the scan range", omega / splitting);
        return Ok(PeakEstimate {
            g_cf: grid[k] * gc0,
            gbar_cf: grid[k],
            f_q_max: values[k],
            bracket_width: grid[1] - grid[0],
            method,
            flat: true,
        });
    }
    let (lo, hi) = (grid[k - 1], grid[k + 1]);
    let (x, fx) = golden_max(|gb| qfi_at_gbar(omega, splitting, gb, method, opts), lo, hi, opts.tol)?;
    let (x, fx) = if fx >= values[k] { (x, fx) } else { (grid[k], values[k]) };
    Ok(PeakEstimate {
        g_cf: x * gc0,
        gbar_cf: x,
        f_q_max: fx,
        bracket_width: opts.tol,
        method,
        flat: false,
    })
}

/// Coupling where the main polaron's acceleration `d²(ζ ḡ)/dḡ²` changes
/// sign from positive to negative, by linear interpolation between the
/// bracketing sweep points. Also returns the crossing form
/// `2ζ′/(−ζ″)` evaluated there.
pub fn acceleration_condition(sweep: &PolaronSweep) -> Result<(CriticalEstimate, f64)> {
    let main = sweep.main_label();
    let mut curve: Vec<(f64, f64, ParameterDerivatives)> = Vec::new();
    for k in 1..sweep.len().saturating_sub(1) {
        if let Ok(d) = parameter_derivatives(sweep, k) {
            let a = d.d2zeta[main] * sweep.gbar[k] + 2.0 * d.dzeta[main];
            curve.push((sweep.gbar[k], a, d));
        }
    }
    for w in curve.windows(2) {
        let ((g1, a1, d1), (g2, a2, d2)) = (&w[0], &w[1]);
        if *a1 > 0.0 && *a2 <= 0.0 {
            let t = a1 / (a1 - a2);
            let root = g1 + t * (g2 - g1);
            let lerp = |x: f64, y: f64| x + t * (y - x);
            let dz = lerp(d1.dzeta[main], d2.dzeta[main]);
            let ddz = lerp(d1.d2zeta[main], d2.d2zeta[main]);
            let crossing = 2.0 * dz / (-ddz);
            let gc0 = (sweep.omega * sweep.splitting).sqrt() / 2.0;
            return Ok((
                CriticalEstimate::new(sweep.omega, sweep.splitting, root * gc0, CriticalMethod::Acceleration),
                crossing,
            ));
        }
    }
    Err(QrmError::NoSignChange("polaron acceleration"))
}

/// Root of `d²(ζḡ)/dḡ²` for an analytic displacement curve, located by
/// bisection on a five-point second difference; serves as a check on
/// [`acceleration_condition`].
pub fn acceleration_root_of<F: Fn(f64) -> f64>(zeta: F, lo: f64, hi: f64) -> Result<f64> {
    let h = 1e-3;
    let acc = |x: f64| {
        let y = |t: f64| zeta(t) * t;
        (-y(x + 2.0 * h) + 16.0 * y(x + h) - 30.0 * y(x) + 16.0 * y(x - h) - y(x - 2.0 * h)) / (12.0 * h * h)
    };
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (acc(a), acc(b));
    if fa.signum() == fb.signum() {
        return Err(QrmError::NoSignChange("acceleration"));
    }
    let sa = fa.signum();
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if acc(m).signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}
