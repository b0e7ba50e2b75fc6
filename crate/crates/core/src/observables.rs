//! Displacement expectations, their coupling susceptibility and the
//! row-normalized QFI/susceptibility maps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critical::{gc2, Gc2Variant};
use crate::ed::{expectation_x, ground_state, EdOptions};
use crate::error::{QrmError, Result};
use crate::model::ModelParams;
use crate::polaron::{continuation_sweep, parameter_derivatives, PolaronAnsatz, PolaronSweep};
use crate::qfi::{qfi_ed, QfiMethod, QfiOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableSample {
    pub g: f64,
    pub gbar: f64,
    pub x_plus: f64,
    pub x_minus: f64,
    pub abs_x: f64,
    /// `d|⟨x̂⟩₊|/dg`.
    pub d_abs_x_dg: f64,
    /// Main-polaron velocity `dx_p/dg`, PP only.
    pub velocity: Option<f64>,
    /// Main-polaron acceleration `d²x_p/dg²`, PP only.
    pub acceleration: Option<f64>,
}

/// `⟨x̂⟩₊` of a polaron ansatz.
pub fn x_expectation_pp(ansatz: &PolaronAnsatz, params: &ModelParams) -> Result<f64> {
    ansatz.x_expectation(params)
}

/// Derivative of samples `y` on the grid `x`: central in the interior,
/// one-sided at the ends.
pub fn grid_derivative(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|k| {
            let (a, b) = match k {
                0 => (0, 1),
                k if k == n - 1 => (n - 2, n - 1),
                k => (k - 1, k + 1),
            };
            if x[b] == x[a] {
                0.0
            } else {
                (y[b] - y[a]) / (x[b] - x[a])
            }
        })
        .collect()
}

fn check_ascending(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.windows(2).any(|w| w[1] < w[0]) || grid.iter().any(|g| !(*g >= 0.0)) {
        return Err(QrmError::domain("ḡ grid must be non-empty, non-negative and ascending"));
    }
    Ok(())
}

/// `⟨x̂⟩±` and `d|⟨x̂⟩₊|/dg` along a `ḡ` grid.
pub fn susceptibility_sweep(
    omega: f64,
    splitting: f64,
    gbar_grid: &[f64],
    method: QfiMethod,
    ed: &EdOptions,
) -> Result<Vec<ObservableSample>> {
    check_ascending(gbar_grid)?;
    let base = ModelParams::new(omega, splitting, 0.0)?;
    let mut samples: Vec<ObservableSample> = match method {
        QfiMethod::Ed => gbar_grid
            .par_iter()
            .enumerate()
            .map(|(k, &gb)| {
                let p = base.with_gbar(gb);
                let (s, _) = ground_state(&p, ed).map_err(|e| QrmError::at_index(k, e))?;
                let (xp, xm) = expectation_x(&s);
                Ok(blank(&p, xp, xm))
            })
            .collect::<Result<Vec<_>>>()?,
        QfiMethod::PpFull | QfiMethod::PpSimplified => {
            let sweep = continuation_sweep(omega, splitting, gbar_grid)?;
            let mut out = Vec::with_capacity(gbar_grid.len());
            for k in 0..sweep.len() {
                let p = sweep.params(k);
                let xp = sweep.states[k].x_expectation(&p)?;
                let mut s = blank(&p, xp, -xp);
                if let Ok((v, a)) = polaron_kinematics(&sweep, k) {
                    s.velocity = Some(v);
                    s.acceleration = Some(a);
                }
                out.push(s);
            }
            out
        }
    };
    let g: Vec<f64> = samples.iter().map(|s| s.g).collect();
    let ax: Vec<f64> = samples.iter().map(|s| s.abs_x).collect();
    for (s, d) in samples.iter_mut().zip(grid_derivative(&g, &ax)) {
        s.d_abs_x_dg = d;
    }
    Ok(samples)
}

/// Main-polaron velocity `dx_p/dg` and acceleration `d²x_p/dg²` at a sweep
/// point, with `x_p = ζ g̃`.
pub fn polaron_kinematics(sweep: &PolaronSweep, index: usize) -> Result<(f64, f64)> {
    let d = parameter_derivatives(sweep, index)?;
    let main = sweep.main_label();
    let z = sweep.states[index].zetas()[main];
    let gb = sweep.gbar[index];
    let pref = std::f64::consts::SQRT_2 / sweep.omega;
    let gc0 = sweep.params(index).gc0();
    Ok((
        pref * (z + gb * d.dzeta[main]),
        pref * (gb * d.d2zeta[main] + 2.0 * d.dzeta[main]) / gc0,
    ))
}

fn blank(p: &ModelParams, xp: f64, xm: f64) -> ObservableSample {
    ObservableSample {
        g: p.g,
        gbar: p.g_bar(),
        x_plus: xp,
        x_minus: xm,
        abs_x: xp.abs(),
        d_abs_x_dg: 0.0,
        velocity: None,
        acceleration: None,
    }
}

/// Row-normalized QFI and susceptibility over `(ω/Ω, ḡ)` at `Ω = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceMap {
    pub omega_ratios: Vec<f64>,
    pub gbar: Vec<f64>,
    /// `F_Q(ḡ)` divided by its row maximum; empty for failed rows.
    pub qfi: Vec<Vec<f64>>,
    /// `d|⟨x̂⟩|/dg` divided by its row maximum; empty for failed rows.
    pub susceptibility: Vec<Vec<f64>>,
    /// Row argmax in `ḡ`, `None` for failed rows.
    pub qfi_argmax: Vec<Option<f64>>,
    pub susceptibility_argmax: Vec<Option<f64>>,
    /// Overlay curves in `ḡ` units.
    pub gc0_overlay: Vec<f64>,
    pub gc2_overlay: Vec<f64>,
    pub failed_rows: Vec<usize>,
}

fn normalize_row(v: &[f64]) -> (Vec<f64>, usize) {
    let (k, m) = v
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bk, bm), (k, &x)| if x > bm { (k, x) } else { (bk, bm) });
    (v.iter().map(|x| x / m).collect(), k)
}

/// Raw `F_Q(ḡ)` and `d|⟨x̂⟩|/dg` along one map row (`Ω = 1`).
pub fn map_row(ratio: f64, gbar: &[f64], opts: &QfiOptions) -> Result<(Vec<f64>, Vec<f64>)> {
    let base = ModelParams::new(ratio, 1.0, 0.0)?;
    let f: Vec<f64> = gbar
        .iter()
        .map(|&gb| qfi_ed(&base.with_gbar(gb), opts).map(|s| s.f_q_gbar))
        .collect::<Result<_>>()?;
    let obs = susceptibility_sweep(ratio, 1.0, gbar, QfiMethod::Ed, &opts.ed)?;
    Ok((f, obs.iter().map(|s| s.d_abs_x_dg).collect()))
}

fn check_ratios(omega_ratios: &[f64]) -> Result<()> {
    if omega_ratios.windows(2).any(|w| w[1] < w[0]) || omega_ratios.iter().any(|r| !(*r > 0.0)) {
        return Err(QrmError::domain("frequency ratios must be positive and ascending"));
    }
    Ok(())
}

impl CoincidenceMap {
    /// Assembles the map from raw rows; failed rows are logged, left empty
    /// and excluded from the argmax traces.
    pub fn from_rows(omega_ratios: &[f64], gbar_grid: &[f64], rows: Vec<Result<(Vec<f64>, Vec<f64>)>>) -> Result<Self> {
        check_ascending(gbar_grid)?;
        check_ratios(omega_ratios)?;
        if rows.len() != omega_ratios.len() {
            return Err(QrmError::domain("one row per frequency ratio required"));
        }
        let mut map = CoincidenceMap {
            omega_ratios: omega_ratios.to_vec(),
            gbar: gbar_grid.to_vec(),
            qfi: Vec::new(),
            susceptibility: Vec::new(),
            qfi_argmax: Vec::new(),
            susceptibility_argmax: Vec::new(),
            gc0_overlay: vec![1.0; omega_ratios.len()],
            gc2_overlay: omega_ratios
                .iter()
                .map(|&r| gc2(r, 1.0, Gc2Variant::AlphaFs).map(|e| e.ratio))
                .collect::<Result<_>>()?,
            failed_rows: Vec::new(),
        };
        for (i, row) in rows.into_iter().enumerate() {
            let row = row.and_then(|(f, s)| {
                if f.len() != gbar_grid.len() || s.len() != gbar_grid.len() {
                    return Err(QrmError::domain("row length differs from ḡ grid"));
                }
                Ok((f, s))
            });
            match row {
                Ok((f, s)) => {
                    let (fq, kf) = normalize_row(&f);
                    let (sx, ks) = normalize_row(&s);
                    map.qfi.push(fq);
                    map.susceptibility.push(sx);
                    map.qfi_argmax.push(Some(gbar_grid[kf]));
                    map.susceptibility_argmax.push(Some(gbar_grid[ks]));
                }
                Err(e) => {
                    log::warn!("map row ω/Ω = {} failed: {e}", omega_ratios[i]);
                    map.qfi.push(Vec::new());
                    map.susceptibility.push(Vec::new());
                    map.qfi_argmax.push(None);
                    map.susceptibility_argmax.push(None);
                    map.failed_rows.push(i);
                }
            }
        }
        Ok(map)
    }
}

/// Computes every row in parallel and assembles the map.
pub fn coincidence_map(omega_ratios: &[f64], gbar_grid: &[f64], opts: &QfiOptions) -> Result<CoincidenceMap> {
    check_ascending(gbar_grid)?;
    check_ratios(omega_ratios)?;
    let rows = omega_ratios
        .par_iter()
        .map(|&r| map_row(r, gbar_grid, opts))
        .collect();
    CoincidenceMap::from_rows(omega_ratios, gbar_grid, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_coupling_grid_is_flat() {
        let s = susceptibility_sweep(0.1, 1.0, &[0.0, 0.0, 0.0], QfiMethod::Ed, &EdOptions::default()).unwrap();
        assert!(s.iter().all(|o| o.abs_x < 1e-12 && o.d_abs_x_dg == 0.0));
    }

    #[test]
    fn parity_antisymmetry_ed() {
        let s = susceptibility_sweep(0.1, 1.0, &[0.5, 1.0, 1.5], QfiMethod::Ed, &EdOptions::default()).unwrap();
        for o in &s {
            assert!((o.x_minus + o.x_plus).abs() < 1e-10);
        }
        assert!(s[2].abs_x > s[0].abs_x);
    }

    #[test]
    fn single_polaron_moments() {
        let p = ModelParams::new(1.0, 1.0, std::f64::consts::SQRT_2).unwrap();
        let mk = |z: f64| PolaronAnsatz {
            alpha: 1.0,
            beta: 0.0,
            zeta_alpha: z,
            zeta_beta: 0.0,
            xi_alpha: 1.0,
            xi_beta: 1.0,
        };
        assert_eq!(x_expectation_pp(&mk(0.0), &p).unwrap(), 0.0);
        assert_relative_eq!(x_expectation_pp(&mk(1.0), &p).unwrap(), -2.0, epsilon = 1e-14);
    }

    #[test]
    fn grid_derivative_linear() {
        let x = [0.0, 0.1, 0.3, 0.6];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        for d in grid_derivative(&x, &y) {
            assert_relative_eq!(d, 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_row_map_matches_sweep() {
        let gbar: Vec<f64> = (0..9).map(|k| 1.0 + 0.05 * k as f64).collect();
        let m = coincidence_map(&[0.1], &gbar, &QfiOptions::default()).unwrap();
        let s = susceptibility_sweep(0.1, 1.0, &gbar, QfiMethod::Ed, &EdOptions::default()).unwrap();
        let raw: Vec<f64> = s.iter().map(|o| o.d_abs_x_dg).collect();
        let (norm, k) = normalize_row(&raw);
        assert_eq!(m.susceptibility[0], norm);
        assert_eq!(m.susceptibility_argmax[0], Some(gbar[k]));
        assert_relative_eq!(m.qfi[0].iter().cloned().fold(0.0, f64::max), 1.0);
    }

    #[test]
    fn failed_row_is_marked() {
        let gbar = [1.0, 1.1, 1.2];
        let rows = vec![
            Ok((vec![1.0, 3.0, 2.0], vec![2.0, 1.0, 0.5])),
            Err(QrmError::domain("boom")),
        ];
        let m = CoincidenceMap::from_rows(&[0.1, 0.2], &gbar, rows).unwrap();
        assert_eq!(m.failed_rows, vec![1]);
        assert_eq!(m.qfi_argmax, vec![Some(1.1), None]);
        assert_eq!(m.susceptibility_argmax[0], Some(1.0));
        assert!(m.qfi[1].is_empty());
    }
}
