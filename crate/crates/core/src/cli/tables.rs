//! Per-frequency sweep tables for the ED and polaron methods.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::critical::{gc2, Gc2Variant};
use crate::ed::{expectation_x, ground_state};
use crate::error::Result;
use crate::model::ModelParams;
use crate::observables::polaron_kinematics;
use crate::polaron::continuation_sweep;
use crate::qfi::{acceleration_condition, qfi_ed, qfi_pp_full, qfi_pp_simplified, scan_and_refine, PeakOptions, QfiMethod, QfiOptions};

pub(crate) const ED_COLUMNS: [&str; 10] = [
    "f_q",
    "f_q_norm",
    "energy",
    "x_plus",
    "dpsi_psi",
    "chi_f",
    "gap",
    "cutoff",
    "energy_delta",
    "tail_weight",
];

pub(crate) const PP_COLUMNS: [&str; 14] = [
    "f_q",
    "f_q_norm",
    "f_q_simplified",
    "energy",
    "x_plus",
    "dpsi_psi",
    "alpha",
    "beta",
    "zeta_alpha",
    "zeta_beta",
    "xi_alpha",
    "xi_beta",
    "velocity",
    "acceleration",
];

/// Method-specific block of a sweep: one row per grid point.
pub(crate) struct Block {
    pub status: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
    pub summary: BTreeMap<String, f64>,
}

pub(crate) fn status_text(e: &crate::QrmError) -> String {
    e.to_string().replace([',', '"', '\n', '\r'], " ")
}

/// `(g, ḡ, g/g_c2)` for each grid point.
pub(crate) fn coupling_columns(omega: f64, splitting: f64, grid: &[f64], variant: Gc2Variant) -> Result<Vec<[f64; 3]>> {
    let base = ModelParams::new(omega, splitting, 0.0)?;
    let gc2 = gc2(omega, splitting, variant)?.value;
    Ok(grid
        .iter()
        .map(|&gb| {
            let g = base.with_gbar(gb).g;
            [g, gb, g / gc2]
        })
        .collect())
}

fn normalize_first(values: &mut [Vec<Option<f64>>]) {
    let max = values.iter().filter_map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
    for v in values.iter_mut() {
        v[1] = v[0].map(|f| f / max);
    }
}

#[allow(clippy::too_many_arguments)]
fn peak_summary(
    summary: &mut BTreeMap<String, f64>,
    prefix: &str,
    omega: f64,
    splitting: f64,
    method: QfiMethod,
    grid: &[f64],
    f_q_g: &[Option<f64>],
    qfi: &QfiOptions,
) {
    let gc0 = (omega * splitting).sqrt() / 2.0;
    let (g, v): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .zip(f_q_g)
        .filter_map(|(gb, f)| f.map(|f| (*gb, f * gc0 * gc0)))
        .unzip();
    if g.len() < 3 {
        return;
    }
    let opts = PeakOptions {
        qfi: *qfi,
        ..PeakOptions::default()
    };
    match scan_and_refine(omega, splitting, method, &opts, &g, &v) {
        Ok(p) => {
            summary.insert(format!("{prefix}_gbar_cf"), p.gbar_cf);
            summary.insert(format!("{prefix}_g_cf"), p.g_cf);
            summary.insert(format!("{prefix}_f_q_max_gbar"), p.f_q_max);
            summary.insert(format!("{prefix}_peak_flat"), if p.flat { 1.0 } else { 0.0 });
        }
        Err(e) => log::warn!("{prefix} peak refinement at ω/Ω = {} failed: {e}", omega / splitting),
    }
}

pub(crate) fn ed_block(omega: f64, splitting: f64, grid: &[f64], qfi: &QfiOptions) -> Result<Block> {
    let base = ModelParams::new(omega, splitting, 0.0)?;
    let rows: Vec<(String, Vec<Option<f64>>)> = grid
        .par_iter()
        .map(|&gb| {
            let p = base.with_gbar(gb);
            let r = ground_state(&p, &qfi.ed).and_then(|(s, rep)| Ok((s, rep, qfi_ed(&p, qfi)?)));
            match r {
                Ok((s, rep, q)) => (
                    "ok".to_string(),
                    vec![
                        Some(q.f_q_g),
                        None,
                        Some(s.energy),
                        Some(expectation_x(&s).0),
                        Some(q.first_derivative_term),
                        Some(q.susceptibility()),
                        Some(s.sector_gap),
                        Some(rep.final_cutoff as f64),
                        Some(rep.energy_delta),
                        Some(rep.tail_weight),
                    ],
                ),
                Err(e) => (status_text(&e), vec![None; ED_COLUMNS.len()]),
            }
        })
        .collect();
    let (status, mut values): (Vec<String>, Vec<Vec<Option<f64>>>) = rows.into_iter().unzip();
    normalize_first(&mut values);
    let mut summary = BTreeMap::new();
    let f: Vec<Option<f64>> = values.iter().map(|v| v[0]).collect();
    peak_summary(&mut summary, "ed", omega, splitting, QfiMethod::Ed, grid, &f, qfi);
    Ok(Block { status, values, summary })
}

/// The polaron sweep runs on the grid extended by one step at each end so
/// that every requested point has neighbours for the parameter flows.
pub(crate) fn pp_block(omega: f64, splitting: f64, grid: &[f64], qfi: &QfiOptions) -> Result<Block> {
    let d = if grid.len() > 1 { grid[1] - grid[0] } else { 1e-3 };
    let lead = usize::from(grid[0] - d >= 0.0);
    let mut ext = Vec::with_capacity(grid.len() + 2);
    if lead == 1 {
        ext.push(grid[0] - d);
    }
    ext.extend_from_slice(grid);
    ext.push(grid[grid.len() - 1] + d);
    let sweep = continuation_sweep(omega, splitting, &ext)?;
    if !sweep.discontinuities.is_empty() {
        log::warn!(
            "polaron branch discontinuities at ω/Ω = {} near ḡ = {:?}",
            omega / splitting,
            sweep.discontinuities.iter().map(|&k| sweep.gbar[k]).collect::<Vec<_>>()
        );
    }
    let mut status = Vec::with_capacity(grid.len());
    let mut values = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let i = k + lead;
        let p = sweep.params(i);
        let s = &sweep.states[i];
        let x = s.x_expectation(&p)?;
        let gc0 = p.gc0();
        let mut row = vec![None; PP_COLUMNS.len()];
        row[3] = Some(sweep.energies[i]);
        row[4] = Some(x);
        for (slot, v) in row[6..12]
            .iter_mut()
            .zip([s.alpha, s.beta, s.zeta_alpha, s.zeta_beta, s.xi_alpha, s.xi_beta])
        {
            *slot = Some(v);
        }
        let flows = qfi_pp_full(&sweep, i).and_then(|f| {
            let simp = qfi_pp_simplified(&sweep, i)?;
            let (v, a) = polaron_kinematics(&sweep, i)?;
            Ok((f, simp, v, a))
        });
        match flows {
            Ok((f, simp, v, a)) => {
                row[0] = Some(f.f_q_g);
                row[2] = Some(simp.leading / (gc0 * gc0));
                row[5] = Some(f.first_derivative_term);
                row[12] = Some(v);
                row[13] = Some(a);
                status.push("ok".to_string());
            }
            Err(e) => status.push(status_text(&e)),
        }
        values.push(row);
    }
    normalize_first(&mut values);
    let mut summary = BTreeMap::new();
    let f: Vec<Option<f64>> = values.iter().map(|v| v[0]).collect();
    peak_summary(&mut summary, "pp", omega, splitting, QfiMethod::PpFull, grid, &f, qfi);
    match acceleration_condition(&sweep) {
        Ok((est, crossing)) => {
            summary.insert("pp_gbar_a0".into(), est.ratio);
            summary.insert("pp_g_a0".into(), est.value);
            summary.insert("pp_a0_crossing".into(), crossing);
        }
        Err(e) => log::warn!("no a = 0 root at ω/Ω = {}: {e}", omega / splitting),
    }
    summary.insert("pp_main_label".into(), sweep.main_label() as f64);
    summary.insert("pp_discontinuities".into(), sweep.discontinuities.len() as f64);
    Ok(summary_checked(Block { status, values, summary }))
}

fn summary_checked(mut b: Block) -> Block {
    b.summary.retain(|_, v| v.is_finite());
    b
}
