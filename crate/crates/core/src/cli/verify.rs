//! Quick invariant checks run by `qrm verify`.

use super::{EXIT_OK, EXIT_PARTIAL};
use crate::critical::{gc0, gc1, gc2, gc_xi, gc_xi_residual, Gc2Variant, DEFAULT_DC1};
use crate::ed::{expectation_x, ground_state, EdOptions};
use crate::error::Result;
use crate::model::ModelParams;
use crate::polaron::{optimize, overlap, pair_table, Polaron};
use crate::qfi::{qfi_ed, QfiOptions};

type Check = (&'static str, fn() -> Result<(bool, String)>);

fn decoupled_energy() -> Result<(bool, String)> {
    let (s, _) = ground_state(&ModelParams::new(0.1, 1.0, 0.0)?, &EdOptions::default())?;
    let err = (s.energy + 0.5).abs();
    Ok((err < 1e-12, format!("|E0 + Ω/2| = {err:.2e}")))
}

fn decoupled_qfi() -> Result<(bool, String)> {
    let q = qfi_ed(&ModelParams::new(0.1, 1.0, 0.0)?, &QfiOptions::default())?;
    let want = 4.0 / 1.21;
    let err = (q.f_q_g - want).abs() / want;
    Ok((err < 1e-4, format!("relative error {err:.2e}")))
}

fn first_derivative_term() -> Result<(bool, String)> {
    let base = ModelParams::new(0.1, 1.0, 0.0)?;
    let mut worst = 0.0f64;
    for k in 0..10 {
        let q = qfi_ed(&base.with_gbar(0.2 + 0.18 * k as f64), &QfiOptions::default())?;
        worst = worst.max(q.first_derivative_term.abs());
    }
    Ok((worst < 1e-8, format!("max |⟨ψ′|ψ⟩| = {worst:.2e}")))
}

fn parity_antisymmetry() -> Result<(bool, String)> {
    let base = ModelParams::new(0.1, 1.0, 0.0)?;
    let mut worst = 0.0f64;
    for gb in [0.7, 1.3, 1.9] {
        let (s, _) = ground_state(&base.with_gbar(gb), &EdOptions::default())?;
        let (p, m) = expectation_x(&s);
        worst = worst.max((p + m).abs());
    }
    Ok((worst < 1e-12, format!("max |⟨x⟩₊ + ⟨x⟩₋| = {worst:.2e}")))
}

fn gc_xi_closed_form() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for k in 0..200 {
        let r = 1e-4 * (1e4f64).powf(k as f64 / 199.0);
        let e = gc_xi(r, 1.0, DEFAULT_DC1)?;
        worst = worst.max(gc_xi_residual(r, 1.0, DEFAULT_DC1, e.value));
    }
    Ok((worst < 1e-10, format!("max residual {worst:.2e}")))
}

fn small_frequency_limit() -> Result<(bool, String)> {
    let r = 1e-8;
    let ratios = [
        gc1(r, 1.0)?.ratio,
        gc_xi(r, 1.0, DEFAULT_DC1)?.ratio,
        gc2(r, 1.0, Gc2Variant::AlphaFs)?.ratio,
        gc0(r, 1.0)?.ratio,
    ];
    let worst = ratios.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
    Ok((worst < 1e-3, format!("max |g_c/g_c0 − 1| = {worst:.2e} at ω/Ω = 1e-8")))
}

/// Closed-form overlap derivatives against central differences of the
/// closed-form overlap itself.
fn overlap_derivatives() -> Result<(bool, String)> {
    let h = 1e-4;
    let s = |xa: f64, ka: f64, xb: f64, kb: f64| overlap(&Polaron { x: xa, xi: ka }, &Polaron { x: xb, xi: kb });
    let mut worst = 0.0f64;
    for (xa, ka, xb, kb) in [(0.3, 0.8, -0.5, 1.3), (1.7, 0.6, 1.1, 0.9), (-0.2, 1.5, 0.4, 0.7)] {
        let t = pair_table(&Polaron::new(xa, ka)?, &Polaron::new(xb, kb)?);
        let d1 = |f: &dyn Fn(f64) -> f64| (f(h) - f(-h)) / (2.0 * h);
        let d2 = |f: &dyn Fn(f64, f64) -> f64| (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
        let oracle = [
            s(xa, ka, xb, kb),
            d1(&|e| s(xa + e, ka, xb, kb)),
            d1(&|e| s(xa, ka, xb + e, kb)),
            d1(&|e| s(xa, ka + e, xb, kb)),
            d1(&|e| s(xa, ka, xb, kb + e)),
            d2(&|e, f| s(xa + e, ka, xb + f, kb)),
            d2(&|e, f| s(xa + e, ka, xb, kb + f)),
            d2(&|e, f| s(xa, ka + e, xb + f, kb)),
            d2(&|e, f| s(xa, ka + e, xb, kb + f)),
        ];
        for ((_, got), want) in t.entries().iter().zip(oracle) {
            worst = worst.max((got - want).abs() / t.s.abs().max(want.abs()));
        }
    }
    Ok((worst < 1e-6, format!("max relative deviation {worst:.2e}")))
}

fn variational_bound() -> Result<(bool, String)> {
    let base = ModelParams::new(0.1, 1.0, 0.0)?;
    let mut worst = f64::INFINITY;
    for gb in [0.8, 1.3, 1.8] {
        let p = base.with_gbar(gb);
        let (s, _) = ground_state(&p, &EdOptions::default())?;
        let e_pp = optimize(&p, None)?.energy(&p)?;
        worst = worst.min(e_pp - s.energy);
    }
    Ok((worst >= -1e-10, format!("min E_PP − E_ED = {worst:.2e}")))
}

const CHECKS: [Check; 8] = [
    ("decoupled ground energy", decoupled_energy),
    ("decoupled QFI", decoupled_qfi),
    ("vanishing ⟨ψ′|ψ⟩", first_derivative_term),
    ("parity antisymmetry of ⟨x⟩", parity_antisymmetry),
    ("gcξ closed form", gc_xi_closed_form),
    ("small-frequency limit", small_frequency_limit),
    ("overlap derivative table", overlap_derivatives),
    ("variational bound", variational_bound),
];

pub(crate) fn run() -> Result<i32> {
    let mut failed = 0;
    for (name, check) in CHECKS {
        let (ok, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, e.to_string()),
        };
        if !ok {
            failed += 1;
        }
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
    Ok(if failed == 0 { EXIT_OK } else { EXIT_PARTIAL })
}
