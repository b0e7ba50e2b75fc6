//! Exact diagonalization of the truncated Hamiltonian.
//!
//! The ground state lives in the odd-parity sector, where the problem
//! reduces to a tridiagonal matrix on the spin-up amplitudes. The photon
//! cutoff is doubled until the energy and the Fock tail are converged.

use serde::{Deserialize, Serialize};

use crate::error::{QrmError, Result};
use crate::model::{sector_hamiltonian, ModelParams, Parity};
use crate::tridiag;

pub const DEFAULT_ENERGY_TOL: f64 = 1e-10;
pub const DEFAULT_CUTOFF_LIMIT: usize = 16384;
const TAIL_WEIGHT_TOL: f64 = 1e-12;

/// Ground (or low excited) state on the truncated Fock basis.
///
/// Each spin component is normalized on its own, `⟨ψσ|ψσ⟩ = 1`; the full
/// ket is `(ψ₊|+⟩ + ψ₋|−⟩)/√2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub coeffs_plus: Vec<f64>,
    pub coeffs_minus: Vec<f64>,
    pub energy: f64,
    /// Distance to the next level of the same parity sector.
    pub sector_gap: f64,
    pub cutoff: usize,
    pub parity: Parity,
    pub params: ModelParams,
}

impl QuantumState {
    /// `⟨self|other⟩` for the full two-component ket; cutoffs may differ.
    pub fn overlap(&self, other: &QuantumState) -> f64 {
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        0.5 * (dot(&self.coeffs_plus, &other.coeffs_plus)
            + dot(&self.coeffs_minus, &other.coeffs_minus))
    }

    pub fn norm(&self) -> f64 {
        self.overlap(self).sqrt()
    }

    /// Weight in the top 10% of photon numbers.
    pub fn tail_weight(&self) -> f64 {
        let start = (0.9 * self.cutoff as f64).floor() as usize + 1;
        let tail = |c: &[f64]| c.iter().skip(start).map(|v| v * v).sum::<f64>();
        0.5 * (tail(&self.coeffs_plus) + tail(&self.coeffs_minus))
    }

    pub(crate) fn negate(&mut self) {
        self.coeffs_plus.iter_mut().for_each(|c| *c = -*c);
        self.coeffs_minus.iter_mut().for_each(|c| *c = -*c);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub final_cutoff: usize,
    /// `|E₀(N) − E₀(N/2)|`.
    pub energy_delta: f64,
    pub tail_weight: f64,
    pub energy_tol: f64,
    pub qfi_delta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdOptions {
    /// Relative energy tolerance between successive cutoffs.
    pub energy_tol: f64,
    pub cutoff_limit: usize,
}

impl Default for EdOptions {
    fn default() -> Self {
        EdOptions {
            energy_tol: DEFAULT_ENERGY_TOL,
            cutoff_limit: DEFAULT_CUTOFF_LIMIT,
        }
    }
}

/// Starting cutoff: the smallest power of two ≥ max(32, 8 g̃²).
pub fn initial_cutoff(params: &ModelParams) -> usize {
    let gt = params.g_tilde();
    let guess = (8.0 * gt * gt).ceil().max(32.0) as usize;
    guess.next_power_of_two()
}

/// `level`-th eigenstate of a parity sector at a fixed photon cutoff.
pub fn sector_state(
    params: &ModelParams,
    cutoff: usize,
    parity: Parity,
    level: usize,
) -> Result<QuantumState> {
    let h = sector_hamiltonian(params, cutoff, parity)?;
    if level + 1 > h.diagonal.len() {
        return Err(QrmError::domain("requested level beyond truncated dimension"));
    }
    let energy = tridiag::eigenvalue(&h.diagonal, &h.off_diagonal, level);
    let next = tridiag::eigenvalue(&h.diagonal, &h.off_diagonal, level + 1);
    let plus = tridiag::eigenvector(&h.diagonal, &h.off_diagonal, energy);
    let p = parity.sign();
    let minus = plus
        .iter()
        .enumerate()
        .map(|(n, c)| if n % 2 == 0 { p * c } else { -p * c })
        .collect();
    Ok(QuantumState {
        coeffs_plus: plus,
        coeffs_minus: minus,
        energy,
        sector_gap: next - energy,
        cutoff,
        parity,
        params: *params,
    })
}

/// Ground state at a fixed cutoff (odd-parity sector).
pub fn ground_state_at_cutoff(params: &ModelParams, cutoff: usize) -> Result<QuantumState> {
    sector_state(params, cutoff, Parity::Odd, 0)
}

/// Ground state with an adaptively doubled photon cutoff.
pub fn ground_state(params: &ModelParams, opts: &EdOptions) -> Result<(QuantumState, ConvergenceReport)> {
    if !(opts.energy_tol > 0.0) {
        return Err(QrmError::domain("energy tolerance must be > 0"));
    }
    params.validate()?;
    let mut cutoff = initial_cutoff(params);
    let mut report = ConvergenceReport {
        final_cutoff: cutoff,
        energy_delta: f64::INFINITY,
        tail_weight: f64::INFINITY,
        energy_tol: opts.energy_tol,
        qfi_delta: None,
    };
    if cutoff > opts.cutoff_limit {
        return Err(QrmError::NonConvergence {
            limit: opts.cutoff_limit,
            report,
        });
    }
    let mut prev = ground_state_at_cutoff(params, cutoff)?;
    loop {
        let next_cutoff = 2 * cutoff;
        if next_cutoff > opts.cutoff_limit {
            return Err(QrmError::NonConvergence {
                limit: opts.cutoff_limit,
                report,
            });
        }
        let next = ground_state_at_cutoff(params, next_cutoff)?;
        let delta = (next.energy - prev.energy).abs();
        let scale = next.energy.abs().max(params.omega);
        report = ConvergenceReport {
            final_cutoff: next_cutoff,
            energy_delta: delta,
            tail_weight: next.tail_weight(),
            energy_tol: opts.energy_tol,
            qfi_delta: None,
        };
        let prev_tail = prev.tail_weight();
        if delta <= opts.energy_tol * scale && prev_tail < TAIL_WEIGHT_TOL {
            log::debug!("ground state converged at N={next_cutoff} (ΔE={delta:e})");
            return Ok((next, report));
        }
        cutoff = next_cutoff;
        prev = next;
    }
}

/// Normalized oscillator eigenfunctions `h_n(x)` summed against
/// coefficients, `Σ c_n h_n(x)`, via the three-term recurrence with
/// running rescaling so that large `n` neither overflows nor underflows
/// prematurely. Returns 0 where the true value is below the f64 range.
pub fn hermite_series(coeffs: &[f64], x: f64) -> f64 {
    if coeffs.is_empty() {
        return 0.0;
    }
    const BIG: f64 = 1e150;
    // h_n(x) = exp(log_scale - x²/2) π^{-1/4} * t_n
    let mut log_scale = 0.0f64;
    let mut t_prev = 0.0f64;
    let mut t = 1.0f64;
    let mut acc = coeffs[0] * t;
    for n in 0..coeffs.len() - 1 {
        let nf = n as f64;
        let t_next = x * (2.0 / (nf + 1.0)).sqrt() * t - (nf / (nf + 1.0)).sqrt() * t_prev;
        t_prev = t;
        t = t_next;
        if t.abs() > BIG {
            t /= BIG;
            t_prev /= BIG;
            acc /= BIG;
            log_scale += BIG.ln();
        }
        acc += coeffs[n + 1] * t;
    }
    let exponent = log_scale - 0.5 * x * x;
    let prefactor = std::f64::consts::PI.powf(-0.25);
    if exponent < -745.0 {
        return 0.0;
    }
    acc * exponent.exp() * prefactor
}

/// Single oscillator eigenfunction `h_n(x)`.
pub fn hermite_function(n: usize, x: f64) -> f64 {
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    hermite_series(&c, x)
}

/// Spin-component wavefunctions `(ψ₊(x), ψ₋(x))` on a position grid.
pub fn position_wavefunction(state: &QuantumState, grid: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(QrmError::domain("position grid must be finite"));
    }
    let plus = grid.iter().map(|&x| hermite_series(&state.coeffs_plus, x)).collect();
    let minus = grid.iter().map(|&x| hermite_series(&state.coeffs_minus, x)).collect();
    Ok((plus, minus))
}

fn x_component(c: &[f64]) -> f64 {
    std::f64::consts::SQRT_2
        * c.windows(2)
            .enumerate()
            .map(|(n, w)| w[0] * w[1] * ((n + 1) as f64).sqrt())
            .sum::<f64>()
}

/// `(⟨x̂⟩₊, ⟨x̂⟩₋)` with `x̂ = (a + a†)/√2` on each component.
pub fn expectation_x(state: &QuantumState) -> (f64, f64) {
    (x_component(&state.coeffs_plus), x_component(&state.coeffs_minus))
}

/// Mean photon number `⟨a†a⟩`.
pub fn photon_number(state: &QuantumState) -> f64 {
    let weighted = |c: &[f64]| c.iter().enumerate().map(|(n, v)| n as f64 * v * v).sum::<f64>();
    0.5 * (weighted(&state.coeffs_plus) + weighted(&state.coeffs_minus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_hamiltonian, parity_operator};
    use approx::assert_relative_eq;
    use nalgebra::{DVector, SymmetricEigen};

    fn full_vector(s: &QuantumState) -> DVector<f64> {
        let mut v: Vec<f64> = s.coeffs_plus.iter().map(|c| c / 2f64.sqrt()).collect();
        v.extend(s.coeffs_minus.iter().map(|c| c / 2f64.sqrt()));
        DVector::from_vec(v)
    }

    #[test]
    fn decoupled_ground_state() {
        let p = ModelParams::new(0.1, 1.0, 0.0).unwrap();
        let (s, rep) = ground_state(&p, &EdOptions::default()).unwrap();
        assert!((s.energy + 0.5).abs() < 1e-12);
        assert_relative_eq!(s.coeffs_plus[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(s.coeffs_minus[0], -1.0, epsilon = 1e-14);
        assert!(rep.energy_delta <= 1e-10);
        assert!(photon_number(&s) < 1e-24);
        let (xp, xm) = expectation_x(&s);
        assert!(xp.abs() < 1e-12 && xm.abs() < 1e-12);
    }

    #[test]
    fn displaced_oscillator_without_splitting() {
        let p = ModelParams::new(1.0, 0.0, 1.0).unwrap();
        let (s, _) = ground_state(&p, &EdOptions::default()).unwrap();
        assert_relative_eq!(s.energy, -1.0, epsilon = 1e-10);
        assert_relative_eq!(photon_number(&s), 1.0, epsilon = 1e-10);
        let (xp, xm) = expectation_x(&s);
        assert_relative_eq!(xp, -2f64.sqrt(), epsilon = 1e-10);
        assert_relative_eq!(xm, 2f64.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn agrees_with_dense_oversized_oracle() {
        let p = ModelParams::new(0.1, 1.0, 0.2).unwrap();
        let s = ground_state_at_cutoff(&p, 64).unwrap();
        let h = build_hamiltonian(&p, 256).unwrap();
        let e0 = SymmetricEigen::new(h.matrix)
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert!((s.energy - e0).abs() < 1e-10, "{} vs {}", s.energy, e0);
    }

    #[test]
    fn odd_parity_eigenvector_of_full_hamiltonian() {
        let p = ModelParams::new(0.1, 1.0, 0.3).unwrap();
        let n = 64;
        let s = ground_state_at_cutoff(&p, n).unwrap();
        let v = full_vector(&s);
        let par = parity_operator(n);
        assert!((&par * &v + &v).amax() < 1e-10);
        let h = build_hamiltonian(&p, n).unwrap();
        let r = &h.matrix * &v - &v * s.energy;
        assert!(r.amax() < 1e-10);
        assert_relative_eq!(s.norm(), 1.0, epsilon = 1e-12);
        for (k, (a, b)) in s.coeffs_plus.iter().zip(&s.coeffs_minus).enumerate() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert!((b + sign * a).abs() < 1e-10);
        }
    }

    #[test]
    fn even_sector_lies_above() {
        for &(r, gb) in &[(0.005, 0.5), (0.1, 1.2), (0.1, 3.0), (1.0, 2.0), (3.0, 0.7)] {
            let p = ModelParams::from_gbar(r, 1.0, gb).unwrap();
            let (s, rep) = ground_state(&p, &EdOptions::default()).unwrap();
            let even = sector_state(&p, rep.final_cutoff, Parity::Even, 0).unwrap();
            assert!(even.energy >= s.energy - 1e-12, "r={r} gbar={gb}");
        }
    }

    #[test]
    fn energy_non_increasing_in_cutoff() {
        let p = ModelParams::from_gbar(0.1, 1.0, 1.4).unwrap();
        let mut last = f64::INFINITY;
        for n in [4, 8, 16, 32, 64, 128] {
            let e = ground_state_at_cutoff(&p, n).unwrap().energy;
            assert!(e <= last + 1e-14);
            last = e;
        }
    }

    #[test]
    fn gauge_largest_coefficient_positive() {
        let p = ModelParams::from_gbar(0.1, 1.0, 1.8).unwrap();
        let (s, _) = ground_state(&p, &EdOptions::default()).unwrap();
        let big = s.coeffs_plus.iter().cloned().fold(0.0f64, |m, c| if c.abs() > m.abs() { c } else { m });
        assert!(big > 0.0);
    }

    #[test]
    fn cutoff_limit_reports_nonconvergence() {
        let p = ModelParams::from_gbar(0.001, 1.0, 3.0).unwrap();
        let opts = EdOptions { energy_tol: 1e-10, cutoff_limit: 256 };
        match ground_state(&p, &opts) {
            Err(QrmError::NonConvergence { limit, .. }) => assert_eq!(limit, 256),
            other => panic!("expected nonconvergence, got {other:?}"),
        }
    }

    #[test]
    fn hermite_functions() {
        let x: f64 = 0.7;
        assert_relative_eq!(hermite_function(0, x), std::f64::consts::PI.powf(-0.25) * (-x * x / 2.0).exp());
        // h_2 = (2x² − 1)/√2 · h_0
        assert_relative_eq!(
            hermite_function(2, x),
            (2.0 * x * x - 1.0) / 2f64.sqrt() * hermite_function(0, x),
            epsilon = 1e-15
        );
        // no overflow deep in the recurrence
        let v = hermite_function(10_000, 100.0);
        assert!(v.is_finite() && v.abs() < 1.0);
        assert_eq!(hermite_function(3, 60.0), 0.0);
    }

    #[test]
    fn vacuum_wavefunction_and_normalization() {
        let p = ModelParams::new(0.1, 1.0, 0.0).unwrap();
        let (s, _) = ground_state(&p, &EdOptions::default()).unwrap();
        let grid: Vec<f64> = (0..=4000).map(|i| -20.0 + 0.01 * i as f64).collect();
        let (plus, minus) = position_wavefunction(&s, &grid).unwrap();
        for (x, v) in grid.iter().zip(&plus) {
            assert!((v - std::f64::consts::PI.powf(-0.25) * (-x * x / 2.0).exp()).abs() < 1e-14);
        }
        assert_relative_eq!(minus[2000], -plus[2000]);

        let p = ModelParams::from_gbar(0.1, 1.0, 1.5).unwrap();
        let (s, _) = ground_state(&p, &EdOptions::default()).unwrap();
        let (plus, _) = position_wavefunction(&s, &grid).unwrap();
        let dens: Vec<f64> = plus.iter().map(|v| v * v).collect();
        let integral = 0.01 * (dens.iter().sum::<f64>() - 0.5 * (dens[0] + dens[dens.len() - 1]));
        assert!((integral - 1.0).abs() < 1e-8, "{integral}");
    }

    #[test]
    fn rejects_nonpositive_tolerance() {
        let p = ModelParams::new(0.1, 1.0, 0.1).unwrap();
        assert!(ground_state(&p, &EdOptions { energy_tol: 0.0, ..Default::default() }).is_err());
    }
}
