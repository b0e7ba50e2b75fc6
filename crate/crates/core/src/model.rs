//! Model parameters, the truncated Fock-space Hamiltonian and the
//! position-space spin-dependent potentials.
//!
//! Basis ordering is spin-major: index `s * (N + 1) + n` with `s = 0` for
//! `σz = +1`, `s = 1` for `σz = −1` and photon number `n ∈ [0, N]`.
//! The Hamiltonian is `ω a†a + g σz (a† + a) + (Ω/2) σx`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{QrmError, Result};

/// Physical parameters `(ω, Ω, g)` in raw energy units.
///
/// Derived couplings are always recomputed from the three fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Boson frequency ω.
    pub omega: f64,
    /// Qubit splitting Ω.
    pub splitting: f64,
    /// Coupling strength g.
    pub g: f64,
}

impl ModelParams {
    pub fn new(omega: f64, splitting: f64, g: f64) -> Result<Self> {
        let p = ModelParams {
            omega,
            splitting,
            g,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters at scaled coupling `ḡ = g / g_c0`.
    pub fn from_gbar(omega: f64, splitting: f64, gbar: f64) -> Result<Self> {
        let gc0 = (omega * splitting).sqrt() / 2.0;
        Self::new(omega, splitting, gbar * gc0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.splitting.is_finite() && self.g.is_finite()) {
            return Err(QrmError::domain(format!("non-finite parameters {self:?}")));
        }
        if self.omega <= 0.0 {
            return Err(QrmError::domain(format!("omega must be > 0, got {}", self.omega)));
        }
        if self.splitting < 0.0 {
            return Err(QrmError::domain(format!(
                "splitting must be >= 0, got {}",
                self.splitting
            )));
        }
        if self.g < 0.0 {
            return Err(QrmError::domain(format!("g must be >= 0, got {}", self.g)));
        }
        Ok(())
    }

    pub fn with_g(&self, g: f64) -> Self {
        ModelParams { g, ..*self }
    }

    pub fn with_gbar(&self, gbar: f64) -> Self {
        self.with_g(gbar * self.gc0())
    }

    /// Conventional critical coupling `sqrt(ωΩ)/2`.
    pub fn gc0(&self) -> f64 {
        (self.omega * self.splitting).sqrt() / 2.0
    }

    pub fn g_bar(&self) -> f64 {
        self.g / self.gc0()
    }

    /// Potential displacement `√2 g / ω`.
    pub fn g_tilde(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.g / self.omega
    }

    pub fn ratio(&self) -> f64 {
        self.omega / self.splitting
    }
}

/// Eigenvalue of the parity operator `σx (−1)^{a†a}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// Dense real-symmetric Hamiltonian on the truncated Fock space.
#[derive(Debug, Clone)]
pub struct FockHamiltonian {
    pub cutoff: usize,
    pub matrix: DMatrix<f64>,
}

impl FockHamiltonian {
    pub fn dimension(&self) -> usize {
        2 * (self.cutoff + 1)
    }
}

#[inline]
pub(crate) fn fock_index(spin_down: bool, n: usize, cutoff: usize) -> usize {
    if spin_down {
        cutoff + 1 + n
    } else {
        n
    }
}

pub fn build_hamiltonian(params: &ModelParams, cutoff: usize) -> Result<FockHamiltonian> {
    params.validate()?;
    if cutoff == 0 {
        return Err(QrmError::domain("photon cutoff must be >= 1"));
    }
    let dim = 2 * (cutoff + 1);
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for (s, sigma) in [(false, 1.0), (true, -1.0)] {
        for n in 0..=cutoff {
            let i = fock_index(s, n, cutoff);
            h[(i, i)] = params.omega * n as f64;
            if n < cutoff {
                let j = fock_index(s, n + 1, cutoff);
                let c = sigma * params.g * ((n + 1) as f64).sqrt();
                h[(i, j)] = c;
                h[(j, i)] = c;
            }
        }
    }
    for n in 0..=cutoff {
        let up = fock_index(false, n, cutoff);
        let down = fock_index(true, n, cutoff);
        h[(up, down)] = params.splitting / 2.0;
        h[(down, up)] = params.splitting / 2.0;
    }
    Ok(FockHamiltonian { cutoff, matrix: h })
}

/// `P = σx ⊗ (−1)^n` on the truncated space.
pub fn parity_operator(cutoff: usize) -> DMatrix<f64> {
    let dim = 2 * (cutoff + 1);
    let mut p = DMatrix::<f64>::zeros(dim, dim);
    for n in 0..=cutoff {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let up = fock_index(false, n, cutoff);
        let down = fock_index(true, n, cutoff);
        p[(up, down)] = sign;
        p[(down, up)] = sign;
    }
    p
}

/// Hamiltonian restricted to one parity sector, acting on the spin-up
/// Fock amplitudes. The spin-down amplitudes follow from
/// `c₋[n] = p (−1)^n c₊[n]`, which turns the problem tridiagonal.
#[derive(Debug, Clone)]
pub struct SectorHamiltonian {
    pub parity: Parity,
    pub diagonal: Vec<f64>,
    pub off_diagonal: Vec<f64>,
}

pub fn sector_hamiltonian(
    params: &ModelParams,
    cutoff: usize,
    parity: Parity,
) -> Result<SectorHamiltonian> {
    params.validate()?;
    if cutoff == 0 {
        return Err(QrmError::domain("photon cutoff must be >= 1"));
    }
    let p = parity.sign();
    let diagonal = (0..=cutoff)
        .map(|n| {
            let alt = if n % 2 == 0 { 1.0 } else { -1.0 };
            params.omega * n as f64 + p * alt * params.splitting / 2.0
        })
        .collect();
    let off_diagonal = (1..=cutoff)
        .map(|n| params.g * (n as f64).sqrt())
        .collect();
    Ok(SectorHamiltonian {
        parity,
        diagonal,
        off_diagonal,
    })
}

/// Spin-dependent harmonic potential `v_σ(x) = ω (x + g̃ σ)²/2 + ε₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialSpec {
    pub sigma_z: i8,
    pub curvature: f64,
    pub center: f64,
    pub offset: f64,
}

impl PotentialSpec {
    pub fn new(params: &ModelParams, sigma_z: i8) -> Self {
        let gt = params.g_tilde();
        PotentialSpec {
            sigma_z,
            curvature: params.omega,
            center: -(sigma_z as f64) * gt,
            offset: energy_offset(params),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let d = x - self.center;
        self.curvature * d * d / 2.0 + self.offset
    }
}

/// `ε₀ = −(g̃² + 1) ω / 2`.
pub fn energy_offset(params: &ModelParams) -> f64 {
    let gt = params.g_tilde();
    -(gt * gt + 1.0) * params.omega / 2.0
}

pub fn potential(params: &ModelParams, sigma_z: i8, x: f64) -> f64 {
    PotentialSpec::new(params, sigma_z).eval(x)
}
