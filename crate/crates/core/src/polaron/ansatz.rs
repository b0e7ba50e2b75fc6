use serde::{Deserialize, Serialize};

use super::gaussian::{kinetic_element, overlap, position_element, shifted_square_element, Polaron};
use crate::error::{QrmError, Result};
use crate::model::{energy_offset, ModelParams};

const NORM_TOL: f64 = 1e-8;

/// Two-polaron trial state in the negative-parity sector:
/// `ψ₊ = α φ_α + β φ_β`, `ψ₋(x) = −ψ₊(−x)`, with `x_i = ζ_i g̃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolaronAnsatz {
    pub alpha: f64,
    pub beta: f64,
    pub zeta_alpha: f64,
    pub zeta_beta: f64,
    pub xi_alpha: f64,
    pub xi_beta: f64,
}

impl PolaronAnsatz {
    /// Build from unconstrained coordinates `(θ, ζ_α, ζ_β, ln ξ_α, ln ξ_β)`;
    /// the weights are rescaled so the state is normalized.
    pub fn from_coords(params: &ModelParams, v: &[f64; 5]) -> Self {
        let mut s = Self::from_coords_unnormalized(params, v);
        let n = s.norm_sq(params).sqrt();
        s.alpha /= n;
        s.beta /= n;
        s
    }

    /// Weights `(cos θ, sin θ)` without rescaling.
    pub(crate) fn from_coords_unnormalized(_params: &ModelParams, v: &[f64; 5]) -> Self {
        let (b, a) = v[0].sin_cos();
        PolaronAnsatz {
            alpha: a,
            beta: b,
            zeta_alpha: v[1],
            zeta_beta: v[2],
            xi_alpha: v[3].exp(),
            xi_beta: v[4].exp(),
        }
    }

    pub fn coords(&self) -> [f64; 5] {
        [
            self.beta.atan2(self.alpha),
            self.zeta_alpha,
            self.zeta_beta,
            self.xi_alpha.ln(),
            self.xi_beta.ln(),
        ]
    }

    pub fn weights(&self) -> [f64; 2] {
        [self.alpha, self.beta]
    }

    pub fn zetas(&self) -> [f64; 2] {
        [self.zeta_alpha, self.zeta_beta]
    }

    pub fn xis(&self) -> [f64; 2] {
        [self.xi_alpha, self.xi_beta]
    }

    fn polarons_unchecked(&self, params: &ModelParams) -> [Polaron; 2] {
        let gt = params.g_tilde();
        [
            Polaron {
                x: self.zeta_alpha * gt,
                xi: self.xi_alpha,
            },
            Polaron {
                x: self.zeta_beta * gt,
                xi: self.xi_beta,
            },
        ]
    }

    pub fn polarons(&self, params: &ModelParams) -> Result<[Polaron; 2]> {
        let [a, b] = self.polarons_unchecked(params);
        Ok([Polaron::new(a.x, a.xi)?, Polaron::new(b.x, b.xi)?])
    }

    /// `α² + β² + 2αβ S_αβ`.
    pub fn norm_sq(&self, params: &ModelParams) -> f64 {
        let [a, b] = self.polarons_unchecked(params);
        self.alpha * self.alpha + self.beta * self.beta + 2.0 * self.alpha * self.beta * overlap(&a, &b)
    }

    pub fn check_normalized(&self, params: &ModelParams) -> Result<()> {
        self.polarons(params)?;
        let err = (self.norm_sq(params) - 1.0).abs();
        if !(err <= NORM_TOL) {
            return Err(QrmError::NotNormalized(err));
        }
        Ok(())
    }

    /// Spin-up component `ψ₊(x)`.
    pub fn psi_plus(&self, params: &ModelParams, x: f64) -> f64 {
        let [a, b] = self.polarons_unchecked(params);
        self.alpha * a.eval(x) + self.beta * b.eval(x)
    }

    /// `⟨ψ|H|ψ⟩` from analytic Gaussian matrix elements.
    pub fn energy(&self, params: &ModelParams) -> Result<f64> {
        self.check_normalized(params)?;
        Ok(self.energy_unchecked(params))
    }

    pub(crate) fn energy_unchecked(&self, params: &ModelParams) -> f64 {
        let ph = self.polarons_unchecked(params);
        let w = self.weights();
        let gt = params.g_tilde();
        let eps0 = energy_offset(params);
        let mut e = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let (a, b) = (&ph[i], &ph[j]);
                let h = 0.5 * params.omega * (kinetic_element(a, b) + shifted_square_element(a, b, gt))
                    + eps0 * overlap(a, b)
                    - 0.5 * params.splitting * overlap(a, &b.mirrored());
                e += w[i] * w[j] * h;
            }
        }
        e
    }

    /// `⟨x̂⟩₊`; the spin-down value is its negative.
    pub fn x_expectation(&self, params: &ModelParams) -> Result<f64> {
        let ph = self.polarons(params)?;
        let w = self.weights();
        let mut acc = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                acc += w[i] * w[j] * position_element(&ph[i], &ph[j]);
            }
        }
        Ok(acc)
    }

    /// Same state with labels swapped.
    pub fn swapped(&self) -> Self {
        PolaronAnsatz {
            alpha: self.beta,
            beta: self.alpha,
            zeta_alpha: self.zeta_beta,
            zeta_beta: self.zeta_alpha,
            xi_alpha: self.xi_beta,
            xi_beta: self.xi_alpha,
        }
    }

    /// Same state with both weights negated.
    pub fn negated(&self) -> Self {
        PolaronAnsatz {
            alpha: -self.alpha,
            beta: -self.beta,
            ..*self
        }
    }

    /// Canonical labelling: `|α| ≥ |β|` (ties broken by `ζ_α ≥ ζ_β`) and
    /// `α ≥ 0`.
    pub fn canonical(&self) -> Self {
        let swap = if (self.alpha.abs() - self.beta.abs()).abs() <= 1e-12 {
            self.zeta_alpha < self.zeta_beta
        } else {
            self.alpha.abs() < self.beta.abs()
        };
        let s = if swap { self.swapped() } else { *self };
        if s.alpha < 0.0 {
            s.negated()
        } else {
            s
        }
    }

    /// Distance in coordinate space between two ansätze, ignoring labels'
    /// meaning (plain componentwise comparison).
    pub fn distance(&self, other: &PolaronAnsatz) -> f64 {
        let a = [
            self.alpha,
            self.beta,
            self.zeta_alpha,
            self.zeta_beta,
            self.xi_alpha.ln(),
            self.xi_beta.ln(),
        ];
        let b = [
            other.alpha,
            other.beta,
            other.zeta_alpha,
            other.zeta_beta,
            other.xi_alpha.ln(),
            other.xi_beta.ln(),
        ];
        a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }

    /// Of the four equivalent labellings, the one closest to `reference`.
    pub fn aligned_to(&self, reference: &PolaronAnsatz) -> Self {
        [*self, self.swapped(), self.negated(), self.swapped().negated()]
            .into_iter()
            .min_by(|a, b| a.distance(reference).total_cmp(&b.distance(reference)))
            .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, window};
    use approx::assert_relative_eq;

    fn single(zeta: f64, xi: f64) -> PolaronAnsatz {
        PolaronAnsatz {
            alpha: 1.0,
            beta: 0.0,
            zeta_alpha: zeta,
            zeta_beta: 0.0,
            xi_alpha: xi,
            xi_beta: 1.0,
        }
    }

    #[test]
    fn decoupled_energy() {
        let p = ModelParams::new(0.1, 1.0, 0.0).unwrap();
        assert_relative_eq!(single(0.0, 1.0).energy(&p).unwrap(), -0.5, epsilon = 1e-15);
    }

    #[test]
    fn displaced_oscillator_energy() {
        let p = ModelParams::new(1.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(single(1.0, 1.0).energy(&p).unwrap(), -1.0, epsilon = 1e-14);
        assert_relative_eq!(single(1.0, 1.0).x_expectation(&p).unwrap(), -p.g_tilde(), epsilon = 1e-14);
    }

    #[test]
    fn single_polaron_position() {
        let p = ModelParams::new(1.0, 1.0, 2.0_f64.sqrt()).unwrap();
        assert_relative_eq!(p.g_tilde(), 2.0, epsilon = 1e-14);
        assert_eq!(single(0.0, 1.0).x_expectation(&p).unwrap(), 0.0);
        assert_relative_eq!(single(1.0, 1.0).x_expectation(&p).unwrap(), -2.0, epsilon = 1e-14);
    }

    #[test]
    fn unnormalized_rejected() {
        let p = ModelParams::new(0.1, 1.0, 0.1).unwrap();
        let mut s = single(0.2, 1.0);
        s.alpha = 1.1;
        assert!(matches!(s.energy(&p), Err(QrmError::NotNormalized(_))));
    }

    #[test]
    fn coords_round_trip_normalizes() {
        let p = ModelParams::from_gbar(0.1, 1.0, 1.2).unwrap();
        let s = PolaronAnsatz::from_coords(&p, &[0.4, 0.6, -0.3, -0.2, 0.1]);
        assert_relative_eq!(s.norm_sq(&p), 1.0, epsilon = 1e-14);
        let back = PolaronAnsatz::from_coords(&p, &s.coords());
        assert!(back.distance(&s) < 1e-13);
    }

    #[test]
    fn energy_matches_grid_quadrature() {
        let p = ModelParams::from_gbar(0.1, 1.0, 1.2).unwrap();
        let s = PolaronAnsatz::from_coords(&p, &[0.5, 0.8, -0.4, -0.15, 0.2]);
        let [a, b] = s.polarons(&p).unwrap();
        let w = window(&[a.x, b.x], &[a.xi, b.xi]);
        let psi = |x: f64| s.psi_plus(&p, x);
        let dpsi = |x: f64| {
            s.alpha * a.xi * (-(x + a.x)) * a.eval(x) + s.beta * b.xi * (-(x + b.x)) * b.eval(x)
        };
        let gt = p.g_tilde();
        let eps0 = energy_offset(&p);
        let e = integrate(
            |x| {
                let v = 0.5 * p.omega * (x + gt).powi(2) + eps0;
                0.5 * p.omega * dpsi(x).powi(2) + v * psi(x).powi(2) - 0.5 * p.splitting * psi(x) * psi(-x)
            },
            -w,
            w,
            1e-14,
        );
        assert_relative_eq!(s.energy(&p).unwrap(), e, max_relative = 1e-10);
        let x = integrate(|x| x * psi(x).powi(2), -w, w, 1e-14);
        assert_relative_eq!(s.x_expectation(&p).unwrap(), x, max_relative = 1e-10);
    }

    #[test]
    fn relabelling_preserves_state() {
        let p = ModelParams::from_gbar(0.1, 1.0, 0.9).unwrap();
        let s = PolaronAnsatz::from_coords(&p, &[1.2, 0.3, -0.1, 0.0, -0.1]);
        let c = s.canonical();
        assert!(c.alpha.abs() >= c.beta.abs() && c.alpha >= 0.0);
        assert_relative_eq!(c.energy(&p).unwrap(), s.energy(&p).unwrap(), epsilon = 1e-14);
        assert!(c.aligned_to(&s).distance(&s) < 1e-15);
    }
}
