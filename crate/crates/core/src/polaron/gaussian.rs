//! Closed-form integrals of normalized Gaussian polarons
//! `φ(x) = (ξ/π)^{1/4} exp[−ξ (x + x₀)²/2]`.
//!
//! A polaron is described by its displacement parameter `x₀` (the packet
//! sits at `−x₀`) and its frequency renormalization `ξ`.

use std::f64::consts::SQRT_2;

use crate::error::{QrmError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Polaron {
    /// Displacement parameter; the packet is centred at `−x`.
    pub x: f64,
    pub xi: f64,
}

impl Polaron {
    pub fn new(x: f64, xi: f64) -> Result<Self> {
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(QrmError::domain(format!("polaron width xi must be > 0, got {xi}")));
        }
        if !x.is_finite() {
            return Err(QrmError::domain("polaron displacement must be finite"));
        }
        Ok(Polaron { x, xi })
    }

    pub fn center(&self) -> f64 {
        -self.x
    }

    /// Mirror image `φ(−x)`.
    pub fn mirrored(&self) -> Polaron {
        Polaron { x: -self.x, xi: self.xi }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let u = x + self.x;
        (self.xi / std::f64::consts::PI).powf(0.25) * (-0.5 * self.xi * u * u).exp()
    }

    /// `∂φ/∂x₀` at position `x`.
    pub fn d_x(&self, x: f64) -> f64 {
        -self.xi * (x + self.x) * self.eval(x)
    }

    /// `∂φ/∂ξ` at position `x`.
    pub fn d_xi(&self, x: f64) -> f64 {
        let u = x + self.x;
        (0.25 / self.xi - 0.5 * u * u) * self.eval(x)
    }
}

/// Shared quantities of the Gaussian product `φ_i φ_j`.
struct Pair {
    xi_i: f64,
    xi_j: f64,
    sum: f64,
    d: f64,
    f_e: f64,
}

impl Pair {
    fn new(a: &Polaron, b: &Polaron) -> Self {
        let sum = a.xi + b.xi;
        let d = a.x - b.x;
        Pair {
            xi_i: a.xi,
            xi_j: b.xi,
            sum,
            d,
            f_e: (d * d * a.xi * b.xi / (2.0 * sum)).exp(),
        }
    }
}

/// `⟨φ_i|φ_j⟩`.
pub fn overlap(a: &Polaron, b: &Polaron) -> f64 {
    let p = Pair::new(a, b);
    SQRT_2 * (p.xi_i * p.xi_j).powf(0.25) / p.sum.sqrt() / p.f_e
}

/// Centre `μ` of the Gaussian product `φ_i φ_j`.
pub fn product_center(a: &Polaron, b: &Polaron) -> f64 {
    (a.xi * a.center() + b.xi * b.center()) / (a.xi + b.xi)
}

/// `⟨φ_i|x̂|φ_j⟩`.
pub fn position_element(a: &Polaron, b: &Polaron) -> f64 {
    overlap(a, b) * product_center(a, b)
}

/// `⟨φ_i|(x̂ + s)²|φ_j⟩`.
pub fn shifted_square_element(a: &Polaron, b: &Polaron, s: f64) -> f64 {
    let mu = product_center(a, b) + s;
    overlap(a, b) * (mu * mu + 1.0 / (a.xi + b.xi))
}

/// `⟨φ_i|p̂²|φ_j⟩ = ∫ φ_i′ φ_j′ dx`.
pub fn kinetic_element(a: &Polaron, b: &Polaron) -> f64 {
    let sum = a.xi + b.xi;
    let dc = a.center() - b.center();
    let pr = a.xi * b.xi;
    overlap(a, b) * (pr / sum - pr * pr * dc * dc / (sum * sum))
}

/// Overlap and first/second parameter-derivative inner products for one
/// ordered pair `(i, j)`. Suffix `_l` differentiates the bra, `_r` the ket.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OverlapTable {
    pub s: f64,
    /// `⟨∂φ_i/∂x_i|φ_j⟩`
    pub dx_l: f64,
    /// `⟨φ_i|∂φ_j/∂x_j⟩`
    pub dx_r: f64,
    /// `⟨∂φ_i/∂ξ_i|φ_j⟩`
    pub dxi_l: f64,
    /// `⟨φ_i|∂φ_j/∂ξ_j⟩`
    pub dxi_r: f64,
    /// `⟨∂φ_i/∂x_i|∂φ_j/∂x_j⟩`
    pub dx_dx: f64,
    /// `⟨∂φ_i/∂x_i|∂φ_j/∂ξ_j⟩`
    pub dx_dxi: f64,
    /// `⟨∂φ_i/∂ξ_i|∂φ_j/∂x_j⟩`
    pub dxi_dx: f64,
    /// `⟨∂φ_i/∂ξ_i|∂φ_j/∂ξ_j⟩`
    pub dxi_dxi: f64,
}

impl OverlapTable {
    pub fn entries(&self) -> [(&'static str, f64); 9] {
        [
            ("S", self.s),
            ("dx_l", self.dx_l),
            ("dx_r", self.dx_r),
            ("dxi_l", self.dxi_l),
            ("dxi_r", self.dxi_r),
            ("dx_dx", self.dx_dx),
            ("dx_dxi", self.dx_dxi),
            ("dxi_dx", self.dxi_dx),
            ("dxi_dxi", self.dxi_dxi),
        ]
    }
}

/// Closed forms for every entry of [`OverlapTable`].
pub fn pair_table(a: &Polaron, b: &Polaron) -> OverlapTable {
    let p = Pair::new(a, b);
    let (xi, xj, sum, d, fe) = (p.xi_i, p.xi_j, p.sum, p.d, p.f_e);
    let d2 = d * d;
    let q = xi.powf(1.25) * xj.powf(1.25);

    let dx_l = SQRT_2 * q * (-d) / (sum.powf(1.5) * fe);
    let dx_r = SQRT_2 * q * d / (sum.powf(1.5) * fe);

    let dxi_l = -SQRT_2 * xj.powf(0.25) * (xi * xi + xj * xj * (2.0 * xi * d2 - 1.0))
        / (4.0 * xi.powf(0.75) * sum.powf(2.5) * fe);
    let dxi_r = -SQRT_2 * xi.powf(0.25) * (xj * xj + xi * xi * (2.0 * xj * d2 - 1.0))
        / (4.0 * xj.powf(0.75) * sum.powf(2.5) * fe);

    let dx_dx = SQRT_2 * (sum - xi * xj * d2) * q / (sum.powf(2.5) * fe);
    let dx_dxi = (xj * xj + xi * xi * (2.0 * xj * d2 - 5.0) - 4.0 * xi * xj)
        * xi.powf(1.25)
        * xj.powf(0.25)
        * d
        / (2.0 * SQRT_2 * sum.powf(3.5) * fe);
    let dxi_dx = (xi * xi + xj * xj * (2.0 * xi * d2 - 5.0) - 4.0 * xi * xj)
        * xj.powf(1.25)
        * xi.powf(0.25)
        * (-d)
        / (2.0 * SQRT_2 * sum.powf(3.5) * fe);
    let dxi_dxi = (4.0 * xi.powi(3) * xj.powi(3) * d2 * d2
        + sum * (2.0 * xi * xj * d2 - sum) * (xi * xi + xj * xj - 10.0 * xi * xj))
        / (8.0 * SQRT_2 * sum.powf(4.5) * (xi * xj).powf(0.75) * fe);

    OverlapTable {
        s: overlap(a, b),
        dx_l,
        dx_r,
        dxi_l,
        dxi_r,
        dx_dx,
        dx_dxi,
        dxi_dx,
        dxi_dxi,
    }
}
