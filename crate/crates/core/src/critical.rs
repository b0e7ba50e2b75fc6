//! Closed-form transition couplings and least-squares fits of measured
//! peak positions against power-law bases in `r = ω/Ω`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{QrmError, Result};

/// Default transition distance without frequency renormalization.
pub const DEFAULT_DC1: f64 = 1.9;

/// Frequency ratios used for the peak-position dataset.
pub const DEFAULT_FIT_GRID: [f64; 9] = [0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gc2Variant {
    /// `(c₁, c₂) = (1.37, −1/8)`, `c₁ = 1/(100 α_FS)` with `α_FS = 1/137`.
    AlphaFs,
    /// `(c₁, c₂) = (4/3, −3/40)`.
    FourThirds,
    /// Third-order fit `(1.3715, −0.1311, 0.0184)`.
    Fitted,
}

impl Gc2Variant {
    pub const ALL: [Gc2Variant; 3] = [Gc2Variant::AlphaFs, Gc2Variant::FourThirds, Gc2Variant::Fitted];

    pub fn coefficients(self) -> &'static [f64] {
        match self {
            Gc2Variant::AlphaFs => &[1.37, -0.125],
            Gc2Variant::FourThirds => &[4.0 / 3.0, -3.0 / 40.0],
            Gc2Variant::Fitted => &[1.3715, -0.1311, 0.0184],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Gc2Variant::AlphaFs => "alphaFS",
            Gc2Variant::FourThirds => "fourThirds",
            Gc2Variant::Fitted => "fitted",
        }
    }
}

impl fmt::Display for Gc2Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Gc2Variant {
    type Err = QrmError;

    fn from_str(s: &str) -> Result<Self> {
        Gc2Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| QrmError::UnknownVariant(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CriticalMethod {
    Gc0,
    Gc1,
    GcXi,
    Gc2(Gc2Variant),
    QfiPeak,
    Acceleration,
}

impl fmt::Display for CriticalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CriticalMethod::Gc0 => f.write_str("gc0"),
            CriticalMethod::Gc1 => f.write_str("gc1"),
            CriticalMethod::GcXi => f.write_str("gcxi"),
            CriticalMethod::Gc2(Gc2Variant::Fitted) => f.write_str("gc2-fitting"),
            CriticalMethod::Gc2(v) => write!(f, "gc2-{v}"),
            CriticalMethod::QfiPeak => f.write_str("qfi-peak"),
            CriticalMethod::Acceleration => f.write_str("a=0"),
        }
    }
}

/// A transition coupling tagged with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalEstimate {
    /// `g_c` in energy units.
    pub value: f64,
    /// `g_c / g_c0`.
    pub ratio: f64,
    pub method: CriticalMethod,
    pub omega_ratio: f64,
}

impl CriticalEstimate {
    pub(crate) fn new(omega: f64, splitting: f64, value: f64, method: CriticalMethod) -> Self {
        CriticalEstimate {
            value,
            ratio: value / gc0_value(omega, splitting),
            method,
            omega_ratio: omega / splitting,
        }
    }
}

fn check_positive(omega: f64, splitting: f64) -> Result<()> {
    if !(omega > 0.0 && splitting > 0.0 && omega.is_finite() && splitting.is_finite()) {
        return Err(QrmError::domain(format!(
            "frequencies must be positive and finite, got ω={omega}, Ω={splitting}"
        )));
    }
    Ok(())
}

fn gc0_value(omega: f64, splitting: f64) -> f64 {
    (omega * splitting).sqrt() / 2.0
}

/// `√(ωΩ)/2`.
pub fn gc0(omega: f64, splitting: f64) -> Result<CriticalEstimate> {
    check_positive(omega, splitting)?;
    Ok(CriticalEstimate::new(omega, splitting, gc0_value(omega, splitting), CriticalMethod::Gc0))
}

/// `√(ω² + √(ω⁴ + g_c0⁴))`.
pub fn gc1(omega: f64, splitting: f64) -> Result<CriticalEstimate> {
    check_positive(omega, splitting)?;
    let g0 = gc0_value(omega, splitting);
    let v = (omega * omega + (omega.powi(4) + g0.powi(4)).sqrt()).sqrt();
    Ok(CriticalEstimate::new(omega, splitting, v, CriticalMethod::Gc1))
}

/// Relative residual of `√(1 − g_c0⁴/g⁴) · √2 g/ω = d / (1 − g_c0⁴/g⁴)^{1/4}`.
pub fn gc_xi_residual(omega: f64, splitting: f64, d_c1: f64, g: f64) -> f64 {
    let g0 = gc0_value(omega, splitting);
    let zeta2 = 1.0 - (g0 / g).powi(4);
    let lhs = zeta2.sqrt() * std::f64::consts::SQRT_2 * g / omega;
    let rhs = d_c1 / zeta2.powf(0.25);
    ((lhs - rhs) / rhs).abs()
}

/// Transition coupling including polaron frequency renormalization.
pub fn gc_xi(omega: f64, splitting: f64, d_c1: f64) -> Result<CriticalEstimate> {
    check_positive(omega, splitting)?;
    if !(d_c1 > 0.0 && d_c1.is_finite()) {
        return Err(QrmError::domain(format!("d_c1 must be > 0, got {d_c1}")));
    }
    let g0 = gc0_value(omega, splitting);
    let wc1 = d_c1 * omega;
    let gt = g0 / wc1;
    let gt4 = gt.powi(4);
    let f = (1.0 + 36.0 * gt4 + 216.0 * gt4 * gt4 + 24.0 * 3f64.sqrt() * gt.powi(6) * (27.0 * gt4 + 1.0).sqrt())
        .powf(1.0 / 12.0);
    let f4 = f.powi(4);
    let v = (g0.powi(4) + wc1.powi(4) / 12.0 * (f4 + 1.0 + (1.0 + 24.0 * gt4) / f4)).powf(0.25);
    let res = gc_xi_residual(omega, splitting, d_c1, v);
    if !(res < 1e-10) {
        return Err(QrmError::NumericalBranch(res));
    }
    Ok(CriticalEstimate::new(omega, splitting, v, CriticalMethod::GcXi))
}

/// `g_c0 [1 + Σ c_n r^{2n/3}]` with the variant's coefficients.
pub fn gc2(omega: f64, splitting: f64, variant: Gc2Variant) -> Result<CriticalEstimate> {
    check_positive(omega, splitting)?;
    let r = omega / splitting;
    let ratio = 1.0 + evaluate_series(variant.coefficients(), Basis::Fractional, r);
    Ok(CriticalEstimate::new(
        omega,
        splitting,
        ratio * gc0_value(omega, splitting),
        CriticalMethod::Gc2(variant),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    /// `{r^{2n/3}}`, n = 1..n_f
    Fractional,
    /// `{r^n}`, n = 1..n_f
    Integer,
}

impl Basis {
    pub fn term(self, r: f64, n: usize) -> f64 {
        match self {
            Basis::Fractional => r.powf(2.0 * n as f64 / 3.0),
            Basis::Integer => r.powi(n as i32),
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::Fractional => "fractional-2/3-powers",
            Basis::Integer => "integer-powers",
        })
    }
}

/// `Σ_{n≥1} c_n b_n(r)`.
pub fn evaluate_series(coeffs: &[f64], basis: Basis, r: f64) -> f64 {
    coeffs.iter().enumerate().map(|(k, c)| c * basis.term(r, k + 1)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub basis: Basis,
    pub order: usize,
    pub coefficients: Vec<f64>,
    pub residual: f64,
    pub data: Vec<(f64, f64)>,
}

/// Least squares of `y ≈ Σ_{n=1}^{order} c_n b_n(r)` by Householder QR.
pub fn fit(data: &[(f64, f64)], order: usize, basis: Basis) -> Result<FitResult> {
    if order == 0 || data.len() < order + 1 {
        return Err(QrmError::RankDeficient {
            needed: order + 1,
            got: data.len(),
        });
    }
    if data.iter().any(|(r, y)| !(r.is_finite() && y.is_finite()) || *r < 0.0) {
        return Err(QrmError::domain("fit data must be finite with r ≥ 0"));
    }
    let m = data.len();
    let x = DMatrix::from_fn(m, order, |i, j| basis.term(data[i].0, j + 1));
    let y = DVector::from_iterator(m, data.iter().map(|d| d.1));
    // column scaling keeps the triangular solve well conditioned
    let scales: Vec<f64> = (0..order).map(|j| x.column(j).norm().max(f64::MIN_POSITIVE)).collect();
    let xs = DMatrix::from_fn(m, order, |i, j| x[(i, j)] / scales[j]);
    let qr = xs.qr();
    let r = qr.r();
    let rmax = r.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if r.diagonal().iter().any(|v| v.abs() <= 1e-12 * rmax) {
        return Err(QrmError::RankDeficient {
            needed: order,
            got: m,
        });
    }
    let qty = qr.q().transpose() * &y;
    let sol = r
        .solve_upper_triangular(&qty)
        .ok_or(QrmError::RankDeficient { needed: order, got: m })?;
    let coefficients: Vec<f64> = sol.iter().zip(&scales).map(|(c, s)| c / s).collect();
    let residual = data
        .iter()
        .map(|(r, y)| (y - evaluate_series(&coefficients, basis, *r)).powi(2))
        .sum();
    Ok(FitResult {
        basis,
        order,
        coefficients,
        residual,
        data: data.to_vec(),
    })
}

/// Fit of `(r, g_c/g_c0 − 1)` on `{r^{2n/3}}`.
pub fn fit_fractional(data: &[(f64, f64)], order: usize) -> Result<FitResult> {
    fit(data, order, Basis::Fractional)
}

/// Fit of `(r, g_c/g_c0 − 1)` on `{r^n}`.
pub fn fit_fourier(data: &[(f64, f64)], order: usize) -> Result<FitResult> {
    fit(data, order, Basis::Integer)
}

/// Low-order series coefficients of `ratio(r) − 1` recovered numerically
/// from samples on a log grid near `r = 0`.
pub fn numeric_series<F: Fn(f64) -> f64>(ratio: F, basis: Basis, wanted: usize, r_min: f64, r_max: f64) -> Result<Vec<f64>> {
    let n = 60;
    let data: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let r = r_min * (r_max / r_min).powf(k as f64 / (n - 1) as f64);
            (r, ratio(r) - 1.0)
        })
        .collect();
    let terms = wanted + 5;
    let f = fit(&data, terms, basis)?;
    Ok(f.coefficients[..wanted].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gc0_values() {
        assert_relative_eq!(gc0(0.1, 1.0).unwrap().value, 0.158113883, epsilon = 1e-9);
        assert_relative_eq!(gc0(1.0, 1.0).unwrap().value, 0.5);
        assert_relative_eq!(gc0(0.3, 2.1).unwrap().value * 2.5, gc0(0.75, 5.25).unwrap().value, max_relative = 1e-14);
        assert!(gc0(0.0, 1.0).is_err());
    }

    #[test]
    fn gc1_values() {
        assert_relative_eq!(gc1(0.1, 1.0).unwrap().value, 0.192161, epsilon = 1e-6);
        assert_relative_eq!(gc1(1e-8, 1.0).unwrap().ratio, 1.0, epsilon = 1e-7);
    }

    #[test]
    fn gc1_taylor_coefficients() {
        let c = numeric_series(|r| gc1(r, 1.0).unwrap().ratio, Basis::Integer, 4, 1e-4, 0.05).unwrap();
        for (got, want) in c.iter().zip([2.0, 2.0, -4.0, -10.0]) {
            assert!((got - want).abs() < 1e-6, "{c:?}");
        }
    }

    #[test]
    fn gc_xi_solves_its_equation() {
        for k in 0..50 {
            let r = 1e-3 * (3e3f64).powf(k as f64 / 49.0);
            let e = gc_xi(r, 1.0, DEFAULT_DC1).unwrap();
            assert!(gc_xi_residual(r, 1.0, DEFAULT_DC1, e.value) < 1e-10);
        }
        assert!((gc_xi(1e-9, 1.0, DEFAULT_DC1).unwrap().ratio - 1.0).abs() < 1e-4);
        assert!(gc_xi(0.1, 1.0, 0.0).is_err());
    }

    #[test]
    fn gc_xi_fractional_coefficients() {
        let d: f64 = DEFAULT_DC1;
        let c = numeric_series(|r| gc_xi(r, 1.0, d).unwrap().ratio, Basis::Fractional, 2, 1e-6, 1e-3).unwrap();
        let want = [(d / 2.0).powf(4.0 / 3.0), 7.0 / 6.0 * (d / 2.0).powf(8.0 / 3.0)];
        assert!((c[0] - want[0]).abs() < 1e-6, "{c:?} vs {want:?}");
        assert!((c[1] - want[1]).abs() < 1e-4, "{c:?} vs {want:?}");
    }

    #[test]
    fn gc2_variants() {
        assert_relative_eq!(gc2(0.1, 1.0, Gc2Variant::AlphaFs).unwrap().ratio, 1.289355, epsilon = 1e-6);
        for v in Gc2Variant::ALL {
            assert_relative_eq!(gc2(1e-12, 1.0, v).unwrap().ratio, 1.0, epsilon = 1e-7);
        }
        let a = gc2(0.1, 1.0, Gc2Variant::AlphaFs).unwrap().ratio;
        let b = gc2(0.1, 1.0, Gc2Variant::FourThirds).unwrap().ratio;
        assert!((a - b).abs() < 1.5e-2);
        assert!(matches!("bogus".parse::<Gc2Variant>(), Err(QrmError::UnknownVariant(_))));
        assert_eq!("alphaFS".parse::<Gc2Variant>().unwrap(), Gc2Variant::AlphaFs);
    }

    #[test]
    fn fit_recovers_synthetic_coefficients() {
        let c = [1.3715, -0.1311, 0.0184];
        let data: Vec<(f64, f64)> = DEFAULT_FIT_GRID
            .iter()
            .map(|&r| (r, evaluate_series(&c, Basis::Fractional, r)))
            .collect();
        let f = fit_fractional(&data, 3).unwrap();
        for (a, b) in f.coefficients.iter().zip(c) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!(f.residual < 1e-20);

        let data: Vec<(f64, f64)> = DEFAULT_FIT_GRID
            .iter()
            .map(|&r| (r, evaluate_series(&[2.0, 2.0], Basis::Integer, r)))
            .collect();
        let f = fit_fourier(&data, 2).unwrap();
        assert!((f.coefficients[0] - 2.0).abs() < 1e-6 && (f.coefficients[1] - 2.0).abs() < 1e-6);

        let zeros: Vec<(f64, f64)> = DEFAULT_FIT_GRID.iter().map(|&r| (r, 0.0)).collect();
        assert!(fit_fourier(&zeros, 3).unwrap().coefficients.iter().all(|c| *c == 0.0));
    }

    #[test]
    fn fit_rejects_too_few_points() {
        let data = [(0.1, 0.2), (0.2, 0.3)];
        assert!(matches!(fit_fractional(&data, 2), Err(QrmError::RankDeficient { .. })));
        let dup = [(0.1, 0.2), (0.1, 0.2), (0.1, 0.2), (0.1, 0.2)];
        assert!(matches!(fit_fractional(&dup, 2), Err(QrmError::RankDeficient { .. })));
    }

    #[test]
    fn gc1_is_the_unrenormalized_limit() {
        // ξ = 1, d_c = 2: √(1 − g_c0⁴/g⁴)·√2 g/ω = 2
        for r in [0.01, 0.1, 0.5, 2.0] {
            let g = gc1(r, 1.0).unwrap().value;
            let g0 = gc0_value(r, 1.0);
            let lhs = (1.0 - (g0 / g).powi(4)).sqrt() * std::f64::consts::SQRT_2 * g / r;
            assert_relative_eq!(lhs, 2.0, max_relative = 1e-12);
        }
    }
}
