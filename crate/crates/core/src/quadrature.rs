//! Adaptive Simpson quadrature, used as the oracle for closed-form
//! Gaussian matrix elements.

/// Integral of `f` over `[a, b]` with relative tolerance `rel_tol`.
///
/// The interval is first split into `panels` pieces; the absolute target is
/// `rel_tol` times the coarse estimate of `∫|f|`, so integrands of any
/// magnitude get the same relative accuracy.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    integrate_panels(&f, a, b, rel_tol, 64)
}

pub fn integrate_panels<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64, panels: usize) -> f64 {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut pieces = Vec::with_capacity(panels);
    let mut scale = 0.0;
    for k in 0..panels {
        let lo = a + k as f64 * h;
        let hi = lo + h;
        let mid = 0.5 * (lo + hi);
        let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
        let whole = h / 6.0 * (flo + 4.0 * fmid + fhi);
        scale += h / 6.0 * (flo.abs() + 4.0 * fmid.abs() + fhi.abs());
        pieces.push((lo, hi, flo, fmid, fhi, whole));
    }
    if scale == 0.0 {
        // refine once on a finer grid before declaring the integral zero
        if panels < 4096 {
            return integrate_panels(f, a, b, rel_tol, panels * 16);
        }
        return 0.0;
    }
    let eps = rel_tol * scale / panels as f64;
    pieces
        .into_iter()
        .map(|(lo, hi, flo, fmid, fhi, whole)| simpson(f, lo, hi, flo, fmid, fhi, whole, eps, 40))
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
}

/// Half-width of the oracle integration window for Gaussians with the given
/// centres and widths: `max(12, max|x_i| + 8/√ξ_min)`.
pub fn window(centers: &[f64], xis: &[f64]) -> f64 {
    let xmax = centers.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let xi_min = xis.iter().cloned().fold(f64::INFINITY, f64::min);
    (xmax + 8.0 / xi_min.sqrt()).max(12.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gaussian_integral() {
        let v = integrate(|x| (-x * x).exp(), -12.0, 12.0, 1e-12);
        assert_relative_eq!(v, std::f64::consts::PI.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn tiny_narrow_bump_keeps_relative_accuracy() {
        let v = integrate(|x| 1e-80 * (-50.0 * (x - 3.0).powi(2)).exp(), -20.0, 20.0, 1e-12);
        assert_relative_eq!(v, 1e-80 * (std::f64::consts::PI / 50.0).sqrt(), max_relative = 1e-10);
    }

    #[test]
    fn polynomial_exact() {
        let v = integrate(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 1e-12);
        assert_relative_eq!(v, 2.0, max_relative = 1e-13);
    }
}
