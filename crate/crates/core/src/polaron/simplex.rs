//! Nelder–Mead simplex minimization with a finite-difference Newton polish.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub max_evals: usize,
    /// Spread of function values across the simplex at convergence.
    pub f_tol: f64,
    /// Simplex diameter at convergence.
    pub x_tol: f64,
    pub initial_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_evals: 20_000,
            f_tol: 1e-15,
            x_tol: 1e-9,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], opts: &SimplexOptions) -> Minimum {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += opts.initial_step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    let mut evals = n + 1;
    let mut converged = false;

    while evals < opts.max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = vals[n] - vals[0];
        let diam = pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
            .fold(0.0f64, f64::max);
        if spread <= opts.f_tol * (1.0 + vals[0].abs()) && diam <= opts.x_tol {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n).map(|k| pts[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|k| centroid[k] + t * (pts[n][k] - centroid[k])).collect() };

        let xr = along(-1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let x = along(-0.5);
            let v = f(&x);
            (x, v)
        } else {
            let x = along(0.5);
            let v = f(&x);
            (x, v)
        };
        evals += 1;
        if fc < vals[n].min(fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        // shrink toward the best vertex
        let (head, rest) = pts.split_at_mut(1);
        for (p, v) in rest.iter_mut().zip(vals[1..].iter_mut()) {
            for (x, b) in p.iter_mut().zip(&head[0]) {
                *x = b + 0.5 * (*x - b);
            }
            *v = f(p);
        }
        evals += n;
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    Minimum {
        x: pts[best].clone(),
        f: vals[best],
        evals,
        converged,
    }
}

/// Damped Newton iterations with finite-difference gradient and Hessian.
/// Only steps that lower `f` are accepted.
pub fn newton_polish<F: Fn(&[f64]) -> f64>(f: &F, start: &Minimum, max_iter: usize) -> Minimum {
    let n = start.x.len();
    let mut x = start.x.clone();
    let mut fx = start.f;
    let mut evals = start.evals;
    let hg = 1e-5;
    let hh = 1e-4;
    let shifted = |x: &[f64], i: usize, di: f64, j: usize, dj: f64| -> Vec<f64> {
        let mut y = x.to_vec();
        y[i] += di;
        y[j] += dj;
        y
    };
    for _ in 0..max_iter {
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            let fp = f(&shifted(&x, i, hg, i, 0.0));
            let fm = f(&shifted(&x, i, -hg, i, 0.0));
            g[i] = (fp - fm) / (2.0 * hg);
            let fp = f(&shifted(&x, i, hh, i, 0.0));
            let fm = f(&shifted(&x, i, -hh, i, 0.0));
            h[(i, i)] = (fp - 2.0 * fx + fm) / (hh * hh);
            evals += 4;
            for j in 0..i {
                let v = (f(&shifted(&x, i, hh, j, hh)) - f(&shifted(&x, i, hh, j, -hh))
                    - f(&shifted(&x, i, -hh, j, hh))
                    + f(&shifted(&x, i, -hh, j, -hh)))
                    / (4.0 * hh * hh);
                h[(i, j)] = v;
                h[(j, i)] = v;
                evals += 4;
            }
        }
        let scale = h.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let mut lambda = 0.0;
        let mut accepted = false;
        let mut step_norm = 0.0;
        for _ in 0..30 {
            let damped = &h + DMatrix::identity(n, n) * lambda;
            if let Some(chol) = damped.cholesky() {
                let step = chol.solve(&(-&g));
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                let ft = f(&trial);
                evals += 1;
                if ft <= fx {
                    step_norm = step.norm();
                    x = trial;
                    fx = ft;
                    accepted = true;
                    break;
                }
            }
            lambda = if lambda == 0.0 { 1e-8 * scale } else { lambda * 10.0 };
        }
        if !accepted || step_norm < 1e-12 {
            break;
        }
    }
    Minimum {
        x,
        f: fx,
        evals,
        converged: start.converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = nelder_mead(&f, &[-1.2, 1.0], &SimplexOptions::default());
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6);
        let p = newton_polish(&f, &m, 20);
        assert!((p.x[0] - 1.0).abs() < 1e-9 && (p.x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn quadratic_bowl_5d() {
        let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * (v - 0.3).powi(2)).sum::<f64>();
        let m = newton_polish(&f, &nelder_mead(&f, &[0.0; 5], &SimplexOptions::default()), 10);
        assert!(m.x.iter().all(|v| (v - 0.3).abs() < 1e-9));
    }
}
