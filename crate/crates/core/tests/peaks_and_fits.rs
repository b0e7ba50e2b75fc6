use std::sync::OnceLock;

use rayon::prelude::*;

use qrm::critical::{fit, fit_fourier, fit_fractional, gc1, gc2, gc_xi, Basis, Gc2Variant, DEFAULT_DC1, DEFAULT_FIT_GRID};
use qrm::qfi::{find_peak, PeakEstimate, PeakOptions, QfiMethod};

fn peaks() -> &'static [(f64, PeakEstimate)] {
    static PEAKS: OnceLock<Vec<(f64, PeakEstimate)>> = OnceLock::new();
    PEAKS.get_or_init(|| {
        let opts = PeakOptions {
            gbar_min: 0.5,
            gbar_max: 2.2,
            ..PeakOptions::default()
        };
        DEFAULT_FIT_GRID
            .par_iter()
            .map(|&r| (r, find_peak(r, 1.0, QfiMethod::Ed, &opts).unwrap()))
            .collect()
    })
}

fn data() -> Vec<(f64, f64)> {
    peaks().iter().map(|(r, p)| (*r, p.gbar_cf - 1.0)).collect()
}

#[test]
fn peak_tracks_second_order_coupling_at_tenth() {
    let (_, p) = peaks().iter().find(|(r, _)| *r == 0.1).unwrap();
    assert!((p.gbar_cf / 1.289355 - 1.0).abs() < 0.01, "{}", p.gbar_cf);
    assert!(!p.flat);
}

/// At ω/Ω = 0.005 the peak sits near g_c2 ≈ 1.04 g_c0, so the approach to
/// g_c0 is checked one decade lower.
#[test]
fn peak_approaches_gc0_at_low_frequency() {
    let opts = PeakOptions {
        gbar_min: 0.9,
        gbar_max: 1.15,
        scan_points: 26,
        ..PeakOptions::default()
    };
    let p = find_peak(0.001, 1.0, QfiMethod::Ed, &opts).unwrap();
    assert!((p.gbar_cf - 1.0).abs() < 0.02, "{}", p.gbar_cf);
}

#[test]
fn peak_height_grows_as_frequency_drops() {
    let heights: Vec<f64> = peaks().iter().map(|(_, p)| p.f_q_max).collect();
    assert!(heights.windows(2).all(|w| w[0] > w[1]), "{heights:?}");
}

#[test]
fn peaks_sit_between_closed_forms() {
    for (r, p) in peaks().iter().filter(|(r, _)| *r <= 0.1) {
        let lo = gc1(*r, 1.0).unwrap().ratio;
        let mid = gc_xi(*r, 1.0, DEFAULT_DC1).unwrap().ratio;
        assert!(lo < mid && mid < p.gbar_cf, "ω/Ω = {r}: g_c1 {lo}, g_cξ {mid}, g_cF {}", p.gbar_cf);
    }
    for (r, p) in peaks() {
        let g2 = gc2(*r, 1.0, Gc2Variant::AlphaFs).unwrap().ratio;
        assert!((p.gbar_cf / g2 - 1.0).abs() < 0.01, "ω/Ω = {r}");
    }
}

#[test]
fn fractional_fit_recovers_leading_coefficient() {
    let d = data();
    let f2 = fit_fractional(&d, 2).unwrap();
    let f3 = fit_fractional(&d, 3).unwrap();
    let f4 = fit_fractional(&d, 4).unwrap();
    assert!((f3.coefficients[0] / 1.3715 - 1.0).abs() < 0.1, "{:?}", f3.coefficients);
    assert!(f2.residual < 1e-6, "n_f = 2 residual {}", f2.residual);
    let c = (f4.coefficients[0] / f2.coefficients[0] - 1.0).abs();
    assert!(c < 0.1, "c1 moves by {c} from n_f = 2 to 4");
}

#[test]
fn residuals_do_not_grow_with_order() {
    let d = data();
    for basis in [Basis::Fractional, Basis::Integer] {
        let res: Vec<f64> = (2..=8).map(|n| fit(&d, n, basis).unwrap().residual).collect();
        assert!(res.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-6) + 1e-20), "{basis}: {res:?}");
    }
    for n in 2..=3 {
        assert!(fit_fractional(&d, n).unwrap().residual <= fit_fourier(&d, n).unwrap().residual);
    }
    assert!(fit(&d, 9, Basis::Integer).is_err());
}

#[test]
fn fractional_basis_beats_integer_basis() {
    let d = data();
    let frac = fit_fractional(&d, 2).unwrap().residual;
    let int = fit_fourier(&d, 2).unwrap().residual;
    assert!(5.0 * frac < int, "{frac} vs {int}");
}

#[test]
fn zero_deviation_gives_zero_coefficients() {
    let d: Vec<(f64, f64)> = DEFAULT_FIT_GRID.iter().map(|&r| (r, 0.0)).collect();
    for basis in [Basis::Fractional, Basis::Integer] {
        let f = fit(&d, 3, basis).unwrap();
        assert!(f.coefficients.iter().all(|c| c.abs() < 1e-14) && f.residual == 0.0);
    }
}
