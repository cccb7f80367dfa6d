//! Closed-form amplitude against a direct two-dimensional trapezoid sum over
//! the source plane. The sum is not factorised into x and y and shares no code
//! with the library quadrature.

use hyperghost::biphoton::{closed_form_amplitude, SourceParams};
use hyperghost::Complex64;

fn brute(p: &SourceParams, x1: f64, y1: f64, x2: f64, y2: f64) -> Complex64 {
    let (k, s1, s2, sig) = (p.k(), p.s1(), p.s2(), p.sigma());
    let n = 2001;
    let half = 5.0 * sig;
    let h = 2.0 * half / (n - 1) as f64;
    let coords: Vec<f64> = (0..n).map(|i| -half + h * i as f64).collect();
    let mut sum = Complex64::new(0.0, 0.0);
    for &yp in &coords {
        for &xp in &coords {
            let r2 = xp * xp + yp * yp;
            let d1 = (x1 - xp).powi(2) + (y1 - yp).powi(2);
            let d2 = (x2 - xp).powi(2) + (y2 - yp).powi(2);
            let phase = 0.5 * k * (d1 / s1 + d2 / s2);
            sum += Complex64::from_polar((-r2 / (sig * sig)).exp(), phase);
        }
    }
    sum
}

#[test]
fn direct_double_sum_agrees_with_closed_form() {
    let p = SourceParams::reference();
    let origin = brute(&p, 0.0, 0.0, 0.0, 0.0);
    let points = [
        (1e-3, 0.0, -0.5e-3, 0.0),
        (-2e-3, 1e-3, 1.5e-3, -0.75e-3),
        (0.3e-3, -1.2e-3, 2e-3, 2e-3),
    ];
    for (x1, y1, x2, y2) in points {
        let want = brute(&p, x1, y1, x2, y2) / origin;
        let got = closed_form_amplitude(&p, x1, y1, x2, y2).unwrap().value();
        let rel = (got - want).norm() / got.norm();
        assert!(
            rel < 1e-6,
            "({x1},{y1},{x2},{y2}): {got} vs {want}, rel {rel:e}"
        );
    }
}
