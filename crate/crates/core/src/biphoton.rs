//! Two-photon position amplitude of a Gaussian pair source.
//!
//! Photon 1 is found on the plane `z = -s1`, photon 2 on `z = +s2`. Pair
//! creation has amplitude `exp(-(x'^2 + y'^2)/σ^2) exp(-z'^2/w^2)`; in the
//! paraxial regime the source integral factorises into one Gaussian chirp
//! integral per transverse axis. [`closed_form_amplitude`] evaluates its
//! analytic solution and [`quadrature_oracle_amplitude`] integrates the source
//! plane numerically. Both drop every coordinate-independent prefactor and are
//! normalised so that `Φ(0,0;0,0) = 1`.

use std::f64::consts::PI;

use log::warn;

use crate::quadrature::{CompositeRule, QuadSettings};
use crate::{Complex64, Error, Result};

/// Default longitudinal source width. It only enters the unnormalised prefactor.
pub const DEFAULT_W: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceParams {
    lambda: f64,
    k: f64,
    sigma: f64,
    w: f64,
    s1: f64,
    s2: f64,
    alpha: f64,
    beta: f64,
}

impl SourceParams {
    /// Validate and derive `k = 2π/λ` and the envelope coefficients.
    pub fn new(lambda: f64, sigma: f64, s1: f64, s2: f64) -> Result<Self> {
        Self::with_w(lambda, sigma, DEFAULT_W, s1, s2)
    }

    pub fn with_w(lambda: f64, sigma: f64, w: f64, s1: f64, s2: f64) -> Result<Self> {
        for (name, v) in [
            ("lambda", lambda),
            ("sigma", sigma),
            ("w", w),
            ("s1", s1),
            ("s2", s2),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(format!(
                    "{name} must be finite and strictly positive, got {v}"
                )));
            }
        }
        let k = 2.0 * PI / lambda;
        let d = 4.0 * (s1 * s2).powi(2) + (k * k * sigma.powi(4)) * (s1 + s2).powi(2);
        let alpha = (k * s1 * s2 * sigma).powi(2) / d;
        let beta = k.powi(3) * sigma.powi(4) * s1 * s2 * (s1 + s2) / (2.0 * d);
        if !(alpha.is_finite() && beta.is_finite() && alpha > 0.0) {
            return Err(Error::Numeric("source envelope coefficients"));
        }
        let p = SourceParams {
            lambda,
            k,
            sigma,
            w,
            s1,
            s2,
            alpha,
            beta,
        };
        for (name, s) in [("s1", s1), ("s2", s2)] {
            if s < 50.0 * sigma {
                warn!("{name} = {s} m is less than 50 sigma ({} m)", 50.0 * sigma);
            }
            if p.regime_number(s) < 1.0 {
                warn!(
                    "near-field condition k sigma^2 / (2 pi {name}) >= 1 violated ({:.3})",
                    p.regime_number(s)
                );
            }
        }
        Ok(p)
    }

    /// 810 nm photons, σ = 3 mm, s1 = 1.33 m, s2 = 1 m.
    pub fn reference() -> Self {
        Self::new(810e-9, 3e-3, 1.33, 1.0).expect("valid preset")
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn k(&self) -> f64 {
        self.k
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn s1(&self) -> f64 {
        self.s1
    }
    pub fn s2(&self) -> f64 {
        self.s2
    }

    /// `k σ² / (2π s)`, the source-size versus distance figure of merit.
    pub fn regime_number(&self, s: f64) -> f64 {
        self.k * self.sigma * self.sigma / (2.0 * PI * s)
    }

    /// Real and imaginary coefficients of the envelope exponent, so that the
    /// envelope reads `exp(-(alpha + i beta) (X^2 + Y^2))` with
    /// `X = x1/s1 + x2/s2`.
    pub fn envelope_coefficients(&self) -> (f64, f64) {
        (self.alpha, self.beta)
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::with_w(self.lambda, sigma, self.w, self.s1, self.s2)
    }

    pub fn with_distances(&self, s1: f64, s2: f64) -> Result<Self> {
        Self::with_w(self.lambda, self.sigma, self.w, s1, s2)
    }

    /// Constant phase `atan(-k (s1+s2) σ² / (2 s1 s2))` of the analytic
    /// solution. It cancels in every probability.
    pub fn phase_constant(&self) -> f64 {
        (-self.k * (self.s1 + self.s2) * self.sigma * self.sigma / (2.0 * self.s1 * self.s2)).atan()
    }

    /// Natural log of the coordinate-independent magnitude that normalisation
    /// removes, up to the undefined source constants. Dominated by `-(k w)^2`,
    /// which is why it is never exponentiated.
    pub fn unnormalized_log_magnitude(&self) -> f64 {
        let d = 4.0 * (self.s1 * self.s2).powi(2)
            + (self.k * self.k * self.sigma.powi(4)) * (self.s1 + self.s2).powi(2);
        -(self.s1 * self.s2).ln() - 0.5 * d.ln() - (self.k * self.w).powi(2)
    }

    /// One transverse axis of the normalised closed form, `u1` on plane 1
    /// and `u2` on plane 2. The full amplitude is the product of the x and y
    /// factors.
    #[inline]
    pub fn axis_factor(&self, u1: f64, u2: f64) -> Complex64 {
        let x = u1 / self.s1 + u2 / self.s2;
        let x2 = x * x;
        let chirp = 0.5 * self.k * (u1 * u1 / self.s1 + u2 * u2 / self.s2);
        Complex64::from_polar((-self.alpha * x2).exp(), chirp - self.beta * x2)
    }

    pub(crate) fn check_paraxial(&self, coords: &[f64]) {
        let limit = 0.05 * self.s1.min(self.s2);
        if let Some(c) = coords.iter().find(|c| c.abs() > limit) {
            warn!("transverse coordinate {c} m is beyond the paraxial limit {limit} m");
        }
    }
}

/// Normalised value of the two-photon amplitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiphotonAmplitude(pub Complex64);

impl BiphotonAmplitude {
    pub fn value(self) -> Complex64 {
        self.0
    }

    pub fn norm(self) -> f64 {
        self.0.norm()
    }
}

fn finite(z: Complex64, what: &'static str) -> Result<Complex64> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(Error::Numeric(what))
    }
}

pub fn closed_form_amplitude(
    params: &SourceParams,
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
) -> Result<BiphotonAmplitude> {
    params.check_paraxial(&[x1, y1, x2, y2]);
    let z = params.axis_factor(x1, x2) * params.axis_factor(y1, y2);
    Ok(BiphotonAmplitude(finite(z, "closed-form amplitude")?))
}

/// Magnitude from the Gaussian envelope alone, `exp(-alpha (X^2 + Y^2))`.
pub fn envelope_magnitude(params: &SourceParams, x1: f64, y1: f64, x2: f64, y2: f64) -> f64 {
    let x = x1 / params.s1 + x2 / params.s2;
    let y = y1 / params.s1 + y2 / params.s2;
    (-params.alpha * (x * x + y * y)).exp()
}

/// Numerical source-plane integral for one transverse axis.
#[derive(Clone, Debug)]
pub struct SourceQuadrature {
    params: SourceParams,
    rule: CompositeRule,
    weighted_source: Vec<f64>,
    origin: Complex64,
}

impl SourceQuadrature {
    pub fn new(params: &SourceParams, quad: &QuadSettings) -> Result<Self> {
        quad.validate_source()?;
        let half = quad.half_width_sigmas * params.sigma;
        let rule = CompositeRule::symmetric(half, quad.nodes, quad.panel_order);
        let s2 = params.sigma * params.sigma;
        let weighted_source = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&x, &w)| w * (-x * x / s2).exp())
            .collect();
        let mut q = SourceQuadrature {
            params: *params,
            rule,
            weighted_source,
            origin: Complex64::new(1.0, 0.0),
        };
        let origin = q.raw_axis(0.0, 0.0);
        if origin.norm() == 0.0 || !origin.norm().is_finite() {
            return Err(Error::Numeric("source quadrature at the origin"));
        }
        q.origin = origin;
        Ok(q)
    }

    pub fn nodes(&self) -> usize {
        self.rule.len()
    }

    fn raw_axis(&self, u1: f64, u2: f64) -> Complex64 {
        let p = &self.params;
        let (h1, h2) = (0.5 * p.k / p.s1, 0.5 * p.k / p.s2);
        self.rule
            .nodes
            .iter()
            .zip(&self.weighted_source)
            .map(|(&xp, &ws)| {
                let phase = h1 * (u1 - xp).powi(2) + h2 * (u2 - xp).powi(2);
                Complex64::from_polar(ws, phase)
            })
            .sum()
    }

    /// Per-axis integral divided by its value at the origin.
    pub fn axis_factor(&self, u1: f64, u2: f64) -> Complex64 {
        self.raw_axis(u1, u2) / self.origin
    }

    pub fn amplitude(&self, x1: f64, y1: f64, x2: f64, y2: f64) -> Complex64 {
        self.axis_factor(x1, x2) * self.axis_factor(y1, y2)
    }
}

pub fn quadrature_oracle_amplitude(
    params: &SourceParams,
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
    quad: &QuadSettings,
) -> Result<BiphotonAmplitude> {
    params.check_paraxial(&[x1, y1, x2, y2]);
    let z = SourceQuadrature::new(params, quad)?.amplitude(x1, y1, x2, y2);
    let z = finite(z, "quadrature amplitude")?;
    if let Some(tol) = quad.tolerance {
        let fine = SourceQuadrature::new(params, &quad.doubled())?.amplitude(x1, y1, x2, y2);
        let change = (fine - z).norm() / fine.norm().max(f64::MIN_POSITIVE);
        if change > tol {
            return Err(Error::Convergence {
                change,
                tolerance: tol,
            });
        }
    }
    Ok(BiphotonAmplitude(z))
}

/// Peak of `|Φ|` over plane 2 for a fixed point on plane 1.
pub fn anticorrelation_locus(params: &SourceParams, x1: f64, y1: f64) -> (f64, f64) {
    let r = params.s2 / params.s1;
    (-x1 * r, -y1 * r)
}

/// 1/e half-width of `|Φ|^2` in the variable `x1/s1 + x2/s2`.
pub fn correlation_width(params: &SourceParams) -> f64 {
    (0.5 / params.alpha).sqrt()
}
