//! Two-photon polarization algebra.
//!
//! States live in the product basis `{HH, HV, VH, VV}`, first letter photon 1.
//! Linear polarizers project onto `cos δ |H⟩ + sin δ |V⟩`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use crate::{Complex64, Error, Result};

const NORM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BellKind {
    PsiMinus,
    PsiPlus,
    PhiMinus,
    PhiPlus,
}

/// Normalized two-qubit polarization state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoQubitPolState {
    amps: [Complex64; 4],
}

pub const HH: usize = 0;
pub const HV: usize = 1;
pub const VH: usize = 2;
pub const VV: usize = 3;

impl TwoQubitPolState {
    /// Wrap amplitudes that are already normalized.
    pub fn new(amps: [Complex64; 4]) -> Result<Self> {
        let n = norm_sqr(&amps);
        if !n.is_finite() || (n - 1.0).abs() > NORM_TOL {
            return Err(Error::param(format!(
                "polarization state norm^2 is {n}, expected 1"
            )));
        }
        Ok(TwoQubitPolState { amps })
    }

    /// Rescale arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(amps: [Complex64; 4]) -> Result<Self> {
        let n = norm_sqr(&amps).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::param("cannot normalize a zero or non-finite state"));
        }
        Ok(TwoQubitPolState {
            amps: amps.map(|a| a / n),
        })
    }

    /// Product state `(a_H|H⟩ + a_V|V⟩)₁ ⊗ (b_H|H⟩ + b_V|V⟩)₂`.
    pub fn product(photon1: [Complex64; 2], photon2: [Complex64; 2]) -> Result<Self> {
        Self::normalized([
            photon1[0] * photon2[0],
            photon1[0] * photon2[1],
            photon1[1] * photon2[0],
            photon1[1] * photon2[1],
        ])
    }

    pub fn amps(&self) -> &[Complex64; 4] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amps)
    }

    pub fn with_global_phase(&self, theta: f64) -> Self {
        let g = Complex64::from_polar(1.0, theta);
        TwoQubitPolState {
            amps: self.amps.map(|a| a * g),
        }
    }

    /// The pattern's local action on photon 1: `|H⟩₁ ↦ e^{iφ}|H⟩₁`, `|V⟩₁` unchanged.
    pub fn apply_pattern_phase(&self, phi: f64) -> Self {
        let g = Complex64::from_polar(1.0, phi);
        let mut amps = self.amps;
        amps[HH] *= g;
        amps[HV] *= g;
        TwoQubitPolState { amps }
    }

    /// Amplitude `⟨d(δ₁)|⟨d(δ₂)|ψ⟩`.
    pub fn project_linear(&self, d1: PolarizerAngle, d2: PolarizerAngle) -> Complex64 {
        let (s1, c1) = d1.radians().sin_cos();
        let (s2, c2) = d2.radians().sin_cos();
        // real analyzer vectors: no conjugation needed
        self.amps[HH] * (c1 * c2)
            + self.amps[HV] * (c1 * s2)
            + self.amps[VH] * (s1 * c2)
            + self.amps[VV] * (s1 * s2)
    }

    /// Joint outcome probabilities `[pass-pass, pass-block, block-pass, block-block]`.
    pub fn outcome_probabilities(&self, d1: PolarizerAngle, d2: PolarizerAngle) -> [f64; 4] {
        let (b1, b2) = (d1.orthogonal(), d2.orthogonal());
        [
            self.project_linear(d1, d2).norm_sqr(),
            self.project_linear(d1, b2).norm_sqr(),
            self.project_linear(b1, d2).norm_sqr(),
            self.project_linear(b1, b2).norm_sqr(),
        ]
    }
}

fn norm_sqr(a: &[Complex64; 4]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn make_bell(kind: BellKind) -> TwoQubitPolState {
    let r = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let z = Complex64::new(0.0, 0.0);
    let amps = match kind {
        BellKind::PsiMinus => [z, r, -r, z],
        BellKind::PsiPlus => [z, r, r, z],
        BellKind::PhiMinus => [r, z, z, -r],
        BellKind::PhiPlus => [r, z, z, r],
    };
    TwoQubitPolState { amps }
}

/// Pass-axis angle of an ideal linear polarizer, measured from the x axis,
/// stored in `(-π/2, π/2]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct PolarizerAngle(f64);

impl PolarizerAngle {
    pub fn from_radians(delta: f64) -> Result<Self> {
        if !delta.is_finite() {
            return Err(Error::param("polarizer angle must be finite"));
        }
        Ok(PolarizerAngle(canonical(delta)))
    }

    pub fn from_degrees(deg: f64) -> Result<Self> {
        Self::from_radians(deg.to_radians())
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }

    pub fn orthogonal(self) -> Self {
        PolarizerAngle(canonical(self.0 + FRAC_PI_2))
    }

    /// Diagonal pass axis, `|d⁺⟩` at +45°.
    pub fn diag_plus() -> Self {
        PolarizerAngle(PI / 4.0)
    }

    /// Anti-diagonal pass axis, `|d⁻⟩` at −45°.
    pub fn diag_minus() -> Self {
        PolarizerAngle(-PI / 4.0)
    }
}

fn canonical(delta: f64) -> f64 {
    // map to (-π/2, π/2]
    let mut r = delta.rem_euclid(PI);
    if r > FRAC_PI_2 {
        r -= PI;
    }
    r
}

/// Scalar contrast applied to the two-photon correlation, in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct VisibilityModel(f64);

impl VisibilityModel {
    pub fn new(v: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::param(format!(
                "visibility must lie in [0, 1], got {v}"
            )));
        }
        Ok(VisibilityModel(v))
    }

    pub fn ideal() -> Self {
        VisibilityModel(1.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Two-polarizer correlation `E = V · (P₊₊ − P₊₋ − P₋₊ + P₋₋)`.
pub fn correlation_e(
    state: &TwoQubitPolState,
    theta1: f64,
    theta2: f64,
    vis: VisibilityModel,
) -> Result<f64> {
    let p = state.outcome_probabilities(
        PolarizerAngle::from_radians(theta1)?,
        PolarizerAngle::from_radians(theta2)?,
    );
    Ok(vis.value() * (p[0] - p[1] - p[2] + p[3]))
}

/// Analyzer settings `a, a′` (photon 1) and `b, b′` (photon 2).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChshAngles {
    pub a: PolarizerAngle,
    pub a_prime: PolarizerAngle,
    pub b: PolarizerAngle,
    pub b_prime: PolarizerAngle,
}

impl ChshAngles {
    pub fn from_degrees(a: f64, a_prime: f64, b: f64, b_prime: f64) -> Result<Self> {
        Ok(ChshAngles {
            a: PolarizerAngle::from_degrees(a)?,
            a_prime: PolarizerAngle::from_degrees(a_prime)?,
            b: PolarizerAngle::from_degrees(b)?,
            b_prime: PolarizerAngle::from_degrees(b_prime)?,
        })
    }

    /// 0°, 45°, 22.5°, 67.5°: the settings that saturate the Tsirelson bound
    /// for the singlet.
    pub fn standard() -> Self {
        Self::from_degrees(0.0, 45.0, 22.5, 67.5).expect("finite angles")
    }
}

impl Default for ChshAngles {
    fn default() -> Self {
        Self::standard()
    }
}

/// `S = E(a,b) − E(a,b′) + E(a′,b) + E(a′,b′)`.
pub fn chsh_s(state: &TwoQubitPolState, angles: &ChshAngles, vis: VisibilityModel) -> f64 {
    let e = |x: PolarizerAngle, y: PolarizerAngle| {
        let p = state.outcome_probabilities(x, y);
        vis.value() * (p[0] - p[1] - p[2] + p[3])
    };
    e(angles.a, angles.b) - e(angles.a, angles.b_prime)
        + e(angles.a_prime, angles.b)
        + e(angles.a_prime, angles.b_prime)
}
