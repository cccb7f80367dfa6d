//! Ghost interference and ghost imaging coincidence maps.

use std::f64::consts::FRAC_1_SQRT_2;

use log::warn;

use crate::biphoton::SourceParams;
use crate::grid::{axis, GridSpec};
use crate::optics::{ghost_magnification, ImagingSystem, LensSystem};
use crate::polarization::{make_bell, BellKind, PolarizerAngle};
use crate::quadrature::{GaussLegendre, QuadSettings};
use crate::{Complex64, Error, Exec, Result};

pub mod analysis;

/// Minimum pixels per fringe period along the slit axis.
pub const MIN_PIXELS_PER_FRINGE: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlitAxis {
    X,
    Y,
}

/// Double slit on the object plane. `slit_width = 0` means ideal delta slits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DoubleSlit {
    pub d: f64,
    pub axis: SlitAxis,
    pub slit_width: f64,
    pub center: f64,
}

impl DoubleSlit {
    pub fn new(d: f64, axis: SlitAxis, slit_width: f64, center: f64) -> Result<Self> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::param("slit separation must be positive"));
        }
        if !(slit_width >= 0.0 && slit_width < d) {
            return Err(Error::param(format!(
                "slit width must satisfy 0 <= width < d, got {slit_width}"
            )));
        }
        if !center.is_finite() {
            return Err(Error::param("slit center must be finite"));
        }
        Ok(DoubleSlit {
            d,
            axis,
            slit_width,
            center,
        })
    }

    /// Delta slits separated by `d`, centred on the axis.
    pub fn ideal(d: f64, axis: SlitAxis) -> Result<Self> {
        Self::new(d, axis, 0.0, 0.0)
    }

    /// Expected fringe period `λ (s1 + s2) / d` on the interference plane.
    pub fn fringe_period(&self, params: &SourceParams) -> f64 {
        params.lambda() * (params.s1() + params.s2()) / self.d
    }
}

/// Pixelated polarization-sensitive phase pattern on the object plane.
///
/// `phase` and `aperture` are row-major with one row per y sample.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePattern {
    pub nx: usize,
    pub ny: usize,
    pub pitch: f64,
    /// Object-plane coordinates of the centre of pixel (0, 0).
    pub origin: (f64, f64),
    pub phase: Vec<f64>,
    pub aperture: Vec<f64>,
}

impl PhasePattern {
    pub fn new(
        nx: usize,
        ny: usize,
        pitch: f64,
        origin: (f64, f64),
        phase: Vec<f64>,
        aperture: Vec<f64>,
    ) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::param("pattern grid is empty"));
        }
        if phase.len() != nx * ny || aperture.len() != nx * ny {
            return Err(Error::GridMismatch(format!(
                "pattern is {nx}x{ny} but has {} phase and {} aperture values",
                phase.len(),
                aperture.len()
            )));
        }
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(Error::param("pattern pitch must be positive"));
        }
        if phase.iter().any(|p| !p.is_finite()) {
            return Err(Error::param("pattern phase must be finite"));
        }
        if aperture.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::param("pattern aperture must lie in [0, 1]"));
        }
        Ok(PhasePattern {
            nx,
            ny,
            pitch,
            origin,
            phase,
            aperture,
        })
    }

    /// Pattern centred on the optical axis with a fully open aperture.
    pub fn centered(nx: usize, ny: usize, pitch: f64, phase: Vec<f64>) -> Result<Self> {
        let origin = (
            -0.5 * pitch * (nx as f64 - 1.0),
            -0.5 * pitch * (ny as f64 - 1.0),
        );
        Self::new(nx, ny, pitch, origin, phase, vec![1.0; nx * ny])
    }

    /// Centred pattern with `φ = f(x, y)` at each pixel centre.
    pub fn from_fn(nx: usize, ny: usize, pitch: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let ox = -0.5 * pitch * (nx as f64 - 1.0);
        let oy = -0.5 * pitch * (ny as f64 - 1.0);
        let mut phase = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                phase.push(f(ox + pitch * i as f64, oy + pitch * j as f64));
            }
        }
        Self::centered(nx, ny, pitch, phase)
    }

    pub fn uniform(nx: usize, ny: usize, pitch: f64, phi: f64) -> Result<Self> {
        Self::centered(nx, ny, pitch, vec![phi; nx * ny])
    }

    pub fn xs(&self) -> Vec<f64> {
        axis(self.nx, self.origin.0, self.pitch)
    }

    pub fn ys(&self) -> Vec<f64> {
        axis(self.ny, self.origin.1, self.pitch)
    }

    /// Full width and height, pixel edges included.
    pub fn extent(&self) -> (f64, f64) {
        (self.pitch * self.nx as f64, self.pitch * self.ny as f64)
    }

    /// Centre of the pattern.
    pub fn center(&self) -> (f64, f64) {
        (
            self.origin.0 + 0.5 * self.pitch * (self.nx as f64 - 1.0),
            self.origin.1 + 0.5 * self.pitch * (self.ny as f64 - 1.0),
        )
    }

    /// Same pattern with every phase shifted by `delta`.
    pub fn phase_shifted(&self, delta: f64) -> Self {
        PhasePattern {
            phase: self.phase.iter().map(|p| p + delta).collect(),
            ..self.clone()
        }
    }

    /// Pattern rotated by +90° about the optical axis, `(x, y) ↦ (-y, x)`.
    pub fn rotated_90(&self) -> Self {
        let (nx, ny) = (self.ny, self.nx);
        let origin = (
            -(self.origin.1 + self.pitch * (self.ny as f64 - 1.0)),
            self.origin.0,
        );
        let (phase, aperture) = (
            rotate_grid(&self.phase, self.nx, self.ny),
            rotate_grid(&self.aperture, self.nx, self.ny),
        );
        PhasePattern {
            nx,
            ny,
            pitch: self.pitch,
            origin,
            phase,
            aperture,
        }
    }

    /// Each pixel split into `factor x factor` sub-pixels with the same
    /// phase and transmission.
    pub fn supersampled(&self, factor: usize) -> Self {
        assert!(factor >= 1);
        let f = factor as f64;
        let pitch = self.pitch / f;
        let shift = 0.5 * (self.pitch - pitch);
        let (nx, ny) = (self.nx * factor, self.ny * factor);
        let mut phase = Vec::with_capacity(nx * ny);
        let mut aperture = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let src = (j / factor) * self.nx + i / factor;
                phase.push(self.phase[src]);
                aperture.push(self.aperture[src]);
            }
        }
        PhasePattern {
            nx,
            ny,
            pitch,
            origin: (self.origin.0 - shift, self.origin.1 - shift),
            phase,
            aperture,
        }
    }
}

/// Rotate a row-major `nx x ny` grid by +90°: output is `ny x nx`.
pub(crate) fn rotate_grid<T: Copy>(src: &[T], nx: usize, ny: usize) -> Vec<T> {
    let (nx2, ny2) = (ny, nx);
    let mut out = Vec::with_capacity(src.len());
    for j2 in 0..ny2 {
        for i2 in 0..nx2 {
            out.push(src[(ny - 1 - i2) * nx + j2]);
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MapMeta {
    /// Polarizer pass axes `(δ1, δ2)`, or `None` without polarizers.
    pub polarizers: Option<(PolarizerAngle, PolarizerAngle)>,
    /// Peak of the map before normalisation, in the normalised-amplitude
    /// units of the producing model.
    pub raw_peak: f64,
    pub note: String,
}

/// Nonnegative map over the detection plane, normalised to unit peak.
#[derive(Clone, Debug, PartialEq)]
pub struct CoincidenceMap {
    pub nx: usize,
    pub ny: usize,
    pub pitch: (f64, f64),
    pub origin: (f64, f64),
    /// Row-major, one row per y sample.
    pub values: Vec<f64>,
    pub meta: MapMeta,
}

impl CoincidenceMap {
    /// Normalise `raw` to unit peak. An identically zero map stays zero.
    pub fn from_raw(grid: &GridSpec, raw: Vec<f64>, meta: MapMeta) -> Result<Self> {
        Self::from_raw_parts(grid.nx, grid.ny, grid.pitch(), grid.origin(), raw, meta)
    }

    pub fn from_raw_parts(
        nx: usize,
        ny: usize,
        pitch: (f64, f64),
        origin: (f64, f64),
        mut raw: Vec<f64>,
        mut meta: MapMeta,
    ) -> Result<Self> {
        if raw.len() != nx * ny {
            return Err(Error::GridMismatch(format!(
                "{} values for a {nx}x{ny} map",
                raw.len()
            )));
        }
        if raw.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Numeric("coincidence map values"));
        }
        let peak = raw.iter().cloned().fold(0.0, f64::max);
        if peak > 0.0 {
            raw.iter_mut().for_each(|v| *v /= peak);
        }
        meta.raw_peak = peak;
        Ok(CoincidenceMap {
            nx,
            ny,
            pitch,
            origin,
            values: raw,
            meta,
        })
    }

    pub fn xs(&self) -> Vec<f64> {
        axis(self.nx, self.origin.0, self.pitch.0)
    }

    pub fn ys(&self) -> Vec<f64> {
        axis(self.ny, self.origin.1, self.pitch.1)
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.nx..(j + 1) * self.nx]
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.ny).map(|j| self.at(i, j)).collect()
    }

    /// Values rescaled back to pre-normalisation units.
    pub fn raw(&self) -> Vec<f64> {
        self.values.iter().map(|v| v * self.meta.raw_peak).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        same_grid(
            (self.nx, self.ny, self.pitch, self.origin),
            (other.nx, other.ny, other.pitch, other.origin),
        )
    }

    /// Map rotated by +90°, `(x, y) ↦ (-y, x)`.
    pub fn rotated_90(&self) -> Self {
        CoincidenceMap {
            nx: self.ny,
            ny: self.nx,
            pitch: (self.pitch.1, self.pitch.0),
            origin: (
                -(self.origin.1 + self.pitch.1 * (self.ny as f64 - 1.0)),
                self.origin.0,
            ),
            values: rotate_grid(&self.values, self.nx, self.ny),
            meta: self.meta.clone(),
        }
    }
}

fn same_grid(
    a: (usize, usize, (f64, f64), (f64, f64)),
    b: (usize, usize, (f64, f64), (f64, f64)),
) -> bool {
    let close =
        |x: f64, y: f64, scale: f64| (x - y).abs() <= 1e-9 * scale.abs().max(f64::MIN_POSITIVE);
    a.0 == b.0
        && a.1 == b.1
        && close(a.2 .0, b.2 .0, a.2 .0)
        && close(a.2 .1, b.2 .1, a.2 .1)
        && close(a.3 .0, b.3 .0, a.2 .0)
        && close(a.3 .1, b.3 .1, a.2 .1)
}

/// Map whose values may be negative, e.g. after background subtraction.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedMap {
    pub nx: usize,
    pub ny: usize,
    pub pitch: (f64, f64),
    pub origin: (f64, f64),
    pub values: Vec<f64>,
}

impl SignedMap {
    /// Divide by the largest absolute value (unchanged if all zero).
    pub fn normalized(&self) -> Self {
        let m = self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut out = self.clone();
        if m > 0.0 {
            out.values.iter_mut().for_each(|v| *v /= m);
        }
        out
    }
}

/// Pixel-wise `signal - background` in raw (pre-normalisation) units.
pub fn background_subtract(
    signal: &CoincidenceMap,
    background: &CoincidenceMap,
) -> Result<SignedMap> {
    if !signal.same_grid(background) {
        return Err(Error::GridMismatch(format!(
            "signal {}x{} and background {}x{} maps are sampled differently",
            signal.nx, signal.ny, background.nx, background.ny
        )));
    }
    let values = signal
        .raw()
        .iter()
        .zip(background.raw())
        .map(|(s, b)| s - b)
        .collect();
    Ok(SignedMap {
        nx: signal.nx,
        ny: signal.ny,
        pitch: signal.pitch,
        origin: signal.origin,
        values,
    })
}

/// Coincidence map behind a double slit on the object plane, with the camera
/// directly on the plane `z = s2` (no imaging lens).
pub fn ghost_interference_map(
    params: &SourceParams,
    slit: &DoubleSlit,
    plane_grid: &GridSpec,
    exec: Exec,
) -> Result<CoincidenceMap> {
    plane_grid.validate()?;
    let period = slit.fringe_period(params);
    let pitch = match slit.axis {
        SlitAxis::X => plane_grid.pitch().0,
        SlitAxis::Y => plane_grid.pitch().1,
    };
    if period / pitch < MIN_PIXELS_PER_FRINGE {
        return Err(Error::Sampling(format!(
            "{:.2} pixels per fringe period {period:.3e} m, need at least {MIN_PIXELS_PER_FRINGE}",
            period / pitch
        )));
    }
    let xs = plane_grid.xs();
    let ys = plane_grid.ys();
    let (x0, y0) = plane_grid.origin();
    params.check_paraxial(&[x0, y0, x0 + plane_grid.extent_x, y0 + plane_grid.extent_y]);
    let positions = [slit.center + 0.5 * slit.d, slit.center - 0.5 * slit.d];

    // Each slit contributes ∫ Φ(x1, 0; x2, y2) dx1 over its opening, which
    // separates into (along-axis factor) x (cross-axis factor at x1 = 0).
    let gl = GaussLegendre::new(16);
    let along = |coord2: f64| -> Complex64 {
        let mut sum = Complex64::new(0.0, 0.0);
        for &c in &positions {
            if slit.slit_width == 0.0 {
                sum += params.axis_factor(c, coord2);
            } else {
                let (panels, h) = (8usize, slit.slit_width / 8.0);
                let lo = c - 0.5 * slit.slit_width;
                let mut s = Complex64::new(0.0, 0.0);
                for p in 0..panels {
                    let mid = lo + h * (p as f64 + 0.5);
                    for (&t, &w) in gl.nodes().iter().zip(gl.weights()) {
                        s += params.axis_factor(mid + 0.5 * h * t, coord2) * (0.5 * h * w);
                    }
                }
                sum += s / slit.slit_width;
            }
        }
        sum * FRAC_1_SQRT_2
    };

    let (fa, fc): (Vec<Complex64>, Vec<Complex64>) = match slit.axis {
        SlitAxis::X => (
            xs.iter().map(|&x| along(x)).collect(),
            ys.iter().map(|&y| params.axis_factor(0.0, y)).collect(),
        ),
        SlitAxis::Y => (
            ys.iter().map(|&y| along(y)).collect(),
            xs.iter().map(|&x| params.axis_factor(0.0, x)).collect(),
        ),
    };
    let nx = plane_grid.nx;
    let raw: Vec<f64> = exec
        .map_indexed(plane_grid.ny, |j| {
            (0..nx)
                .map(|i| match slit.axis {
                    SlitAxis::X => (fa[i] * fc[j]).norm_sqr(),
                    SlitAxis::Y => (fa[j] * fc[i]).norm_sqr(),
                })
                .collect::<Vec<f64>>()
        })
        .into_iter()
        .flatten()
        .collect();
    CoincidenceMap::from_raw(
        plane_grid,
        raw,
        MapMeta {
            polarizers: None,
            raw_peak: 0.0,
            note: format!(
                "ghost interference, d={} m, axis={:?}, slit_width={} m",
                slit.d, slit.axis, slit.slit_width
            ),
        },
    )
}

/// Per-pixel polarization coefficient `⟨d(δ1)|⟨d(δ2)| (e^{iφ}|HV⟩ - |VH⟩)/√2`.
pub fn polarization_coefficient(phi: f64, d1: PolarizerAngle, d2: PolarizerAngle) -> Complex64 {
    make_bell(BellKind::PsiMinus)
        .apply_pattern_phase(phi)
        .project_linear(d1, d2)
}

/// Ghost image of a phase pattern for polarizer settings `(δ1, δ2)`.
///
/// Each pattern pixel contributes `a_p1 · c(φ) · Φ_I · pitch²` (midpoint rule)
/// to the amplitude at every image pixel; the map is `|amplitude|²`
/// normalised to unit peak, with the raw peak kept in the metadata.
#[allow(clippy::too_many_arguments)]
pub fn ghost_image_map(
    params: &SourceParams,
    lens: &LensSystem,
    pattern: &PhasePattern,
    d1: PolarizerAngle,
    d2: PolarizerAngle,
    image_grid: &GridSpec,
    quad: &QuadSettings,
    exec: Exec,
) -> Result<CoincidenceMap> {
    let sys = ImagingSystem::new(params, lens, quad)?;
    ghost_image_map_with(&sys, pattern, d1, d2, image_grid, exec)
}

/// [`ghost_image_map`] with a prepared lens-plane quadrature, for evaluating
/// several maps through the same optics.
pub fn ghost_image_map_with(
    sys: &ImagingSystem,
    pattern: &PhasePattern,
    d1: PolarizerAngle,
    d2: PolarizerAngle,
    image_grid: &GridSpec,
    exec: Exec,
) -> Result<CoincidenceMap> {
    image_grid.validate()?;
    let params = sys.params();
    check_pattern_sampling(sys, pattern)?;
    let xs1 = pattern.xs();
    let ys1 = pattern.ys();
    params.check_paraxial(&[xs1[0], xs1[pattern.nx - 1], ys1[0], ys1[pattern.ny - 1]]);
    let area = pattern.pitch * pattern.pitch;
    let weights: Vec<Complex64> = pattern
        .phase
        .iter()
        .zip(&pattern.aperture)
        .map(|(&phi, &a)| {
            if a == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                polarization_coefficient(phi, d1, d2) * (a * area)
            }
        })
        .collect();
    let raw: Vec<f64> = if weights.iter().all(|w| w.re == 0.0 && w.im == 0.0) {
        vec![0.0; image_grid.len()]
    } else {
        sys.image_field(
            &xs1,
            &ys1,
            &weights,
            &image_grid.xs(),
            &image_grid.ys(),
            exec,
        )
        .iter()
        .map(|z| z.norm_sqr())
        .collect()
    };
    CoincidenceMap::from_raw(
        image_grid,
        raw,
        MapMeta {
            polarizers: Some((d1, d2)),
            raw_peak: 0.0,
            note: format!(
                "ghost image, delta1={:.4} deg, delta2={:.4} deg, {}x{} pattern",
                d1.degrees(),
                d2.degrees(),
                pattern.nx,
                pattern.ny
            ),
        },
    )
}

/// The pattern must be resolved at least as finely as the optics can image:
/// a pixel larger than the object-space 1/e radius of the point response is
/// flagged.
fn check_pattern_sampling(sys: &ImagingSystem, pattern: &PhasePattern) -> Result<()> {
    let params = sys.params();
    let lens = sys.lens();
    // effective lens-plane radius: the smaller of the aperture and the source
    // envelope's 1/e amplitude half-width on the lens plane
    let (alpha, _) = params.envelope_coefficients();
    let envelope = params.s2() / alpha.sqrt();
    let radius = lens.aperture.reach().min(envelope);
    let resolution = lens.u / (params.k() * radius);
    if pattern.pitch > 2.0 * resolution {
        warn!(
            "pattern pitch {:.3e} m is coarser than the imaging resolution {:.3e} m",
            pattern.pitch, resolution
        );
    }
    Ok(())
}

/// Image grid spanning the magnified pattern (pixel centre to pixel centre).
pub fn image_grid_for(
    params: &SourceParams,
    lens: &LensSystem,
    pattern: &PhasePattern,
    nx: usize,
    ny: usize,
) -> Result<GridSpec> {
    let m = ghost_magnification(params, lens)?;
    let w = pattern.pitch * (pattern.nx as f64 - 1.0);
    let h = pattern.pitch * (pattern.ny as f64 - 1.0);
    let (cx, cy) = pattern.center();
    // image is inverted about the axis
    GridSpec::centered_at(nx, ny, m * w, m * h, -m * cx, -m * cy)
}

#[cfg(test)]
mod tests {
    use super::analysis::*;
    use super::*;
    use crate::optics::Aperture;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn reference_interference_grid() -> GridSpec {
        GridSpec::new(512, 128, 6e-3, 2e-3).unwrap()
    }

    fn imaging_setup(radius: f64) -> (SourceParams, LensSystem) {
        let p = SourceParams::new(810e-9, 3e-3, 1.33, 1.5).unwrap();
        let l = LensSystem::for_source(&p, 1.5, Aperture::circular(radius).unwrap()).unwrap();
        (p, l)
    }

    fn bar_pattern(n: usize, pitch: f64) -> PhasePattern {
        // π inside a centred vertical bar, 0 elsewhere
        let half = 0.2 * n as f64 * pitch;
        PhasePattern::from_fn(n, n, pitch, |x, _| if x.abs() < half { PI } else { 0.0 }).unwrap()
    }

    #[test]
    fn slit_validation() {
        assert!(DoubleSlit::new(0.0, SlitAxis::X, 0.0, 0.0).is_err());
        assert!(DoubleSlit::new(1e-3, SlitAxis::X, 1e-3, 0.0).is_err());
        assert!(DoubleSlit::new(1e-3, SlitAxis::X, -1e-6, 0.0).is_err());
        let s = DoubleSlit::ideal(2e-3, SlitAxis::X).unwrap();
        assert_relative_eq!(
            s.fringe_period(&SourceParams::reference()),
            0.944e-3,
            max_relative = 1e-3
        );
    }

    #[test]
    fn interference_fringe_period() {
        let p = SourceParams::reference();
        let slit = DoubleSlit::ideal(2e-3, SlitAxis::X).unwrap();
        let g = reference_interference_grid();
        let m = ghost_interference_map(&p, &slit, &g, Exec::Parallel).unwrap();
        let spacing = mean_peak_spacing(m.row(g.ny / 2), &g.xs()).unwrap();
        let want = slit.fringe_period(&p);
        assert!((spacing - want).abs() / want < 0.02, "{spacing} vs {want}");
        // fringes are perpendicular to x: no oscillation along y
        let col = m.column(g.nx / 2);
        assert!(peak_positions(&col, &g.ys()).len() <= 1);
    }

    #[test]
    fn interference_orientation_follows_slit_axis() {
        let p = SourceParams::reference();
        let g = GridSpec::new(129, 129, 4e-3, 4e-3).unwrap();
        let mx = ghost_interference_map(
            &p,
            &DoubleSlit::ideal(2e-3, SlitAxis::X).unwrap(),
            &g,
            Exec::Parallel,
        )
        .unwrap();
        let my = ghost_interference_map(
            &p,
            &DoubleSlit::ideal(2e-3, SlitAxis::Y).unwrap(),
            &g,
            Exec::Parallel,
        )
        .unwrap();
        for j in 0..g.ny {
            for i in 0..g.nx {
                assert!((mx.at(i, j) - my.at(j, i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn interference_is_symmetric_and_fully_visible() {
        let p = SourceParams::reference();
        let g = reference_interference_grid();
        let m = ghost_interference_map(
            &p,
            &DoubleSlit::ideal(2e-3, SlitAxis::X).unwrap(),
            &g,
            Exec::Sequential,
        )
        .unwrap();
        for j in 0..g.ny {
            for i in 0..g.nx {
                assert!((m.at(i, j) - m.at(g.nx - 1 - i, j)).abs() < 1e-12);
            }
        }
        // one period around the axis: the two terms have equal magnitude there
        let row = m.row(g.ny / 2);
        let xs = g.xs();
        let period = 0.944e-3;
        let window: Vec<f64> = xs
            .iter()
            .zip(row)
            .filter(|(x, _)| x.abs() <= period)
            .map(|(_, v)| *v)
            .collect();
        let v = visibility(&window);
        assert!(v > 0.995, "{v}");
    }

    #[test]
    fn interference_sampling_error() {
        let p = SourceParams::reference();
        let coarse = GridSpec::new(40, 8, 6e-3, 2e-3).unwrap();
        let r = ghost_interference_map(
            &p,
            &DoubleSlit::ideal(2e-3, SlitAxis::X).unwrap(),
            &coarse,
            Exec::Sequential,
        );
        assert!(matches!(r, Err(Error::Sampling(_))));
    }

    #[test]
    fn narrow_finite_slits_approach_delta_slits() {
        let p = SourceParams::reference();
        let g = GridSpec::new(256, 8, 6e-3, 1e-3).unwrap();
        let ideal = ghost_interference_map(
            &p,
            &DoubleSlit::ideal(2e-3, SlitAxis::X).unwrap(),
            &g,
            Exec::Parallel,
        )
        .unwrap();
        let narrow = DoubleSlit::new(2e-3, SlitAxis::X, 1e-6, 0.0).unwrap();
        let n = ghost_interference_map(&p, &narrow, &g, Exec::Parallel).unwrap();
        for (a, b) in ideal.values.iter().zip(&n.values) {
            assert!((a - b).abs() < 1e-4, "{a} {b}");
        }
        // wider slits keep the period
        let wide = DoubleSlit::new(2e-3, SlitAxis::X, 0.2e-3, 0.0).unwrap();
        let w = ghost_interference_map(&p, &wide, &g, Exec::Parallel).unwrap();
        let s = mean_peak_spacing(w.row(4), &g.xs()).unwrap();
        assert!((s - 0.944e-3).abs() / 0.944e-3 < 0.02);
    }

    #[test]
    fn pattern_validation_and_transforms() {
        assert!(PhasePattern::new(0, 1, 1e-4, (0.0, 0.0), vec![], vec![]).is_err());
        assert!(PhasePattern::new(2, 1, 1e-4, (0.0, 0.0), vec![0.0], vec![1.0]).is_err());
        assert!(PhasePattern::new(1, 1, 1e-4, (0.0, 0.0), vec![f64::NAN], vec![1.0]).is_err());
        assert!(PhasePattern::new(1, 1, 0.0, (0.0, 0.0), vec![0.0], vec![1.0]).is_err());
        let p = PhasePattern::from_fn(3, 2, 1.0, |x, y| 10.0 * x + y).unwrap();
        let r = p.rotated_90();
        assert_eq!((r.nx, r.ny), (2, 3));
        // value at (x, y) of the rotated pattern equals the original at (y, -x)
        for (j, y) in r.ys().iter().enumerate() {
            for (i, x) in r.xs().iter().enumerate() {
                assert!((r.phase[j * r.nx + i] - (10.0 * y - x)).abs() < 1e-12);
            }
        }
        let s = p.supersampled(2);
        assert_eq!((s.nx, s.ny), (6, 4));
        assert!((s.center().0 - p.center().0).abs() < 1e-12);
        assert!((s.center().1 - p.center().1).abs() < 1e-12);
    }

    #[test]
    fn uniform_zero_phase_gives_dark_map() {
        let (p, l) = imaging_setup(10e-3);
        let pat = PhasePattern::uniform(24, 24, 100e-6, 0.0).unwrap();
        let g = image_grid_for(&p, &l, &pat, 32, 32).unwrap();
        let m = ghost_image_map(
            &p,
            &l,
            &pat,
            PolarizerAngle::diag_minus(),
            PolarizerAngle::diag_minus(),
            &g,
            &QuadSettings::lens_auto(),
            Exec::Parallel,
        )
        .unwrap();
        assert!(m.is_zero());
        assert_eq!(m.meta.raw_peak, 0.0);
        let reference = ghost_image_map(
            &p,
            &l,
            &bar_pattern(24, 100e-6),
            PolarizerAngle::diag_minus(),
            PolarizerAngle::diag_minus(),
            &g,
            &QuadSettings::lens_auto(),
            Exec::Parallel,
        )
        .unwrap();
        assert!(reference.meta.raw_peak > 0.0);
    }

    #[test]
    fn complementarity_identity_for_arbitrary_phase() {
        let (p, l) = imaging_setup(10e-3);
        let pat = PhasePattern::from_fn(20, 20, 120e-6, |x, y| {
            3000.0 * x - 1700.0 * y + (x * 1e4).sin()
        })
        .unwrap();
        let g = image_grid_for(&p, &l, &pat, 24, 24).unwrap();
        let sys = ImagingSystem::new(&p, &l, &QuadSettings::lens_auto()).unwrap();
        let d2 = PolarizerAngle::from_degrees(-45.0).unwrap();
        let a = ghost_image_map_with(
            &sys,
            &pat,
            PolarizerAngle::diag_plus(),
            d2,
            &g,
            Exec::Parallel,
        )
        .unwrap();
        let b = ghost_image_map_with(
            &sys,
            &pat.phase_shifted(PI),
            PolarizerAngle::diag_minus(),
            d2,
            &g,
            Exec::Parallel,
        )
        .unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn binary_pattern_images_invert() {
        let (p, l) = imaging_setup(25e-3);
        let pat =
            PhasePattern::from_fn(32, 32, 100e-6, |x, _| if x < 0.0 { PI } else { 0.0 }).unwrap();
        let g = image_grid_for(&p, &l, &pat, 40, 40).unwrap();
        let sys = ImagingSystem::new(&p, &l, &QuadSettings::lens_auto()).unwrap();
        let m = PolarizerAngle::diag_minus();
        let minus = ghost_image_map_with(&sys, &pat, m, m, &g, Exec::Parallel).unwrap();
        let plus = ghost_image_map_with(
            &sys,
            &pat,
            PolarizerAngle::diag_plus(),
            m,
            &g,
            Exec::Parallel,
        )
        .unwrap();
        let flat = ghost_image_map_with(
            &sys,
            &PhasePattern::uniform(32, 32, 100e-6, PI).unwrap(),
            m,
            m,
            &g,
            Exec::Parallel,
        )
        .unwrap();
        // the image is inverted through the lens: the φ = π half lands at x2 > 0
        assert!(minus.at(30, 20) > 0.5 && minus.at(10, 20) < 1e-3);
        assert!(plus.at(10, 20) > 0.5 && plus.at(30, 20) < 1e-3);
        let r = inversion_correlation(&minus, &plus, &flat).unwrap();
        assert!(r > 0.95, "{r}");
        assert!(overlap_fraction(&minus.values, &plus.values) < 0.05);
    }

    #[test]
    fn rotating_the_pattern_rotates_the_image() {
        let (p, l) = imaging_setup(10e-3);
        let pat =
            PhasePattern::from_fn(
                16,
                16,
                100e-6,
                |x, y| if x > 0.0 && y > -2e-4 { PI } else { 0.3 },
            )
            .unwrap();
        let g = image_grid_for(&p, &l, &pat, 20, 20).unwrap();
        let sys = ImagingSystem::new(&p, &l, &QuadSettings::lens_auto()).unwrap();
        let m = PolarizerAngle::diag_minus();
        let a = ghost_image_map_with(&sys, &pat, m, m, &g, Exec::Parallel).unwrap();
        let b = ghost_image_map_with(&sys, &pat.rotated_90(), m, m, &g, Exec::Parallel).unwrap();
        let ar = a.rotated_90();
        assert!(ar.same_grid(&b));
        for (x, y) in ar.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn pixel_sum_converges_under_supersampling() {
        let (p, l) = imaging_setup(10e-3);
        let pat = bar_pattern(16, 60e-6);
        let g = image_grid_for(&p, &l, &pat, 24, 24).unwrap();
        let sys = ImagingSystem::new(&p, &l, &QuadSettings::lens_auto()).unwrap();
        let m = PolarizerAngle::diag_minus();
        let maps: Vec<CoincidenceMap> = [1, 2, 4]
            .iter()
            .map(|&f| {
                ghost_image_map_with(&sys, &pat.supersampled(f), m, m, &g, Exec::Parallel).unwrap()
            })
            .collect();
        let diff = |a: &CoincidenceMap, b: &CoincidenceMap| {
            a.values
                .iter()
                .zip(&b.values)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (diff(&maps[0], &maps[1]), diff(&maps[1], &maps[2]));
        // midpoint rule: second order in the pitch
        assert!(e2 < e1 / 3.0, "{e1} {e2}");
        assert!(e2 < 3e-3);
    }

    #[test]
    fn sequential_and_parallel_maps_are_identical() {
        let (p, l) = imaging_setup(10e-3);
        let pat = bar_pattern(12, 100e-6);
        let g = image_grid_for(&p, &l, &pat, 16, 16).unwrap();
        let sys = ImagingSystem::new(&p, &l, &QuadSettings::lens_auto()).unwrap();
        let m = PolarizerAngle::diag_minus();
        let a = ghost_image_map_with(&sys, &pat, m, m, &g, Exec::Sequential).unwrap();
        let b = ghost_image_map_with(&sys, &pat, m, m, &g, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn background_subtraction() {
        let g = GridSpec::new(3, 2, 1.0, 1.0).unwrap();
        let s =
            CoincidenceMap::from_raw(&g, vec![0.0, 1.0, 2.0, 3.0, 4.0, 0.5], MapMeta::default())
                .unwrap();
        let z = CoincidenceMap::from_raw(&g, vec![0.0; 6], MapMeta::default()).unwrap();
        let d = background_subtract(&s, &s).unwrap();
        assert!(d.values.iter().all(|&v| v == 0.0));
        let d = background_subtract(&s, &z).unwrap();
        assert_eq!(d.values, vec![0.0, 1.0, 2.0, 3.0, 4.0, 0.5]);
        let bigger = CoincidenceMap::from_raw(
            &GridSpec::new(3, 3, 1.0, 1.0).unwrap(),
            vec![1.0; 9],
            MapMeta::default(),
        )
        .unwrap();
        assert!(matches!(
            background_subtract(&s, &bigger),
            Err(Error::GridMismatch(_))
        ));
        let b = CoincidenceMap::from_raw(&g, vec![1.0; 6], MapMeta::default()).unwrap();
        let d = background_subtract(&s, &b).unwrap();
        assert!(d.values[0] < 0.0);
        assert_eq!(
            d.normalized()
                .values
                .iter()
                .fold(0.0f64, |a, v| a.max(v.abs())),
            1.0
        );
    }

    #[test]
    fn map_normalization() {
        let g = GridSpec::new(2, 2, 1.0, 1.0).unwrap();
        let m = CoincidenceMap::from_raw(&g, vec![0.5, 2.0, 1.0, 0.0], MapMeta::default()).unwrap();
        assert_eq!(m.values, vec![0.25, 1.0, 0.5, 0.0]);
        assert_eq!(m.meta.raw_peak, 2.0);
        assert_eq!(m.raw(), vec![0.5, 2.0, 1.0, 0.0]);
        assert!(
            CoincidenceMap::from_raw(&g, vec![-1.0, 0.0, 0.0, 0.0], MapMeta::default()).is_err()
        );
    }
}
