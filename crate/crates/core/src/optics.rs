//! Thin-lens imaging of photon 2.
//!
//! The imaging lens sits on the plane `z = s2`, a distance `u = s1 + s2` from
//! the object plane `z = -s1`, and forms an image at distance `v`. The imaging
//! amplitude `Φ_I(x1,y1; x2,y2)` is the lens-plane integral of the two-photon
//! amplitude times the aperture, the lens phase, and the Fresnel kernel to the
//! image plane.

use std::f64::consts::PI;

use log::warn;

use crate::biphoton::SourceParams;
use crate::cmat::CMat;
use crate::quadrature::{CompositeRule, QuadSettings};
use crate::{Complex64, Error, Exec, Result};

/// Tolerance on `|1/u + 1/v - 1/f|`, in 1/m.
pub const IMAGING_TOL: f64 = 1e-9;

/// Default circular aperture radius: a 5 cm diameter lens.
pub const DEFAULT_APERTURE_RADIUS: f64 = 25e-3;

/// Overall magnification reported for the camera after the relay telescope.
pub const DEFAULT_TOTAL_MAGNIFICATION: f64 = 0.87;

/// Transmission of the aperture at the imaging lens.
#[derive(Clone, Debug, PartialEq)]
pub enum Aperture {
    Circular { radius: f64 },
    Sampled(SampledAperture),
}

impl Default for Aperture {
    fn default() -> Self {
        Aperture::Circular {
            radius: DEFAULT_APERTURE_RADIUS,
        }
    }
}

/// Pixelated transmission map, looked up nearest-pixel and opaque outside.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledAperture {
    pub nx: usize,
    pub ny: usize,
    pub pitch: f64,
    /// Lens-plane coordinates of the centre of pixel (0, 0).
    pub origin: (f64, f64),
    /// Row-major, one row per η sample, values in `[0, 1]`.
    pub values: Vec<f64>,
}

impl SampledAperture {
    pub fn new(
        nx: usize,
        ny: usize,
        pitch: f64,
        origin: (f64, f64),
        values: Vec<f64>,
    ) -> Result<Self> {
        if nx == 0 || ny == 0 || values.len() != nx * ny {
            return Err(Error::param(
                "aperture grid shape does not match its values",
            ));
        }
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(Error::param("aperture pitch must be positive"));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::param("aperture transmission must lie in [0, 1]"));
        }
        Ok(SampledAperture {
            nx,
            ny,
            pitch,
            origin,
            values,
        })
    }

    fn bounds(&self) -> ((f64, f64), (f64, f64)) {
        let h = 0.5 * self.pitch;
        (
            (
                self.origin.0 - h,
                self.origin.0 + self.pitch * (self.nx - 1) as f64 + h,
            ),
            (
                self.origin.1 - h,
                self.origin.1 + self.pitch * (self.ny - 1) as f64 + h,
            ),
        )
    }
}

impl Aperture {
    pub fn circular(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::param("aperture radius must be positive"));
        }
        Ok(Aperture::Circular { radius })
    }

    pub fn transmission(&self, xi: f64, eta: f64) -> f64 {
        match self {
            Aperture::Circular { radius } => {
                if xi * xi + eta * eta <= radius * radius {
                    1.0
                } else {
                    0.0
                }
            }
            Aperture::Sampled(s) => {
                let i = ((xi - s.origin.0) / s.pitch).round();
                let j = ((eta - s.origin.1) / s.pitch).round();
                if i < 0.0 || j < 0.0 || i >= s.nx as f64 || j >= s.ny as f64 {
                    0.0
                } else {
                    s.values[j as usize * s.nx + i as usize]
                }
            }
        }
    }

    /// Integration box `((ξmin, ξmax), (ηmin, ηmax))`.
    pub fn bounds(&self) -> ((f64, f64), (f64, f64)) {
        match self {
            Aperture::Circular { radius } => ((-radius, *radius), (-radius, *radius)),
            Aperture::Sampled(s) => s.bounds(),
        }
    }

    /// Largest distance from the axis to the edge of the integration box.
    pub fn reach(&self) -> f64 {
        let ((a, b), (c, d)) = self.bounds();
        a.abs().max(b.abs()).max(c.abs()).max(d.abs())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LensSystem {
    pub f: f64,
    pub u: f64,
    pub v: f64,
    pub aperture: Aperture,
}

impl LensSystem {
    pub fn new(f: f64, u: f64, v: f64, aperture: Aperture) -> Result<Self> {
        for (name, x) in [("f", f), ("u", u), ("v", v)] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::param(format!("{name} must be positive, got {x}")));
            }
        }
        Ok(LensSystem { f, u, v, aperture })
    }

    /// Lens focused on the object plane at distance `u`; `v` follows from the
    /// thin-lens equation.
    pub fn imaging(f: f64, u: f64, aperture: Aperture) -> Result<Self> {
        if !(u > f) {
            return Err(Error::param(format!(
                "a real image needs u > f (u = {u}, f = {f})"
            )));
        }
        let v = 1.0 / (1.0 / f - 1.0 / u);
        Self::new(f, u, v, aperture)
    }

    /// Imaging lens on the plane `z = s2` of `params`, so that `u = s1 + s2`.
    pub fn for_source(params: &SourceParams, f: f64, aperture: Aperture) -> Result<Self> {
        Self::imaging(f, params.s1() + params.s2(), aperture)
    }

    pub fn imaging_residual(&self) -> f64 {
        1.0 / self.u + 1.0 / self.v - 1.0 / self.f
    }

    pub fn require_imaging(&self) -> Result<()> {
        if self.imaging_residual().abs() >= IMAGING_TOL {
            return Err(Error::param(format!(
                "imaging condition violated: 1/u + 1/v - 1/f = {:e} 1/m",
                self.imaging_residual()
            )));
        }
        if !(self.u > self.f) {
            return Err(Error::param("imaging requires u > f"));
        }
        Ok(())
    }

    /// Fresnel number `k R² / (2π min(u, v))` of the aperture.
    pub fn fresnel_number(&self, k: f64) -> f64 {
        let r = self.aperture.reach();
        k * r * r / (2.0 * PI * self.u.min(self.v))
    }

    /// Nodes per axis needed for a spacing of at most `R / (8 N_F)`.
    pub fn required_nodes(&self, k: f64) -> usize {
        let ((a, b), (c, d)) = self.aperture.bounds();
        let span = (b - a).max(d - c);
        let spacing = self.aperture.reach() / (8.0 * self.fresnel_number(k));
        (span / spacing).ceil() as usize
    }
}

/// Thin-lens phase factor `exp(-i k (ξ² + η²) / 2f)`.
#[inline]
pub fn lens_phase(f: f64, k: f64, xi: f64, eta: f64) -> Complex64 {
    Complex64::from_polar(1.0, -k * (xi * xi + eta * eta) / (2.0 * f))
}

/// Paraxial propagation factor `exp(+i k (dx² + dy²) / 2 dist)`.
#[inline]
pub fn fresnel_kernel(dist: f64, k: f64, dx: f64, dy: f64) -> Complex64 {
    Complex64::from_polar(1.0, k * (dx * dx + dy * dy) / (2.0 * dist))
}

/// Magnification `v / (s1 + s2)` of the ghost image formed by the lens.
pub fn ghost_magnification(params: &SourceParams, lens: &LensSystem) -> Result<f64> {
    lens.require_imaging()?;
    check_geometry(params, lens)?;
    Ok(lens.v / (params.s1() + params.s2()))
}

/// Relay scale that brings the ghost magnification to `total`.
pub fn composite_relay_scale(ghost_magnification: f64, total: f64) -> f64 {
    total / ghost_magnification
}

fn check_geometry(params: &SourceParams, lens: &LensSystem) -> Result<()> {
    let u = params.s1() + params.s2();
    if (lens.u - u).abs() > 1e-9 * u {
        return Err(Error::param(format!(
            "lens object distance u = {} must equal s1 + s2 = {u}",
            lens.u
        )));
    }
    Ok(())
}

/// Normalised imaging amplitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImagingAmplitude(pub Complex64);

impl ImagingAmplitude {
    pub fn value(self) -> Complex64 {
        self.0
    }

    pub fn norm(self) -> f64 {
        self.0.norm()
    }
}

/// Order of the two lens-plane sums in [`ImagingSystem::point_amplitude_ordered`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SumOrder {
    XiOuter,
    EtaOuter,
}

const BLOCK: usize = 64;

/// Lens-plane quadrature prepared for one source and lens.
///
/// Everything except the aperture separates in ξ and η, so a field of object
/// points maps to an image through a chain of dense products, see
/// [`ImagingSystem::image_field`].
#[derive(Clone, Debug)]
pub struct ImagingSystem {
    params: SourceParams,
    lens: LensSystem,
    xi: CompositeRule,
    eta: CompositeRule,
    lens_xi: Vec<Complex64>,
    lens_eta: Vec<Complex64>,
    norm: f64,
}

impl ImagingSystem {
    pub fn new(params: &SourceParams, lens: &LensSystem, quad: &QuadSettings) -> Result<Self> {
        lens.require_imaging()?;
        check_geometry(params, lens)?;
        quad.validate_common()?;
        let k = params.k();
        let required = lens.required_nodes(k);
        if quad.nodes != 0 && quad.nodes < required {
            warn!(
                "lens plane undersampled: {} nodes per axis requested, Fresnel-zone rule needs {required}; using {required}",
                quad.nodes
            );
        }
        let nodes = quad.nodes.max(required).max(quad.panel_order);
        let ((a, b), (c, d)) = lens.aperture.bounds();
        let panels = nodes.div_ceil(quad.panel_order);
        let xi = CompositeRule::new(a, b, panels, quad.panel_order);
        let eta = CompositeRule::new(c, d, panels, quad.panel_order);
        let half = |x: f64| Complex64::from_polar(1.0, -k * x * x / (2.0 * lens.f));
        let lens_xi = xi.nodes.iter().map(|&x| half(x)).collect();
        let lens_eta = eta.nodes.iter().map(|&y| half(y)).collect();
        let mut sys = ImagingSystem {
            params: *params,
            lens: lens.clone(),
            xi,
            eta,
            lens_xi,
            lens_eta,
            norm: 1.0,
        };
        let origin = sys.raw_point(0.0, 0.0, 0.0, 0.0, SumOrder::XiOuter).norm();
        if !(origin > 0.0 && origin.is_finite()) {
            return Err(Error::Numeric("imaging amplitude at the origin"));
        }
        sys.norm = origin;
        Ok(sys)
    }

    pub fn params(&self) -> &SourceParams {
        &self.params
    }

    pub fn lens(&self) -> &LensSystem {
        &self.lens
    }

    /// Nodes per lens-plane axis actually used.
    pub fn nodes(&self) -> (usize, usize) {
        (self.xi.len(), self.eta.len())
    }

    /// `w_ξ w_η a_p2(ξ, η)` along lens-plane row `i`.
    fn mask_row(&self, i: usize, out: &mut [f64]) {
        let (x, wx) = (self.xi.nodes[i], self.xi.weights[i]);
        for ((o, &y), &wy) in out.iter_mut().zip(&self.eta.nodes).zip(&self.eta.weights) {
            *o = wx * wy * self.lens.aperture.transmission(x, y);
        }
    }

    fn x_factor(&self, x1: f64, x2: f64, i: usize) -> Complex64 {
        let xi = self.xi.nodes[i];
        self.params.axis_factor(x1, xi)
            * self.lens_xi[i]
            * Complex64::from_polar(
                1.0,
                self.params.k() * (x2 - xi).powi(2) / (2.0 * self.lens.v),
            )
    }

    fn y_factor(&self, y1: f64, y2: f64, j: usize) -> Complex64 {
        let eta = self.eta.nodes[j];
        self.params.axis_factor(y1, eta)
            * self.lens_eta[j]
            * Complex64::from_polar(
                1.0,
                self.params.k() * (y2 - eta).powi(2) / (2.0 * self.lens.v),
            )
    }

    fn raw_point(&self, x1: f64, y1: f64, x2: f64, y2: f64, order: SumOrder) -> Complex64 {
        let nx = self.xi.len();
        let ny = self.eta.len();
        let fx: Vec<Complex64> = (0..nx).map(|i| self.x_factor(x1, x2, i)).collect();
        let fy: Vec<Complex64> = (0..ny).map(|j| self.y_factor(y1, y2, j)).collect();
        let mut total = Complex64::new(0.0, 0.0);
        let mut row = vec![0.0; ny];
        match order {
            SumOrder::XiOuter => {
                for (i, f) in fx.iter().enumerate() {
                    self.mask_row(i, &mut row);
                    let inner: Complex64 = row.iter().zip(&fy).map(|(m, f)| f * m).sum();
                    total += f * inner;
                }
            }
            SumOrder::EtaOuter => {
                let mut inner = vec![Complex64::new(0.0, 0.0); ny];
                for (i, f) in fx.iter().enumerate() {
                    self.mask_row(i, &mut row);
                    for (acc, &m) in inner.iter_mut().zip(&row) {
                        *acc += f * m;
                    }
                }
                for j in 0..ny {
                    total += fy[j] * inner[j];
                }
            }
        }
        total
    }

    pub fn point_amplitude(&self, x1: f64, y1: f64, x2: f64, y2: f64) -> ImagingAmplitude {
        self.point_amplitude_ordered(x1, y1, x2, y2, SumOrder::XiOuter)
    }

    pub fn point_amplitude_ordered(
        &self,
        x1: f64,
        y1: f64,
        x2: f64,
        y2: f64,
        order: SumOrder,
    ) -> ImagingAmplitude {
        ImagingAmplitude(self.raw_point(x1, y1, x2, y2, order) / self.norm)
    }

    /// Image-plane amplitude of a weighted field of object points.
    ///
    /// `weights` is row-major over `(ys1, xs1)`; the result is row-major over
    /// `(ys2, xs2)` and equals `Σ weights · Φ_I(x1, y1; x2, y2)`.
    ///
    /// The lens plane is swept in fixed blocks of ξ rows; each block is
    /// accumulated into the output in order, so the result does not depend on
    /// the execution policy.
    pub fn image_field(
        &self,
        xs1: &[f64],
        ys1: &[f64],
        weights: &[Complex64],
        xs2: &[f64],
        ys2: &[f64],
        exec: Exec,
    ) -> Vec<Complex64> {
        assert_eq!(weights.len(), xs1.len() * ys1.len());
        let k = self.params.k();
        let v = self.lens.v;
        let neta = self.eta.len();
        let nxi = self.xi.len();

        // weights transposed to (x1, y1)
        let wt = CMat::from_fn(xs1.len(), ys1.len(), |i, j| weights[j * xs1.len() + i]);
        // Py^T: (y1, η)
        let py_t = CMat::from_fn(ys1.len(), neta, |j, e| {
            self.params.axis_factor(ys1[j], self.eta.nodes[e]) * self.lens_eta[e]
        });
        // Fy^T: (η, y2)
        let fy_t = CMat::from_fn(neta, ys2.len(), |e, j| {
            let d = ys2[j] - self.eta.nodes[e];
            Complex64::from_polar(1.0, k * d * d / (2.0 * v))
        });

        // accumulated transposed output, (x2, y2)
        let mut acc = CMat::zeros(xs2.len(), ys2.len());
        for start in (0..nxi).step_by(BLOCK) {
            let end = (start + BLOCK).min(nxi);
            let rows = end - start;
            let px = CMat::from_fn(rows, xs1.len(), |r, i| {
                self.params.axis_factor(xs1[i], self.xi.nodes[start + r]) * self.lens_xi[start + r]
            });
            let t1 = px.matmul(&wt, exec);
            let mut g = t1.matmul(&py_t, exec);
            let mut m = vec![0.0; neta];
            for r in 0..rows {
                self.mask_row(start + r, &mut m);
                for (z, &w) in g.data[r * neta..(r + 1) * neta].iter_mut().zip(&m) {
                    *z *= w;
                }
            }
            let h = g.matmul(&fy_t, exec);
            let fx_b = CMat::from_fn(xs2.len(), rows, |i, r| {
                let d = xs2[i] - self.xi.nodes[start + r];
                Complex64::from_polar(1.0, k * d * d / (2.0 * v))
            });
            let ny2 = ys2.len();
            exec.for_each_chunk_mut(&mut acc.data, ny2.max(1), |i, dst| {
                for r in 0..rows {
                    crate::cmat::axpy(fx_b.get(i, r), h.row(r), dst);
                }
            });
        }
        let scale = 1.0 / self.norm;
        let mut out = vec![Complex64::new(0.0, 0.0); xs2.len() * ys2.len()];
        for i in 0..xs2.len() {
            for j in 0..ys2.len() {
                out[j * xs2.len() + i] = acc.get(i, j) * scale;
            }
        }
        out
    }
}

/// `Φ_I(x1,y1; x2,y2)` for a single pair of points.
///
/// With `quad.tolerance` set the evaluation is repeated with doubled lens-plane
/// nodes and must agree to that relative tolerance.
pub fn imaging_amplitude(
    params: &SourceParams,
    lens: &LensSystem,
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
    quad: &QuadSettings,
) -> Result<ImagingAmplitude> {
    let sys = ImagingSystem::new(params, lens, quad)?;
    let a = sys.point_amplitude(x1, y1, x2, y2);
    if !(a.0.re.is_finite() && a.0.im.is_finite()) {
        return Err(Error::Numeric("imaging amplitude"));
    }
    if let Some(tol) = quad.tolerance {
        let (n, _) = sys.nodes();
        let finer = QuadSettings {
            nodes: 2 * n,
            ..*quad
        };
        let b = ImagingSystem::new(params, lens, &finer)?.point_amplitude(x1, y1, x2, y2);
        let change = (b.0 - a.0).norm() / b.0.norm().max(f64::MIN_POSITIVE);
        if change > tol {
            return Err(Error::Convergence {
                change,
                tolerance: tol,
            });
        }
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference_lens(params: &SourceParams, radius: f64) -> LensSystem {
        LensSystem::for_source(params, 1.5, Aperture::circular(radius).unwrap()).unwrap()
    }

    /// Source with the lens plane at s2 = u - s1 for u = 2.83 m.
    fn imaging_source() -> SourceParams {
        SourceParams::new(810e-9, 3e-3, 1.33, 2.83 - 1.33).unwrap()
    }

    fn profile(sys: &ImagingSystem, x1: f64, xs2: &[f64]) -> Vec<f64> {
        sys.image_field(
            &[x1],
            &[0.0],
            &[Complex64::new(1.0, 0.0)],
            xs2,
            &[0.0],
            Exec::Parallel,
        )
        .iter()
        .map(|z| z.norm())
        .collect()
    }

    fn argmax(v: &[f64]) -> usize {
        v.iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0
    }

    #[test]
    fn lens_phase_examples() {
        let k = 2.0 * PI / 810e-9;
        assert_eq!(lens_phase(1.5, k, 0.0, 0.0), Complex64::new(1.0, 0.0));
        let z = lens_phase(1.5, k, 1e-3, 0.0);
        assert_relative_eq!(z.norm(), 1.0, epsilon = 1e-15);
        let want = -k * 1e-6 / 3.0;
        assert_relative_eq!(want, -2.586, max_relative = 1e-3);
        let got = z.arg();
        assert!(((got - want).rem_euclid(2.0 * PI)).min((want - got).rem_euclid(2.0 * PI)) < 1e-9);
    }

    #[test]
    fn fresnel_kernel_examples() {
        let k = 2.0 * PI / 810e-9;
        assert_eq!(fresnel_kernel(3.0, k, 0.0, 0.0), Complex64::new(1.0, 0.0));
        let z = fresnel_kernel(3.19, k, 2e-3, 0.0);
        assert_relative_eq!((z * z.conj()).re, 1.0, epsilon = 1e-15);
        let (xi, eta) = (1.3e-3, -0.4e-3);
        let prod = fresnel_kernel(1.5, k, xi, eta) * lens_phase(1.5, k, xi, eta);
        assert!((prod - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn lens_construction() {
        assert!(LensSystem::imaging(1.5, 1.0, Aperture::default()).is_err());
        let l = LensSystem::imaging(1.5, 2.83, Aperture::default()).unwrap();
        assert!(l.imaging_residual().abs() < IMAGING_TOL);
        assert_relative_eq!(l.v, 3.192, max_relative = 1e-3);
        let bad = LensSystem::new(1.5, 2.83, 3.0, Aperture::default()).unwrap();
        assert!(bad.require_imaging().is_err());
        assert!(Aperture::circular(0.0).is_err());
    }

    #[test]
    fn magnification_examples() {
        let p = imaging_source();
        let l = reference_lens(&p, 25e-3);
        let m = ghost_magnification(&p, &l).unwrap();
        assert_relative_eq!(m, 1.128, max_relative = 1e-3);
        assert_relative_eq!(1.0 / m, 0.886, max_relative = 1e-3);
        // u = 2f gives unit magnification
        let p2 = SourceParams::new(810e-9, 3e-3, 1.33, 3.0 - 1.33).unwrap();
        let l2 = reference_lens(&p2, 25e-3);
        assert_relative_eq!(ghost_magnification(&p2, &l2).unwrap(), 1.0, epsilon = 1e-12);
        // wrong u for this source
        let off = LensSystem::imaging(1.5, 2.5, Aperture::default()).unwrap();
        assert!(ghost_magnification(&p, &off).is_err());
        let t = composite_relay_scale(m, DEFAULT_TOTAL_MAGNIFICATION);
        assert_relative_eq!(t * m, 0.87);
    }

    #[test]
    fn fresnel_rule_sets_node_count() {
        let p = imaging_source();
        let l = reference_lens(&p, 25e-3);
        let sys = ImagingSystem::new(&p, &l, &QuadSettings::with_nodes(256)).unwrap();
        let need = l.required_nodes(p.k());
        assert!(sys.nodes().0 >= need);
        // spacing <= ρ / (8 N_F)
        let spacing = 50e-3 / sys.nodes().0 as f64;
        assert!(spacing <= 25e-3 / (8.0 * l.fresnel_number(p.k())) * (1.0 + 1e-12));
    }

    #[test]
    fn on_axis_point_images_on_axis() {
        let p = imaging_source();
        let sys =
            ImagingSystem::new(&p, &reference_lens(&p, 25e-3), &QuadSettings::lens_auto()).unwrap();
        let xs: Vec<f64> = (-50..=50).map(|i| i as f64 * 4e-6).collect();
        let prof = profile(&sys, 0.0, &xs);
        assert_eq!(argmax(&prof), 50);
        assert_relative_eq!(prof[50], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn off_axis_point_images_at_magnified_inverted_position() {
        let p = imaging_source();
        let l = reference_lens(&p, 25e-3);
        let sys = ImagingSystem::new(&p, &l, &QuadSettings::lens_auto()).unwrap();
        let xs: Vec<f64> = (0..=400).map(|i| -1.3e-3 + i as f64 * 1e-6).collect();
        let prof = profile(&sys, 1e-3, &xs);
        let peak = xs[argmax(&prof)];
        let want = l.v / l.u * 1e-3;
        assert!((peak.abs() - want).abs() / want < 0.03, "peak {peak}");
        assert!(peak < 0.0);
    }

    #[test]
    fn peak_positions_are_linear_in_object_position() {
        let p = imaging_source();
        let l = reference_lens(&p, 25e-3);
        let sys = ImagingSystem::new(&p, &l, &QuadSettings::lens_auto()).unwrap();
        let x1s = [-2e-3, -1e-3, 0.0, 1e-3, 2e-3];
        let xs: Vec<f64> = (0..=2800).map(|i| -2.8e-3 + i as f64 * 2e-6).collect();
        let peaks: Vec<f64> = x1s
            .iter()
            .map(|&x1| xs[argmax(&profile(&sys, x1, &xs))])
            .collect();
        // least squares line through (x1, peak)
        let n = x1s.len() as f64;
        let mx = x1s.iter().sum::<f64>() / n;
        let my = peaks.iter().sum::<f64>() / n;
        let sxy: f64 = x1s
            .iter()
            .zip(&peaks)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum();
        let sxx: f64 = x1s.iter().map(|x| (x - mx).powi(2)).sum();
        let slope = sxy / sxx;
        let span = peaks.iter().cloned().fold(f64::MIN, f64::max)
            - peaks.iter().cloned().fold(f64::MAX, f64::min);
        for (x, y) in x1s.iter().zip(&peaks) {
            let fit = my + slope * (x - mx);
            assert!((y - fit).abs() < 0.02 * span);
        }
        assert_relative_eq!(-slope, l.v / l.u, max_relative = 0.03);
    }

    #[test]
    fn airy_first_zero_for_an_aperture_limited_source() {
        // σ large enough that the source envelope does not apodize the lens
        let p = SourceParams::new(810e-9, 50e-3, 1.33, 1.5).unwrap();
        let l = reference_lens(&p, 25e-3);
        let sys = ImagingSystem::new(&p, &l, &QuadSettings::lens_auto()).unwrap();
        let xs: Vec<f64> = (0..=150).map(|i| i as f64 * 1e-6).collect();
        let prof = profile(&sys, 0.0, &xs);
        let first_min = (1..prof.len() - 1)
            .find(|&i| prof[i] < prof[i - 1] && prof[i] <= prof[i + 1])
            .unwrap();
        let want = 0.61 * p.lambda() * l.v / 25e-3;
        assert!(
            (xs[first_min] - want).abs() / want < 0.05,
            "{} vs {want}",
            xs[first_min]
        );
        assert!(prof[first_min] < 0.01);
    }

    fn psf_radius(radius: f64) -> f64 {
        let p = imaging_source();
        let sys = ImagingSystem::new(&p, &reference_lens(&p, radius), &QuadSettings::lens_auto())
            .unwrap();
        let xs: Vec<f64> = (0..=600).map(|i| i as f64 * 1e-6).collect();
        let prof = profile(&sys, 0.0, &xs);
        let i = prof.iter().position(|&a| a * a < (-1.0f64).exp()).unwrap();
        xs[i]
    }

    #[test]
    fn smaller_aperture_broadens_psf() {
        let r: Vec<f64> = [25e-3, 10e-3, 5e-3]
            .iter()
            .map(|&a| psf_radius(a))
            .collect();
        assert!(r[0] < r[1] && r[1] < r[2], "{r:?}");
    }

    #[test]
    fn summation_order_independence() {
        let p = imaging_source();
        let sys =
            ImagingSystem::new(&p, &reference_lens(&p, 10e-3), &QuadSettings::lens_auto()).unwrap();
        for &(x1, y1, x2, y2) in &[(0.0, 0.0, 1e-5, 0.0), (1e-3, -0.5e-3, -1.1e-3, 0.6e-3)] {
            let a = sys
                .point_amplitude_ordered(x1, y1, x2, y2, SumOrder::XiOuter)
                .value();
            let b = sys
                .point_amplitude_ordered(x1, y1, x2, y2, SumOrder::EtaOuter)
                .value();
            assert!((a - b).norm() / a.norm() < 1e-12);
        }
    }

    #[test]
    fn field_route_matches_point_route() {
        let p = imaging_source();
        let sys =
            ImagingSystem::new(&p, &reference_lens(&p, 10e-3), &QuadSettings::lens_auto()).unwrap();
        let xs1 = [-0.2e-3, 0.3e-3];
        let ys1 = [0.1e-3];
        let w = [Complex64::new(1.0, 0.5), Complex64::new(-0.3, 0.2)];
        let xs2 = [0.25e-3, -0.3e-3, 0.0];
        let ys2 = [-0.1e-3, 0.05e-3];
        let field = sys.image_field(&xs1, &ys1, &w, &xs2, &ys2, Exec::Sequential);
        let par = sys.image_field(&xs1, &ys1, &w, &xs2, &ys2, Exec::Parallel);
        assert_eq!(field, par);
        for (j, &y2) in ys2.iter().enumerate() {
            for (i, &x2) in xs2.iter().enumerate() {
                let direct = w[0] * sys.point_amplitude(xs1[0], ys1[0], x2, y2).value()
                    + w[1] * sys.point_amplitude(xs1[1], ys1[0], x2, y2).value();
                let f = field[j * xs2.len() + i];
                assert!((f - direct).norm() <= 1e-10 * direct.norm().max(1e-3));
            }
        }
    }

    #[test]
    fn single_point_convergence_check() {
        let p = imaging_source();
        let l = reference_lens(&p, 10e-3);
        let q = QuadSettings {
            nodes: 0,
            tolerance: Some(1e-6),
            ..Default::default()
        };
        let a = imaging_amplitude(&p, &l, 0.0, 0.0, 0.0, 0.0, &q).unwrap();
        assert_relative_eq!(a.norm(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn sampled_aperture_lookup() {
        let ap = SampledAperture::new(3, 2, 1e-3, (-1e-3, 0.0), vec![0.0, 1.0, 0.5, 1.0, 1.0, 1.0])
            .unwrap();
        let a = Aperture::Sampled(ap);
        assert_eq!(a.transmission(0.0, 0.0), 1.0);
        assert_eq!(a.transmission(1e-3, 0.0), 0.5);
        assert_eq!(a.transmission(-1e-3, 0.0), 0.0);
        assert_eq!(a.transmission(5e-3, 0.0), 0.0);
        assert!(SampledAperture::new(2, 2, 1e-3, (0.0, 0.0), vec![2.0; 4]).is_err());
    }
}
