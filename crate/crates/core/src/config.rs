//! Run configuration: flat `key = value` text.
//!
//! Lengths are metres, times seconds, angles degrees. `#` starts a comment.
//! Unknown or repeated keys are errors. Every key has a default, and
//! [`RunConfig::to_text`] writes the fully resolved set back out in a form
//! [`RunConfig::parse`] reads to the same value.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::biphoton::{SourceParams, DEFAULT_W};
use crate::detector::DetectorConfig;
use crate::experiments::{image_grid_for, DoubleSlit, PhasePattern, SlitAxis};
use crate::grid::GridSpec;
use crate::optics::{
    Aperture, LensSystem, SampledAperture, DEFAULT_APERTURE_RADIUS, DEFAULT_TOTAL_MAGNIFICATION,
};
use crate::polarization::PolarizerAngle;
use crate::quadrature::QuadSettings;
use crate::{io, Error, Exec, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BuiltinPattern {
    /// φ = π for x < 0, 0 elsewhere.
    Halves,
    /// φ = π inside a centred square of half the pattern width.
    Square,
    /// φ = 0 everywhere.
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Matrix,
    Graymap,
    Both,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub lambda: f64,
    pub sigma: f64,
    pub w: f64,
    pub s1: f64,
    /// Interference-plane distance (no lens).
    pub s2: f64,

    pub lens_f: f64,
    /// Object distance; the lens plane sits at `u - s1` from the source.
    pub lens_u: f64,
    pub aperture_radius: f64,
    pub aperture_file: Option<PathBuf>,
    pub total_magnification: f64,

    pub delta1_deg: f64,
    pub delta2_deg: f64,

    pub slit_d: f64,
    pub slit_axis: SlitAxis,
    pub slit_width: f64,
    pub slit_center: f64,

    pub interference_nx: usize,
    pub interference_ny: usize,
    pub interference_extent_x: f64,
    pub interference_extent_y: f64,

    pub pattern_file: Option<PathBuf>,
    pub pattern_builtin: BuiltinPattern,
    pub pattern_n: usize,
    pub pattern_pitch: f64,
    pub pattern_phase_scale: f64,
    /// Uniform phase of the background pattern.
    pub background_phase: f64,

    pub image_nx: usize,
    pub image_ny: usize,
    /// `None`: span the magnified pattern.
    pub image_extent_x: Option<f64>,
    pub image_extent_y: Option<f64>,

    pub source_nodes: usize,
    /// 0: Fresnel-zone rule.
    pub lens_nodes: usize,
    pub panel_order: usize,
    pub half_width_sigmas: f64,
    pub quad_tolerance: Option<f64>,

    pub detector: DetectorConfig,

    pub output_dir: PathBuf,
    pub output_format: OutputFormat,
    pub exec: Exec,
}

impl Default for RunConfig {
    fn default() -> Self {
        let q = QuadSettings::default();
        RunConfig {
            lambda: 810e-9,
            sigma: 3e-3,
            w: DEFAULT_W,
            s1: 1.33,
            s2: 1.0,
            lens_f: 1.5,
            lens_u: 2.83,
            aperture_radius: DEFAULT_APERTURE_RADIUS,
            aperture_file: None,
            total_magnification: DEFAULT_TOTAL_MAGNIFICATION,
            delta1_deg: -45.0,
            delta2_deg: -45.0,
            slit_d: 2e-3,
            slit_axis: SlitAxis::X,
            slit_width: 0.0,
            slit_center: 0.0,
            interference_nx: 512,
            interference_ny: 128,
            interference_extent_x: 6e-3,
            interference_extent_y: 2e-3,
            pattern_file: None,
            pattern_builtin: BuiltinPattern::Halves,
            pattern_n: 128,
            pattern_pitch: 25e-6,
            pattern_phase_scale: PI,
            background_phase: 0.0,
            image_nx: 256,
            image_ny: 256,
            image_extent_x: None,
            image_extent_y: None,
            source_nodes: q.nodes,
            lens_nodes: 0,
            panel_order: q.panel_order,
            half_width_sigmas: q.half_width_sigmas,
            quad_tolerance: None,
            detector: DetectorConfig::default(),
            output_dir: PathBuf::from("out"),
            output_format: OutputFormat::Matrix,
            exec: Exec::Parallel,
        }
    }
}

fn num(v: &str) -> std::result::Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("not a number: {v:?}"))?;
    if !x.is_finite() {
        return Err(format!("not finite: {v:?}"));
    }
    Ok(x)
}

fn positive(v: &str) -> std::result::Result<f64, String> {
    let x = num(v)?;
    if x <= 0.0 {
        return Err(format!("must be > 0, got {x}"));
    }
    Ok(x)
}

fn nonneg(v: &str) -> std::result::Result<f64, String> {
    let x = num(v)?;
    if x < 0.0 {
        return Err(format!("must be >= 0, got {x}"));
    }
    Ok(x)
}

fn count(v: &str) -> std::result::Result<usize, String> {
    v.parse()
        .map_err(|_| format!("not a nonnegative integer: {v:?}"))
}

fn auto_or<T>(
    v: &str,
    f: impl Fn(&str) -> std::result::Result<T, String>,
) -> std::result::Result<Option<T>, String> {
    match v {
        "auto" | "none" => Ok(None),
        _ => f(v).map(Some),
    }
}

fn path_or_none(v: &str) -> Option<PathBuf> {
    match v {
        "" | "none" => None,
        _ => Some(PathBuf::from(v)),
    }
}

fn show_opt<T: ToString>(v: &Option<T>, none: &str) -> String {
    v.as_ref().map_or(none.to_string(), T::to_string)
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map_or("none".to_string(), |p| p.display().to_string())
}

impl RunConfig {
    /// Set one key from its text value.
    pub fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        let d = &mut self.detector;
        match key {
            "source.lambda" => self.lambda = positive(v)?,
            "source.sigma" => self.sigma = positive(v)?,
            "source.w" => self.w = positive(v)?,
            "source.s1" => self.s1 = positive(v)?,
            "source.s2" => self.s2 = positive(v)?,
            "lens.f" => self.lens_f = positive(v)?,
            "lens.u" => self.lens_u = positive(v)?,
            "lens.aperture_radius" => self.aperture_radius = positive(v)?,
            "lens.aperture_file" => self.aperture_file = path_or_none(v),
            "lens.total_magnification" => self.total_magnification = positive(v)?,
            "polarizer.delta1_deg" => self.delta1_deg = num(v)?,
            "polarizer.delta2_deg" => self.delta2_deg = num(v)?,
            "slit.d" => self.slit_d = positive(v)?,
            "slit.axis" => {
                self.slit_axis = match v {
                    "x" | "X" => SlitAxis::X,
                    "y" | "Y" => SlitAxis::Y,
                    _ => return Err(format!("axis must be x or y, got {v:?}")),
                }
            }
            "slit.width" => self.slit_width = nonneg(v)?,
            "slit.center" => self.slit_center = num(v)?,
            "interference.nx" => self.interference_nx = count(v)?,
            "interference.ny" => self.interference_ny = count(v)?,
            "interference.extent_x" => self.interference_extent_x = positive(v)?,
            "interference.extent_y" => self.interference_extent_y = positive(v)?,
            "pattern.file" => self.pattern_file = path_or_none(v),
            "pattern.builtin" => {
                self.pattern_builtin = match v {
                    "halves" => BuiltinPattern::Halves,
                    "square" => BuiltinPattern::Square,
                    "uniform" => BuiltinPattern::Uniform,
                    _ => {
                        return Err(format!(
                            "unknown builtin pattern {v:?} (halves, square, uniform)"
                        ))
                    }
                }
            }
            "pattern.n" => self.pattern_n = count(v)?,
            "pattern.pitch" => self.pattern_pitch = positive(v)?,
            "pattern.phase_scale" => self.pattern_phase_scale = num(v)?,
            "background.phase" => self.background_phase = num(v)?,
            "image.nx" => self.image_nx = count(v)?,
            "image.ny" => self.image_ny = count(v)?,
            "image.extent_x" => self.image_extent_x = auto_or(v, positive)?,
            "image.extent_y" => self.image_extent_y = auto_or(v, positive)?,
            "quad.source_nodes" => self.source_nodes = count(v)?,
            "quad.lens_nodes" => self.lens_nodes = auto_or(v, count)?.unwrap_or(0),
            "quad.panel_order" => self.panel_order = count(v)?,
            "quad.half_width_sigmas" => self.half_width_sigmas = positive(v)?,
            "quad.tolerance" => self.quad_tolerance = auto_or(v, positive)?,
            "detector.trigger_rate" => d.trigger_rate = nonneg(v)?,
            "detector.gate_width" => d.gate_width = nonneg(v)?,
            "detector.gate_delay" => d.gate_delay = nonneg(v)?,
            "detector.exposure" => d.exposure = nonneg(v)?,
            "detector.pair_detection_prob" => {
                let p = nonneg(v)?;
                if p > 1.0 {
                    return Err(format!("must be <= 1, got {p}"));
                }
                d.pair_detection_prob = p;
            }
            "detector.dark_rate" => d.dark_rate = nonneg(v)?,
            "detector.seed" => {
                d.seed = v
                    .parse()
                    .map_err(|_| format!("not a 64-bit unsigned integer: {v:?}"))?
            }
            "output.dir" => self.output_dir = PathBuf::from(v),
            "output.format" => {
                self.output_format = match v {
                    "matrix" => OutputFormat::Matrix,
                    "graymap" => OutputFormat::Graymap,
                    "both" => OutputFormat::Both,
                    _ => return Err(format!("format must be matrix, graymap or both, got {v:?}")),
                }
            }
            "exec" => {
                self.exec = match v {
                    "parallel" => Exec::Parallel,
                    "sequential" => Exec::Sequential,
                    _ => return Err(format!("exec must be parallel or sequential, got {v:?}")),
                }
            }
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// All keys with their current values, in file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let d = &self.detector;
        vec![
            ("source.lambda", self.lambda.to_string()),
            ("source.sigma", self.sigma.to_string()),
            ("source.w", self.w.to_string()),
            ("source.s1", self.s1.to_string()),
            ("source.s2", self.s2.to_string()),
            ("lens.f", self.lens_f.to_string()),
            ("lens.u", self.lens_u.to_string()),
            ("lens.aperture_radius", self.aperture_radius.to_string()),
            ("lens.aperture_file", show_path(&self.aperture_file)),
            (
                "lens.total_magnification",
                self.total_magnification.to_string(),
            ),
            ("polarizer.delta1_deg", self.delta1_deg.to_string()),
            ("polarizer.delta2_deg", self.delta2_deg.to_string()),
            ("slit.d", self.slit_d.to_string()),
            (
                "slit.axis",
                if self.slit_axis == SlitAxis::X {
                    "x"
                } else {
                    "y"
                }
                .to_string(),
            ),
            ("slit.width", self.slit_width.to_string()),
            ("slit.center", self.slit_center.to_string()),
            ("interference.nx", self.interference_nx.to_string()),
            ("interference.ny", self.interference_ny.to_string()),
            (
                "interference.extent_x",
                self.interference_extent_x.to_string(),
            ),
            (
                "interference.extent_y",
                self.interference_extent_y.to_string(),
            ),
            ("pattern.file", show_path(&self.pattern_file)),
            (
                "pattern.builtin",
                match self.pattern_builtin {
                    BuiltinPattern::Halves => "halves",
                    BuiltinPattern::Square => "square",
                    BuiltinPattern::Uniform => "uniform",
                }
                .to_string(),
            ),
            ("pattern.n", self.pattern_n.to_string()),
            ("pattern.pitch", self.pattern_pitch.to_string()),
            ("pattern.phase_scale", self.pattern_phase_scale.to_string()),
            ("background.phase", self.background_phase.to_string()),
            ("image.nx", self.image_nx.to_string()),
            ("image.ny", self.image_ny.to_string()),
            ("image.extent_x", show_opt(&self.image_extent_x, "auto")),
            ("image.extent_y", show_opt(&self.image_extent_y, "auto")),
            ("quad.source_nodes", self.source_nodes.to_string()),
            (
                "quad.lens_nodes",
                if self.lens_nodes == 0 {
                    "auto".to_string()
                } else {
                    self.lens_nodes.to_string()
                },
            ),
            ("quad.panel_order", self.panel_order.to_string()),
            ("quad.half_width_sigmas", self.half_width_sigmas.to_string()),
            ("quad.tolerance", show_opt(&self.quad_tolerance, "none")),
            ("detector.trigger_rate", d.trigger_rate.to_string()),
            ("detector.gate_width", d.gate_width.to_string()),
            ("detector.gate_delay", d.gate_delay.to_string()),
            ("detector.exposure", d.exposure.to_string()),
            (
                "detector.pair_detection_prob",
                d.pair_detection_prob.to_string(),
            ),
            ("detector.dark_rate", d.dark_rate.to_string()),
            ("detector.seed", d.seed.to_string()),
            ("output.dir", self.output_dir.display().to_string()),
            (
                "output.format",
                match self.output_format {
                    OutputFormat::Matrix => "matrix",
                    OutputFormat::Graymap => "graymap",
                    OutputFormat::Both => "both",
                }
                .to_string(),
            ),
            (
                "exec",
                if self.exec == Exec::Parallel {
                    "parallel"
                } else {
                    "sequential"
                }
                .to_string(),
            ),
        ]
    }

    /// Parse config text. `origin` names the source in diagnostics.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let err = |line, msg: String| Error::Parse {
            path: origin.to_string(),
            line,
            msg,
        };
        let mut cfg = RunConfig::default();
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| err(line, format!("expected key = value, found {body:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            if let Some(prev) = seen.insert(k.to_string(), line) {
                return Err(err(line, format!("{k} already set on line {prev}")));
            }
            cfg.set(k, v).map_err(|m| err(line, format!("{k}: {m}")))?;
        }
        cfg.check().map_err(|(key, msg)| {
            err(seen.get(key).copied().unwrap_or(0), format!("{key}: {msg}"))
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Resolved configuration as config text.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# resolved run configuration\n");
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Cross-field checks; on failure names the key to blame.
    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        let s = |e: Error| e.to_string();
        self.interference_source()
            .map_err(|e| ("source.s2", s(e)))?;
        if self.lens_u <= self.s1 {
            return Err(("lens.u", format!("must exceed source.s1 = {}", self.s1)));
        }
        self.lens().map_err(|e| {
            let key = if matches!(e, Error::Io { .. } | Error::Parse { .. }) {
                "lens.aperture_file"
            } else {
                "lens.u"
            };
            (key, s(e))
        })?;
        self.slit().map_err(|e| ("slit.width", s(e)))?;
        self.interference_grid()
            .map_err(|e| ("interference.nx", s(e)))?;
        if self.pattern_n == 0 {
            return Err(("pattern.n", "must be > 0".into()));
        }
        if self.image_nx < 2 || self.image_ny < 2 {
            return Err(("image.nx", "image grid needs at least 2x2 pixels".into()));
        }
        if self.source_nodes < 64 {
            return Err(("quad.source_nodes", "must be >= 64".into()));
        }
        if self.panel_order == 0 {
            return Err(("quad.panel_order", "must be > 0".into()));
        }
        if self.half_width_sigmas < 4.0 {
            return Err(("quad.half_width_sigmas", "must be >= 4".into()));
        }
        Ok(())
    }

    /// Source with the second plane at the interference plane.
    pub fn interference_source(&self) -> Result<SourceParams> {
        SourceParams::with_w(self.lambda, self.sigma, self.w, self.s1, self.s2)
    }

    /// Source with the second plane at the imaging lens (`s2 = u - s1`).
    pub fn imaging_source(&self) -> Result<SourceParams> {
        SourceParams::with_w(
            self.lambda,
            self.sigma,
            self.w,
            self.s1,
            self.lens_u - self.s1,
        )
    }

    pub fn aperture(&self) -> Result<Aperture> {
        match &self.aperture_file {
            None => Aperture::circular(self.aperture_radius),
            Some(p) => {
                let m = io::load_matrix(p)?;
                let pitch: f64 = m
                    .get("pitch_x")
                    .or(m.get("pitch"))
                    .and_then(|s| s.parse().ok())
                    .unwrap_or(1e-3);
                let origin = (
                    m.get("origin_x")
                        .and_then(|s| s.parse().ok())
                        .unwrap_or(-0.5 * pitch * (m.nx as f64 - 1.0)),
                    m.get("origin_y")
                        .and_then(|s| s.parse().ok())
                        .unwrap_or(-0.5 * pitch * (m.ny as f64 - 1.0)),
                );
                Ok(Aperture::Sampled(SampledAperture::new(
                    m.nx, m.ny, pitch, origin, m.values,
                )?))
            }
        }
    }

    /// Lens with the configured aperture (reads `lens.aperture_file` if set).
    pub fn lens(&self) -> Result<LensSystem> {
        LensSystem::imaging(self.lens_f, self.lens_u, self.aperture()?)
    }

    pub fn polarizers(&self) -> Result<(PolarizerAngle, PolarizerAngle)> {
        Ok((
            PolarizerAngle::from_degrees(self.delta1_deg)?,
            PolarizerAngle::from_degrees(self.delta2_deg)?,
        ))
    }

    pub fn slit(&self) -> Result<DoubleSlit> {
        DoubleSlit::new(
            self.slit_d,
            self.slit_axis,
            self.slit_width,
            self.slit_center,
        )
    }

    pub fn interference_grid(&self) -> Result<GridSpec> {
        GridSpec::new(
            self.interference_nx,
            self.interference_ny,
            self.interference_extent_x,
            self.interference_extent_y,
        )
    }

    pub fn source_quad(&self) -> QuadSettings {
        QuadSettings {
            nodes: self.source_nodes,
            panel_order: self.panel_order,
            half_width_sigmas: self.half_width_sigmas,
            tolerance: self.quad_tolerance,
        }
    }

    pub fn lens_quad(&self) -> QuadSettings {
        QuadSettings {
            nodes: self.lens_nodes,
            ..self.source_quad()
        }
    }

    /// The pattern from `pattern.file`, or the builtin one.
    pub fn pattern(&self) -> Result<PhasePattern> {
        if let Some(p) = &self.pattern_file {
            return io::load_pattern(p, self.pattern_phase_scale, self.pattern_pitch);
        }
        let (n, pitch) = (self.pattern_n, self.pattern_pitch);
        let phi = self.pattern_phase_scale;
        let half = 0.25 * n as f64 * pitch;
        match self.pattern_builtin {
            BuiltinPattern::Halves => {
                PhasePattern::from_fn(n, n, pitch, |x, _| if x < 0.0 { phi } else { 0.0 })
            }
            BuiltinPattern::Square => PhasePattern::from_fn(n, n, pitch, |x, y| {
                if x.abs() < half && y.abs() < half {
                    phi
                } else {
                    0.0
                }
            }),
            BuiltinPattern::Uniform => PhasePattern::uniform(n, n, pitch, 0.0),
        }
    }

    /// Uniform background pattern on the grid of `pattern`.
    pub fn background_pattern(&self, pattern: &PhasePattern) -> Result<PhasePattern> {
        PhasePattern::new(
            pattern.nx,
            pattern.ny,
            pattern.pitch,
            pattern.origin,
            vec![self.background_phase; pattern.phase.len()],
            pattern.aperture.clone(),
        )
    }

    pub fn image_grid(
        &self,
        params: &SourceParams,
        lens: &LensSystem,
        pattern: &PhasePattern,
    ) -> Result<GridSpec> {
        let auto = image_grid_for(params, lens, pattern, self.image_nx, self.image_ny)?;
        GridSpec::centered_at(
            self.image_nx,
            self.image_ny,
            self.image_extent_x.unwrap_or(auto.extent_x),
            self.image_extent_y.unwrap_or(auto.extent_y),
            auto.center_x,
            auto.center_y,
        )
    }
}
