//! Gauss–Legendre rules, single-panel and composite.
//!
//! Nodes are roots of the Legendre polynomial found by Newton iteration on the
//! three-term recurrence; weights follow from the derivative at each root.

use std::f64::consts::PI;

use crate::{Error, Result};

/// An `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // descending roots into mirrored slots; the middle root of odd n is 0
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(c + h * t))
            .sum::<f64>()
            * h
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Nodes and weights of a composite rule: `[a, b]` split into equal panels,
/// each carrying a `panel_order`-point Gauss–Legendre rule.
#[derive(Clone, Debug)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    pub fn new(a: f64, b: f64, panels: usize, panel_order: usize) -> Self {
        assert!(panels >= 1 && b > a);
        let gl = GaussLegendre::new(panel_order);
        let width = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * panel_order);
        let mut weights = Vec::with_capacity(panels * panel_order);
        for p in 0..panels {
            let lo = a + width * p as f64;
            let (c, h) = (lo + 0.5 * width, 0.5 * width);
            for (&t, &w) in gl.nodes().iter().zip(gl.weights()) {
                nodes.push(c + h * t);
                weights.push(h * w);
            }
        }
        CompositeRule { nodes, weights }
    }

    /// Symmetric rule on `[-half, half]` with at least `min_nodes` nodes.
    pub fn symmetric(half: f64, min_nodes: usize, panel_order: usize) -> Self {
        let panels = min_nodes.div_ceil(panel_order).max(1);
        CompositeRule::new(-half, half, panels, panel_order)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Quadrature controls shared by the source-plane and lens-plane integrals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadSettings {
    /// Total nodes per axis (rounded up to a whole number of panels). For the
    /// lens plane, 0 means "as many as the Fresnel-zone rule requires".
    pub nodes: usize,
    /// Points per Gauss–Legendre panel.
    pub panel_order: usize,
    /// Source-plane integration half-width in units of σ.
    pub half_width_sigmas: f64,
    /// When set, the result is recomputed with doubled nodes and the relative
    /// change must stay below this value.
    pub tolerance: Option<f64>,
}

impl Default for QuadSettings {
    fn default() -> Self {
        QuadSettings {
            nodes: 2048,
            panel_order: 16,
            half_width_sigmas: 4.0,
            tolerance: None,
        }
    }
}

impl QuadSettings {
    pub fn with_nodes(nodes: usize) -> Self {
        QuadSettings {
            nodes,
            ..Default::default()
        }
    }

    /// Lens-plane settings that take the node count from the Fresnel-zone rule.
    pub fn lens_auto() -> Self {
        QuadSettings {
            nodes: 0,
            ..Default::default()
        }
    }

    pub fn doubled(&self) -> Self {
        QuadSettings {
            nodes: self.nodes * 2,
            ..*self
        }
    }

    pub(crate) fn validate_source(&self) -> Result<()> {
        if self.nodes < 64 {
            return Err(Error::param(format!(
                "source quadrature needs at least 64 nodes per axis, got {}",
                self.nodes
            )));
        }
        if !(self.half_width_sigmas >= 4.0) {
            return Err(Error::param(format!(
                "source integration half-width must be at least 4 sigma, got {}",
                self.half_width_sigmas
            )));
        }
        self.validate_common()
    }

    pub(crate) fn validate_common(&self) -> Result<()> {
        if self.panel_order == 0 {
            return Err(Error::param("quadrature panel order must be positive"));
        }
        if let Some(t) = self.tolerance {
            if !(t > 0.0) {
                return Err(Error::param("quadrature tolerance must be positive"));
            }
        }
        Ok(())
    }
}
