//! Rasterized rotated ellipses used as cell stamps.

use std::f64::consts::PI;

use rand::Rng;

use crate::config::SimulationConfig;
use crate::grid::WINDOW_RADIUS;

/// Slack on the membership inequality so lattice points lying exactly on
/// the boundary do not flicker with the rotation angle.
const BOUNDARY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct EllipseStamp {
    pub center: (usize, usize),
    pub semi_major: f64,
    pub eccentricity: f64,
    pub theta: f64,
    /// Member pixels as (x, y), restricted to the context window and image.
    pub pixels: Vec<(usize, usize)>,
}

impl EllipseStamp {
    pub fn semi_minor(&self) -> f64 {
        self.semi_major * (1.0 - self.eccentricity * self.eccentricity).sqrt()
    }
}

/// Pixel offsets `(dx, dy)` whose centers satisfy
/// `u²/a² + v²/b² <= 1` in the frame rotated by `theta`.
pub fn ellipse_offsets(semi_major: f64, eccentricity: f64, theta: f64) -> Vec<(i32, i32)> {
    let a = semi_major;
    let b = a * (1.0 - eccentricity * eccentricity).sqrt();
    let (sin, cos) = theta.sin_cos();
    let r = a.ceil().min(WINDOW_RADIUS as f64) as i32;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            let (fx, fy) = (dx as f64, dy as f64);
            let u = fx * cos + fy * sin;
            let v = -fx * sin + fy * cos;
            let q = if b > 0.0 {
                (u / a).powi(2) + (v / b).powi(2)
            } else if v.abs() <= BOUNDARY_SLACK {
                (u / a).powi(2)
            } else {
                f64::INFINITY
            };
            if q <= 1.0 + BOUNDARY_SLACK {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Stamp for phenotype `phenotype` (0-based) centered at `center`, with a
/// uniformly random orientation in [0, π).
pub fn generate_ellipse(
    center: (usize, usize),
    phenotype: usize,
    cfg: &SimulationConfig,
    rng: &mut impl Rng,
) -> EllipseStamp {
    let theta = rng.random_range(0.0..PI);
    stamp_with_angle(center, phenotype, cfg, theta)
}

pub fn stamp_with_angle(
    center: (usize, usize),
    phenotype: usize,
    cfg: &SimulationConfig,
    theta: f64,
) -> EllipseStamp {
    let a = cfg.phenotype_size[phenotype];
    let e = cfg.phenotype_eccentricity[phenotype];
    let (cx, cy) = (center.0 as i64, center.1 as i64);
    let pixels = ellipse_offsets(a, e, theta)
        .into_iter()
        .filter_map(|(dx, dy)| {
            let x = cx + dx as i64;
            let y = cy + dy as i64;
            (x >= 0 && y >= 0 && (x as usize) < cfg.width && (y as usize) < cfg.height)
                .then_some((x as usize, y as usize))
        })
        .collect();
    EllipseStamp {
        center,
        semi_major: a,
        eccentricity: e,
        theta,
        pixels,
    }
}
