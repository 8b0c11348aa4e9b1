//! Circular array of coincident sources and receivers.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimal angular separation below which two array elements are considered
/// coincident.
const ANGLE_SEPARATION_TOL: f64 = 1e-12;

/// One arc of evenly spaced elements inside a grouped layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcGroup {
    /// Angle at which the arc starts (radians).
    pub start: f64,
    /// Angular extent covered by the arc (radians).
    pub span: f64,
    /// Number of elements on the arc.
    pub count: usize,
}

/// Placement of the array elements on the ring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// `N` elements at `θ_s = γ s / N`, `s = 1..N`.
    Uniform { gamma: f64 },
    /// Several arcs; arc `g` places `count` elements at
    /// `start + span·j/count`, `j = 1..count`.
    Grouped { groups: Vec<ArcGroup> },
}

impl Layout {
    /// Evenly rotated arcs: group `g` starts at `2π g / groups`, each arc
    /// spans `span`, and `n` elements are split as evenly as possible with
    /// the remainder going to the first groups.
    pub fn rotated_groups(n: usize, groups: usize, span: f64) -> Self {
        let base = n / groups.max(1);
        let extra = n % groups.max(1);
        let groups = (0..groups)
            .map(|g| ArcGroup {
                start: TAU * g as f64 / groups as f64,
                span,
                count: base + usize::from(g < extra),
            })
            .collect();
        Layout::Grouped { groups }
    }
}

/// Ring of `N` coincident sources/receivers of radius `R` around a target of
/// characteristic size `δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionGeometry {
    radius: f64,
    delta: f64,
    layout: Layout,
    angles: Vec<f64>,
}

impl AcquisitionGeometry {
    pub fn new(n: usize, radius: f64, delta: f64, layout: Layout) -> Result<Self> {
        if !(radius.is_finite() && delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "radius {radius} and delta {delta} must be finite and positive"
            )));
        }
        if radius / delta <= 1.0 {
            return Err(Error::TargetNotEnclosed(radius / delta));
        }
        let angles = match &layout {
            Layout::Uniform { gamma } => {
                if !(gamma.is_finite() && *gamma > 0.0 && *gamma <= TAU * (1.0 + 1e-14)) {
                    return Err(Error::InvalidGeometry(format!(
                        "aperture {gamma} must lie in (0, 2pi]"
                    )));
                }
                if n == 0 {
                    return Err(Error::InvalidGeometry("empty array".into()));
                }
                (1..=n).map(|s| gamma * s as f64 / n as f64).collect()
            }
            Layout::Grouped { groups } => grouped_angles(n, groups)?,
        };
        check_distinct(&angles)?;
        Ok(Self {
            radius,
            delta,
            layout,
            angles,
        })
    }

    pub fn uniform(n: usize, gamma: f64, radius: f64, delta: f64) -> Result<Self> {
        Self::new(n, radius, delta, Layout::Uniform { gamma })
    }

    pub fn full_view(n: usize, radius: f64, delta: f64) -> Result<Self> {
        Self::uniform(n, TAU, radius, delta)
    }

    pub fn grouped(groups: Vec<ArcGroup>, radius: f64, delta: f64) -> Result<Self> {
        let n = groups.iter().map(|g| g.count).sum();
        Self::new(n, radius, delta, Layout::Grouped { groups })
    }

    pub fn n(&self) -> usize {
        self.angles.len()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `ρ = R / δ`.
    pub fn rho(&self) -> f64 {
        self.radius / self.delta
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// Element angles in `(0, 2π]`, strictly increasing.
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn is_full_view(&self) -> bool {
        matches!(self.layout, Layout::Uniform { gamma } if (gamma - TAU).abs() <= 1e-12 * TAU)
    }

    /// Cartesian positions of the elements.
    pub fn positions(&self) -> Vec<[f64; 2]> {
        self.angles
            .iter()
            .map(|t| [self.radius * t.cos(), self.radius * t.sin()])
            .collect()
    }
}

fn grouped_angles(n: usize, groups: &[ArcGroup]) -> Result<Vec<f64>> {
    let total: usize = groups.iter().map(|g| g.count).sum();
    if total != n || n == 0 {
        return Err(Error::InvalidGeometry(format!(
            "group counts sum to {total}, expected N = {n}"
        )));
    }
    let mut angles = Vec::with_capacity(n);
    for g in groups {
        if !(g.start.is_finite() && g.span.is_finite() && g.span > 0.0) || g.count == 0 {
            return Err(Error::InvalidGeometry(format!("invalid arc group {g:?}")));
        }
        for j in 1..=g.count {
            let mut a = (g.start + g.span * j as f64 / g.count as f64).rem_euclid(TAU);
            if a <= 0.0 {
                a = TAU;
            }
            angles.push(a);
        }
    }
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}

/// Checks that a sorted angle list has no (numerically) coincident entries,
/// including the wrap-around pair.
pub(crate) fn check_distinct(sorted: &[f64]) -> Result<()> {
    for (i, w) in sorted.windows(2).enumerate() {
        if w[1] - w[0] <= ANGLE_SEPARATION_TOL {
            return Err(Error::CoincidentAngles(i, i + 1));
        }
    }
    if sorted.len() > 1 {
        let wrap = sorted[0] + TAU - sorted[sorted.len() - 1];
        if wrap <= ANGLE_SEPARATION_TOL {
            return Err(Error::CoincidentAngles(0, sorted.len() - 1));
        }
    }
    Ok(())
}
