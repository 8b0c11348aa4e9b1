//! Experiment configuration: JSON schema, per-experiment defaults and
//! validation.
//!
//! A config file only needs the `experiment` field; everything else is
//! filled from [`ExperimentConfig::defaults`]. Objects are merged key by
//! key, so `{"experiment": "spectrum", "geometry": {"n": 51}}` keeps the
//! default radius and layout.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::path::{Path, PathBuf};

use cgpt_core::geometry::Layout;
use cgpt_core::{AcquisitionGeometry, MaterialParams, MotionModel, TargetState};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    Spectrum,
    ReconVsAperture,
    TrackFullview,
    TrackLimited,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 4] = [
        ExperimentId::Spectrum,
        ExperimentId::ReconVsAperture,
        ExperimentId::TrackFullview,
        ExperimentId::TrackLimited,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentId::Spectrum => "spectrum",
            ExperimentId::ReconVsAperture => "recon-vs-aperture",
            ExperimentId::TrackFullview => "track-fullview",
            ExperimentId::TrackLimited => "track-limited",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ExperimentId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| {
                let known: Vec<_> = Self::ALL.iter().map(|id| id.as_str()).collect();
                format!(
                    "unknown experiment `{s}` (expected one of {})",
                    known.join(", ")
                )
            })
    }
}

/// Array layout as written in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayoutConfig {
    /// `n` points equally spaced on `(0, gamma]`.
    Uniform { gamma: f64 },
    /// `groups` arcs of angular `span`, group `g` starting at `2πg/groups`.
    Grouped { groups: usize, span: f64 },
}

impl LayoutConfig {
    pub fn to_layout(&self, n: usize) -> Layout {
        match *self {
            LayoutConfig::Uniform { gamma } => Layout::Uniform { gamma },
            LayoutConfig::Grouped { groups, span } => Layout::rotated_groups(n, groups, span),
        }
    }

    pub fn label(&self) -> String {
        match self {
            LayoutConfig::Uniform { gamma } => format!("uniform-{:.4}pi", gamma / PI),
            LayoutConfig::Grouped { groups, span } => {
                format!("grouped-{groups}x{:.4}pi", span / PI)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub n: usize,
    pub radius: f64,
    pub delta: f64,
    pub layout: LayoutConfig,
}

impl GeometryConfig {
    pub fn build(&self) -> cgpt_core::Result<AcquisitionGeometry> {
        self.build_with(&self.layout, self.delta)
    }

    pub fn build_with(
        &self,
        layout: &LayoutConfig,
        delta: f64,
    ) -> cgpt_core::Result<AcquisitionGeometry> {
        AcquisitionGeometry::new(self.n, self.radius, delta, layout.to_layout(self.n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrdersConfig {
    /// Reconstruction / spectrum order.
    pub k: usize,
    /// Order used to synthesise tracking data.
    pub k_data: usize,
    /// Order of the tracking observation model.
    pub k_track: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionConfig {
    pub sigma_a: f64,
    pub sigma_theta: f64,
    pub dtau: f64,
    pub steps: usize,
}

impl MotionConfig {
    pub fn model(&self) -> cgpt_core::Result<MotionModel> {
        MotionModel::new(self.sigma_a, self.sigma_theta, self.dtau)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuGridConfig {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub output_dir: PathBuf,
    pub geometry: GeometryConfig,
    pub material: MaterialConfig,
    pub orders: OrdersConfig,
    pub motion: MotionConfig,
    /// True initial state `(vₓ, v_y, x, y, θ)`.
    pub initial_state: [f64; 5],
    /// Filter initial mean.
    pub initial_guess: [f64; 5],
    /// Relative noise levels `p`.
    pub noise_levels: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Apertures `γ` swept by `spectrum` and `recon-vs-aperture`.
    pub apertures: Vec<f64>,
    /// Layouts compared by `track-limited`.
    pub layouts: Vec<LayoutConfig>,
    /// Target diameters swept by `track-fullview` (`δ` = diameter / 2).
    pub scales: Vec<f64>,
    pub mu_grid: MuGridConfig,
}

impl ExperimentConfig {
    pub fn defaults(id: ExperimentId) -> Self {
        let tracking_geometry = |n: usize, layout| GeometryConfig {
            n,
            radius: 30.0,
            delta: 5.0,
            layout,
        };
        let mut cfg = ExperimentConfig {
            experiment: id,
            output_dir: PathBuf::from("out").join(id.as_str()),
            geometry: tracking_geometry(20, LayoutConfig::Uniform { gamma: TAU }),
            material: MaterialConfig { kappa: 3.0 },
            orders: OrdersConfig {
                k: 5,
                k_data: 5,
                k_track: 2,
            },
            motion: MotionConfig {
                sigma_a: 2.0,
                sigma_theta: 0.5,
                dtau: 0.01,
                steps: 1000,
            },
            initial_state: [-1.0, 1.0, 5.0, -5.0, 1.5 * PI],
            initial_guess: [0.0, 0.0, 10.0, -0.5, 0.0],
            noise_levels: vec![0.1, 0.2],
            seeds: (0..10).collect(),
            apertures: Vec::new(),
            layouts: Vec::new(),
            scales: Vec::new(),
            mu_grid: MuGridConfig {
                lo: 1e-6,
                hi: 1e-1,
                count: 26,
            },
        };
        let reconstruction_geometry = GeometryConfig {
            n: 101,
            radius: 1.2,
            delta: 1.0,
            layout: LayoutConfig::Uniform { gamma: TAU },
        };
        match id {
            ExperimentId::Spectrum => {
                cfg.geometry = reconstruction_geometry;
                cfg.orders.k = 50;
                cfg.apertures = vec![TAU, 1.5 * PI, PI, 0.5 * PI, 0.25 * PI];
                cfg.noise_levels = Vec::new();
                cfg.seeds = vec![0];
            }
            ExperimentId::ReconVsAperture => {
                cfg.geometry = reconstruction_geometry;
                cfg.apertures = (1..=8).map(|i| i as f64 * PI / 4.0).collect();
                cfg.noise_levels = vec![0.0, 0.01, 0.1];
            }
            ExperimentId::TrackFullview => {
                cfg.scales = vec![10.0, 1.0];
            }
            ExperimentId::TrackLimited => {
                cfg.geometry = tracking_geometry(21, LayoutConfig::Uniform { gamma: PI });
                cfg.layouts = vec![
                    LayoutConfig::Uniform { gamma: PI },
                    LayoutConfig::Grouped {
                        groups: 5,
                        span: 0.2 * PI,
                    },
                ];
                cfg.noise_levels = vec![0.1];
            }
        }
        cfg
    }

    /// Parses a JSON document, fills defaults and validates.
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let raw: Value = serde_json::from_str(text).map_err(|e| ConfigError::Schema {
            path: ".".into(),
            message: e.to_string(),
        })?;
        Self::from_value(raw)
    }

    pub fn from_value(raw: Value) -> Result<Self, ConfigError> {
        let Value::Object(map) = &raw else {
            return Err(ConfigError::Schema {
                path: ".".into(),
                message: "expected a JSON object".into(),
            });
        };
        let id_value = map.get("experiment").ok_or_else(|| ConfigError::Schema {
            path: "experiment".into(),
            message: "missing field `experiment`".into(),
        })?;
        let id: ExperimentId =
            serde_json::from_value(id_value.clone()).map_err(|e| ConfigError::Schema {
                path: "experiment".into(),
                message: e.to_string(),
            })?;
        let mut merged =
            serde_json::to_value(Self::defaults(id)).expect("defaults serialise to JSON");
        merge(&mut merged, raw);
        let cfg: ExperimentConfig =
            serde_path_to_error::deserialize(merged).map_err(|e| ConfigError::Schema {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serialises to JSON")
    }

    /// SHA-256 of the compact JSON form.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn material(&self) -> MaterialParams {
        MaterialParams::new(self.material.kappa).expect("validated material")
    }

    pub fn initial_state(&self) -> TargetState {
        TargetState::from_slice(&self.initial_state)
    }

    pub fn initial_guess(&self) -> TargetState {
        TargetState::from_slice(&self.initial_guess)
    }

    /// Checks every precondition the experiment will rely on.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |field: &str, e: cgpt_core::Error| ConfigError::Invalid {
            field: field.into(),
            message: e.to_string(),
        };
        let check = |ok: bool, field: &str, message: String| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Invalid {
                    field: field.into(),
                    message,
                })
            }
        };
        let g = &self.geometry;
        let geom = g.build().map_err(|e| invalid("geometry", e))?;
        MaterialParams::new(self.material.kappa).map_err(|e| invalid("material.kappa", e))?;
        self.motion.model().map_err(|e| invalid("motion", e))?;
        check(
            self.motion.dtau > 0.0,
            "motion.dtau",
            "time step must be positive".into(),
        )?;
        check(
            self.motion.steps > 0,
            "motion.steps",
            "need at least one step".into(),
        )?;
        check(
            !self.seeds.is_empty(),
            "seeds",
            "need at least one seed".into(),
        )?;
        for (i, p) in self.noise_levels.iter().enumerate() {
            check(
                *p >= 0.0 && p.is_finite(),
                &format!("noise_levels[{i}]"),
                format!("noise level must be finite and non-negative, got {p}"),
            )?;
        }
        let o = &self.orders;
        check(o.k >= 1, "orders.k", "order must be at least 1".into())?;
        check(
            o.k_track >= 1,
            "orders.k_track",
            "order must be at least 1".into(),
        )?;
        check(
            o.k_data >= o.k_track,
            "orders.k_data",
            format!(
                "data order {} must be at least the tracking order {}",
                o.k_data, o.k_track
            ),
        )?;
        let mu = &self.mu_grid;
        check(
            mu.lo > 0.0 && mu.hi >= mu.lo && mu.count >= 1 && mu.hi.is_finite(),
            "mu_grid",
            format!("need 0 < lo <= hi and count >= 1, got {mu:?}"),
        )?;
        for (i, s) in self
            .initial_state
            .iter()
            .chain(&self.initial_guess)
            .enumerate()
        {
            check(
                s.is_finite(),
                if i < 5 {
                    "initial_state"
                } else {
                    "initial_guess"
                },
                "state entries must be finite".into(),
            )?;
        }
        for (i, gamma) in self.apertures.iter().enumerate() {
            check(
                *gamma > 0.0 && *gamma <= TAU,
                &format!("apertures[{i}]"),
                format!("aperture must lie in (0, 2pi], got {gamma}"),
            )?;
        }
        match self.experiment {
            ExperimentId::Spectrum | ExperimentId::ReconVsAperture => {
                check(
                    g.n >= 2 * o.k,
                    "orders.k",
                    format!("need N >= 2K, got N = {} and K = {}", g.n, o.k),
                )?;
                check(
                    !self.apertures.is_empty(),
                    "apertures",
                    "need at least one aperture".into(),
                )?;
                if self.experiment == ExperimentId::ReconVsAperture {
                    check(
                        !self.noise_levels.is_empty(),
                        "noise_levels",
                        "need at least one noise level".into(),
                    )?;
                }
            }
            ExperimentId::TrackFullview | ExperimentId::TrackLimited => {
                check(
                    g.n >= 2 * o.k_track,
                    "orders.k_track",
                    format!("need N >= 2K, got N = {} and K = {}", g.n, o.k_track),
                )?;
                check(
                    !self.noise_levels.is_empty(),
                    "noise_levels",
                    "need at least one noise level".into(),
                )?;
                let start = self.initial_state();
                let deltas: Vec<f64> = if self.experiment == ExperimentId::TrackFullview {
                    check(
                        !self.scales.is_empty(),
                        "scales",
                        "need at least one scale".into(),
                    )?;
                    self.scales.iter().map(|s| s / 2.0).collect()
                } else {
                    check(
                        !self.layouts.is_empty(),
                        "layouts",
                        "need at least one layout".into(),
                    )?;
                    for (i, layout) in self.layouts.iter().enumerate() {
                        g.build_with(layout, g.delta)
                            .map_err(|e| invalid(&format!("layouts[{i}]"), e))?;
                    }
                    vec![g.delta]
                };
                for (i, delta) in deltas.iter().enumerate() {
                    check(
                        *delta > 0.0 && delta.is_finite(),
                        &format!("scales[{i}]"),
                        format!("target scale must be positive, got {}", 2.0 * delta),
                    )?;
                    let extent = start.extent(*delta);
                    check(
                        extent < geom.radius(),
                        "initial_state",
                        format!(
                            "initial target extent {extent} is not inside the ring of radius {}",
                            geom.radius()
                        ),
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// Deep merge of `over` into `base`. A tagged object whose `kind` changes is
/// replaced instead of merged.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            let kind_changed = match (b.get("kind"), o.get("kind")) {
                (Some(x), Some(y)) => x != y,
                _ => false,
            };
            if kind_changed {
                *b = o;
                return;
            }
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => ConfigError::NotFound(path.to_path_buf()),
        _ => ConfigError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        },
    })?;
    ExperimentConfig::from_json_str(&text)
}
