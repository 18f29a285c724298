//! Experiment configuration: one flat struct covering all scenarios, with
//! per-experiment validation and documented defaults.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-splitter 2×2 unitary parameters, as [re, im] pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitterSpec {
    pub transmission: [f64; 2],
    pub reflection: [f64; 2],
}

/// Configuration shared by every experiment. Fields an experiment does not
/// use are ignored by it; validation only touches the fields it reads.
/// Complex amplitudes are [re, im] pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional experiment name; when present it must match the experiment
    /// being run.
    pub experiment: Option<String>,
    /// Initial amplitudes: the (a1, a2) pair for two-version experiments,
    /// one amplitude per direction for mott-sphere and track-chamber, one
    /// per slit for double-slit. Normalized by the builders.
    pub amplitudes: Option<Vec<[f64; 2]>>,
    /// Grain count N for mott-sphere.
    pub grains: usize,
    /// Screen cell count M for double-slit.
    pub screen_cells: usize,
    /// Slit separation d in meters.
    pub slit_separation_m: f64,
    /// Wavelength λ in meters.
    pub wavelength_m: f64,
    /// Slit-to-screen distance in meters.
    pub screen_distance_m: f64,
    /// Analyzer angle θa in radians (bell-aspect).
    pub analyzer_angle_a_rad: f64,
    /// Analyzer angle θb in radians (bell-aspect).
    pub analyzer_angle_b_rad: f64,
    /// Splitting depth D for beam-cascade.
    pub cascade_depth: usize,
    /// Per-splitter transmission/reflection amplitudes; defaults to 50/50
    /// at every depth.
    pub splitters: Option<Vec<SplitterSpec>>,
    /// Detector layer count for track-chamber.
    pub layers: usize,
    /// Cells per layer (and direction count) for track-chamber.
    pub cells_per_layer: usize,
    /// Master seed; all randomness in a run flows from it.
    pub seed: u64,
    /// Amplitude pairs drawn by the isolation check.
    pub isolation_samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: None,
            amplitudes: None,
            grains: 12,
            screen_cells: 64,
            slit_separation_m: 1e-5,
            wavelength_m: 5e-7,
            screen_distance_m: 1.0,
            analyzer_angle_a_rad: 0.0,
            analyzer_angle_b_rad: std::f64::consts::FRAC_PI_3,
            cascade_depth: 3,
            splitters: None,
            layers: 4,
            cells_per_layer: 3,
            seed: 42,
            isolation_samples: 100,
        }
    }
}

/// Maximum cascade depth accepted by config validation. Deeper layouts are
/// rejected here; shallower ones may still hit the layout capacity cap.
pub const MAX_CASCADE_DEPTH: usize = 16;

impl ExperimentConfig {
    /// Parses a config from JSON, mapping parse failures to config errors.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::config("<config>", e.to_string()))
    }

    pub fn check_experiment_name(&self, name: &str) -> Result<()> {
        if let Some(declared) = &self.experiment {
            if declared != name {
                return Err(Error::config(
                    "experiment",
                    format!("config declares `{declared}`, running `{name}`"),
                ));
            }
        }
        Ok(())
    }

    /// Resolves the amplitude vector for an experiment expecting `expected`
    /// entries: applies the default when absent, rejects wrong lengths and
    /// zero vectors, normalizes, and reports whether normalization changed
    /// anything beyond 1e-9.
    pub fn resolve_amplitudes(
        &self,
        expected: usize,
        default: &[Complex64],
    ) -> Result<(Vec<Complex64>, bool)> {
        debug_assert_eq!(default.len(), expected);
        let raw: Vec<Complex64> = match &self.amplitudes {
            Some(pairs) => pairs.iter().map(|&[re, im]| Complex64::new(re, im)).collect(),
            None => default.to_vec(),
        };
        if raw.len() != expected {
            return Err(Error::config(
                "amplitudes",
                format!("expected {expected} entries, got {}", raw.len()),
            ));
        }
        if raw.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::config("amplitudes", "entries must be finite"));
        }
        let norm_sqr: f64 = raw.iter().map(|a| a.norm_sqr()).sum();
        if norm_sqr < 1e-24 {
            return Err(Error::config("amplitudes", "amplitude vector is zero"));
        }
        let applied = (norm_sqr - 1.0).abs() > 1e-9;
        let inv = 1.0 / norm_sqr.sqrt();
        Ok((raw.into_iter().map(|a| a * inv).collect(), applied))
    }

    /// Resolves the splitter list for a cascade of the configured depth.
    /// Missing list → 50/50 splitters; each splitter is normalized to
    /// |t|² + |r|² = 1 and the flag reports whether that changed anything.
    pub fn resolve_splitters(&self) -> Result<(Vec<(Complex64, Complex64)>, bool)> {
        let depth = self.cascade_depth;
        let half = std::f64::consts::FRAC_1_SQRT_2;
        let raw: Vec<(Complex64, Complex64)> = match &self.splitters {
            Some(list) => {
                if list.len() != depth {
                    return Err(Error::config(
                        "splitters",
                        format!("expected {depth} splitters, got {}", list.len()),
                    ));
                }
                list.iter()
                    .map(|s| {
                        (
                            Complex64::new(s.transmission[0], s.transmission[1]),
                            Complex64::new(s.reflection[0], s.reflection[1]),
                        )
                    })
                    .collect()
            }
            None => vec![(Complex64::new(half, 0.0), Complex64::new(half, 0.0)); depth],
        };
        let mut applied = false;
        let mut out = Vec::with_capacity(depth);
        for (k, (t, r)) in raw.into_iter().enumerate() {
            if !t.re.is_finite() || !t.im.is_finite() || !r.re.is_finite() || !r.im.is_finite() {
                return Err(Error::config(
                    format!("splitters[{k}]"),
                    "entries must be finite",
                ));
            }
            let norm_sqr = t.norm_sqr() + r.norm_sqr();
            if norm_sqr < 1e-24 {
                return Err(Error::config(
                    format!("splitters[{k}]"),
                    "transmission and reflection are both zero",
                ));
            }
            if (norm_sqr - 1.0).abs() > 1e-9 {
                applied = true;
            }
            let inv = 1.0 / norm_sqr.sqrt();
            out.push((t * inv, r * inv));
        }
        Ok((out, applied))
    }

    pub fn require_positive(&self, path: &str, value: f64) -> Result<()> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::config(path, format!("must be strictly positive, got {value}")));
        }
        Ok(())
    }

    pub fn validate_geometry(&self) -> Result<()> {
        self.require_positive("slit_separation_m", self.slit_separation_m)?;
        self.require_positive("wavelength_m", self.wavelength_m)?;
        self.require_positive("screen_distance_m", self.screen_distance_m)?;
        Ok(())
    }

    pub fn validate_cascade_depth(&self) -> Result<()> {
        if self.cascade_depth < 1 {
            return Err(Error::config("cascade_depth", "must be at least 1"));
        }
        if self.cascade_depth > MAX_CASCADE_DEPTH {
            return Err(Error::config(
                "cascade_depth",
                format!("must be at most {MAX_CASCADE_DEPTH}"),
            ));
        }
        Ok(())
    }

    /// Echo of this config with resolved amplitudes written back, for
    /// reports.
    pub fn echo_with(
        &self,
        name: &str,
        amplitudes: Option<&[Complex64]>,
        splitters: Option<&[(Complex64, Complex64)]>,
    ) -> ExperimentConfig {
        let mut echo = self.clone();
        echo.experiment = Some(name.to_string());
        if let Some(amps) = amplitudes {
            echo.amplitudes = Some(amps.iter().map(|a| [a.re, a.im]).collect());
        }
        if let Some(splits) = splitters {
            echo.splitters = Some(
                splits
                    .iter()
                    .map(|(t, r)| SplitterSpec {
                        transmission: [t.re, t.im],
                        reflection: [r.re, r.im],
                    })
                    .collect(),
            );
        }
        echo
    }
}

/// Human-readable config schema for one experiment, served by
/// `branchlab schema`.
pub fn schema(experiment: &str) -> Result<serde_json::Value> {
    use serde_json::json;
    let common = json!({
        "experiment": {"type": "string?", "doc": "optional; must match the experiment being run"},
        "seed": {"type": "u64", "default": 42, "doc": "master seed for every random draw in the run"},
        "isolation_samples": {"type": "usize", "default": 100, "doc": "amplitude pairs drawn by the isolation check"},
    });
    let fields = match experiment {
        "stern-gerlach" | "two-observer" => json!({
            "amplitudes": {"type": "[[re,im]; 2]", "default": [[0.6,0.0],[0.8,0.0]], "doc": "spin -, + amplitudes; normalized by the builder"},
        }),
        "mott-sphere" => json!({
            "grains": {"type": "usize >= 2", "default": 12, "doc": "film grains on the sphere"},
            "amplitudes": {"type": "[[re,im]; grains]", "default": "uniform", "doc": "incident direction amplitudes"},
        }),
        "double-slit" => json!({
            "screen_cells": {"type": "usize >= 3", "default": 64, "doc": "screen cells M"},
            "amplitudes": {"type": "[[re,im]; 2]", "default": [[0.6,0.0],[0.8,0.0]], "doc": "top, bottom slit amplitudes"},
            "slit_separation_m": {"type": "f64 > 0", "default": 1e-5},
            "wavelength_m": {"type": "f64 > 0", "default": 5e-7},
            "screen_distance_m": {"type": "f64 > 0", "default": 1.0},
        }),
        "bell-aspect" => json!({
            "analyzer_angle_a_rad": {"type": "f64", "default": 0.0},
            "analyzer_angle_b_rad": {"type": "f64", "default": std::f64::consts::FRAC_PI_3},
        }),
        "beam-cascade" => json!({
            "cascade_depth": {"type": "usize in 1..=16", "default": 3},
            "splitters": {"type": "[{transmission:[re,im], reflection:[re,im]}; depth]", "default": "50/50 each", "doc": "normalized to |t|^2+|r|^2=1"},
        }),
        "track-chamber" => json!({
            "layers": {"type": "usize >= 1", "default": 4},
            "cells_per_layer": {"type": "usize >= 2", "default": 3, "doc": "cells per layer and direction count"},
            "amplitudes": {"type": "[[re,im]; cells_per_layer]", "default": "uniform", "doc": "direction amplitudes"},
        }),
        other => {
            return Err(Error::config(
                "experiment",
                format!("unknown experiment `{other}`"),
            ))
        }
    };
    let mut merged = fields.as_object().cloned().unwrap_or_default();
    for (k, v) in common.as_object().unwrap() {
        merged.insert(k.clone(), v.clone());
    }
    Ok(json!({ "experiment": experiment, "fields": merged }))
}
