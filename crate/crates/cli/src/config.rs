//! Run configuration shared by all subcommands.

use clap::ValueEnum;
use serde::Serialize;
use topo1d::homotopy::DEFAULT_SAMPLES;
use topo1d::index::KERNEL_TOL;
use topo1d::stummel::DEFAULT_QUADRATURE;
use topo1d::{Error, Result};

/// Momentum resolution of the winding route when no quadrature is given.
pub const DEFAULT_WINDING_RESOLUTION: usize = 1024;
pub const DEFAULT_GAP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub kernel_tol: f64,
    /// `None` selects `1e-8 * ||H||` per operator.
    pub symmetry_tol: Option<f64>,
    pub gap_tol: f64,
    /// `None` selects the per-route default: contour quadrature for the
    /// Stummel idempotents, momentum grid for the winding route.
    pub quadrature: Option<usize>,
    pub samples: usize,
    pub seed: u64,
    pub format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kernel_tol: KERNEL_TOL,
            symmetry_tol: None,
            gap_tol: DEFAULT_GAP_TOL,
            quadrature: None,
            samples: DEFAULT_SAMPLES,
            seed: 0,
            format: OutputFormat::Json,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::Usage(format!("{name} must be positive and finite, got {x}")))
            }
        };
        positive("kernel tolerance", self.kernel_tol)?;
        positive("gap tolerance", self.gap_tol)?;
        if let Some(t) = self.symmetry_tol {
            positive("symmetry tolerance", t)?;
        }
        if self.quadrature == Some(0) {
            return Err(Error::Usage("quadrature must be positive".into()));
        }
        if self.samples < 2 {
            return Err(Error::Usage(format!("need at least two samples, got {}", self.samples)));
        }
        Ok(())
    }

    pub fn contour_quadrature(&self) -> usize {
        self.quadrature.unwrap_or(DEFAULT_QUADRATURE)
    }

    pub fn winding_resolution(&self) -> usize {
        self.quadrature.unwrap_or(DEFAULT_WINDING_RESOLUTION)
    }
}
