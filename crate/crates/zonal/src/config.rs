//! JSON schemas for configuration files, datasets, and stored estimates,
//! with conversions to and from the domain types.
//!
//! Schemas are plain serde structs so the files stay human-readable and
//! byte-stable; loading always re-validates against the domain rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{CovEstimate, Dataset, Subject};
use crate::experiments::{DesignPoint, EtaRule, ExperimentConfig};
use crate::kernel::ZonalKernel;
use crate::simulate::{CovModel, NoiseSpec};
use crate::spaces::{Point, SpaceKind, SpaceParams};

/// Space selection: family and manifold dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub kind: SpaceKind,
    pub d: usize,
}

impl SpaceSpec {
    pub fn build(&self) -> Result<SpaceParams> {
        SpaceParams::new(self.kind, self.d)
    }

    pub fn of(params: &SpaceParams) -> SpaceSpec {
        SpaceSpec {
            kind: params.kind,
            d: params.dim,
        }
    }
}

/// One anisotropic bump: anchor coordinates and amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSpec {
    pub coords: Vec<f64>,
    pub amplitude: f64,
}

/// Ground-truth model configuration: power-law angular spectrum
/// `b_ell = gamma_ell = (1 - lambda_ell)^(-s)` up to `ell_max`, anchored
/// bumps, noise variance, and the claimed field smoothness `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub space: SpaceSpec,
    pub s: f64,
    pub ell_max: usize,
    #[serde(default)]
    pub anchors: Vec<AnchorSpec>,
    pub sigma2: f64,
    pub q: f64,
}

impl ModelSpec {
    pub fn build(&self) -> Result<(CovModel, NoiseSpec)> {
        let params = self.space.build()?;
        let anchors = self
            .anchors
            .iter()
            .map(|a| Ok((params.point(a.coords.clone())?, a.amplitude)))
            .collect::<Result<Vec<_>>>()?;
        let model = CovModel::power_law(params, self.s, self.ell_max, anchors, self.q)?;
        Ok((model, NoiseSpec::gaussian(self.sigma2)?))
    }
}

/// The default rate-study model: two anisotropic bumps on the 2-sphere with
/// a power spectrum just inside H_q for q = 2.5 (`s = q + d/2 + 0.1`).
pub fn default_model_spec() -> ModelSpec {
    ModelSpec {
        space: SpaceSpec {
            kind: SpaceKind::Sphere,
            d: 2,
        },
        s: 3.6,
        ell_max: 10,
        anchors: vec![
            AnchorSpec {
                coords: vec![0.0, 0.0, 1.0],
                amplitude: 0.8,
            },
            AnchorSpec {
                coords: vec![1.0, 0.0, 0.0],
                amplitude: 0.5,
            },
        ],
        sigma2: 0.25,
        q: 2.5,
    }
}

/// Configuration of the `simulate` command: a model plus dataset shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateSpec {
    pub model: ModelSpec,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_list: Option<Vec<usize>>,
    pub seed: u64,
}

impl SimulateSpec {
    /// Per-subject measurement counts from either the fixed `r` or the
    /// explicit list.
    pub fn counts(&self) -> Result<Vec<usize>> {
        match (&self.r, &self.r_list) {
            (Some(r), None) => Ok(vec![*r; self.n]),
            (None, Some(list)) => {
                if list.len() != self.n {
                    return Err(Error::Config(format!(
                        "r_list has {} entries for n = {} subjects",
                        list.len(),
                        self.n
                    )));
                }
                Ok(list.clone())
            }
            (Some(_), Some(_)) => Err(Error::Config(
                "give either a fixed r or an r_list, not both".into(),
            )),
            (None, None) => Err(Error::Config("one of r or r_list is required".into())),
        }
    }
}

/// Estimator settings: Sobolev order and kernel truncation tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub p: f64,
    #[serde(default = "default_tolerance")]
    pub tol: f64,
}

fn default_tolerance() -> f64 {
    1e-8
}

fn default_c0() -> f64 {
    1.0
}

/// Penalty rule selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum EtaRuleSpec {
    /// Rate-optimal decay with multiplier `c0`.
    Theorem {
        #[serde(default = "default_c0")]
        c0: f64,
    },
    /// Fixed penalty.
    Fixed { eta: f64 },
}

impl EtaRuleSpec {
    pub fn build(&self) -> EtaRule {
        match *self {
            EtaRuleSpec::Theorem { c0 } => EtaRule::RateOptimal { c0 },
            EtaRuleSpec::Fixed { eta } => EtaRule::Fixed { eta },
        }
    }
}

fn default_error_samples() -> usize {
    1000
}

/// One grid point of the rate study configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridPointSpec {
    pub n: usize,
    pub r: usize,
}

/// Configuration of the `rate-study` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub model: ModelSpec,
    pub estimator: EstimatorSpec,
    pub grid: Vec<GridPointSpec>,
    pub replications: usize,
    pub eta_rule: EtaRuleSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0_sweep: Option<Vec<f64>>,
    #[serde(default = "default_error_samples")]
    pub error_samples: usize,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn build(&self) -> Result<ExperimentConfig> {
        let (model, noise) = self.model.build()?;
        Ok(ExperimentConfig {
            model,
            noise,
            sobolev_order: self.estimator.p,
            truncation_tol: self.estimator.tol,
            grid: self
                .grid
                .iter()
                .map(|g| DesignPoint { n: g.n, r: g.r })
                .collect(),
            replications: self.replications,
            eta_rule: self.eta_rule.build(),
            c0_sweep: self.c0_sweep.clone(),
            error_samples: self.error_samples,
            seed: self.seed,
        })
    }
}

/// Dataset file: space selection plus per-subject coordinate arrays and
/// measured values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetFile {
    pub space: SpaceSpec,
    pub subjects: Vec<SubjectFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubjectFile {
    pub locations: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl DatasetFile {
    pub fn from_dataset(data: &Dataset) -> DatasetFile {
        DatasetFile {
            space: SpaceSpec::of(data.space()),
            subjects: data
                .subjects()
                .iter()
                .map(|s| SubjectFile {
                    locations: s.locations.iter().map(|p| p.coords().to_vec()).collect(),
                    values: s.values.clone(),
                })
                .collect(),
        }
    }

    pub fn build(&self) -> Result<Dataset> {
        let params = self.space.build()?;
        let subjects = self
            .subjects
            .iter()
            .map(|s| {
                let locations = s
                    .locations
                    .iter()
                    .map(|c| params.point(c.clone()))
                    .collect::<Result<Vec<Point>>>()?;
                Ok(Subject {
                    locations,
                    values: s.values.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(params, subjects)
    }
}

/// Stored estimate: the kernel settings, pooled anchor points, anchor index
/// pairs, and representer coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateFile {
    pub space: SpaceSpec,
    pub p: f64,
    pub ell_max: usize,
    pub eta: f64,
    pub points: Vec<Vec<f64>>,
    pub anchors: Vec<(usize, usize)>,
    pub coeffs: Vec<f64>,
}

impl EstimateFile {
    pub fn from_estimate(est: &CovEstimate) -> EstimateFile {
        EstimateFile {
            space: SpaceSpec::of(est.kernel().params()),
            p: est.kernel().sobolev_order(),
            ell_max: est.kernel().ell_max(),
            eta: est.eta(),
            points: est.points().iter().map(|p| p.coords().to_vec()).collect(),
            anchors: est.anchors().to_vec(),
            coeffs: est.coeffs().to_vec(),
        }
    }

    pub fn build(&self) -> Result<CovEstimate> {
        let params = self.space.build()?;
        let kernel = ZonalKernel::new(params, self.p, self.ell_max)?;
        let points = self
            .points
            .iter()
            .map(|c| params.point(c.clone()))
            .collect::<Result<Vec<Point>>>()?;
        CovEstimate::from_parts(
            kernel,
            points,
            self.anchors.clone(),
            self.coeffs.clone(),
            self.eta,
        )
    }
}
