//! TOML experiment configuration and its mapping onto core types.

use serde::{Deserialize, Serialize};

use bubblekit::geometry::{DomainSpec, GreenMethod, GreenTable, Point};
use bubblekit::quantities::{BlowupConfiguration, PartitionRule, PartitionSpec};
use bubblekit::weight::{CosTerm, SmoothPart, Vortex, WeightSpec};

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainConfig,
    pub weight: WeightConfig,
    pub blowup: BlowupConfig,
    #[serde(default)]
    pub green: GreenConfig,
    #[serde(default)]
    pub branch: BranchConfig,
    #[serde(default)]
    pub quantities: QuantitiesConfig,
    #[serde(default)]
    pub expansion: ExpansionConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub kind: DomainKindConfig,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum DomainKindConfig {
    Torus,
    Disk,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    pub smooth: SmoothConfig,
    #[serde(default)]
    pub vortices: Vec<VortexConfig>,
}

fn default_sigma() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SmoothConfig {
    Constant { value: f64 },
    Expcos { terms: Vec<CosTermConfig> },
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CosTermConfig {
    pub amp: f64,
    pub kx: f64,
    pub ky: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct VortexConfig {
    pub point: [f64; 2],
    pub alpha: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BlowupConfig {
    /// Concentration-point seed(s); the quantities stage refines them to the
    /// critical configuration.
    pub q: Vec<[f64; 2]>,
    pub r0: f64,
    #[serde(default)]
    pub partition: PartitionRuleConfig,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum PartitionRuleConfig {
    #[default]
    Voronoi,
    Axis,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct GreenConfig {
    /// Ewald splitting parameter.
    pub beta: f64,
    /// Transverse-summed Fourier truncation for the cross-check route.
    pub fourier_k_max: usize,
    /// Random point pairs in the self-check.
    pub check_pairs: usize,
}

impl Default for GreenConfig {
    fn default() -> Self {
        GreenConfig { beta: 4.0, fourier_k_max: 4000, check_pairs: 100 }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct BranchConfig {
    pub lambda_schedule: Vec<f64>,
    /// Torus grid N (power of two) or radial node count (disk).
    pub grid: usize,
    pub delta: f64,
    pub newton_tol: f64,
    /// Dump field snapshots per record.
    pub dump_fields: bool,
}

impl Default for BranchConfig {
    fn default() -> Self {
        BranchConfig {
            lambda_schedule: vec![],
            grid: 0,
            delta: 0.0,
            newton_tol: 1e-10,
            dump_fields: false,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuantitiesConfig {
    pub critical_tol: f64,
    pub critical_max_iter: usize,
    pub d_radii: Vec<f64>,
    pub d_outer_grid: usize,
}

impl Default for QuantitiesConfig {
    fn default() -> Self {
        QuantitiesConfig {
            critical_tol: 1e-10,
            critical_max_iter: 50,
            d_radii: vec![],
            d_outer_grid: 512,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpansionConfig {
    /// "two" or "three" basis functions.
    pub basis: String,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        ExpansionConfig { basis: "two".into() }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    pub pohozaev_grid: usize,
    pub pohozaev_r: f64,
    pub kernel_z_max: f64,
    pub kernel_nodes: usize,
    pub spectrum_count: usize,
    pub spectrum_theta_nodes: usize,
    pub uniqueness_starts: usize,
    pub uniqueness_lambda: f64,
    pub uniqueness_perturbation: f64,
    pub uniqueness_tolerance: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            pohozaev_grid: 512,
            pohozaev_r: 0.15,
            kernel_z_max: 20.0,
            kernel_nodes: 2000,
            spectrum_count: 10,
            spectrum_theta_nodes: 400,
            uniqueness_starts: 8,
            uniqueness_lambda: 7.0,
            uniqueness_perturbation: 0.2,
            uniqueness_tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Default output directory (overridden by --out).
    pub dir: Option<String>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), String> {
        if self.blowup.q.is_empty() {
            return Err("blowup.q must contain at least one point".into());
        }
        if !(self.blowup.r0 > 0.0 && self.blowup.r0 < 0.5) {
            return Err(format!("blowup.r0 = {} must lie in (0, 1/2)", self.blowup.r0));
        }
        if !self.branch.lambda_schedule.is_empty() {
            if self.branch.lambda_schedule.windows(2).any(|p| p[1] <= p[0]) {
                return Err("branch.lambda_schedule must be strictly increasing".into());
            }
            if self.branch.grid == 0 {
                return Err("branch.grid must be set when a λ schedule is given".into());
            }
        }
        if matches!(self.domain.kind, DomainKindConfig::Disk) && !self.weight.vortices.is_empty() {
            for v in &self.weight.vortices {
                if v.point[0] * v.point[0] + v.point[1] * v.point[1] >= 1.0 {
                    return Err("vortex outside the disk".into());
                }
            }
        }
        Ok(())
    }

    pub fn domain_spec(&self) -> DomainSpec {
        match self.domain.kind {
            DomainKindConfig::Torus => DomainSpec::torus(),
            DomainKindConfig::Disk => DomainSpec::disk(),
        }
    }

    pub fn green_table(&self) -> Result<GreenTable, bubblekit::Error> {
        let method = match self.domain.kind {
            DomainKindConfig::Torus => GreenMethod::EwaldSplit { beta: self.green.beta },
            DomainKindConfig::Disk => GreenMethod::ClosedForm,
        };
        GreenTable::new(self.domain_spec(), method)
    }

    pub fn weight_spec(&self) -> Result<WeightSpec, bubblekit::Error> {
        let smooth = match &self.weight.smooth {
            SmoothConfig::Constant { value } => SmoothPart::Constant(*value),
            SmoothConfig::Expcos { terms } => SmoothPart::ExpCos(
                terms
                    .iter()
                    .map(|t| CosTerm { amp: t.amp, kx: t.kx, ky: t.ky, phase: t.phase })
                    .collect(),
            ),
        };
        let vortices = self
            .weight
            .vortices
            .iter()
            .map(|v| Vortex { point: Point::new(v.point[0], v.point[1]), alpha: v.alpha })
            .collect();
        WeightSpec::new(smooth, vortices, self.weight.sigma)
    }

    pub fn seed_points(&self) -> Vec<Point> {
        self.blowup.q.iter().map(|p| Point::new(p[0], p[1])).collect()
    }

    pub fn partition(&self) -> PartitionSpec {
        PartitionSpec {
            rule: match self.blowup.partition {
                PartitionRuleConfig::Voronoi => PartitionRule::Voronoi,
                PartitionRuleConfig::Axis => PartitionRule::AxisAligned,
            },
            r0: self.blowup.r0,
        }
    }

    /// Configuration at the literal seed points (the quantities stage refines
    /// to the critical configuration before branch runs).
    pub fn blowup_configuration(
        &self,
        g: &GreenTable,
        w: &WeightSpec,
        q: Vec<Point>,
    ) -> Result<BlowupConfiguration, bubblekit::Error> {
        BlowupConfiguration::new(g, w, q, self.partition())
    }
}
