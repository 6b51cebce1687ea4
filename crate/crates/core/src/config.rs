//! Run configuration: one TOML file with a section per module.
//!
//! ```toml
//! [params]
//! lambda = 1.5
//! sigma = 0.01
//!
//! [field]
//! variant = "axisymmetric"
//!
//! [profile]
//! zero_axial_mean = true
//! ```
//!
//! Only `[params]` with `lambda` and `sigma` is required; every other key has
//! a default. Unknown keys are rejected.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldSpec;
use crate::fractal::{CantorSpec, DEFAULT_POINT_CAP};
use crate::grid::DEFAULT_GRID_CAP;
use crate::lift::{LiftMode, LiftedField};
use crate::params::{check_regime, RegimeReport, ScalingParams, Variant};
use crate::profile::{BumpProfile, SplitPolicy};
use crate::quadrature::QuadratureConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: ScalingParams,
    #[serde(default)]
    pub field: FieldSection,
    #[serde(default)]
    pub cantor: CantorSection,
    #[serde(default)]
    pub profile: ProfileSection,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldSection {
    pub variant: Variant,
    /// `all-in-f` or `time-smoothed-fraction`.
    pub split: String,
    pub split_fraction: f64,
    /// Highest level evaluated; 0 keeps the default.
    pub level_cap: u32,
}

impl Default for FieldSection {
    fn default() -> Self {
        FieldSection { variant: Variant::Axisymmetric, split: "all-in-f".into(), split_fraction: 0.0, level_cap: 0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CantorSection {
    /// `"a,b,c; a,b,c; ..."`; empty means the eight corner cells.
    pub cells: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSection {
    /// Support radius of the Cartesian bump.
    pub radius: f64,
    /// Needed by the divergence-free lift; off by default because the
    /// compensating bump is narrow and costs resolution.
    pub zero_axial_mean: bool,
}

impl Default for ProfileSection {
    fn default() -> Self {
        ProfileSection { radius: 1.0, zero_axial_mean: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub norm_levels: u32,
    pub flatness_levels: [u32; 2],
    /// Flatness center; empty means the point `(rho_infty, 0, 0)` of the singular circle.
    pub flatness_center: Vec<f64>,
    pub residual_levels: u32,
    pub test_radius: f64,
    /// Exponent for the forcing suite; 0 uses `params.p`.
    pub forcing_p: f64,
    pub forcing_levels: u32,
    pub blowup_levels: [u32; 2],
    pub assumption_levels: u32,
    pub divergence_points: usize,
    pub divergence_levels: u32,
    pub divergence_h0: f64,
    pub lift_tol: f64,
    pub oracle_cells: Vec<usize>,
    /// End of the oracle run; 0 means `sigma_2`.
    pub oracle_horizon: f64,
    pub oracle_cfl: f64,
    pub holder_times: Vec<f64>,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            norm_levels: 6,
            flatness_levels: [3, 8],
            flatness_center: Vec::new(),
            residual_levels: 10,
            test_radius: 1.5,
            forcing_p: 0.0,
            forcing_levels: 6,
            blowup_levels: [1, 20],
            assumption_levels: 6,
            divergence_points: 100,
            divergence_levels: 3,
            divergence_h0: 0.01,
            lift_tol: 1e-12,
            oracle_cells: vec![128, 256, 512],
            oracle_horizon: 0.0,
            oracle_cfl: 0.2,
            holder_times: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub grid_cap: usize,
    pub point_cap: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out"), grid_cap: DEFAULT_GRID_CAP, point_cap: DEFAULT_POINT_CAP }
    }
}

impl RunConfig {
    /// Parses without regime checks; errors carry the line and the key.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_params(params: ScalingParams, variant: Variant) -> Self {
        RunConfig {
            params,
            field: FieldSection { variant, ..Default::default() },
            cantor: CantorSection::default(),
            profile: ProfileSection::default(),
            quadrature: QuadratureConfig::default(),
            verify: VerifySection::default(),
            output: OutputSection::default(),
        }
    }

    /// Full inequality table plus a hard error for the inequalities the
    /// selected variant needs.
    pub fn regime(&self) -> Result<RegimeReport> {
        let report = check_regime(&self.params)?;
        let failed: Vec<String> = report.failures_for(self.field.variant).iter().map(|r| format!("{} ({} {} {})", r.name, r.expression, r.relation, r.threshold)).collect();
        if !failed.is_empty() {
            return Err(Error::Regime(format!("{} needs {}", self.field.variant, failed.join(", "))));
        }
        Ok(report)
    }

    /// Regime, quadrature and section checks; run before any computation.
    pub fn validate(&self) -> Result<RegimeReport> {
        let report = self.regime()?;
        self.quadrature.validate()?;
        SplitPolicy::parse(&self.field.split, self.field.split_fraction)?;
        let v = &self.verify;
        if v.flatness_levels[0] > v.flatness_levels[1] || v.blowup_levels[0] > v.blowup_levels[1] {
            return Err(Error::Config("level ranges must be [lo, hi] with lo <= hi".into()));
        }
        if !(v.flatness_center.is_empty() || v.flatness_center.len() == 3) {
            return Err(Error::Config("verify.flatness_center needs three coordinates".into()));
        }
        Ok(report)
    }

    pub fn cantor_spec(&self) -> Result<CantorSpec> {
        if self.cantor.cells.trim().is_empty() {
            CantorSpec::corners(self.params.k)
        } else {
            CantorSpec::parse_cells(self.params.k, &self.cantor.cells)
        }
    }

    pub fn build_field(&self) -> Result<FieldSpec> {
        let p = self.params;
        let field = match self.field.variant {
            Variant::SinglePoint3D => FieldSpec::new(Variant::SinglePoint3D, p, BumpProfile::cartesian_with_radius(self.profile.radius), None)?,
            Variant::Cantor3D => FieldSpec::new(Variant::Cantor3D, p, BumpProfile::cartesian_with_radius(self.profile.radius), Some(self.cantor_spec()?))?,
            Variant::Axisymmetric => FieldSpec::axisymmetric(p, self.profile.zero_axial_mean)?,
        };
        let field = field.with_split(SplitPolicy::parse(&self.field.split, self.field.split_fraction)?)?;
        if self.field.level_cap > 0 {
            field.with_level_cap(self.field.level_cap)
        } else {
            Ok(field)
        }
    }

    pub fn build_lift(&self) -> Result<LiftedField> {
        LiftedField::new(self.build_field()?, LiftMode::Full, self.verify.lift_tol)
    }

    /// Canonical JSON of the resolved configuration, the input of the hash.
    pub fn canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}
