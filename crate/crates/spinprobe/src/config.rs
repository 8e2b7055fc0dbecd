//! Run configuration: JSON schema, defaults, validation, and assembly of a
//! [`ProbeModel`] from a validated configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::SpinDistribution;
use crate::error::{Error, Result};
use crate::rates::{
    default_cross_sections, load_cross_sections, CloudGeometry, DEFAULT_OVERLAP_M3,
    DEFAULT_SIGMA_M2,
};
use crate::sensitivity::{Axis, ProbeModel, DEFAULT_DELTA_REL};
use crate::units::{BTPoint, PhysicalConstants, REFERENCE_POINT};

/// Serialization format of a command's payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayloadFormat {
    Csv,
    Json,
}

/// Spacing rule of a synthesized grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// A one-dimensional grid given by its bounds and size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl GridSpec {
    pub const fn linear(min: f64, max: f64, points: usize) -> Self {
        Self {
            min,
            max,
            points,
            spacing: Spacing::Linear,
        }
    }

    pub const fn log(min: f64, max: f64, points: usize) -> Self {
        Self {
            min,
            max,
            points,
            spacing: Spacing::Log,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        if n == 1 {
            return vec![self.min];
        }
        (0..n)
            .map(|i| {
                let f = i as f64 / (n - 1) as f64;
                match self.spacing {
                    Spacing::Linear => self.min + (self.max - self.min) * f,
                    Spacing::Log => self.min * (self.max / self.min).powf(f),
                }
            })
            .collect()
    }

    fn check(&self, path: &str, issues: &mut Vec<String>) {
        if !self.min.is_finite() || !self.max.is_finite() || self.min <= 0.0 {
            issues.push(format!("{path}.min: bounds must be finite and > 0"));
        }
        if self.max <= self.min {
            issues.push(format!("{path}.max: must exceed min"));
        }
        if self.points < 2 {
            issues.push(format!("{path}.points: need at least 2 points"));
        }
    }
}

/// Overrides for individual physical constants; anything absent keeps its
/// default value. The reduced mass is always re-derived.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bohr_magneton: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boltzmann: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass_rb: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass_cs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_cs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_rb: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_cs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_rb: Option<f64>,
}

impl ConstantsConfig {
    pub fn build(&self) -> Result<PhysicalConstants> {
        let d = PhysicalConstants::default();
        PhysicalConstants::new(
            self.bohr_magneton.unwrap_or(d.bohr_magneton),
            self.boltzmann.unwrap_or(d.boltzmann),
            self.mass_rb.unwrap_or(d.mass_rb),
            self.mass_cs.unwrap_or(d.mass_cs),
            self.g_cs.unwrap_or(d.g_cs),
            self.g_rb.unwrap_or(d.g_rb),
            self.f_cs.unwrap_or(d.f_cs),
            self.f_rb.unwrap_or(d.f_rb),
        )
    }
}

/// Gaussian cloud pair; the probe cloud is normalized to a single atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianCloudConfig {
    pub rb_peak_density_m3: f64,
    pub rb_widths_m: [f64; 3],
    pub cs_widths_m: [f64; 3],
    #[serde(default)]
    pub cs_offset_m: [f64; 3],
}

/// Cloud geometry: exactly one of the two representations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap_m3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gaussian: Option<GaussianCloudConfig>,
}

impl CloudConfig {
    fn build(&self) -> CloudGeometry {
        if let Some(g) = &self.gaussian {
            CloudGeometry::Gaussian {
                rb_peak_density: g.rb_peak_density_m3,
                rb_widths: g.rb_widths_m,
                cs_widths: g.cs_widths_m,
                cs_offset: g.cs_offset_m,
            }
        } else {
            CloudGeometry::Uniform {
                overlap: self.overlap_m3.unwrap_or(DEFAULT_OVERLAP_M3),
            }
        }
    }
}

/// The bath condition sensitivities are anchored to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    pub b_field_gauss: f64,
    pub temperature_k: f64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            b_field_gauss: REFERENCE_POINT.b_field,
            temperature_k: REFERENCE_POINT.temperature,
        }
    }
}

/// Full run configuration. Every field is optional; an empty document is a
/// valid configuration that probes the canonical reference condition with
/// the constant default cross sections. Unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantsConfig>,
    /// CSV table of cross sections; omitted means the constant default.
    /// Relative paths resolve against the configuration file's directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_section_file: Option<PathBuf>,
    /// Scale of the constant default table (m^2).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_section_scale_m2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cloud: Option<CloudConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis: Option<Axis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_rel: Option<f64>,
    /// Interaction time in seconds; omitted compares steady states.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub at_time_s: Option<f64>,
    /// Initial probe populations for m = -3..=+3; omitted puts all
    /// population in m = +2.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<[f64; 7]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_grid: Option<GridSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_grid_gauss: Option<GridSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_grid_k: Option<GridSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_tot_grid_k: Option<GridSpec>,
    /// Total energy of the constant-energy axis (kelvin equivalents).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_tot_k: Option<f64>,
    /// Sample times for the `evolve` command (seconds).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times_s: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_max_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<PayloadFormat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn reference(&self) -> BTPoint {
        let r = self.reference.unwrap_or_default();
        BTPoint::new(r.b_field_gauss, r.temperature_k)
    }

    pub fn delta_rel(&self) -> f64 {
        self.delta_rel.unwrap_or(DEFAULT_DELTA_REL)
    }

    pub fn axis(&self) -> Axis {
        self.axis.unwrap_or(Axis::ConstEtotVaryRatio)
    }

    pub fn e_tot_k(&self) -> f64 {
        self.e_tot_k.unwrap_or(1.6e-6)
    }

    pub fn initial_state(&self) -> Result<SpinDistribution> {
        match self.initial_state {
            Some(p) => SpinDistribution::from_probabilities(p),
            None => Ok(SpinDistribution::initial_probe_state()),
        }
    }

    /// Collects every semantic problem in the document, one message per
    /// offending field path. `base_dir` anchors relative file references.
    pub fn validate(&self, base_dir: &Path) -> Vec<String> {
        let mut issues = Vec::new();
        if let Some(c) = &self.constants {
            if let Err(e) = c.build() {
                issues.push(format!("constants: {e}"));
            }
        }
        if let Some(r) = &self.reference {
            if !r.b_field_gauss.is_finite() || r.b_field_gauss <= 0.0 {
                issues.push(format!(
                    "reference.b_field_gauss: must be > 0, got {}",
                    r.b_field_gauss
                ));
            }
            if !r.temperature_k.is_finite() || r.temperature_k <= 0.0 {
                issues.push(format!(
                    "reference.temperature_k: must be > 0, got {}",
                    r.temperature_k
                ));
            }
        }
        if let Some(d) = self.delta_rel {
            if !d.is_finite() || d <= 0.0 || d > 0.1 {
                issues.push(format!("delta_rel: must lie in (0, 0.1], got {d}"));
            }
        }
        if let Some(t) = self.at_time_s {
            if !t.is_finite() || t < 0.0 {
                issues.push(format!("at_time_s: must be >= 0, got {t}"));
            }
        }
        if let Some(s) = self.cross_section_scale_m2 {
            if !s.is_finite() || s <= 0.0 {
                issues.push(format!("cross_section_scale_m2: must be > 0, got {s}"));
            }
        }
        if let Some(cloud) = &self.cloud {
            if cloud.overlap_m3.is_some() && cloud.gaussian.is_some() {
                issues.push("cloud: set either overlap_m3 or gaussian, not both".into());
            }
            if let Err(e) = crate::rates::density_overlap(&cloud.build()) {
                issues.push(format!("cloud: {e}"));
            }
        }
        if let Some(p) = self.initial_state {
            if let Err(e) = SpinDistribution::from_probabilities(p) {
                issues.push(format!("initial_state: {e}"));
            }
        }
        if let Some(e) = self.e_tot_k {
            if !e.is_finite() || e <= 0.0 {
                issues.push(format!("e_tot_k: must be > 0, got {e}"));
            }
        }
        if let Some(times) = &self.times_s {
            if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
                issues.push("times_s: all entries must be >= 0".into());
            }
        }
        if let Some(n) = self.fit_max_iterations {
            if n == 0 {
                issues.push("fit_max_iterations: must be >= 1".into());
            }
        }
        for (name, grid) in [
            ("ratio_grid", &self.ratio_grid),
            ("b_grid_gauss", &self.b_grid_gauss),
            ("t_grid_k", &self.t_grid_k),
            ("e_tot_grid_k", &self.e_tot_grid_k),
        ] {
            if let Some(g) = grid {
                g.check(name, &mut issues);
            }
        }
        if let Some(file) = &self.cross_section_file {
            let resolved = resolve(base_dir, file);
            match load_cross_sections(&resolved) {
                Ok(_) => {}
                Err(e) => issues.push(format!("cross_section_file: {e}")),
            }
        }
        issues
    }

    /// Assembles the model this configuration describes. The configuration
    /// must already have validated cleanly.
    pub fn build_model(&self, base_dir: &Path) -> Result<ProbeModel> {
        let constants = self.constants.clone().unwrap_or_default().build()?;
        let cross_sections = match &self.cross_section_file {
            Some(file) => load_cross_sections(&resolve(base_dir, file))?,
            None => {
                default_cross_sections(self.cross_section_scale_m2.unwrap_or(DEFAULT_SIGMA_M2))?
            }
        };
        let cloud = self.cloud.clone().unwrap_or_default().build();
        Ok(ProbeModel {
            constants,
            cross_sections,
            cloud,
            initial_state: self.initial_state()?,
        })
    }
}

fn resolve(base_dir: &Path, file: &Path) -> PathBuf {
    if file.is_absolute() {
        file.to_path_buf()
    } else {
        base_dir.join(file)
    }
}

/// Reads and fully validates a configuration file, reporting either the
/// parsed document or the complete list of problems found.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let config: RunConfig = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(vec![format!("{}: {e}", path.display())]))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let issues = config.validate(base);
    if issues.is_empty() {
        Ok(config)
    } else {
        Err(Error::InvalidConfig(issues))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_config(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("config.json");
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            r#"{"reference": {"b_field_gauss": 0.043, "temperature_k": 4.35e-7}}"#,
        );
        let cfg = parse_config(&path).unwrap();
        assert_eq!(cfg.delta_rel(), DEFAULT_DELTA_REL);
        assert_eq!(cfg.axis(), Axis::ConstEtotVaryRatio);
        let model = cfg.build_model(dir.path()).unwrap();
        assert_eq!(model.initial_state.probability(2), 1.0);
    }

    #[test]
    fn empty_document_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(dir.path(), "{}");
        let cfg = parse_config(&path).unwrap();
        assert_eq!(cfg.reference().b_field, REFERENCE_POINT.b_field);
    }

    #[test]
    fn negative_temperature_names_the_field() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            r#"{"reference": {"b_field_gauss": 0.043, "temperature_k": -1.0}}"#,
        );
        match parse_config(&path) {
            Err(Error::InvalidConfig(issues)) => {
                assert!(issues.iter().any(|i| i.contains("temperature_k")));
            }
            other => panic!("expected invalid config, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(dir.path(), r#"{"temperture": 1.0}"#);
        assert!(matches!(parse_config(&path), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn all_issues_reported_at_once() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            r#"{
                "reference": {"b_field_gauss": -1.0, "temperature_k": 0.0},
                "delta_rel": 0.5,
                "e_tot_k": -2.0
            }"#,
        );
        match parse_config(&path) {
            Err(Error::InvalidConfig(issues)) => {
                assert!(issues.len() >= 4, "issues: {issues:?}");
            }
            other => panic!("expected invalid config, got {other:?}"),
        }
    }

    #[test]
    fn cross_section_file_is_checked_for_coverage() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("partial.csv"),
            "m_from,direction,energy_uK,sigma_m2\n-3,endo,,1e-16\n",
        )
        .unwrap();
        let path = write_config(dir.path(), r#"{"cross_section_file": "partial.csv"}"#);
        match parse_config(&path) {
            Err(Error::InvalidConfig(issues)) => {
                assert!(issues[0].contains("cross_section_file"));
                assert!(issues[0].contains("missing transition"));
            }
            other => panic!("expected invalid config, got {other:?}"),
        }

        // a complete table passes and loads into the model
        let mut full = String::from("m_from,direction,energy_uK,sigma_m2\n");
        for m in -3..=2 {
            full.push_str(&format!("{m},endo,,1e-16\n"));
        }
        for m in -2..=3 {
            full.push_str(&format!("{m},exo,,1e-16\n"));
        }
        std::fs::write(dir.path().join("full.csv"), full).unwrap();
        let path = write_config(dir.path(), r#"{"cross_section_file": "full.csv"}"#);
        let cfg = parse_config(&path).unwrap();
        assert!(cfg.build_model(dir.path()).is_ok());
    }

    #[test]
    fn grid_spec_values() {
        let lin = GridSpec::linear(1.0, 3.0, 5).values();
        assert_eq!(lin, vec![1.0, 1.5, 2.0, 2.5, 3.0]);
        let log = GridSpec::log(1.0, 100.0, 3).values();
        assert!((log[1] - 10.0).abs() < 1e-12);
        let cfg_issue = {
            let mut v = Vec::new();
            GridSpec::linear(3.0, 1.0, 5).check("g", &mut v);
            v
        };
        assert!(!cfg_issue.is_empty());
    }

    #[test]
    fn constants_overrides_apply_and_validate() {
        let good = ConstantsConfig {
            g_cs: Some(0.2),
            g_rb: Some(0.4),
            ..Default::default()
        };
        assert_eq!(good.build().unwrap().g_cs, 0.2);
        let bad = ConstantsConfig {
            g_cs: Some(0.2),
            ..Default::default()
        };
        assert!(bad.build().is_err()); // g_rb no longer twice g_cs
    }
}
