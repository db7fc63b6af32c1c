//! TOML run configuration with `--set key=value` overrides.

use std::path::{Path, PathBuf};

use motility_core::model::{ForceFamily, ForceLaw, LawKind, ModelParams};
use motility_core::special::roots::Rect;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    pub f_act: LawBlock,
    pub f_und: LawBlock,
    #[serde(default)]
    pub analysis: AnalysisBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub a: f64,
    pub gamma: f64,
    pub chi_c: f64,
    pub chi_u: f64,
    pub r0: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum LawBlock {
    Hill { saturation: f64, half_max: f64, exponent: f64 },
    Linear { slope: f64 },
    Tanh { beta: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisBlock {
    /// Inclusive mode range `[m_min, m_max]`.
    pub modes: [u32; 2],
    /// Values of `chi_c` for the dispersion sweep, strictly increasing.
    pub chi_c_grid: Vec<f64>,
    /// `[re_min, re_max, im_min, im_max]`; scaled default when absent.
    pub region: Option<[f64; 4]>,
    /// Truncation order of the cosine series.
    pub order: usize,
    pub ds: f64,
    pub v_max: f64,
    pub newton_tol: f64,
    pub root_tol: f64,
    pub seed: u64,
    /// Angles in exported shape contours.
    pub contour_points: usize,
}

impl Default for AnalysisBlock {
    fn default() -> Self {
        Self {
            modes: [0, 8],
            chi_c_grid: Vec::new(),
            region: None,
            order: 64,
            ds: 0.02,
            v_max: 0.3,
            newton_tol: 1e-12,
            root_tol: 1e-8,
            seed: motility_core::acceptance::DEFAULT_SEED,
            contour_points: 256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

impl OutputBlock {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// Parses `key.path=value`, reading the value as TOML and falling back to a string.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{spec}` is not of the form key=value")))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, path) = parts.split_last().expect("split yields one item");
    let mut node = table;
    for p in path {
        node = node
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override `{key}`: `{p}` is not a table")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, overrides)
    }

    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let a = &self.analysis;
        let bad = |msg: String| Err(CliError::Config(msg));
        for (name, v) in [
            ("analysis.ds", a.ds),
            ("analysis.v_max", a.v_max),
            ("analysis.newton_tol", a.newton_tol),
            ("analysis.root_tol", a.root_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("`{name}` must be positive, got {v}"));
            }
        }
        if a.modes[0] > a.modes[1] {
            return bad(format!("`analysis.modes` must satisfy m_min <= m_max, got {:?}", a.modes));
        }
        if a.chi_c_grid.iter().any(|x| !x.is_finite()) || a.chi_c_grid.windows(2).any(|w| w[1] <= w[0]) {
            return bad("`analysis.chi_c_grid` must be finite and strictly increasing".into());
        }
        if let Some([x0, x1, y0, y1]) = a.region {
            if !(x0 < x1 && y0 < y1) || ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
                return bad(format!("`analysis.region` must be [re_min, re_max, im_min, im_max], got {:?}", a.region));
            }
        }
        if a.order < 2 {
            return bad(format!("`analysis.order` must be at least 2, got {}", a.order));
        }
        if a.contour_points == 0 {
            return bad("`analysis.contour_points` must be positive".into());
        }
        self.params()?;
        self.laws()?;
        Ok(())
    }

    pub fn params(&self) -> Result<ModelParams, CliError> {
        let m = &self.model;
        ModelParams::new(m.a, m.gamma, m.chi_c, m.chi_u, m.r0, m.mass).map_err(|e| CliError::Config(format!("model: {e}")))
    }

    pub fn laws(&self) -> Result<(ForceLaw, ForceLaw), CliError> {
        let build = |block: LawBlock, kind: LawKind, key: &str| {
            let family = match block {
                LawBlock::Hill {
                    saturation,
                    half_max,
                    exponent,
                } => ForceFamily::Hill {
                    saturation,
                    half_max,
                    exponent,
                },
                LawBlock::Linear { slope } => ForceFamily::Linear { slope },
                LawBlock::Tanh { beta } => ForceFamily::Tanh { beta },
            };
            ForceLaw::new(family, kind).map_err(|e| CliError::Config(format!("{key}: {e}")))
        };
        Ok((
            build(self.f_act, LawKind::Active, "f_act")?,
            build(self.f_und, LawKind::Undercooling, "f_und")?,
        ))
    }

    pub fn region(&self) -> Rect {
        match self.analysis.region {
            Some([a, b, c, d]) => Rect::new(a, b, c, d),
            None => motility_core::stability::default_region(self.model.r0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[model]
a = 1.0
gamma = 1.0
chi_c = 2.0
chi_u = 0.5
r0 = 1.0
mass = 3.0

[f_act]
family = "hill"
saturation = 1.0
half_max = 1.0
exponent = 2.0

[f_und]
family = "linear"
slope = 1.0
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = RunConfig::parse(BASE, &[]).unwrap();
        assert_eq!(cfg.analysis.order, 64);
        assert!(cfg.output.wants(Format::Csv));
    }

    #[test]
    fn overrides_apply() {
        let cfg = RunConfig::parse(
            BASE,
            &["model.gamma=2.5".into(), "analysis.chi_c_grid=[1.0, 2.0]".into(), "output.directory=res".into()],
        )
        .unwrap();
        assert_eq!(cfg.model.gamma, 2.5);
        assert_eq!(cfg.analysis.chi_c_grid, vec![1.0, 2.0]);
        assert_eq!(cfg.output.directory, PathBuf::from("res"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse(BASE, &["model.gama=1.0".into()]).unwrap_err();
        assert!(err.to_string().contains("gama"));
        let err = RunConfig::parse(BASE, &["f_und.beta=1.0".into()]).unwrap_err();
        assert!(err.to_string().contains("beta"));
    }

    #[test]
    fn grid_must_increase() {
        let err = RunConfig::parse(BASE, &["analysis.chi_c_grid=[2.0, 1.0]".into()]).unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
        let err = RunConfig::parse(BASE, &["analysis.root_tol=0.0".into()]).unwrap_err();
        assert!(err.to_string().contains("root_tol"));
    }

    #[test]
    fn wrong_law_kind() {
        let err = RunConfig::parse(BASE, &["f_act.family=\"linear\"".into()]).unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }
}
