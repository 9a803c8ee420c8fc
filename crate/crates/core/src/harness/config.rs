use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::array_model::{DirectionCosines, UraGeometry};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    BerVsSnr,
    BerVsRho,
    CondVsRho,
    FlopsVsSize,
    ArrayFactorMaps,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::BerVsSnr,
        ExperimentKind::BerVsRho,
        ExperimentKind::CondVsRho,
        ExperimentKind::FlopsVsSize,
        ExperimentKind::ArrayFactorMaps,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::BerVsSnr => "ber_vs_snr",
            ExperimentKind::BerVsRho => "ber_vs_rho",
            ExperimentKind::CondVsRho => "cond_vs_rho",
            ExperimentKind::FlopsVsSize => "flops_vs_size",
            ExperimentKind::ArrayFactorMaps => "array_factor_maps",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config("experiment", format!("unknown experiment kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mmse,
    MmseLemma,
    Tmmse,
    Kmmse,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mmse => "mmse",
            Method::MmseLemma => "mmse_lemma",
            Method::Tmmse => "tmmse",
            Method::Kmmse => "kmmse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatsMode {
    Analytic,
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub n_h: usize,
    pub n_v: usize,
}

/// A single regularization weight or a list of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RhoSpec {
    Single(f64),
    List(Vec<f64>),
}

impl RhoSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            RhoSpec::Single(r) => vec![*r],
            RhoSpec::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArrayFactorConfig {
    /// Points per axis over `[-1, 1]`.
    pub grid_points: usize,
    pub snr_db: f64,
    /// Lower clamp of the emitted dB values.
    pub floor_db: f64,
    /// Source layout as `[p, q]` pairs; the first entry is the desired
    /// source. Drawn from the seed when absent.
    pub directions: Option<Vec<[f64; 2]>>,
}

impl Default for ArrayFactorConfig {
    fn default() -> Self {
        Self {
            grid_points: 181,
            snr_db: 20.0,
            floor_db: -200.0,
            directions: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlopsConfig {
    /// Square array sizes `n` (arrays are `n x n`).
    pub sizes: Vec<usize>,
    pub tmmse_iterations: usize,
}

impl Default for FlopsConfig {
    fn default() -> Self {
        Self {
            sizes: vec![2, 4, 6, 8, 10, 12, 14, 16],
            tmmse_iterations: 5,
        }
    }
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub geometry: GeometryConfig,
    pub r: usize,
    pub k: usize,
    pub trials: usize,
    pub snr_grid_db: Vec<f64>,
    pub rho: RhoSpec,
    pub eps: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub workers: usize,
    pub methods: Vec<Method>,
    pub stats_mode: StatsMode,
    pub array_factor: ArrayFactorConfig,
    pub flops: FlopsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::BerVsSnr,
            geometry: GeometryConfig { n_h: 8, n_v: 8 },
            r: 4,
            k: 1000,
            trials: 200,
            snr_grid_db: (0..16).map(|i| -20.0 + 2.0 * i as f64).collect(),
            rho: RhoSpec::Single(0.5),
            eps: 1e-3,
            max_iter: 50,
            seed: 0,
            workers: 1,
            methods: vec![Method::Mmse, Method::Tmmse, Method::Kmmse],
            stats_mode: StatsMode::Sample,
            array_factor: ArrayFactorConfig::default(),
            flops: FlopsConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub workers: Option<usize>,
    pub experiment: Option<ExperimentKind>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let path = e
                .span()
                .map(|s| format!("byte {}..{}", s.start, s.end))
                .unwrap_or_else(|| "<root>".into());
            Error::config(path, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(t) = o.trials {
            self.trials = t;
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
        if let Some(k) = o.experiment {
            self.experiment = k;
        }
        self.validate()
    }

    pub fn geometry(&self) -> Result<UraGeometry> {
        UraGeometry::new(self.geometry.n_h, self.geometry.n_v)
    }

    pub fn rho_values(&self) -> Vec<f64> {
        self.rho.values()
    }

    /// The first `rho` value, used where a single weight is needed.
    pub fn rho_primary(&self) -> f64 {
        self.rho_values()[0]
    }

    pub fn af_directions(&self) -> Option<Result<Vec<DirectionCosines>>> {
        self.array_factor.directions.as_ref().map(|d| {
            d.iter()
                .map(|&[p, q]| DirectionCosines::new(p, q))
                .collect()
        })
    }

    /// Checks every field, reporting the first problem with its path.
    pub fn validate(&self) -> Result<()> {
        use ExperimentKind::*;
        let kind = self.experiment;
        if self.geometry.n_h == 0 {
            return Err(Error::config("geometry.n_h", "must be at least 1"));
        }
        if self.geometry.n_v == 0 {
            return Err(Error::config("geometry.n_v", "must be at least 1"));
        }
        if self.r == 0 {
            return Err(Error::config("r", "must be at least 1"));
        }
        if self.k < 2 {
            return Err(Error::config("k", "must be at least 2"));
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        if matches!(kind, BerVsSnr | BerVsRho | CondVsRho) && self.snr_grid_db.is_empty() {
            return Err(Error::config("snr_grid_db", "must not be empty"));
        }
        if let Some(i) = self.snr_grid_db.iter().position(|s| !s.is_finite()) {
            return Err(Error::config(format!("snr_grid_db[{i}]"), "must be finite"));
        }
        let rhos = self.rho_values();
        if rhos.is_empty() {
            return Err(Error::config("rho", "must not be empty"));
        }
        if let Some(i) = rhos.iter().position(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::config(
                format!("rho[{i}]"),
                "must be finite and non-negative",
            ));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::config("eps", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::config("max_iter", "must be at least 1"));
        }
        if matches!(kind, BerVsSnr | FlopsVsSize) && self.methods.is_empty() {
            return Err(Error::config("methods", "must not be empty"));
        }
        let af = &self.array_factor;
        if af.grid_points < 2 {
            return Err(Error::config(
                "array_factor.grid_points",
                "must be at least 2",
            ));
        }
        if !af.snr_db.is_finite() {
            return Err(Error::config("array_factor.snr_db", "must be finite"));
        }
        if !af.floor_db.is_finite() || af.floor_db >= 0.0 {
            return Err(Error::config("array_factor.floor_db", "must be negative"));
        }
        if let Some(dirs) = &af.directions {
            if dirs.len() != self.r {
                return Err(Error::config(
                    "array_factor.directions",
                    format!(
                        "expected {} entries (one per source), got {}",
                        self.r,
                        dirs.len()
                    ),
                ));
            }
            for (i, &[p, q]) in dirs.iter().enumerate() {
                if !(p.abs() <= 1.0 && q.abs() <= 1.0) {
                    return Err(Error::config(
                        format!("array_factor.directions[{i}]"),
                        "direction cosines must lie in [-1, 1]",
                    ));
                }
            }
        }
        if kind == FlopsVsSize {
            if self.flops.sizes.is_empty() {
                return Err(Error::config("flops.sizes", "must not be empty"));
            }
            if let Some(i) = self.flops.sizes.iter().position(|&n| n == 0) {
                return Err(Error::config(
                    format!("flops.sizes[{i}]"),
                    "must be at least 1",
                ));
            }
            if self.flops.tmmse_iterations == 0 {
                return Err(Error::config(
                    "flops.tmmse_iterations",
                    "must be at least 1",
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_setup() {
        let c = ExperimentConfig::default();
        assert_eq!(
            (c.geometry.n_h, c.geometry.n_v, c.r, c.k, c.trials),
            (8, 8, 4, 1000, 200)
        );
        assert_eq!(c.snr_grid_db.first(), Some(&-20.0));
        assert_eq!(c.snr_grid_db.last(), Some(&10.0));
        assert_eq!(c.eps, 1e-3);
        assert_eq!(c.rho_primary(), 0.5);
        c.validate().unwrap();
    }

    #[test]
    fn parses_nested_toml() {
        let c = ExperimentConfig::from_toml_str(
            r#"
            experiment = "cond_vs_rho"
            seed = 9
            rho = [0.0, 0.1, 0.5, 1.0]
            [geometry]
            n_h = 4
            n_v = 6
            "#,
        )
        .unwrap();
        assert_eq!(c.experiment, ExperimentKind::CondVsRho);
        assert_eq!(c.geometry, GeometryConfig { n_h: 4, n_v: 6 });
        assert_eq!(c.rho_values(), vec![0.0, 0.1, 0.5, 1.0]);
        assert_eq!(c.trials, 200);
    }

    #[test]
    fn reports_field_paths() {
        let err = |s: &str| match ExperimentConfig::from_toml_str(s) {
            Err(Error::Config { path, .. }) => path,
            other => panic!("expected config error, got {other:?}"),
        };
        assert_eq!(err("trials = 0"), "trials");
        assert_eq!(err("[geometry]\nn_h = 0\nn_v = 2"), "geometry.n_h");
        assert_eq!(err("rho = [0.5, -1.0]"), "rho[1]");
        assert_eq!(err("snr_grid_db = []"), "snr_grid_db");
        assert_eq!(
            err("r = 2\n[array_factor]\ndirections = [[0.1, 0.2]]"),
            "array_factor.directions"
        );
        assert!(ExperimentConfig::from_toml_str("bogus = 1").is_err());
        assert!(ExperimentConfig::from_toml_str("experiment = \"nope\"").is_err());
    }

    #[test]
    fn overrides_win() {
        let mut c = ExperimentConfig::from_toml_str("seed = 1\ntrials = 5").unwrap();
        c.apply(&Overrides {
            seed: Some(7),
            trials: Some(3),
            workers: Some(2),
            experiment: Some(ExperimentKind::FlopsVsSize),
        })
        .unwrap();
        assert_eq!((c.seed, c.trials, c.workers), (7, 3, 2));
        assert_eq!(c.experiment, ExperimentKind::FlopsVsSize);
        assert!(c
            .apply(&Overrides {
                trials: Some(0),
                ..Default::default()
            })
            .is_err());
    }

    #[test]
    fn kind_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
        }
    }
}
