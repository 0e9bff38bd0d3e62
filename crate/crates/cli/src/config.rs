//! Run configuration: one TOML document per experiment.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qme_core::entropy::{check_halving, EntropyVariant, EstimatorSettings};
use qme_core::{DistanceMatrix, MapKind, MapSpec, PointCloud, QuasiMetricKind, QuasiMetricSpec, SolveMode};

pub const EXAMPLE_CONFIG: &str = include_str!("example.toml");

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid TOML in {path}: {source}")]
    Toml { path: PathBuf, source: Box<toml::de::Error> },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] qme_core::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapSection {
    #[serde(flatten)]
    pub kind: MapKind,
    /// Overrides the catalog's uniform-continuity declaration.
    #[serde(default)]
    pub uniformly_continuous: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CloudSection {
    Grid1d { lo: f64, hi: f64, count: usize },
    CircleGrid { count: usize },
    SymbolBlocks { alphabet: usize, length: usize },
    /// `0, 1, ..., count - 1`, the universe of a matrix-backed quasi-metric.
    Indices { count: usize },
    /// One point per line, comma-separated coordinates.
    Csv { path: PathBuf },
    Points { points: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum QmetricSection {
    Example1Line,
    EuclideanSym,
    CircleArc,
    WeightedAsym { alpha: f64, beta: f64 },
    BlockPrefix,
    BlockPrefixAsym { weight: f64 },
    /// Matrix read from a `qmetric,v1,<n>` CSV file.
    MatrixCsv { path: PathBuf },
    Matrix { rows: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub n_list: Vec<usize>,
    /// Strictly decreasing, each entry half the previous one.
    pub epsilon_list: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub estimator_tol: f64,
    pub power_tol: f64,
    pub power_tol_abs: f64,
    pub stability_tol: f64,
    pub saturation_fraction: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let s = EstimatorSettings::default();
        Self {
            estimator_tol: s.estimator_tol,
            power_tol: s.power_tol_rel,
            power_tol_abs: s.power_tol_abs,
            stability_tol: s.stability_tol,
            saturation_fraction: s.saturation_fraction,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub prefix: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("qme-out"), prefix: "run".into() }
    }
}

fn default_variants() -> Vec<EntropyVariant> {
    EntropyVariant::ALL.to_vec()
}
fn default_threshold() -> usize {
    qme_core::DEFAULT_EXACT_THRESHOLD
}
fn default_mode() -> SolveMode {
    SolveMode::Auto
}
fn default_budget() -> u64 {
    1_000_000
}
fn default_power() -> usize {
    2
}
fn default_burn() -> usize {
    2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub map: MapSection,
    pub cloud: CloudSection,
    pub qmetric: QmetricSection,
    pub schedule: ScheduleSection,
    #[serde(default = "default_variants")]
    pub variants: Vec<EntropyVariant>,
    #[serde(default = "default_threshold")]
    pub exact_threshold: usize,
    #[serde(default = "default_mode")]
    pub mode: SolveMode,
    /// Seeds the sampled triangle check when the triple count exceeds `triple_budget`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_budget")]
    pub triple_budget: u64,
    /// The exponent `m` for the power command.
    #[serde(default = "default_power")]
    pub power: usize,
    #[serde(default = "default_burn")]
    pub n_burn: usize,
    #[serde(default)]
    pub window: Option<usize>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputSection,
}

/// Everything a command needs, resolved from a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: RunConfig,
    pub map: MapSpec,
    pub cloud: PointCloud,
    pub qmetric: QuasiMetricSpec,
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Toml { path: origin.to_path_buf(), source: Box::new(e) })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_toml(&text, path)
    }

    pub fn settings(&self) -> EstimatorSettings {
        EstimatorSettings {
            n_burn: self.n_burn,
            window: self.window,
            stability_tol: self.tolerances.stability_tol,
            estimator_tol: self.tolerances.estimator_tol,
            power_tol_rel: self.tolerances.power_tol,
            power_tol_abs: self.tolerances.power_tol_abs,
            mode: self.mode,
            exact_threshold: self.exact_threshold,
            saturation_fraction: self.tolerances.saturation_fraction,
        }
    }

    fn check_schedule(&self) -> Result<(), ConfigError> {
        let n = &self.schedule.n_list;
        if n.is_empty() || n[0] == 0 || n.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConfigError::Invalid(format!("n_list {n:?} must be strictly increasing positive integers")));
        }
        check_halving(&self.schedule.epsilon_list)?;
        if self.power == 0 {
            return Err(ConfigError::Invalid("power must be at least 1".into()));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("estimator_tol", t.estimator_tol),
            ("power_tol", t.power_tol),
            ("power_tol_abs", t.power_tol_abs),
            ("stability_tol", t.stability_tol),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ConfigError::Invalid(format!("{name} must be a nonnegative number, got {v}")));
            }
        }
        if !(t.saturation_fraction > 0.0 && t.saturation_fraction <= 1.0) {
            return Err(ConfigError::Invalid(format!("saturation_fraction must be in (0, 1], got {}", t.saturation_fraction)));
        }
        if self.variants.is_empty() {
            return Err(ConfigError::Invalid("variants must not be empty".into()));
        }
        Ok(())
    }

    /// Builds the map, cloud and quasi-metric. Relative paths resolve against `base`.
    pub fn resolve(self, base: &Path) -> Result<Experiment, ConfigError> {
        self.check_schedule()?;
        let mut map = MapSpec::new(self.map.kind.clone())?;
        if let Some(uc) = self.map.uniformly_continuous {
            map = map.with_uniform_continuity(uc);
        }
        let cloud = match &self.cloud {
            CloudSection::Grid1d { lo, hi, count } => PointCloud::grid_1d(*lo, *hi, *count)?,
            CloudSection::CircleGrid { count } => PointCloud::circle_grid(*count)?,
            CloudSection::SymbolBlocks { alphabet, length } => PointCloud::symbol_blocks(*alphabet, *length)?,
            CloudSection::Indices { count } => PointCloud::index_points(*count)?,
            CloudSection::Csv { path } => {
                let path = base.join(path);
                let file = File::open(&path).map_err(|source| ConfigError::Read { path: path.clone(), source })?;
                PointCloud::read_csv(BufReader::new(file))?
            }
            CloudSection::Points { points } => PointCloud::custom(points.clone())?,
        };
        let qmetric = match &self.qmetric {
            QmetricSection::Example1Line => QuasiMetricSpec::new(QuasiMetricKind::Example1Line)?,
            QmetricSection::EuclideanSym => QuasiMetricSpec::euclidean(),
            QmetricSection::CircleArc => QuasiMetricSpec::circle_arc(),
            QmetricSection::WeightedAsym { alpha, beta } => QuasiMetricSpec::weighted_asym(*alpha, *beta)?,
            QmetricSection::BlockPrefix => QuasiMetricSpec::block_prefix(),
            QmetricSection::BlockPrefixAsym { weight } => QuasiMetricSpec::block_prefix_asym(*weight)?,
            QmetricSection::MatrixCsv { path } => {
                let path = base.join(path);
                let file = File::open(&path).map_err(|source| ConfigError::Read { path: path.clone(), source })?;
                QuasiMetricSpec::matrix(DistanceMatrix::read_csv(BufReader::new(file))?)
            }
            QmetricSection::Matrix { rows } => QuasiMetricSpec::from_rows(rows.clone())?,
        };
        for p in cloud.points() {
            qmetric.validate_point(p)?;
        }
        Ok(Experiment { config: self, map, cloud, qmetric })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Experiment, ConfigError> {
        RunConfig::from_toml(text, Path::new("inline"))?.resolve(Path::new("."))
    }

    #[test]
    fn example_config_resolves() {
        let exp = parse(EXAMPLE_CONFIG).unwrap();
        assert_eq!(exp.cloud.len(), 1024);
        assert_eq!(exp.map.name(), "doubling");
        assert_eq!(exp.config.exact_threshold, 64);
    }

    const MINIMAL: &str = r#"
[map]
kind = "identity"
[cloud]
kind = "grid1d"
lo = 0.0
hi = 1.0
count = 5
[qmetric]
kind = "example1_line"
[schedule]
n_list = [1, 2, 3]
epsilon_list = [0.5, 0.25]
"#;

    #[test]
    fn defaults_fill_in() {
        let exp = parse(MINIMAL).unwrap();
        assert_eq!(exp.config.variants.len(), 4);
        assert_eq!(exp.config.power, 2);
        assert_eq!(exp.config.settings(), EstimatorSettings::default());
    }

    #[test]
    fn rejects_bad_schedules() {
        let bad_eps = MINIMAL.replace("[0.5, 0.25]", "[0.5, 0.2]");
        assert!(parse(&bad_eps).is_err());
        let bad_n = MINIMAL.replace("[1, 2, 3]", "[1, 3, 2]");
        assert!(parse(&bad_n).is_err());
        let empty = MINIMAL.replace("count = 5", "count = 0");
        assert!(parse(&empty).is_err());
        let unknown = format!("{MINIMAL}\nbogus = 1\n");
        assert!(matches!(parse(&unknown), Err(ConfigError::Toml { .. })));
    }

    #[test]
    fn uniform_continuity_override() {
        let text = MINIMAL.replace("kind = \"identity\"", "kind = \"identity\"\nuniformly_continuous = false");
        assert!(!parse(&text).unwrap().map.declared_uniformly_continuous);
    }

    #[test]
    fn inline_matrix() {
        let text = MINIMAL
            .replace("kind = \"grid1d\"\nlo = 0.0\nhi = 1.0\ncount = 5", "kind = \"indices\"\ncount = 2")
            .replace("kind = \"example1_line\"", "kind = \"matrix\"\nrows = [[0.0, 1.0], [2.0, 0.0]]");
        let exp = parse(&text).unwrap();
        assert_eq!(exp.qmetric.evaluate(&[1.0], &[0.0]).unwrap(), 2.0);
    }
}
