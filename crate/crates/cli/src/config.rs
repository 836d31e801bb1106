//! Experiment configuration: a TOML file with fixed sections.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use roughlayer::mesh::{make_interface, InterfaceShape, Polyline};
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{l}: {}", self.path.display(), self.message),
            None => write!(f, "{}: {}", self.path.display(), self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Mesh,
    Calderon,
    Spectrum,
    Contraction,
    Series,
    Imaging,
    Convergence,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Mesh,
        Suite::Calderon,
        Suite::Spectrum,
        Suite::Contraction,
        Suite::Series,
        Suite::Imaging,
        Suite::Convergence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Mesh => "mesh",
            Suite::Calderon => "calderon",
            Suite::Spectrum => "spectrum",
            Suite::Contraction => "contraction",
            Suite::Series => "series",
            Suite::Imaging => "imaging",
            Suite::Convergence => "convergence",
        }
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s.trim())
            .ok_or_else(|| format!("unknown suite {s:?} (known: mesh, calderon, spectrum, contraction, series, imaging, convergence)"))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    geometry: Option<Geometry>,
    #[serde(default)]
    mesh: MeshParams,
    #[serde(default)]
    problem: Problem,
    #[serde(default)]
    suites: Suites,
    #[serde(default)]
    tolerances: Tolerances,
    #[serde(default)]
    output: Output,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    /// `circle(R, m)`, `square(L)` or `koch(level, side)`.
    pub shape: String,
    /// Inclusion curves inside the shape, for the imaging suite.
    #[serde(default)]
    pub inclusions: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshParams {
    /// Interface element size; defaults to the shortest interface segment,
    /// capped at an eighth of the interface diameter.
    pub h: Option<f64>,
    /// Truncation box half-width; defaults to four interface diameters.
    #[serde(rename = "box")]
    pub box_half_width: Option<f64>,
    pub grading: f64,
    pub h_max: Option<f64>,
    /// Number of levels in the convergence suite.
    pub levels: usize,
}

impl Default for MeshParams {
    fn default() -> Self {
        MeshParams { h: None, box_half_width: None, grading: 0.3, h_max: None, levels: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Problem {
    /// Mode of the operator `−Δ + k`: 0 (homogeneous) or 1.
    pub k: f64,
    /// Inclusion contrast for the imaging suite.
    pub contrast: f64,
    /// Order of the multipole Neumann data in the imaging suite.
    pub multipole: u32,
    pub series_sign: Sign,
    pub series_trials: usize,
    pub series_tol: f64,
    pub series_max_iter: usize,
    pub seed: u64,
}

impl Default for Problem {
    fn default() -> Self {
        Problem {
            k: 1.0,
            contrast: 2.0,
            multipole: 1,
            series_sign: Sign::Plus,
            series_trials: 30,
            series_tol: 1e-8,
            series_max_iter: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Suites {
    pub run: Vec<Suite>,
    pub concurrent: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub min_angle: f64,
    pub calderon: f64,
    pub jump_trace: f64,
    pub jump_flux: f64,
    pub steklov_gram: f64,
    pub steklov_identity: f64,
    pub disk_lambda0: f64,
    pub disk_lambda1: f64,
    pub homogeneous_disk: f64,
    pub contraction_slack: f64,
    pub series_ratio_slack: f64,
    pub series_recovery: f64,
    pub imaging_error: f64,
    pub exterior_spread: f64,
    pub monotone_residual: f64,
    pub monotone_gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            min_angle: 20.0,
            calderon: 1e-8,
            jump_trace: 1e-12,
            jump_flux: 1e-8,
            steklov_gram: 1e-10,
            steklov_identity: 1e-6,
            disk_lambda0: 0.02,
            disk_lambda1: 0.03,
            homogeneous_disk: 0.02,
            contraction_slack: 1e-8,
            series_ratio_slack: 0.02,
            series_recovery: 1e-6,
            imaging_error: 0.05,
            exterior_spread: 0.01,
            monotone_residual: 1e-10,
            monotone_gap: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    pub dir: PathBuf,
    pub csv: bool,
    pub json: bool,
    pub render: bool,
    pub export_operators: bool,
}

impl Default for Output {
    fn default() -> Self {
        Output { dir: PathBuf::from("out"), csv: true, json: true, render: true, export_operators: false }
    }
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct Config {
    pub geometry: Geometry,
    pub shape: InterfaceShape,
    pub interface: Polyline,
    pub inclusions: Vec<Polyline>,
    pub mesh: MeshParams,
    pub problem: Problem,
    pub suites: Suites,
    pub tolerances: Tolerances,
    pub output: Output,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError { path: path.into(), line: None, message: format!("cannot read config: {e}") })?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let err = |line: Option<usize>, message: String| ConfigError { path: path.into(), line, message };
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            err(line, e.message().to_string())
        })?;
        // line of a `[section]` or `key =` for messages about values
        let line_of = |needle: &str| {
            text.lines().position(|l| l.trim_start().starts_with(needle)).map(|i| i + 1)
        };
        let geometry = raw.geometry.ok_or_else(|| err(None, "missing [geometry] section".into()))?;
        let shape: InterfaceShape = geometry.shape.parse().map_err(|e| err(line_of("shape"), format!("{e}")))?;
        let interface = make_interface(&shape).map_err(|e| err(line_of("shape"), format!("{e}")))?;
        let inclusions = geometry
            .inclusions
            .iter()
            .map(|s| {
                let shape: InterfaceShape = s.parse()?;
                make_interface(&shape)
            })
            .collect::<roughlayer::Result<Vec<_>>>()
            .map_err(|e| err(line_of("inclusions"), format!("{e}")))?;

        let m = &raw.mesh;
        let check = |ok: bool, key: &str, what: &str| if ok { Ok(()) } else { Err(err(line_of(key), format!("{key} {what}"))) };
        check(m.h.is_none_or(|h| h > 0.0 && h.is_finite()), "h", "must be positive")?;
        check(m.box_half_width.is_none_or(|b| b > 0.0 && b.is_finite()), "box", "must be positive")?;
        check(m.h_max.is_none_or(|h| h > 0.0 && h.is_finite()), "h_max", "must be positive")?;
        check(m.grading >= 0.0 && m.grading <= 2.0, "grading", "must lie in [0, 2]")?;
        check((1..=6).contains(&m.levels), "levels", "must lie in 1..=6")?;
        let p = &raw.problem;
        check(p.k == 0.0 || p.k == 1.0, "k", "must be 0 or 1")?;
        check(p.contrast > 0.0 && p.contrast != 1.0 && p.contrast.is_finite(), "contrast", "must be positive and different from 1")?;
        check(p.series_tol > 0.0 && p.series_tol < 1.0, "series_tol", "must lie in (0, 1)")?;
        check(p.series_max_iter > 0, "series_max_iter", "must be positive")?;
        check(p.multipole <= 16, "multipole", "must be at most 16")?;
        check(raw.output.csv || raw.output.json, "[output]", "must enable csv or json")?;

        let mut suites = raw.suites;
        if suites.run.is_empty() {
            suites.run = vec![Suite::Calderon];
        }
        suites.run.sort();
        suites.run.dedup();
        Ok(Config {
            geometry,
            shape,
            interface,
            inclusions,
            mesh: raw.mesh,
            problem: raw.problem,
            suites,
            tolerances: raw.tolerances,
            output: raw.output,
        })
    }

    pub fn box_half_width(&self) -> f64 {
        self.mesh.box_half_width.unwrap_or(4.0 * self.interface.diameter())
    }

    pub fn h(&self) -> f64 {
        self.mesh.h.unwrap_or(self.interface.shortest_segment().min(self.interface.diameter() / 8.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Config, ConfigError> {
        Config::parse(text, Path::new("test.toml"))
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let c = parse("[geometry]\nshape = \"square(1)\"\n").unwrap();
        assert_eq!(c.suites.run, vec![Suite::Calderon]);
        assert_eq!(c.problem.k, 1.0);
        assert!((c.box_half_width() - 4.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!((c.h() - 2f64.sqrt() / 8.0).abs() < 1e-12);
    }

    #[test]
    fn errors_name_the_problem() {
        let e = parse("[mesh]\nh = 0.1\n").unwrap_err();
        assert!(e.message.contains("[geometry]"), "{e}");
        let e = parse("[geometry]\nshape = \"square(1)\"\n[mesh]\nh = -1.0\n").unwrap_err();
        assert_eq!(e.line, Some(4));
        let e = parse("[geometry]\nshape = \"square(1)\"\n[problem]\nk = 2.0\n").unwrap_err();
        assert!(e.message.contains("k must be 0 or 1"));
        let e = parse("[geometry]\nshape = \"square(1)\"\n[suites]\nrun = [\"nope\"]\n").unwrap_err();
        assert_eq!(e.line, Some(4), "{e}");
        let e = parse("[geometry]\nshape = \"blob(1)\"\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        assert!(parse("[geometry]\nshape = \"square(1)\"\ncolour = 1\n").is_err());
    }

    #[test]
    fn shipped_configs_parse() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut n = 0;
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "cfg") {
                Config::load(&path).unwrap_or_else(|e| panic!("{e}"));
                n += 1;
            }
        }
        assert!(n >= 5);
    }
}
