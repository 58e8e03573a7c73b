//! Run configuration, field snapshots and run manifests.

use crate::coupled::{InitialCondition, StepReport, TimeStepConfig};
use crate::fem::StructuredGrid;
use crate::laws::{validate_assumptions, MaterialLaws, ValidationReport};
use crate::microstructure::UnitCellGeometry;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Samples used when a config's laws are validated.
pub const VALIDATION_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Elements per side of the macro grid on `(0,1)²`.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
    pub resolutions: Vec<usize>,
    pub macro_resolution: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotFormat {
    Csv,
    VtkLegacy,
}

impl SnapshotFormat {
    pub fn extension(self) -> &'static str {
        match self {
            SnapshotFormat::Csv => "csv",
            SnapshotFormat::VtkLegacy => "vtk",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_output_dir")]
    pub dir: PathBuf,
    /// Snapshot every `every`-th step (the initial and final states are always written).
    #[serde(default = "default_every")]
    pub every: usize,
    #[serde(default = "default_formats")]
    pub formats: Vec<SnapshotFormat>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}
fn default_every() -> usize {
    10
}
fn default_formats() -> Vec<SnapshotFormat> {
    vec![SnapshotFormat::Csv]
}
fn default_raster_resolution() -> usize {
    8
}
fn default_cell_resolution() -> usize {
    32
}
fn default_epsilon() -> f64 {
    0.25
}
fn default_tau_steps() -> Vec<usize> {
    vec![1, 2, 4, 8]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_output_dir(),
            every: default_every(),
            formats: default_formats(),
        }
    }
}

/// Everything a command needs. Sections a command does not use are still
/// parsed and validated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub laws: MaterialLaws,
    pub geometry: UnitCellGeometry,
    #[serde(default = "default_raster_resolution")]
    pub raster_resolution: usize,
    #[serde(default = "default_cell_resolution")]
    pub cell_resolution: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub grid: GridConfig,
    pub time: TimeStepConfig,
    pub initial: InitialCondition,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    /// Translation shifts as multiples of the step.
    #[serde(default = "default_tau_steps")]
    pub tau_steps: Vec<usize>,
    #[serde(default)]
    pub output: OutputConfig,
    /// Seed of randomly generated rasters.
    #[serde(default)]
    pub seed: u64,
}

/// A parsed config together with its raw bytes' digest and validation report.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub sha256: String,
    pub validation: ValidationReport,
}

fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut s = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => {
                let _ = write!(s, "/{index}");
            }
            Segment::Map { key } => {
                let _ = write!(s, "/{}", key.replace('~', "~0").replace('/', "~1"));
            }
            Segment::Enum { variant } => {
                let _ = write!(s, "/{variant}");
            }
            Segment::Unknown => s.push_str("/?"),
        }
    }
    if s.is_empty() {
        s.push('/');
    }
    s
}

/// Deserializes a config document; errors carry the JSON pointer of the
/// offending value, or the line and column for syntax errors.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        let message = if inner.is_syntax() || inner.is_eof() {
            format!("{inner} (line {}, column {})", inner.line(), inner.column())
        } else {
            inner.to_string()
        };
        Error::config(pointer(e.path()), message)
    })?;
    validate_config(&cfg)?;
    Ok(cfg)
}

/// Structural checks that do not involve the laws.
pub fn validate_config(cfg: &RunConfig) -> Result<()> {
    cfg.geometry.validate()?;
    if cfg.raster_resolution < 2 {
        return Err(Error::config("/raster_resolution", "must be at least 2"));
    }
    if cfg.cell_resolution == 0 || !cfg.cell_resolution.is_multiple_of(cfg.raster_resolution) {
        return Err(Error::config(
            "/cell_resolution",
            format!(
                "{} is not a positive multiple of the raster resolution {}",
                cfg.cell_resolution, cfg.raster_resolution
            ),
        ));
    }
    if cfg.grid.n == 0 {
        return Err(Error::config("/grid/n", "must be positive"));
    }
    if !(cfg.epsilon > 0.0 && cfg.epsilon <= 1.0) {
        return Err(Error::config("/epsilon", "must lie in (0, 1]"));
    }
    if cfg.output.every == 0 {
        return Err(Error::config("/output/every", "must be positive"));
    }
    if cfg.tau_steps.contains(&0) {
        return Err(Error::config("/tau_steps", "shifts must be positive"));
    }
    cfg.time.validate()
}

/// Reads, parses and validates a config file, including the structural
/// assumptions on the laws. Assumption failures are returned as
/// [`Error::Validation`].
pub fn parse_config(path: &Path) -> Result<LoadedConfig> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| Error::config("/", format!("config is not UTF-8: {e}")))?;
    let config = parse_config_str(&text)?;
    let validation = validate_assumptions(&config.laws, VALIDATION_SAMPLES)?.into_result()?;
    Ok(LoadedConfig {
        config,
        sha256: sha256_hex(&bytes),
        validation,
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// One nodal scalar field on a structured grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub time: f64,
    pub name: String,
    pub values: Vec<f64>,
}

impl FieldSnapshot {
    pub fn new(grid: &StructuredGrid, time: f64, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let s = FieldSnapshot {
            nx: grid.nx,
            ny: grid.ny,
            lx: grid.lx,
            ly: grid.ly,
            time,
            name: name.into(),
            values,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let n = (self.nx + 1) * (self.ny + 1);
        if self.values.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: self.values.len(),
            });
        }
        if self.name.is_empty() || self.name.contains(char::is_whitespace) {
            return Err(Error::config("/name", "field name must be a non-empty word"));
        }
        Ok(())
    }

    fn coords(&self, k: usize) -> (f64, f64) {
        let (i, j) = (k % (self.nx + 1), k / (self.nx + 1));
        (
            i as f64 * self.lx / self.nx as f64,
            j as f64 * self.ly / self.ny as f64,
        )
    }

    /// `x,y,value` rows, nodes in row-major order (x fastest).
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * self.values.len());
        s.push_str("x,y,value\n");
        for (k, v) in self.values.iter().enumerate() {
            let (x, y) = self.coords(k);
            let _ = writeln!(s, "{x:.16e},{y:.16e},{v:.16e}");
        }
        s
    }

    /// Legacy VTK, `STRUCTURED_POINTS`, ASCII.
    pub fn to_vtk(&self) -> String {
        let mut s = String::with_capacity(26 * self.values.len() + 256);
        s.push_str("# vtk DataFile Version 3.0\n");
        let _ = writeln!(s, "{} t={:.16e}", self.name, self.time);
        s.push_str("ASCII\nDATASET STRUCTURED_POINTS\n");
        let _ = writeln!(s, "DIMENSIONS {} {} 1", self.nx + 1, self.ny + 1);
        s.push_str("ORIGIN 0 0 0\n");
        let _ = writeln!(
            s,
            "SPACING {:.16e} {:.16e} 1",
            self.lx / self.nx as f64,
            self.ly / self.ny as f64
        );
        let _ = writeln!(s, "POINT_DATA {}", self.values.len());
        let _ = writeln!(s, "SCALARS {} double 1", self.name);
        s.push_str("LOOKUP_TABLE default\n");
        for v in &self.values {
            let _ = writeln!(s, "{v:.16e}");
        }
        s
    }
}

/// Writes a snapshot in the given format.
pub fn emit_snapshot(snapshot: &FieldSnapshot, format: SnapshotFormat, path: &Path) -> Result<()> {
    snapshot.validate()?;
    let text = match format {
        SnapshotFormat::Csv => snapshot.to_csv(),
        SnapshotFormat::VtkLegacy => snapshot.to_vtk(),
    };
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads the value column of a snapshot CSV.
pub fn read_csv_values(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("x,y,value") {
        return Err(Error::config(path.display().to_string(), "missing header x,y,value"));
    }
    lines
        .enumerate()
        .map(|(k, line)| {
            line.rsplit(',')
                .next()
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| Error::config(format!("{}:{}", path.display(), k + 2), "malformed row"))
        })
        .collect()
}

/// Per-step diagnostics as CSV.
pub fn step_reports_csv(reports: &[StepReport]) -> String {
    let mut s = String::from(
        "step,time,newton_iterations,pressure_residual,mass_balance,heat_iterations,heat_residual,peclet,\
         max_principle_ok,memory_ok,p_min,p_max,theta_min,theta_max,r_min,r_max\n",
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{},{:.16e},{},{:.6e},{:.6e},{},{:.6e},{:.6e},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.step,
            r.time,
            r.pressure.iterations,
            r.pressure.final_residual,
            r.pressure.mass_balance,
            r.heat_iterations,
            r.heat_residual,
            r.peclet,
            r.max_principle_ok,
            r.memory_ok,
            r.p_min,
            r.p_max,
            r.theta_min,
            r.theta_max,
            r.r_min,
            r.r_max
        );
    }
    s
}

/// Invariant flags of a run, summarized.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InvariantSummary {
    pub steps: usize,
    pub max_principle_ok: bool,
    pub memory_ok: bool,
    pub worst_mass_balance: f64,
    pub max_peclet: f64,
    pub completed: bool,
}

impl InvariantSummary {
    pub fn from_reports(reports: &[StepReport], completed: bool) -> Self {
        InvariantSummary {
            steps: reports.len(),
            max_principle_ok: reports.iter().all(|r| r.max_principle_ok),
            memory_ok: reports.iter().all(|r| r.memory_ok),
            worst_mass_balance: reports.iter().map(|r| r.pressure.mass_balance).fold(0.0, f64::max),
            max_peclet: reports.iter().map(|r| r.peclet).fold(0.0, f64::max),
            completed,
        }
    }
}

/// Written next to every run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub invariants: Option<InvariantSummary>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config_sha256: &str, seed: u64) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_sha256: config_sha256.to_string(),
            seed,
            invariants: None,
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_text(&path, &(text + "\n"))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = include_str!("../fixtures/example.json");

    #[test]
    fn example_config_parses_and_validates() {
        let cfg = parse_config_str(EXAMPLE).unwrap();
        let rep = validate_assumptions(&cfg.laws, VALIDATION_SAMPLES).unwrap();
        assert!(rep.passed(), "{}", rep.failure_summary());
    }

    #[test]
    fn positive_ambient_pressure_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut v: serde_json::Value = serde_json::from_str(EXAMPLE).unwrap();
        v["laws"]["constants"]["p_inf"] = serde_json::json!(1000.0);
        let path = dir.path().join("c.json");
        std::fs::write(&path, v.to_string()).unwrap();
        match parse_config(&path).unwrap_err() {
            Error::Validation(rep) => assert!(rep.failures().any(|c| c.name == "p_inf < 0")),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn errors_carry_json_pointer() {
        let mut v: serde_json::Value = serde_json::from_str(EXAMPLE).unwrap();
        v["time"]["n_steps"] = serde_json::json!("ten");
        match parse_config_str(&v.to_string()).unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "/time/n_steps"),
            e => panic!("unexpected {e}"),
        }
        v["time"]["n_steps"] = serde_json::json!(10);
        v["grid"]["m"] = serde_json::json!(3);
        match parse_config_str(&v.to_string()).unwrap_err() {
            Error::Config { path, message } => {
                assert!(path.starts_with("/grid"), "{path}");
                assert!(message.contains("unknown field"), "{message}");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn empty_file_reports_position() {
        match parse_config_str("").unwrap_err() {
            Error::Config { message, .. } => assert!(message.contains("line 1"), "{message}"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn constant_snapshot_csv() {
        let g = StructuredGrid::unit(2, 2);
        let s = FieldSnapshot::new(&g, 0.0, "p", vec![-1.5; 9]).unwrap();
        let csv = s.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 10);
        assert_eq!(lines[0], "x,y,value");
        assert!(lines[1..].iter().all(|l| l.ends_with(",-1.5000000000000000e0")));
        assert!(lines[2].starts_with("5.0000000000000000e-1,0.0000000000000000e0,"));
        assert!(FieldSnapshot::new(&g, 0.0, "p", vec![0.0; 8]).is_err());
    }

    #[test]
    fn csv_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let g = StructuredGrid::unit(5, 3);
        let vals: Vec<f64> = (0..g.n_nodes()).map(|k| (k as f64 * 0.7368).sin() * 1e6 / 3.0).collect();
        let s = FieldSnapshot::new(&g, 1.0, "theta", vals.clone()).unwrap();
        let path = dir.path().join("sub/theta.csv");
        emit_snapshot(&s, SnapshotFormat::Csv, &path).unwrap();
        let back = read_csv_values(&path).unwrap();
        assert_eq!(back.len(), vals.len());
        for (a, b) in back.iter().zip(&vals) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn vtk_layout_and_stability() {
        let g = StructuredGrid::unit(2, 1);
        let s = FieldSnapshot::new(&g, 2.0, "r", vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let v = s.to_vtk();
        assert!(v.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(v.contains("DATASET STRUCTURED_POINTS\nDIMENSIONS 3 2 1\n"));
        assert!(v.contains("POINT_DATA 6\nSCALARS r double 1\nLOOKUP_TABLE default\n"));
        assert_eq!(v.lines().count(), 10 + 6);
        assert_eq!(v, s.to_vtk());
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::new("meso", &sha256_hex(b"{}"), 7);
        m.outputs.push("p_0000.csv".into());
        let path = m.write(dir.path()).unwrap();
        let back: Manifest = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(
            m.config_sha256,
            "44136fa355b3678a1146ad16f7e8649e94fb4fc21fe77e8310c060f61caaff8a"
        );
    }
}
