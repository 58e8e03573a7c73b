//! Periodic two-phase unit cells and their `ε`-periodic extension.
//!
//! The unit cell is `Y = (0,1)²`. A [`CellRaster`] stores the cement indicator on
//! an `m × m` grid of sub-cells; entry `(i, j)` covers
//! `[i/m, (i+1)/m) × [j/m, (j+1)/m)` with `i` along `y₁` and `j` along `y₂`.
//! The aggregate indicator is the complement, so the two always sum to one.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Aggregate (`χ_a = 1`).
    #[serde(alias = "a")]
    Aggregate,
    /// Cement paste (`χ_c = 1`).
    #[serde(alias = "c")]
    Cement,
}

impl Phase {
    pub fn from_indicator(v: u8) -> Phase {
        if v == 1 {
            Phase::Cement
        } else {
            Phase::Aggregate
        }
    }

    pub fn cement_indicator(self) -> f64 {
        match self {
            Phase::Cement => 1.0,
            Phase::Aggregate => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
}

/// Parameterized unit-cell geometries.
///
/// These are stand-ins for a real concrete meso-structure: a circular
/// aggregate grain centred in the cell, a layered medium, a 2×2 checkerboard,
/// a single phase, or a raster read from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UnitCellGeometry {
    /// Aggregate disk of the given radius centred at `(1/2, 1/2)` in a cement matrix.
    DiskInclusion { radius: f64 },
    /// Cement occupies `y_axis < cement_fraction`, aggregate the rest.
    Laminate {
        normal_axis: Axis,
        cement_fraction: f64,
    },
    /// Cement in the lower-left and upper-right quadrants.
    Checkerboard,
    Uniform { phase: Phase },
    /// Independent cement draws with probability `fill`, from the run seed.
    Random { fill: f64 },
    RasterFile { path: PathBuf },
}

impl UnitCellGeometry {
    pub fn validate(&self) -> Result<()> {
        match *self {
            UnitCellGeometry::DiskInclusion { radius } => {
                if !(radius > 0.0 && radius < 0.5) {
                    return Err(Error::config(
                        "/geometry/radius",
                        format!("disk radius must lie in (0, 0.5), got {radius}"),
                    ));
                }
            }
            UnitCellGeometry::Laminate {
                cement_fraction, ..
            } => {
                if !(0.0..=1.0).contains(&cement_fraction) {
                    return Err(Error::config(
                        "/geometry/cement_fraction",
                        format!("laminate cement fraction must lie in [0, 1], got {cement_fraction}"),
                    ));
                }
            }
            UnitCellGeometry::Random { fill }
                if !(0.0..=1.0).contains(&fill) => {
                    return Err(Error::config(
                        "/geometry/fill",
                        format!("random fill must lie in [0, 1], got {fill}"),
                    ));
                }
            _ => {}
        }
        Ok(())
    }

    /// Analytic membership test for a point of the unit cell.
    fn phase_of(&self, y: [f64; 2]) -> Phase {
        match *self {
            UnitCellGeometry::DiskInclusion { radius } => {
                let dx = y[0] - 0.5;
                let dy = y[1] - 0.5;
                if dx * dx + dy * dy < radius * radius {
                    Phase::Aggregate
                } else {
                    Phase::Cement
                }
            }
            UnitCellGeometry::Laminate {
                normal_axis,
                cement_fraction,
            } => {
                let coord = match normal_axis {
                    Axis::X => y[0],
                    Axis::Y => y[1],
                };
                if coord < cement_fraction {
                    Phase::Cement
                } else {
                    Phase::Aggregate
                }
            }
            UnitCellGeometry::Checkerboard => {
                if (y[0] < 0.5) == (y[1] < 0.5) {
                    Phase::Cement
                } else {
                    Phase::Aggregate
                }
            }
            UnitCellGeometry::Uniform { phase } => phase,
            UnitCellGeometry::Random { .. } | UnitCellGeometry::RasterFile { .. } => {
                unreachable!("random and file rasters are not sampled pointwise")
            }
        }
    }
}

/// Binary `m × m` raster of the cement indicator `χ_c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellRaster {
    m: usize,
    values: Vec<u8>,
}

impl CellRaster {
    pub fn new(m: usize, values: Vec<u8>) -> Result<Self> {
        if m == 0 {
            return Err(Error::config("/raster", "raster resolution must be positive"));
        }
        if values.len() != m * m {
            return Err(Error::DimensionMismatch {
                expected: m * m,
                actual: values.len(),
            });
        }
        if let Some(bad) = values.iter().find(|&&v| v > 1) {
            return Err(Error::config("/raster", format!("raster entries must be 0 or 1, found {bad}")));
        }
        Ok(Self { m, values })
    }

    pub fn uniform(m: usize, phase: Phase) -> Self {
        let v = phase.cement_indicator() as u8;
        Self {
            m,
            values: vec![v; m * m],
        }
    }

    /// Seeded Bernoulli raster with cement probability `fill`.
    pub fn random(m: usize, fill: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..m * m).map(|_| u8::from(rng.gen::<f64>() < fill)).collect();
        Self { m, values }
    }

    pub fn resolution(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    /// Cement indicator of sub-cell `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.values[j * self.m + i]
    }

    pub fn phase(&self, i: usize, j: usize) -> Phase {
        Phase::from_indicator(self.get(i, j))
    }

    pub fn cement_count(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }

    /// Hex SHA-256 of the resolution and entries; keys cached contrast tables.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.m as u64).to_le_bytes());
        hasher.update(&self.values);
        hex::encode(hasher.finalize())
    }

    /// Plain-text format: first line `m`, then `m` rows of `m` space-separated
    /// 0/1 values; row `j` (counting from the top) holds sub-cells `(·, j)`.
    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.m);
        for j in 0..self.m {
            for i in 0..self.m {
                if i > 0 {
                    s.push(' ');
                }
                write!(s, "{}", self.get(i, j)).unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::config("/raster", "empty raster file"))?;
        let m: usize = header
            .trim()
            .parse()
            .map_err(|_| Error::config("/raster", format!("bad raster size line {header:?}")))?;
        let mut values = Vec::with_capacity(m * m);
        for (row, line) in lines.enumerate() {
            for tok in line.split_whitespace() {
                let v: u8 = tok
                    .parse()
                    .map_err(|_| Error::config(format!("/raster/{row}"), format!("bad raster entry {tok:?}")))?;
                values.push(v);
            }
        }
        Self::new(m, values)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Samples the geometry at raster-cell centres. Random rasters use seed 0.
pub fn rasterize(geometry: &UnitCellGeometry, m: usize) -> Result<CellRaster> {
    rasterize_seeded(geometry, m, 0)
}

/// As [`rasterize`], with the seed used by [`UnitCellGeometry::Random`].
pub fn rasterize_seeded(geometry: &UnitCellGeometry, m: usize, seed: u64) -> Result<CellRaster> {
    if m < 2 {
        return Err(Error::config("/raster_resolution", format!("raster resolution must be at least 2, got {m}")));
    }
    geometry.validate()?;
    if let UnitCellGeometry::RasterFile { path } = geometry {
        let raster = CellRaster::read(path)?;
        if raster.resolution() != m {
            return Err(Error::config(
                "/raster_resolution",
                format!("raster file has resolution {}, expected {m}", raster.resolution()),
            ));
        }
        return Ok(raster);
    }
    if let UnitCellGeometry::Random { fill } = *geometry {
        return Ok(CellRaster::random(m, fill, seed));
    }
    let inv = 1.0 / m as f64;
    let mut values = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            let y = [(i as f64 + 0.5) * inv, (j as f64 + 0.5) * inv];
            values.push(geometry.phase_of(y).cement_indicator() as u8);
        }
    }
    CellRaster::new(m, values)
}

/// `χ_c* = ∫_Y χ_c dy`: the arithmetic mean of the raster entries.
pub fn volume_fraction(raster: &CellRaster) -> f64 {
    raster.cement_count() as f64 / raster.values.len() as f64
}

/// Phase of the `ε`-periodic medium at the macro point `x`.
pub fn phase_at(x: [f64; 2], epsilon: f64, raster: &CellRaster) -> Phase {
    let m = raster.m;
    let idx = |c: f64| -> usize {
        let y = (c / epsilon).rem_euclid(1.0);
        ((y * m as f64).floor() as usize).min(m - 1)
    };
    raster.phase(idx(x[0]), idx(x[1]))
}

/// An `ε`-periodic tiling of `Ω = (0,1)²` together with a macro grid that
/// resolves every raster sub-cell by whole elements.
#[derive(Debug, Clone)]
pub struct MesoTiling {
    epsilon: f64,
    cells_per_side: usize,
    raster: CellRaster,
    macro_resolution: usize,
}

impl MesoTiling {
    pub fn new(epsilon: f64, raster: CellRaster, macro_resolution: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::config("/epsilon", format!("epsilon must lie in (0, 1], got {epsilon}")));
        }
        let inv = 1.0 / epsilon;
        let cells = inv.round();
        if (inv - cells).abs() > 1e-9 * inv {
            return Err(Error::config(
                "/epsilon",
                format!("1/epsilon must be an integer, got 1/{epsilon} = {inv}"),
            ));
        }
        let cells = cells as usize;
        let sub = cells * raster.resolution();
        if macro_resolution == 0 || !macro_resolution.is_multiple_of(sub) {
            return Err(Error::config(
                "/grid/n",
                format!(
                    "grid resolution {macro_resolution} does not resolve the microstructure: \
                     it must be a multiple of m/epsilon = {sub}"
                ),
            ));
        }
        Ok(Self {
            epsilon,
            cells_per_side: cells,
            raster,
            macro_resolution,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn cells_per_side(&self) -> usize {
        self.cells_per_side
    }

    pub fn raster(&self) -> &CellRaster {
        &self.raster
    }

    pub fn macro_resolution(&self) -> usize {
        self.macro_resolution
    }

    /// Phase of macro element `(ix, iy)`, computed in integer arithmetic.
    pub fn element_phase(&self, ix: usize, iy: usize) -> Phase {
        let m = self.raster.resolution();
        let per_sub = self.macro_resolution / (self.cells_per_side * m);
        self.raster.phase((ix / per_sub) % m, (iy / per_sub) % m)
    }
}
