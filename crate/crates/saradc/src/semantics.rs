//! Semantic link metrics: the similarity surrogate, the semantic rate HSR,
//! its spectral efficiency HSSE, per-slot semantic throughput, and the
//! bit-rate comparator used by the non-semantic baseline.
//!
//! A real transformer codec would map (symbols per word, SINR) to a measured
//! sentence similarity; here that mapping is a pluggable surrogate: either a
//! smooth parametric curve or a lookup table loaded from measurements, both
//! monotone in SINR and in symbols per word and confined to [0, 1].

use std::io::{BufRead, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SemanticsError {
    #[error("invalid semantic source: {0}")]
    InvalidSource(String),
    #[error("invalid similarity table: {0}")]
    InvalidTable(String),
    #[error("failed to read similarity table {path}: {source}")]
    TableIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Similarity value plus a flag set when the query fell outside the model's
/// domain and was clamped to the nearest edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub value: f64,
    pub clamped: bool,
}

/// Similarity surrogate: maps (symbols per word, SINR in dB) to a sentence
/// similarity in [0, 1].
#[derive(Debug, Clone)]
pub enum XiModel {
    /// `(1 - exp(-sat_rate * u)) * logistic(slope * (sinr_db - midpoint_db))`.
    ///
    /// Saturating in both axes; the defaults place the SINR transition around
    /// 5 dB and saturate the symbol axis near u = 10.
    Parametric {
        sat_rate: f64,
        slope: f64,
        midpoint_db: f64,
    },
    /// Bilinear interpolation over a measured grid, clamped at the edges.
    /// Rows are symbol counts (ascending), columns SINR breakpoints
    /// (ascending); values in [0, 1] and nondecreasing along both axes.
    Table {
        u_values: Vec<f64>,
        sinr_db_breaks: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

impl Default for XiModel {
    fn default() -> Self {
        XiModel::Parametric {
            sat_rate: 0.3,
            slope: 0.5,
            midpoint_db: 5.0,
        }
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl XiModel {
    /// Evaluates the surrogate. `sinr_db` of negative infinity maps to 0.
    pub fn eval(&self, u: f64, sinr_db: f64) -> Similarity {
        match self {
            XiModel::Parametric {
                sat_rate,
                slope,
                midpoint_db,
            } => {
                let value = if sinr_db == f64::NEG_INFINITY {
                    0.0
                } else {
                    (1.0 - (-sat_rate * u).exp()) * logistic(slope * (sinr_db - midpoint_db))
                };
                Similarity {
                    value: value.clamp(0.0, 1.0),
                    clamped: false,
                }
            }
            XiModel::Table {
                u_values,
                sinr_db_breaks,
                values,
            } => {
                let (ui, ut, u_clamped) = bracket(u_values, u);
                let (si, st, s_clamped) = bracket(sinr_db_breaks, sinr_db);
                let v00 = values[ui][si];
                let v01 = values[ui][si + 1];
                let v10 = values[ui + 1][si];
                let v11 = values[ui + 1][si + 1];
                let v0 = v00 + (v01 - v00) * st;
                let v1 = v10 + (v11 - v10) * st;
                Similarity {
                    value: (v0 + (v1 - v0) * ut).clamp(0.0, 1.0),
                    clamped: u_clamped || s_clamped,
                }
            }
        }
    }

    /// Similarity value alone; see [`XiModel::eval`] for the clamp flag.
    pub fn xi(&self, u: f64, sinr_db: f64) -> f64 {
        self.eval(u, sinr_db).value
    }

    /// Similarity for a linear SINR. Zero signal maps to zero similarity.
    pub fn xi_linear(&self, u: f64, sinr_linear: f64) -> f64 {
        let sinr_db = if sinr_linear <= 0.0 {
            f64::NEG_INFINITY
        } else {
            10.0 * sinr_linear.log10()
        };
        self.xi(u, sinr_db)
    }

    /// Samples a parametric model onto a grid, producing a table model that
    /// agrees with it at the grid points.
    pub fn to_table(&self, u_values: &[f64], sinr_db_breaks: &[f64]) -> Result<XiModel, SemanticsError> {
        let values: Vec<Vec<f64>> = u_values
            .iter()
            .map(|&u| sinr_db_breaks.iter().map(|&s| self.xi(u, s)).collect())
            .collect();
        let model = XiModel::Table {
            u_values: u_values.to_vec(),
            sinr_db_breaks: sinr_db_breaks.to_vec(),
            values,
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks the range and monotonicity invariants. Table axes must be
    /// strictly ascending with at least two points each.
    pub fn validate(&self) -> Result<(), SemanticsError> {
        match self {
            XiModel::Parametric {
                sat_rate, slope, ..
            } => {
                if *sat_rate <= 0.0 || *slope <= 0.0 {
                    return Err(SemanticsError::InvalidTable(
                        "parametric sat_rate and slope must be positive".into(),
                    ));
                }
                Ok(())
            }
            XiModel::Table {
                u_values,
                sinr_db_breaks,
                values,
            } => {
                if u_values.len() < 2 || sinr_db_breaks.len() < 2 {
                    return Err(SemanticsError::InvalidTable(
                        "table needs at least 2 points per axis".into(),
                    ));
                }
                if !strictly_ascending(u_values) || !strictly_ascending(sinr_db_breaks) {
                    return Err(SemanticsError::InvalidTable(
                        "table axes must be strictly ascending".into(),
                    ));
                }
                if values.len() != u_values.len()
                    || values.iter().any(|row| row.len() != sinr_db_breaks.len())
                {
                    return Err(SemanticsError::InvalidTable("table shape mismatch".into()));
                }
                const TOL: f64 = 1e-9;
                for (i, row) in values.iter().enumerate() {
                    for (j, &v) in row.iter().enumerate() {
                        if !(0.0..=1.0).contains(&v) {
                            return Err(SemanticsError::InvalidTable(format!(
                                "value {v} at ({i},{j}) outside [0,1]"
                            )));
                        }
                        if j > 0 && v < row[j - 1] - TOL {
                            return Err(SemanticsError::InvalidTable(format!(
                                "row {i} not nondecreasing in SINR at column {j}"
                            )));
                        }
                        if i > 0 && v < values[i - 1][j] - TOL {
                            return Err(SemanticsError::InvalidTable(format!(
                                "column {j} not nondecreasing in u at row {i}"
                            )));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// Loads a table model from a comma-separated grid: header row holds the
    /// SINR breakpoints, first column the symbol counts.
    pub fn load_table(path: &Path) -> Result<XiModel, SemanticsError> {
        let io_err = |source| SemanticsError::TableIo {
            path: path.display().to_string(),
            source,
        };
        let file = std::fs::File::open(path).map_err(io_err)?;
        let mut lines = std::io::BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| SemanticsError::InvalidTable("empty table file".into()))?
            .map_err(io_err)?;
        let sinr_db_breaks: Vec<f64> = header
            .split(',')
            .skip(1)
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| SemanticsError::InvalidTable(format!("bad header: {e}")))?;
        let mut u_values = Vec::new();
        let mut values = Vec::new();
        for line in lines {
            let line = line.map_err(io_err)?;
            if line.trim().is_empty() {
                continue;
            }
            let mut cells = line.split(',');
            let u = cells
                .next()
                .unwrap()
                .trim()
                .parse::<f64>()
                .map_err(|e| SemanticsError::InvalidTable(format!("bad u cell: {e}")))?;
            let row: Vec<f64> = cells
                .map(|c| c.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| SemanticsError::InvalidTable(format!("bad value cell: {e}")))?;
            u_values.push(u);
            values.push(row);
        }
        let model = XiModel::Table {
            u_values,
            sinr_db_breaks,
            values,
        };
        model.validate()?;
        Ok(model)
    }

    /// Writes a table model in the format accepted by [`XiModel::load_table`].
    pub fn save_table(&self, path: &Path) -> Result<(), SemanticsError> {
        let io_err = |source| SemanticsError::TableIo {
            path: path.display().to_string(),
            source,
        };
        match self {
            XiModel::Table {
                u_values,
                sinr_db_breaks,
                values,
            } => {
                let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
                let header: Vec<String> = std::iter::once("u".to_string())
                    .chain(sinr_db_breaks.iter().map(|s| s.to_string()))
                    .collect();
                writeln!(out, "{}", header.join(",")).map_err(io_err)?;
                for (u, row) in u_values.iter().zip(values) {
                    let cells: Vec<String> = std::iter::once(u.to_string())
                        .chain(row.iter().map(|v| v.to_string()))
                        .collect();
                    writeln!(out, "{}", cells.join(",")).map_err(io_err)?;
                }
                Ok(())
            }
            XiModel::Parametric { .. } => Err(SemanticsError::InvalidTable(
                "only table models can be saved as a grid".into(),
            )),
        }
    }
}

/// Finds the interpolation bracket for `x` in ascending `axis`: index of the
/// lower knot, fractional position in [0, 1], and whether `x` was clamped.
fn bracket(axis: &[f64], x: f64) -> (usize, f64, bool) {
    if x <= axis[0] {
        return (0, 0.0, x < axis[0]);
    }
    let last = axis.len() - 1;
    if x >= axis[last] {
        return (last - 1, 1.0, x > axis[last]);
    }
    let i = axis.partition_point(|&a| a <= x) - 1;
    let i = i.min(last - 1);
    let t = (x - axis[i]) / (axis[i + 1] - axis[i]);
    (i, t, false)
}

fn strictly_ascending(axis: &[f64]) -> bool {
    axis.windows(2).all(|w| w[1] > w[0])
}

/// Source-side semantic parameters: average semantic information per word
/// (`i_over_l`, in suts/word) and the number of semantic symbols encoding one
/// word.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemanticSource {
    pub i_over_l: f64,
    pub u: u32,
}

impl SemanticSource {
    pub fn new(i_over_l: f64, u: u32, u_max: u32) -> Result<Self, SemanticsError> {
        if i_over_l <= 0.0 {
            return Err(SemanticsError::InvalidSource(format!(
                "i_over_l must be positive, got {i_over_l}"
            )));
        }
        if u == 0 || u > u_max {
            return Err(SemanticsError::InvalidSource(format!(
                "u must lie in 1..={u_max}, got {u}"
            )));
        }
        Ok(Self { i_over_l, u })
    }
}

/// Semantic transmission rate in suts/s: `W * (I/L) * xi / u`.
pub fn hsr(bandwidth_hz: f64, src: &SemanticSource, xi: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&xi));
    debug_assert!(src.u >= 1, "u = 0 would divide by zero");
    bandwidth_hz * src.i_over_l * xi / src.u as f64
}

/// Semantic spectral efficiency in suts/s/Hz: `(I/L) * xi / u`. Independent
/// of bandwidth by construction.
pub fn hsse(src: &SemanticSource, xi: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&xi));
    src.i_over_l * xi / src.u as f64
}

/// Semantic throughput of one vehicle over a slot, in suts. Licensed-band
/// attachments pass `o1_fraction = 1` (they own the whole slot).
pub fn st_vehicle(hsr: f64, o1_fraction: f64, slot_s: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&o1_fraction));
    hsr * o1_fraction * slot_s
}

/// Bit-based comparator: spectral efficiency of a conventional link carrying
/// `bits_per_word` bits for every word, expressed in the same suts/s/Hz units
/// so it can be compared against [`hsse`].
pub fn hsse_bit(sinr_linear: f64, bits_per_word: f64, i_over_l: f64) -> f64 {
    debug_assert!(bits_per_word >= 1.0);
    i_over_l * (1.0 + sinr_linear).log2() / bits_per_word
}
