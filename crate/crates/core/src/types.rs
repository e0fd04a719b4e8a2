//! Shared domain types: the training dataset, correlation hyperparameters and
//! the fitting configuration.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::backend::BackendKind;
use crate::error::{GpError, Result};
use crate::optimizer::GaConfig;

/// Coordinates may overshoot the unit cube by at most this much.
pub const UNIT_CUBE_TOL: f64 = 1e-12;

/// Smoothness exponent used unless a caller overrides it.
pub const DEFAULT_SMOOTHNESS: f64 = 1.95;

pub const DEFAULT_THETA_LOWER: f64 = 1e-6;
pub const DEFAULT_THETA_UPPER: f64 = 12.0;

/// Simulator runs: an `n x d` design on the unit cube and the `n` responses.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    inputs: Array2<f64>,
    outputs: Array1<f64>,
}

impl Dataset {
    pub fn new(inputs: Array2<f64>, outputs: Array1<f64>) -> Result<Self> {
        let (n, d) = inputs.dim();
        if outputs.len() != n {
            return Err(GpError::DimensionMismatch(format!(
                "{n} input rows but {} outputs",
                outputs.len()
            )));
        }
        if n < 2 {
            return Err(GpError::DimensionMismatch(format!(
                "need at least 2 points, got {n}"
            )));
        }
        if d == 0 {
            return Err(GpError::DimensionMismatch("input dimension is zero".into()));
        }
        check_unit_cube(inputs.view())?;
        if let Some(i) = outputs.iter().position(|y| !y.is_finite()) {
            return Err(GpError::NonFiniteEntry(format!("output {i}")));
        }
        Ok(Self { inputs, outputs })
    }

    pub fn n(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn d(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn inputs(&self) -> ArrayView2<'_, f64> {
        self.inputs.view()
    }

    pub fn outputs(&self) -> ArrayView1<'_, f64> {
        self.outputs.view()
    }

    /// Same inputs with every output shifted by `c`.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        Self::new(self.inputs.clone(), self.outputs.mapv(|y| y + c))
    }

    /// Writes `x1,...,xd,y` with 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.d()).map(|k| format!("x{k}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        for (row, y) in self.inputs.rows().into_iter().zip(self.outputs.iter()) {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            rec.push(format!("{y:.16e}"));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let cols = header.len();
        if cols < 2 || header.get(cols - 1).map(str::trim) != Some("y") {
            return Err(GpError::DimensionMismatch(
                "header must be x1,...,xd,y".into(),
            ));
        }
        for (k, name) in header.iter().take(cols - 1).enumerate() {
            if name.trim() != format!("x{}", k + 1) {
                return Err(GpError::DimensionMismatch(format!(
                    "unexpected column `{name}` at position {}",
                    k + 1
                )));
            }
        }
        let d = cols - 1;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != cols {
                return Err(GpError::DimensionMismatch(format!(
                    "row {line} has {} fields, expected {cols}",
                    rec.len()
                )));
            }
            for (k, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    GpError::NonFiniteEntry(format!("row {line}, column {k}: `{field}`"))
                })?;
                if k < d {
                    xs.push(v);
                } else {
                    ys.push(v);
                }
            }
        }
        let n = ys.len();
        let inputs = Array2::from_shape_vec((n, d), xs)
            .map_err(|e| GpError::DimensionMismatch(e.to_string()))?;
        Self::new(inputs, Array1::from(ys))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

/// Validates that every entry is finite and lies in `[0, 1]` up to
/// [`UNIT_CUBE_TOL`].
pub fn check_unit_cube(x: ArrayView2<'_, f64>) -> Result<()> {
    for ((row, col), &value) in x.indexed_iter() {
        if !value.is_finite() {
            return Err(GpError::NonFiniteEntry(format!("input ({row}, {col})")));
        }
        if !(-UNIT_CUBE_TOL..=1.0 + UNIT_CUBE_TOL).contains(&value) {
            return Err(GpError::OutOfUnitCube { row, col, value });
        }
    }
    Ok(())
}

/// Power-exponential correlation parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyperparameters {
    pub theta: Vec<f64>,
    pub p: f64,
    pub nugget: f64,
}

impl Hyperparameters {
    pub fn new(theta: Vec<f64>, p: f64, nugget: f64) -> Result<Self> {
        let h = Self { theta, p, nugget };
        h.validate()?;
        Ok(h)
    }

    /// `theta` with the default smoothness and no nugget.
    pub fn with_theta(theta: Vec<f64>) -> Result<Self> {
        Self::new(theta, DEFAULT_SMOOTHNESS, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(k) = self.theta.iter().position(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(GpError::InvalidHyperparameters(format!(
                "theta[{k}] = {} must be finite and nonnegative",
                self.theta[k]
            )));
        }
        if !(self.p > 0.0 && self.p <= 2.0) {
            return Err(GpError::InvalidHyperparameters(format!(
                "smoothness p = {} must lie in (0, 2]",
                self.p
            )));
        }
        if !(self.nugget.is_finite() && self.nugget >= 0.0) {
            return Err(GpError::InvalidHyperparameters(format!(
                "nugget = {} must be finite and nonnegative",
                self.nugget
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Precision {
    Single,
    Double,
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::Single => "single",
            Precision::Double => "double",
        })
    }
}

impl FromStr for Precision {
    type Err = GpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "single" | "f32" => Ok(Precision::Single),
            "double" | "f64" => Ok(Precision::Double),
            other => Err(GpError::InvalidConfig(format!("unknown precision `{other}`"))),
        }
    }
}

/// Search box for theta. A single pair applies to every input dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaBounds(pub Vec<(f64, f64)>);

impl ThetaBounds {
    pub fn uniform(lower: f64, upper: f64) -> Self {
        Self(vec![(lower, upper)])
    }

    pub fn resolve(&self, d: usize) -> Result<Vec<(f64, f64)>> {
        let bounds = match self.0.len() {
            1 => vec![self.0[0]; d],
            len if len == d => self.0.clone(),
            len => {
                return Err(GpError::DimensionMismatch(format!(
                    "{len} theta bounds for {d} input dimensions"
                )))
            }
        };
        for (k, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return Err(GpError::DegenerateBounds(format!(
                    "theta bounds ({lo}, {hi}) for dimension {k} must satisfy 0 < lower < upper"
                )));
            }
        }
        Ok(bounds)
    }
}

impl Default for ThetaBounds {
    fn default() -> Self {
        Self::uniform(DEFAULT_THETA_LOWER, DEFAULT_THETA_UPPER)
    }
}

/// Everything that determines a fit besides the data.
#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub precision: Precision,
    pub backend: BackendKind,
    pub ga: GaConfig,
    pub theta_bounds: ThetaBounds,
    /// Seeds the optimizer; overrides `ga.seed`.
    pub seed: u64,
    pub p: f64,
    pub nugget: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            precision: Precision::Double,
            backend: BackendKind::Parallel,
            ga: GaConfig::default(),
            theta_bounds: ThetaBounds::default(),
            seed: 0,
            p: DEFAULT_SMOOTHNESS,
            nugget: 0.0,
        }
    }
}

impl FitConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn hyperparameters(&self, theta: Vec<f64>) -> Result<Hyperparameters> {
        Hyperparameters::new(theta, self.p, self.nugget)
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        self.theta_bounds.resolve(d)?;
        self.hyperparameters(vec![0.0; d])?;
        self.ga.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn minimal_dataset() {
        let ds = Dataset::new(array![[0.0], [1.0]], array![0.0, 1.0]).unwrap();
        assert_eq!((ds.n(), ds.d()), (2, 1));
    }

    #[test]
    fn output_length_mismatch() {
        let err = Dataset::new(array![[0.0], [1.0]], array![0.0]).unwrap_err();
        assert!(matches!(err, GpError::DimensionMismatch(_)));
    }

    #[test]
    fn outside_unit_cube() {
        let err = Dataset::new(array![[0.2], [1.5]], array![0.0, 1.0]).unwrap_err();
        assert!(matches!(err, GpError::OutOfUnitCube { row: 1, col: 0, .. }));
        // overshoot within tolerance is accepted
        Dataset::new(array![[-1e-13], [1.0 + 1e-13]], array![0.0, 1.0]).unwrap();
    }

    #[test]
    fn non_finite_entries() {
        let err = Dataset::new(array![[0.2], [f64::NAN]], array![0.0, 1.0]).unwrap_err();
        assert!(matches!(err, GpError::NonFiniteEntry(_)));
        let err = Dataset::new(array![[0.2], [0.3]], array![0.0, f64::INFINITY]).unwrap_err();
        assert!(matches!(err, GpError::NonFiniteEntry(_)));
    }

    #[test]
    fn single_point_rejected() {
        assert!(Dataset::new(array![[0.2]], array![0.0]).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let ds = Dataset::new(
            array![[0.1, 1.0 / 3.0], [0.7, 0.123_456_789_012_345_68]],
            array![std::f64::consts::PI, -1e-300],
        )
        .unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x1,x2,y\n"));
        assert_eq!(Dataset::read_csv(buf.as_slice()).unwrap(), ds);
    }

    #[test]
    fn csv_rejects_bad_header() {
        let text = "a,b,y\n0.1,0.2,3\n0.3,0.4,5\n";
        assert!(Dataset::read_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn hyperparameter_invariants() {
        assert!(Hyperparameters::new(vec![-1.0], 1.95, 0.0).is_err());
        assert!(Hyperparameters::new(vec![1.0], 0.0, 0.0).is_err());
        assert!(Hyperparameters::new(vec![1.0], 2.5, 0.0).is_err());
        assert!(Hyperparameters::new(vec![1.0], 2.0, -1e-3).is_err());
        assert!(Hyperparameters::new(vec![0.0, 12.0], 2.0, 0.0).is_ok());
    }

    #[test]
    fn theta_bounds_resolution() {
        let b = ThetaBounds::default().resolve(3).unwrap();
        assert_eq!(b, vec![(1e-6, 12.0); 3]);
        assert!(ThetaBounds::uniform(0.0, 1.0).resolve(1).is_err());
        assert!(ThetaBounds::uniform(2.0, 1.0).resolve(1).is_err());
        assert!(ThetaBounds(vec![(1.0, 2.0); 2]).resolve(3).is_err());
    }
}
