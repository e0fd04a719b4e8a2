//! Benchmark sweep: for each design size and replication, fit every
//! configured backend on identical data, predict on a shared test set, time
//! fit plus prediction and record one row.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;

use crate::backend::{Backend, BackendKind};
use crate::error::{GpError, Result};
use crate::experiment::{maximin_lhd, DesignSpec, TestFunction, DEFAULT_EXCHANGE_BUDGET};
use crate::likelihood::{fit_gp, refine_fit};
use crate::optimizer::{stream_seed, GaConfig};
use crate::predictor::{predict, sspe};
use crate::types::{
    FitConfig, Precision, DEFAULT_SMOOTHNESS, DEFAULT_THETA_LOWER, DEFAULT_THETA_UPPER,
};

pub const CSV_HEADER: [&str; 12] = [
    "function",
    "backend",
    "precision",
    "n",
    "replication",
    "wall_time_seconds",
    "neg2_log_lik",
    "mu_hat",
    "sigma2_hat",
    "sspe",
    "jitter_max",
    "eval_count",
];

/// Largest size accepted without `allow_large`.
pub const DESK_SIZE_CAP: usize = 1024;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub function: TestFunction,
    pub sizes: Vec<usize>,
    pub replications: usize,
    pub backends: Vec<BackendKind>,
    pub precision: Precision,
    pub seed: u64,
    pub output_path: PathBuf,
    pub population: usize,
    pub generations: usize,
    pub test_points: usize,
    pub exchange_budget: usize,
    pub p: f64,
    /// Decay bounds on the function's natural domain; rescaled to the unit
    /// cube by [`TestFunction::theta_bounds`].
    pub theta_lower: f64,
    pub theta_upper: f64,
    /// Double-precision golden-section polish after the GA.
    pub refine: bool,
    /// Permit sizes above [`DESK_SIZE_CAP`].
    pub allow_large: bool,
    /// Run replications concurrently; wall times are then not comparable.
    pub concurrent: bool,
}

impl BenchConfig {
    pub fn new(function: TestFunction, sizes: Vec<usize>, output_path: impl Into<PathBuf>) -> Self {
        let ga = GaConfig::default();
        Self {
            function,
            sizes,
            replications: 10,
            backends: vec![BackendKind::Parallel],
            precision: Precision::Double,
            seed: 0,
            output_path: output_path.into(),
            population: ga.population,
            generations: ga.generations,
            test_points: 1000,
            exchange_budget: DEFAULT_EXCHANGE_BUDGET,
            p: DEFAULT_SMOOTHNESS,
            theta_lower: DEFAULT_THETA_LOWER,
            theta_upper: DEFAULT_THETA_UPPER,
            refine: false,
            allow_large: false,
            concurrent: false,
        }
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| {
                    GpError::InvalidConfig(format!("line {}: expected key = value", lineno + 1))
                })?;
            kv.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
        }
        fn take<T: std::str::FromStr>(kv: &mut BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
            kv.remove(key)
                .map(|v| {
                    v.parse::<T>()
                        .map_err(|_| GpError::InvalidConfig(format!("bad value `{v}` for `{key}`")))
                })
                .transpose()
        }
        fn list<T: std::str::FromStr>(v: &str, key: &str) -> Result<Vec<T>> {
            v.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<T>()
                        .map_err(|_| GpError::InvalidConfig(format!("bad entry `{s}` in `{key}`")))
                })
                .collect()
        }

        let function: TestFunction = kv
            .remove("function")
            .ok_or_else(|| GpError::InvalidConfig("missing `function`".into()))?
            .parse()?;
        let sizes = list::<usize>(
            &kv.remove("sizes").ok_or_else(|| GpError::InvalidConfig("missing `sizes`".into()))?,
            "sizes",
        )?;
        let output = kv
            .remove("output_path")
            .or_else(|| kv.remove("output"))
            .ok_or_else(|| GpError::InvalidConfig("missing `output_path`".into()))?;
        let mut cfg = Self::new(function, sizes, output);
        if let Some(v) = kv.remove("backends").or_else(|| kv.remove("backend")) {
            cfg.backends = v
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(str::parse)
                .collect::<Result<_>>()?;
        }
        if let Some(v) = kv.remove("precision") {
            cfg.precision = v.parse()?;
        }
        cfg.replications = take(&mut kv, "replications")?.unwrap_or(cfg.replications);
        cfg.seed = take(&mut kv, "seed")?.unwrap_or(cfg.seed);
        cfg.population = take(&mut kv, "population")?.unwrap_or(cfg.population);
        cfg.generations = take(&mut kv, "generations")?.unwrap_or(cfg.generations);
        cfg.test_points = take(&mut kv, "test_points")?.unwrap_or(cfg.test_points);
        cfg.exchange_budget = take(&mut kv, "exchange_budget")?.unwrap_or(cfg.exchange_budget);
        cfg.p = take(&mut kv, "p")?.unwrap_or(cfg.p);
        cfg.theta_lower = take(&mut kv, "theta_lower")?.unwrap_or(cfg.theta_lower);
        cfg.theta_upper = take(&mut kv, "theta_upper")?.unwrap_or(cfg.theta_upper);
        cfg.refine = take(&mut kv, "refine")?.unwrap_or(cfg.refine);
        cfg.allow_large = take(&mut kv, "allow_large")?.unwrap_or(cfg.allow_large);
        cfg.concurrent = take(&mut kv, "concurrent")?.unwrap_or(cfg.concurrent);
        if let Some(k) = kv.keys().next() {
            return Err(GpError::InvalidConfig(format!("unknown key `{k}`")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.function.dim();
        if self.sizes.is_empty() {
            return Err(GpError::InvalidConfig("`sizes` is empty".into()));
        }
        if let Some(&n) = self.sizes.iter().find(|&&n| n < d + 2) {
            return Err(GpError::InvalidConfig(format!(
                "size {n} is below d + 2 = {} for {}",
                d + 2,
                self.function
            )));
        }
        if !self.allow_large {
            if let Some(&n) = self.sizes.iter().find(|&&n| n > DESK_SIZE_CAP) {
                return Err(GpError::InvalidConfig(format!(
                    "size {n} exceeds {DESK_SIZE_CAP}; set allow_large = true to run it"
                )));
            }
        }
        if self.replications == 0 {
            return Err(GpError::InvalidConfig("`replications` must be positive".into()));
        }
        if self.backends.is_empty() {
            return Err(GpError::InvalidConfig("`backends` is empty".into()));
        }
        if self.test_points < 1 {
            return Err(GpError::InvalidConfig("`test_points` must be positive".into()));
        }
        for &kind in &self.backends {
            Backend::new(kind, self.precision)?;
        }
        self.fit_config(BackendKind::Reference, 0).validate(d)
    }

    pub fn ga_budget(&self) -> usize {
        self.population * self.generations
    }

    pub fn fit_config(&self, backend: BackendKind, seed: u64) -> FitConfig {
        FitConfig {
            precision: self.precision,
            backend,
            ga: GaConfig {
                population: self.population,
                generations: self.generations,
                ..GaConfig::default()
            },
            theta_bounds: self.function.theta_bounds(self.theta_lower, self.theta_upper, self.p),
            seed,
            p: self.p,
            ..FitConfig::default()
        }
    }
}

/// Seed of the training design for `(n, replication)`.
pub fn design_seed(base: u64, n: usize, replication: usize) -> u64 {
    stream_seed(base, n as u64, replication as u64)
}

/// Seed of the test set for `(function, replication)`; independent of `n`.
pub fn test_seed(base: u64, function: TestFunction, replication: usize) -> u64 {
    let tag = match function {
        TestFunction::GoldsteinPriceLog => 0x6750,
        TestFunction::Hartman6 => 0x4836,
    };
    stream_seed(base ^ 0x07E5_75E7, tag, replication as u64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReportRow {
    pub function: TestFunction,
    pub backend: BackendKind,
    pub precision: Precision,
    pub n: usize,
    pub replication: usize,
    pub wall_time_seconds: f64,
    pub neg2_log_lik: f64,
    pub mu_hat: f64,
    pub sigma2_hat: f64,
    pub sspe: f64,
    pub jitter_max: f64,
    pub eval_count: usize,
}

impl BenchReportRow {
    pub fn failed(&self) -> bool {
        self.neg2_log_lik.is_nan()
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.function.to_string(),
            self.backend.to_string(),
            self.precision.to_string(),
            self.n.to_string(),
            self.replication.to_string(),
            self.wall_time_seconds.to_string(),
            self.neg2_log_lik.to_string(),
            self.mu_hat.to_string(),
            self.sigma2_hat.to_string(),
            self.sspe.to_string(),
            self.jitter_max.to_string(),
            self.eval_count.to_string(),
        ]
    }

    fn from_record(rec: &csv::StringRecord) -> Result<Self> {
        if rec.len() != CSV_HEADER.len() {
            return Err(GpError::InvalidConfig(format!(
                "report row has {} fields, expected {}",
                rec.len(),
                CSV_HEADER.len()
            )));
        }
        let f = |i: usize| -> Result<f64> {
            rec[i].trim().parse().map_err(|_| {
                GpError::InvalidConfig(format!("bad number `{}` in column {}", &rec[i], CSV_HEADER[i]))
            })
        };
        let u = |i: usize| -> Result<usize> {
            rec[i].trim().parse().map_err(|_| {
                GpError::InvalidConfig(format!("bad integer `{}` in column {}", &rec[i], CSV_HEADER[i]))
            })
        };
        Ok(Self {
            function: rec[0].parse()?,
            backend: rec[1].parse()?,
            precision: rec[2].parse()?,
            n: u(3)?,
            replication: u(4)?,
            wall_time_seconds: f(5)?,
            neg2_log_lik: f(6)?,
            mu_hat: f(7)?,
            sigma2_hat: f(8)?,
            sspe: f(9)?,
            jitter_max: f(10)?,
            eval_count: u(11)?,
        })
    }
}

pub fn write_rows<W: Write>(writer: W, rows: &[BenchReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(reader: R) -> Result<Vec<BenchReportRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    if header.iter().map(str::trim).ne(CSV_HEADER.iter().copied()) {
        return Err(GpError::InvalidConfig("unexpected report header".into()));
    }
    r.records().map(|rec| BenchReportRow::from_record(&rec?)).collect()
}

pub fn load_rows(path: impl AsRef<Path>) -> Result<Vec<BenchReportRow>> {
    read_rows(std::io::BufReader::new(File::open(path)?))
}

struct TestSet {
    x: Array2<f64>,
    y: Vec<f64>,
}

fn test_set(cfg: &BenchConfig, replication: usize) -> Result<TestSet> {
    let spec = DesignSpec {
        n: cfg.test_points.max(2),
        d: cfg.function.dim(),
        seed: test_seed(cfg.seed, cfg.function, replication),
        exchange_budget: cfg.exchange_budget,
    };
    let mut x = maximin_lhd(&spec)?;
    if cfg.test_points == 1 {
        x = x.slice(ndarray::s![0..1, ..]).to_owned();
    }
    let y = cfg.function.eval_rows(x.view()).to_vec();
    Ok(TestSet { x, y })
}

fn run_cell(
    cfg: &BenchConfig,
    n: usize,
    replication: usize,
    tests: &TestSet,
) -> Result<Vec<BenchReportRow>> {
    let seed = design_seed(cfg.seed, n, replication);
    let spec = DesignSpec {
        n,
        d: cfg.function.dim(),
        seed,
        exchange_budget: cfg.exchange_budget,
    };
    let dataset = cfg.function.dataset(&spec)?;
    let mut rows = Vec::with_capacity(cfg.backends.len());
    for &kind in &cfg.backends {
        let backend = Backend::new(kind, cfg.precision)?;
        let fit_cfg = cfg.fit_config(kind, seed);
        let start = Instant::now();
        let outcome = (|| -> Result<(f64, crate::likelihood::GpModel)> {
            let mut model = fit_gp(&dataset, &fit_cfg, &backend)?;
            if cfg.refine {
                let double = Backend::new(kind, Precision::Double)?;
                model = refine_fit(&model, &fit_cfg, &double)?;
            }
            let pred = predict(&model, tests.x.view())?;
            Ok((sspe(&pred, &tests.y)?, model))
        })();
        let wall = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
        let row = match outcome {
            Ok((err, model)) => BenchReportRow {
                function: cfg.function,
                backend: kind,
                precision: cfg.precision,
                n,
                replication,
                wall_time_seconds: wall,
                neg2_log_lik: model.neg2_log_lik(),
                mu_hat: model.mu_hat(),
                sigma2_hat: model.sigma2_hat(),
                sspe: err,
                jitter_max: model.jitter_used(),
                eval_count: model.evaluations(),
            },
            Err(e) => {
                log::warn!("{} n={n} rep={replication} backend={kind}: fit failed: {e}", cfg.function);
                BenchReportRow {
                    function: cfg.function,
                    backend: kind,
                    precision: cfg.precision,
                    n,
                    replication,
                    wall_time_seconds: wall,
                    neg2_log_lik: f64::NAN,
                    mu_hat: f64::NAN,
                    sigma2_hat: f64::NAN,
                    sspe: f64::NAN,
                    jitter_max: f64::NAN,
                    eval_count: 0,
                }
            }
        };
        log::info!(
            "{} {} n={} rep={} time={:.3}s -2logL={:.4} sspe={:.4}",
            row.function,
            row.backend,
            row.n,
            row.replication,
            row.wall_time_seconds,
            row.neg2_log_lik,
            row.sspe
        );
        rows.push(row);
    }
    Ok(rows)
}

/// Runs the sweep, appending each row to `cfg.output_path` as soon as it is
/// measured. Rows are returned in `(n, replication, backend)` order.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchReportRow>> {
    cfg.validate()?;
    if let Some(parent) = cfg.output_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(&cfg.output_path)?));
    writer.write_record(CSV_HEADER)?;
    writer.flush()?;
    let writer = Mutex::new(writer);
    let emit = |rows: &[BenchReportRow]| -> Result<()> {
        let mut w = writer.lock().expect("writer lock");
        for row in rows {
            w.write_record(row.record())?;
        }
        w.flush()?;
        Ok(())
    };

    let tests: Vec<TestSet> =
        (0..cfg.replications).map(|r| test_set(cfg, r)).collect::<Result<_>>()?;
    let cells: Vec<(usize, usize)> = cfg
        .sizes
        .iter()
        .flat_map(|&n| (0..cfg.replications).map(move |r| (n, r)))
        .collect();

    let mut rows: Vec<BenchReportRow> = if cfg.concurrent {
        let per_cell: Vec<Vec<BenchReportRow>> = cells
            .par_iter()
            .map(|&(n, r)| {
                let rows = run_cell(cfg, n, r, &tests[r])?;
                emit(&rows)?;
                Ok(rows)
            })
            .collect::<Result<_>>()?;
        per_cell.into_iter().flatten().collect()
    } else {
        let mut all = Vec::new();
        for &(n, r) in &cells {
            let rows = run_cell(cfg, n, r, &tests[r])?;
            emit(&rows)?;
            all.extend(rows);
        }
        all
    };
    let order: HashMap<usize, usize> = cfg.sizes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    rows.sort_by_key(|r| (order[&r.n], r.replication, r.backend));
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub function: TestFunction,
    pub backend: BackendKind,
    pub precision: Precision,
    pub n: usize,
    pub replications: usize,
    pub failures: usize,
    pub wall_time_seconds: f64,
    pub neg2_log_lik: f64,
    pub mu_hat: f64,
    pub sigma2_hat: f64,
    pub sspe: f64,
    pub jitter_max: f64,
    pub eval_count: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, c) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if c == 0 {
        f64::NAN
    } else {
        s / c as f64
    }
}

/// Per `(function, backend, precision, n)` means over successful rows.
pub fn summarize(rows: &[BenchReportRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(TestFunction, BackendKind, Precision, usize), Vec<&BenchReportRow>> =
        BTreeMap::new();
    for r in rows {
        groups.entry((r.function, r.backend, r.precision, r.n)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((function, backend, precision, n), group)| {
            let ok: Vec<&&BenchReportRow> = group.iter().filter(|r| !r.failed()).collect();
            SummaryRow {
                function,
                backend,
                precision,
                n,
                replications: group.len(),
                failures: group.len() - ok.len(),
                wall_time_seconds: mean(ok.iter().map(|r| r.wall_time_seconds)),
                neg2_log_lik: mean(ok.iter().map(|r| r.neg2_log_lik)),
                mu_hat: mean(ok.iter().map(|r| r.mu_hat)),
                sigma2_hat: mean(ok.iter().map(|r| r.sigma2_hat)),
                sspe: mean(ok.iter().map(|r| r.sspe)),
                jitter_max: mean(ok.iter().map(|r| r.jitter_max)),
                eval_count: mean(ok.iter().map(|r| r.eval_count as f64)),
            }
        })
        .collect()
}

pub const SUMMARY_HEADER: [&str; 13] = [
    "function",
    "backend",
    "precision",
    "n",
    "replications",
    "failures",
    "wall_time_seconds",
    "neg2_log_lik",
    "mu_hat",
    "sigma2_hat",
    "sspe",
    "jitter_max",
    "eval_count",
];

pub fn write_summary_csv<W: Write>(writer: W, summary: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SUMMARY_HEADER)?;
    for s in summary {
        w.write_record([
            s.function.to_string(),
            s.backend.to_string(),
            s.precision.to_string(),
            s.n.to_string(),
            s.replications.to_string(),
            s.failures.to_string(),
            s.wall_time_seconds.to_string(),
            s.neg2_log_lik.to_string(),
            s.mu_hat.to_string(),
            s.sigma2_hat.to_string(),
            s.sspe.to_string(),
            s.jitter_max.to_string(),
            s.eval_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Aligned text tables, one block per `(function, backend, precision)`,
/// with the columns `n | Time(sec) | -2logL | mu_hat | sigma2_hat | SSPE`.
pub fn format_summary(summary: &[SummaryRow]) -> String {
    let mut out = String::new();
    let mut current = None;
    for s in summary {
        let key = (s.function, s.backend, s.precision);
        if current != Some(key) {
            if current.is_some() {
                out.push('\n');
            }
            current = Some(key);
            let _ = writeln!(out, "{} / {} backend / {} precision", s.function, s.backend, s.precision);
            let _ = writeln!(
                out,
                "{:>6} {:>12} {:>12} {:>10} {:>12} {:>12} {:>5}",
                "n", "Time(sec)", "-2logL", "mu_hat", "sigma2_hat", "SSPE", "reps"
            );
        }
        let _ = writeln!(
            out,
            "{:>6} {:>12.3} {:>12.2} {:>10.4} {:>12.4} {:>12.4} {:>5}",
            s.n, s.wall_time_seconds, s.neg2_log_lik, s.mu_hat, s.sigma2_hat, s.sspe, s.replications
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpeedupRow {
    pub function: TestFunction,
    pub precision: Precision,
    pub n: usize,
    pub numerator: BackendKind,
    pub denominator: BackendKind,
    pub pairs: usize,
    pub numerator_seconds: f64,
    pub denominator_seconds: f64,
    pub ratio: f64,
}

/// Mean wall time of `numerator` over mean wall time of each other backend
/// (or only `denominator` when given), on replications present for both.
pub fn speedup_report(
    rows: &[BenchReportRow],
    numerator: BackendKind,
    denominator: Option<BackendKind>,
) -> Vec<SpeedupRow> {
    type Cell = (TestFunction, Precision, usize);
    let mut times: BTreeMap<Cell, BTreeMap<BackendKind, BTreeMap<usize, f64>>> = BTreeMap::new();
    for r in rows.iter().filter(|r| !r.failed()) {
        times
            .entry((r.function, r.precision, r.n))
            .or_default()
            .entry(r.backend)
            .or_default()
            .insert(r.replication, r.wall_time_seconds);
    }
    let mut out = Vec::new();
    for ((function, precision, n), by_backend) in &times {
        let Some(num) = by_backend.get(&numerator) else {
            log::warn!("{function} n={n}: no {numerator} rows, cell skipped");
            continue;
        };
        let others: Vec<BackendKind> = match denominator {
            Some(d) => vec![d],
            None => {
                let v: Vec<BackendKind> =
                    by_backend.keys().copied().filter(|&k| k != numerator).collect();
                if v.is_empty() {
                    vec![numerator]
                } else {
                    v
                }
            }
        };
        for den_kind in others {
            let Some(den) = by_backend.get(&den_kind) else {
                log::warn!("{function} n={n}: no {den_kind} rows, cell skipped");
                continue;
            };
            let paired: Vec<usize> = num.keys().filter(|r| den.contains_key(r)).copied().collect();
            if paired.is_empty() {
                log::warn!("{function} n={n}: no replication shared by {numerator} and {den_kind}");
                continue;
            }
            let tn = mean(paired.iter().map(|r| num[r]));
            let td = mean(paired.iter().map(|r| den[r]));
            out.push(SpeedupRow {
                function: *function,
                precision: *precision,
                n: *n,
                numerator,
                denominator: den_kind,
                pairs: paired.len(),
                numerator_seconds: tn,
                denominator_seconds: td,
                ratio: tn / td,
            });
        }
    }
    out
}

pub fn format_speedup(rows: &[SpeedupRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<20} {:>9} {:>6} {:>22} {:>6} {:>12} {:>12} {:>8}",
        "function", "precision", "n", "numerator/denominator", "pairs", "num(sec)", "den(sec)", "ratio"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<20} {:>9} {:>6} {:>22} {:>6} {:>12.3} {:>12.3} {:>8.3}",
            r.function.to_string(),
            r.precision.to_string(),
            r.n,
            format!("{}/{}", r.numerator, r.denominator),
            r.pairs,
            r.numerator_seconds,
            r.denominator_seconds,
            r.ratio
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(backend: BackendKind, n: usize, rep: usize, time: f64) -> BenchReportRow {
        BenchReportRow {
            function: TestFunction::GoldsteinPriceLog,
            backend,
            precision: Precision::Double,
            n,
            replication: rep,
            wall_time_seconds: time,
            neg2_log_lik: 10.0,
            mu_hat: 1.0,
            sigma2_hat: 2.0,
            sspe: 3.0,
            jitter_max: 0.0,
            eval_count: 2000,
        }
    }

    #[test]
    fn parse_config() {
        let text = "\
# sweep
function = goldstein_price_log
sizes = 16, 32,64
replications = 2
backends = reference, parallel
precision = double
seed = 11
output_path = out/rows.csv
refine = false
";
        let cfg = BenchConfig::parse(text).unwrap();
        assert_eq!(cfg.sizes, vec![16, 32, 64]);
        assert_eq!(cfg.backends, vec![BackendKind::Reference, BackendKind::Parallel]);
        assert_eq!(cfg.replications, 2);
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.ga_budget(), 2000);
        assert_eq!(cfg.output_path, PathBuf::from("out/rows.csv"));
    }

    #[test]
    fn config_errors() {
        let base = "function = hartman6\noutput_path = x.csv\n";
        assert!(BenchConfig::parse(&format!("{base}sizes = 7\n")).is_err());
        assert!(BenchConfig::parse(&format!("{base}sizes = 4064\n")).is_err());
        assert!(BenchConfig::parse(&format!("{base}sizes = 4064\nallow_large = true\n")).is_ok());
        assert!(BenchConfig::parse(&format!("{base}sizes =\n")).is_err());
        assert!(BenchConfig::parse(&format!("{base}sizes = 64\nbogus = 1\n")).is_err());
        assert!(BenchConfig::parse(&format!("{base}sizes = 64\nbackends = gpu\n")).is_err());
        assert!(BenchConfig::parse(&format!("{base}sizes = 64\nbackends = accelerated\n")).is_err());
        assert!(BenchConfig::parse("sizes = 64\noutput_path = x.csv\n").is_err());
        assert!(BenchConfig::parse(&format!("{base}sizes = 64\nreplications = 0\n")).is_err());
    }

    #[test]
    fn summary_of_one_row_is_the_row() {
        let s = summarize(&[row(BackendKind::Parallel, 16, 0, 1.5)]);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].wall_time_seconds, 1.5);
        assert_eq!(s[0].sspe, 3.0);
        assert_eq!(s[0].eval_count, 2000.0);
    }

    #[test]
    fn summary_means() {
        let s = summarize(&[row(BackendKind::Parallel, 16, 0, 1.0), row(BackendKind::Parallel, 16, 1, 3.0)]);
        assert_eq!(s[0].wall_time_seconds, 2.0);
        assert_eq!(s[0].replications, 2);
        let text = format_summary(&s);
        assert!(text.contains("Time(sec)") && text.contains("SSPE"));
    }

    #[test]
    fn failed_rows_excluded_from_means() {
        let mut bad = row(BackendKind::Parallel, 16, 1, 9.0);
        bad.neg2_log_lik = f64::NAN;
        let s = summarize(&[row(BackendKind::Parallel, 16, 0, 1.0), bad]);
        assert_eq!(s[0].failures, 1);
        assert_eq!(s[0].wall_time_seconds, 1.0);
    }

    #[test]
    fn speedup_against_itself_is_one() {
        let rows = vec![row(BackendKind::Reference, 16, 0, 2.0), row(BackendKind::Reference, 32, 0, 5.0)];
        let sp = speedup_report(&rows, BackendKind::Reference, Some(BackendKind::Reference));
        assert_eq!(sp.len(), 2);
        assert!(sp.iter().all(|r| r.ratio == 1.0));
    }

    #[test]
    fn speedup_pairs_replications() {
        let rows = vec![
            row(BackendKind::Reference, 64, 0, 4.0),
            row(BackendKind::Reference, 64, 1, 8.0),
            row(BackendKind::Parallel, 64, 0, 2.0),
            row(BackendKind::Reference, 128, 0, 4.0),
        ];
        let sp = speedup_report(&rows, BackendKind::Reference, None);
        // n = 128 has no parallel rows: it falls back to a self comparison
        let cell64 = sp.iter().find(|r| r.n == 64).unwrap();
        assert_eq!(cell64.pairs, 1);
        assert_eq!(cell64.ratio, 2.0);
        let sp = speedup_report(&rows, BackendKind::Reference, Some(BackendKind::Parallel));
        assert_eq!(sp.len(), 1);
    }

    #[test]
    fn rows_round_trip_through_csv() {
        let mut r = row(BackendKind::Parallel, 16, 0, 0.123456789);
        r.neg2_log_lik = -1.0 / 3.0;
        let mut buf = Vec::new();
        write_rows(&mut buf, &[r.clone()]).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with(&CSV_HEADER.join(",")));
        assert_eq!(read_rows(buf.as_slice()).unwrap(), vec![r]);
    }

    #[test]
    fn seeds_differ_across_cells() {
        assert_ne!(design_seed(0, 16, 0), design_seed(0, 16, 1));
        assert_ne!(design_seed(0, 16, 0), design_seed(0, 32, 0));
        assert_ne!(
            test_seed(0, TestFunction::GoldsteinPriceLog, 0),
            test_seed(0, TestFunction::Hartman6, 0)
        );
    }
}
