//! Test problems: maximin Latin hypercube designs on the unit cube and the two
//! benchmark simulators.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GpError, Result};
use crate::types::{Dataset, ThetaBounds};

pub const DEFAULT_EXCHANGE_BUDGET: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DesignSpec {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub exchange_budget: usize,
}

impl DesignSpec {
    pub fn new(n: usize, d: usize, seed: u64) -> Self {
        Self { n, d, seed, exchange_budget: DEFAULT_EXCHANGE_BUDGET }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.d == 0 {
            return Err(GpError::InvalidConfig(format!(
                "design needs n >= 2 and d >= 1, got n = {}, d = {}",
                self.n, self.d
            )));
        }
        Ok(())
    }
}

/// Random Latin hypercube: in every column the `n` values fall one per
/// stratum `[i/n, (i+1)/n)`, jittered uniformly inside the stratum.
pub fn random_lhd<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Array2<f64> {
    let mut out = Array2::zeros((n, d));
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..d {
        perm.shuffle(rng);
        for (i, &s) in perm.iter().enumerate() {
            let u: f64 = rng.gen();
            // stay strictly below the upper stratum edge
            let v = (s as f64 + u) / n as f64;
            out[[i, k]] = v.min(((s + 1) as f64 / n as f64).next_down_safe());
        }
    }
    out
}

trait NextDown {
    fn next_down_safe(self) -> f64;
}

impl NextDown for f64 {
    fn next_down_safe(self) -> f64 {
        if self > 0.0 {
            f64::from_bits(self.to_bits() - 1)
        } else {
            self
        }
    }
}

fn sq_dist(x: ArrayView2<'_, f64>, i: usize, j: usize) -> f64 {
    x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Smallest Euclidean distance between two distinct rows.
pub fn min_pairwise_distance(x: ArrayView2<'_, f64>) -> f64 {
    let n = x.nrows();
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in 0..i {
            best = best.min(sq_dist(x, i, j));
        }
    }
    best.sqrt()
}

/// Squared-distance bookkeeping for the exchange search: the full matrix plus
/// each row's nearest neighbour.
struct DistanceState {
    n: usize,
    dist: Vec<f64>,
    row_min: Vec<f64>,
    row_arg: Vec<usize>,
}

impl DistanceState {
    fn new(x: ArrayView2<'_, f64>) -> Self {
        let n = x.nrows();
        let mut dist = vec![f64::INFINITY; n * n];
        for i in 0..n {
            for j in 0..i {
                let v = sq_dist(x, i, j);
                dist[i * n + j] = v;
                dist[j * n + i] = v;
            }
        }
        let mut s = Self { n, dist, row_min: vec![0.0; n], row_arg: vec![0; n] };
        for r in 0..n {
            s.rescan(r);
        }
        s
    }

    fn rescan(&mut self, r: usize) {
        let row = &self.dist[r * self.n..(r + 1) * self.n];
        let (arg, &min) = row
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("n >= 2");
        self.row_min[r] = min;
        self.row_arg[r] = arg;
    }

    fn global_min(&self) -> (f64, usize) {
        let (r, &v) = self
            .row_min
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("n >= 2");
        (v, r)
    }

    /// Minimum squared distance if rows `i` and `j` took the distances in
    /// `di` and `dj` (self entries set to infinity).
    fn candidate_min(&self, i: usize, j: usize, di: &[f64], dj: &[f64]) -> f64 {
        let mut m = di.iter().chain(dj).copied().fold(f64::INFINITY, f64::min);
        for r in 0..self.n {
            if r == i || r == j {
                continue;
            }
            let v = if self.row_arg[r] == i || self.row_arg[r] == j {
                let row = &self.dist[r * self.n..(r + 1) * self.n];
                row.iter()
                    .enumerate()
                    .filter(|&(c, _)| c != i && c != j)
                    .map(|(_, &v)| v)
                    .fold(f64::INFINITY, f64::min)
            } else {
                self.row_min[r]
            };
            m = m.min(v).min(di[r]).min(dj[r]);
            if m == 0.0 {
                break;
            }
        }
        m
    }

    fn commit(&mut self, i: usize, j: usize, di: &[f64], dj: &[f64]) {
        let n = self.n;
        for c in 0..n {
            self.dist[i * n + c] = di[c];
            self.dist[c * n + i] = di[c];
            self.dist[j * n + c] = dj[c];
            self.dist[c * n + j] = dj[c];
        }
        for r in 0..n {
            if r == i || r == j || self.row_arg[r] == i || self.row_arg[r] == j {
                self.rescan(r);
            } else {
                let (a, b) = (self.dist[r * n + i], self.dist[r * n + j]);
                if a < self.row_min[r] {
                    self.row_min[r] = a;
                    self.row_arg[r] = i;
                }
                if b < self.row_min[r] {
                    self.row_min[r] = b;
                    self.row_arg[r] = j;
                }
            }
        }
    }
}

/// Maximin Latin hypercube by point exchange. Starts from [`random_lhd`] and
/// tries `exchange_budget` swaps of one column entry between a point of the
/// current closest pair and a random other point; a swap is kept only when
/// it strictly increases the minimum pairwise distance. Swaps preserve the
/// stratification of every column.
pub fn maximin_lhd(spec: &DesignSpec) -> Result<Array2<f64>> {
    spec.validate()?;
    let (n, d) = (spec.n, spec.d);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut x = random_lhd(n, d, &mut rng);
    if n == 2 {
        return Ok(x);
    }
    let mut state = DistanceState::new(x.view());
    let mut di = vec![0.0; n];
    let mut dj = vec![0.0; n];
    for _ in 0..spec.exchange_budget {
        let (current, r) = state.global_min();
        let i = if rng.gen::<bool>() { r } else { state.row_arg[r] };
        let mut j = rng.gen_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let k = rng.gen_range(0..d);

        let (a, b) = (x[[i, k]], x[[j, k]]);
        x[[i, k]] = b;
        x[[j, k]] = a;
        for c in 0..n {
            di[c] = if c == i { f64::INFINITY } else { sq_dist(x.view(), i, c) };
            dj[c] = if c == j { f64::INFINITY } else { sq_dist(x.view(), j, c) };
        }
        if state.candidate_min(i, j, &di, &dj) > current {
            state.commit(i, j, &di, &dj);
        } else {
            x[[i, k]] = a;
            x[[j, k]] = b;
        }
    }
    Ok(x)
}

/// Goldstein-Price on `[-2, 2]^2`, evaluated from unit-square coordinates,
/// returned on the log scale.
pub fn goldstein_price_log(x: &[f64]) -> f64 {
    let u = 4.0 * x[0] - 2.0;
    let v = 4.0 * x[1] - 2.0;
    let a = 1.0
        + (u + v + 1.0).powi(2)
            * (19.0 - 14.0 * u + 3.0 * u * u - 14.0 * v + 6.0 * u * v + 3.0 * v * v);
    let b = 30.0
        + (2.0 * u - 3.0 * v).powi(2)
            * (18.0 - 32.0 * u + 12.0 * u * u + 48.0 * v - 36.0 * u * v + 27.0 * v * v);
    (a * b).ln()
}

const HARTMAN_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const HARTMAN_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const HARTMAN_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

/// Six-dimensional Hartman function on its natural domain `[0, 1]^6`.
pub fn hartman6(x: &[f64]) -> f64 {
    -(0..4)
        .map(|i| {
            let s: f64 = (0..6)
                .map(|j| HARTMAN_A[i][j] * (x[j] - HARTMAN_P[i][j]).powi(2))
                .sum();
            HARTMAN_ALPHA[i] * (-s).exp()
        })
        .sum::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TestFunction {
    GoldsteinPriceLog,
    Hartman6,
}

impl TestFunction {
    pub fn dim(self) -> usize {
        match self {
            TestFunction::GoldsteinPriceLog => 2,
            TestFunction::Hartman6 => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TestFunction::GoldsteinPriceLog => "goldstein_price_log",
            TestFunction::Hartman6 => "hartman6",
        }
    }

    /// Side length of the natural domain mapped onto each unit-cube axis.
    pub fn domain_width(self) -> f64 {
        match self {
            TestFunction::GoldsteinPriceLog => 4.0,
            TestFunction::Hartman6 => 1.0,
        }
    }

    /// Unit-cube bounds equivalent to searching `theta` in `[lower, upper]`
    /// on the natural domain: distances shrink by the domain width, so the
    /// decay scales by `width^p`.
    pub fn theta_bounds(self, lower: f64, upper: f64, p: f64) -> ThetaBounds {
        let s = self.domain_width().powf(p);
        ThetaBounds::uniform(lower * s, upper * s)
    }

    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            TestFunction::GoldsteinPriceLog => goldstein_price_log(x),
            TestFunction::Hartman6 => hartman6(x),
        }
    }

    pub fn eval_rows(self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        x.rows().into_iter().map(|r| self.eval(&r.to_vec())).collect()
    }

    /// Maximin design of `spec` with simulator outputs attached.
    pub fn dataset(self, spec: &DesignSpec) -> Result<Dataset> {
        if spec.d != self.dim() {
            return Err(GpError::DimensionMismatch(format!(
                "{} takes {} inputs, design has {}",
                self.name(),
                self.dim(),
                spec.d
            )));
        }
        let x = maximin_lhd(spec)?;
        let y = self.eval_rows(x.view());
        Dataset::new(x, y)
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestFunction {
    type Err = GpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "goldstein_price_log" | "goldstein_price" | "goldprice" => {
                Ok(TestFunction::GoldsteinPriceLog)
            }
            "hartman6" | "hartman" => Ok(TestFunction::Hartman6),
            other => Err(GpError::InvalidConfig(format!("unknown test function `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stratified(x: ArrayView2<'_, f64>) -> bool {
        let n = x.nrows();
        x.columns().into_iter().all(|col| {
            let mut seen = vec![false; n];
            for &v in col {
                let s = (v * n as f64).floor() as usize;
                if s >= n || seen[s] || v < s as f64 / n as f64 || v >= (s + 1) as f64 / n as f64 {
                    return false;
                }
                seen[s] = true;
            }
            true
        })
    }

    #[test]
    fn theta_bounds_follow_domain_width() {
        let b = TestFunction::GoldsteinPriceLog.theta_bounds(1e-6, 12.0, 2.0);
        assert_eq!(b.0, vec![(16e-6, 192.0)]);
        let b = TestFunction::Hartman6.theta_bounds(1e-6, 12.0, 1.95);
        assert_eq!(b.0, vec![(1e-6, 12.0)]);
    }

    #[test]
    fn two_points_one_per_half() {
        let x = maximin_lhd(&DesignSpec::new(2, 1, 3)).unwrap();
        let mut v = [x[[0, 0]], x[[1, 0]]];
        v.sort_by(f64::total_cmp);
        assert!(v[0] < 0.5 && v[1] >= 0.5);
    }

    #[test]
    fn exchange_never_loses_to_random_start() {
        for seed in 0..5 {
            let spec = DesignSpec { n: 16, d: 2, seed, exchange_budget: 10_000 };
            let start = random_lhd(16, 2, &mut ChaCha8Rng::seed_from_u64(seed));
            let opt = maximin_lhd(&spec).unwrap();
            assert!(min_pairwise_distance(opt.view()) >= min_pairwise_distance(start.view()));
            assert!(stratified(opt.view()));
        }
    }

    #[test]
    fn deterministic_design() {
        let spec = DesignSpec::new(30, 3, 77);
        assert_eq!(maximin_lhd(&spec).unwrap(), maximin_lhd(&spec).unwrap());
    }

    #[test]
    fn rejects_degenerate_spec() {
        assert!(maximin_lhd(&DesignSpec::new(1, 2, 0)).is_err());
        assert!(maximin_lhd(&DesignSpec::new(4, 0, 0)).is_err());
    }

    #[test]
    fn goldstein_price_known_values() {
        assert!((goldstein_price_log(&[0.5, 0.25]) - 1.0986122886681098).abs() < 1e-12);
        assert!((goldstein_price_log(&[0.5, 0.5]) - 6.396929655216146).abs() < 1e-12);
        let a = goldstein_price_log(&[0.31, 0.77]);
        let b = goldstein_price_log(&[0.31 + 1e-9, 0.77]);
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn hartman_known_values() {
        let xs = [0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573];
        assert!((hartman6(&xs) - (-3.322368011391339)).abs() < 1e-9);
        let mut rev = xs;
        rev.reverse();
        assert!((hartman6(&rev) - (-0.18202261913638873)).abs() < 1e-12);
        assert!((hartman6(&[0.5; 6]) - (-0.5053149917022333)).abs() < 1e-12);
        assert!((hartman6(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]) - (-1.4069105761385297)).abs() < 1e-12);
    }

    #[test]
    fn hartman_range_on_grid() {
        // 4^6 grid plus the corners
        let levels = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for idx in 0..4usize.pow(6) {
            let x: Vec<f64> = (0..6).map(|j| levels[(idx / 4usize.pow(j as u32)) % 4]).collect();
            let v = hartman6(&x);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        assert!(lo > -3.33 && hi < 0.0);
    }

    #[test]
    fn function_names_parse() {
        for f in [TestFunction::GoldsteinPriceLog, TestFunction::Hartman6] {
            assert_eq!(f.name().parse::<TestFunction>().unwrap(), f);
        }
        assert!("rosenbrock".parse::<TestFunction>().is_err());
        assert!(TestFunction::Hartman6.dataset(&DesignSpec::new(8, 2, 0)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn every_design_is_stratified(n in 2usize..40, d in 1usize..6, seed in any::<u64>(), budget in 0usize..400) {
            let x = maximin_lhd(&DesignSpec { n, d, seed, exchange_budget: budget }).unwrap();
            prop_assert!(stratified(x.view()));
        }

        #[test]
        fn more_exchanges_never_hurt(n in 3usize..30, d in 1usize..4, seed in any::<u64>(), budget in 0usize..300) {
            let short = maximin_lhd(&DesignSpec { n, d, seed, exchange_budget: budget }).unwrap();
            let long = maximin_lhd(&DesignSpec { n, d, seed, exchange_budget: budget + 200 }).unwrap();
            prop_assert!(min_pairwise_distance(long.view()) >= min_pairwise_distance(short.view()));
        }

        #[test]
        fn hartman_range_random(x in proptest::collection::vec(0.0f64..=1.0, 6)) {
            let v = hartman6(&x);
            prop_assert!(v > -3.33 && v < 0.0);
        }
    }
}
