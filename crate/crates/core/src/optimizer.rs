//! Real-coded genetic algorithm over a bounded box with an exact evaluation
//! budget of `population * generations` (the initial population included).
//!
//! Every offspring slot draws from its own RNG stream derived from
//! `(seed, generation, slot)`, so building and evaluating a generation in
//! parallel yields the same populations as a sequential run.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{GpError, Result};
use crate::experiment::random_lhd;

#[derive(Clone, Debug, PartialEq)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Standard deviation of the additive Gaussian mutation, in search-space
    /// units (log10 theta when fitting).
    pub mutation_sigma: f64,
    pub elitism: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 100,
            generations: 20,
            crossover_rate: 0.9,
            mutation_sigma: 0.15,
            elitism: 1,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn budget(&self) -> usize {
        self.population * self.generations
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget() == 0 {
            return Err(GpError::BudgetZero);
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(GpError::InvalidConfig(format!(
                "crossover rate {} outside [0, 1]",
                self.crossover_rate
            )));
        }
        if !(self.mutation_sigma > 0.0 && self.mutation_sigma.is_finite()) {
            return Err(GpError::InvalidConfig(format!(
                "mutation sigma {} must be positive",
                self.mutation_sigma
            )));
        }
        if self.elitism > self.population {
            return Err(GpError::InvalidConfig(format!(
                "elitism {} exceeds population {}",
                self.elitism, self.population
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_value: f64,
    pub best_point: Vec<f64>,
    /// Cumulative objective evaluations after this generation.
    pub evaluations: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GaTrace {
    pub generations: Vec<GenerationRecord>,
}

impl GaTrace {
    pub fn evaluations(&self) -> usize {
        self.generations.last().map_or(0, |g| g.evaluations)
    }

    pub fn best_values(&self) -> Vec<f64> {
        self.generations.iter().map(|g| g.best_value).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaOutcome {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub trace: GaTrace,
}

fn check_bounds(bounds: &[(f64, f64)]) -> Result<()> {
    if bounds.is_empty() {
        return Err(GpError::DegenerateBounds("empty search box".into()));
    }
    for (k, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(GpError::DegenerateBounds(format!(
                "dimension {k}: [{lo}, {hi}]"
            )));
        }
    }
    Ok(())
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the RNG stream owned by one offspring slot.
pub fn stream_seed(seed: u64, generation: u64, slot: u64) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ generation) ^ slot.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

#[inline]
fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn evaluate<F>(objective: &F, points: &[Vec<f64>]) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    points.par_iter().map(|x| sanitize(objective(x))).collect()
}

/// Index of the smallest value; ties go to the lower index.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if v.total_cmp(&values[best]).is_lt() {
            best = i;
        }
    }
    best
}

/// Indices sorted by value, ties by index.
fn ranking(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx
}

fn tournament(rng: &mut impl Rng, values: &[f64]) -> usize {
    let a = rng.gen_range(0..values.len());
    let b = rng.gen_range(0..values.len());
    match values[b].total_cmp(&values[a]) {
        std::cmp::Ordering::Less => b,
        std::cmp::Ordering::Greater => a,
        std::cmp::Ordering::Equal => a.min(b),
    }
}

fn make_child(
    cfg: &GaConfig,
    bounds: &[(f64, f64)],
    population: &[Vec<f64>],
    values: &[f64],
    generation: usize,
    slot: usize,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, generation as u64, slot as u64));
    let d = bounds.len();
    let pa = &population[tournament(&mut rng, values)];
    let pb = &population[tournament(&mut rng, values)];
    let mut child = if rng.gen::<f64>() < cfg.crossover_rate {
        pa.iter().zip(pb).map(|(&a, &b)| if rng.gen::<bool>() { a } else { b }).collect()
    } else {
        pa.clone()
    };
    let normal = Normal::new(0.0, cfg.mutation_sigma).expect("sigma validated");
    let rate = 1.0 / d as f64;
    for (z, &(lo, hi)) in child.iter_mut().zip(bounds) {
        if rng.gen::<f64>() < rate {
            *z = (*z + normal.sample(&mut rng)).clamp(lo, hi);
        }
    }
    child
}

/// Minimizes `objective` over `bounds`. NaN values are ranked as `+inf`.
pub fn ga_minimize<F>(objective: F, bounds: &[(f64, f64)], cfg: &GaConfig) -> Result<GaOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    check_bounds(bounds)?;
    let d = bounds.len();
    let pop = cfg.population;

    let mut init_rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, u64::MAX, 0));
    let unit: Array2<f64> = random_lhd(pop, d, &mut init_rng);
    let mut population: Vec<Vec<f64>> = unit
        .rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .zip(bounds)
                .map(|(&u, &(lo, hi))| (lo + u * (hi - lo)).clamp(lo, hi))
                .collect()
        })
        .collect();
    let mut values = evaluate(&objective, &population);
    let mut evaluations = pop;

    let first = argmin(&values);
    let mut best_point = population[first].clone();
    let mut best_value = values[first];
    let mut trace = GaTrace::default();
    trace.generations.push(GenerationRecord {
        generation: 0,
        best_value,
        best_point: best_point.clone(),
        evaluations,
    });

    for generation in 1..cfg.generations {
        let offspring: Vec<Vec<f64>> = (0..pop)
            .into_par_iter()
            .map(|slot| make_child(cfg, bounds, &population, &values, generation, slot))
            .collect();
        let child_values = evaluate(&objective, &offspring);
        evaluations += pop;

        let c = argmin(&child_values);
        if child_values[c].total_cmp(&best_value).is_lt() {
            best_value = child_values[c];
            best_point = offspring[c].clone();
        }

        let mut next = Vec::with_capacity(pop);
        let mut next_values = Vec::with_capacity(pop);
        for &i in ranking(&values).iter().take(cfg.elitism) {
            next.push(population[i].clone());
            next_values.push(values[i]);
        }
        for &i in ranking(&child_values).iter().take(pop - cfg.elitism) {
            next.push(offspring[i].clone());
            next_values.push(child_values[i]);
        }
        population = next;
        values = next_values;

        let g = argmin(&values);
        let (gen_best, gen_point) = if cfg.elitism > 0 {
            (values[g], population[g].clone())
        } else {
            (best_value, best_point.clone())
        };
        trace.generations.push(GenerationRecord {
            generation,
            best_value: gen_best,
            best_point: gen_point,
            evaluations,
        });
    }

    Ok(GaOutcome { best_point, best_value, trace })
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Coordinate-wise golden-section search around `start`, using exactly
/// `budget` objective evaluations. Each coordinate is searched on
/// `[z - radius, z + radius]` clipped to its bounds. Returns the best point
/// seen (possibly `start` itself) and its value.
pub fn golden_polish<F>(
    objective: F,
    start: &[f64],
    start_value: f64,
    bounds: &[(f64, f64)],
    budget: usize,
    radius: f64,
) -> Result<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> f64,
{
    check_bounds(bounds)?;
    if start.len() != bounds.len() {
        return Err(GpError::DimensionMismatch(format!(
            "start point has {} coordinates for {} bounds",
            start.len(),
            bounds.len()
        )));
    }
    let d = bounds.len();
    let mut best = start.to_vec();
    let mut best_value = sanitize(start_value);

    for k in 0..d {
        let share = budget / d + usize::from(k < budget % d);
        if share == 0 {
            continue;
        }
        let (lo, hi) = bounds[k];
        let mut a = (best[k] - radius).max(lo);
        let mut b = (best[k] + radius).min(hi);
        let mut probe = best.clone();
        let mut eval = |z: f64, best: &mut Vec<f64>, best_value: &mut f64| {
            probe[k] = z;
            let v = sanitize(objective(&probe));
            if v.total_cmp(best_value).is_lt() {
                *best_value = v;
                best.clone_from(&probe);
            }
            v
        };
        let mut x1 = b - INV_PHI * (b - a);
        let mut x2 = a + INV_PHI * (b - a);
        let mut f1 = eval(x1, &mut best, &mut best_value);
        if share == 1 {
            continue;
        }
        let mut f2 = eval(x2, &mut best, &mut best_value);
        for _ in 2..share {
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - INV_PHI * (b - a);
                f1 = eval(x1, &mut best, &mut best_value);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + INV_PHI * (b - a);
                f2 = eval(x2, &mut best, &mut best_value);
            }
        }
    }
    Ok((best, best_value))
}
