//! Experiment protocols: success-rate estimation, lambda sweeps,
//! iteration-count maps and progressive (streamed) map sampling.
//!
//! Work is split over deterministic index or pixel ranges and collected into
//! fixed output slots, so every result is bit-identical for any number of
//! workers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{
    orbit_outcome, run_orbit, AlgorithmConfig, AlgorithmKind, OrbitTrace, DEFAULT_EPSILON, DEFAULT_MAX_ITERATIONS,
};
use crate::error::{Error, Result};
use crate::geometry::{Constellation, Point, Region};
use crate::sampling::sample_region;

pub const DEFAULT_N_LAMBDA: usize = 200;
pub const DEFAULT_N_STARTS: usize = 5000;
/// Start count used for desk-scale rate estimates.
pub const DESK_N_STARTS: usize = 10_000;
pub const DEFAULT_MAP_SIZE: usize = 512;

/// Runs `f` on a dedicated pool of `workers` threads, or on the ambient rayon
/// pool when `workers` is `None`.
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidConfig(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Sizes the global rayon pool; only effective before the pool is first used.
pub fn configure_global_pool(workers: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build_global()
        .map_err(|e| Error::InvalidConfig(format!("cannot configure worker pool: {e}")))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessSummary {
    pub successes: usize,
    pub total: usize,
    pub rate: f64,
}

impl SuccessSummary {
    pub fn new(successes: usize, total: usize) -> Self {
        let rate = if total == 0 { 0.0 } else { successes as f64 / total as f64 };
        Self { successes, total, rate }
    }
}

fn check_runnable(config: &AlgorithmConfig, constellation: &Constellation) -> Result<()> {
    config.validate()?;
    if config.kind == AlgorithmKind::CycDr && constellation.num_sets() < 2 {
        return Err(Error::DegenerateCycle(constellation.num_sets()));
    }
    Ok(())
}

fn iteration_counts(config: &AlgorithmConfig, constellation: &Constellation, starts: &[Point]) -> Result<Vec<u32>> {
    starts
        .par_iter()
        .map(|&x0| orbit_outcome(config, constellation, x0).map(|o| o.iterations(config.max_iterations) as u32))
        .collect()
}

/// Fraction of `starts` whose orbit meets the stopping rule within the cap.
pub fn success_rate(
    config: &AlgorithmConfig,
    constellation: &Constellation,
    starts: &[Point],
) -> Result<SuccessSummary> {
    if starts.is_empty() {
        return Err(Error::InvalidConfig("success rate needs at least one start".into()));
    }
    check_runnable(config, constellation)?;
    let successes = starts
        .par_iter()
        .map(|&x0| orbit_outcome(config, constellation, x0).map(|o| usize::from(o.is_solved())))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(SuccessSummary::new(successes, starts.len()))
}

/// `lambda_j = (2j + 1) / n` for `j = 0..n`: evenly spaced midpoints of `(0, 2)`.
pub fn lambda_grid(n_lambda: usize) -> Vec<f64> {
    (0..n_lambda).map(|j| (2 * j + 1) as f64 / n_lambda as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub kind: AlgorithmKind,
    pub region: Region,
    pub n_lambda: usize,
    pub n_starts: usize,
    pub epsilon: f64,
    pub max_iterations: usize,
}

impl SweepParams {
    pub fn new(kind: AlgorithmKind, region: Region) -> Self {
        Self {
            kind,
            region,
            n_lambda: DEFAULT_N_LAMBDA,
            n_starts: DEFAULT_N_STARTS,
            epsilon: DEFAULT_EPSILON,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }

    pub fn with_counts(mut self, n_lambda: usize, n_starts: usize) -> Self {
        self.n_lambda = n_lambda;
        self.n_starts = n_starts;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: AlgorithmKind,
    pub lambdas: Vec<f64>,
    pub rates: Vec<f64>,
    pub starts_per_lambda: usize,
    pub region: Region,
    pub constellation_id: String,
    pub epsilon: f64,
    pub max_iterations: usize,
}

/// Success rate for every lambda on the midpoint grid, each estimated from
/// the first `n_starts` Halton samples of the region.
pub fn lambda_sweep(
    kind: AlgorithmKind,
    constellation: &Constellation,
    region: Region,
    n_lambda: usize,
    n_starts: usize,
) -> Result<SweepResult> {
    run_sweep(constellation, &SweepParams::new(kind, region).with_counts(n_lambda, n_starts))
}

pub fn run_sweep(constellation: &Constellation, params: &SweepParams) -> Result<SweepResult> {
    if params.n_lambda == 0 || params.n_starts == 0 {
        return Err(Error::InvalidConfig("sweep needs at least one lambda and one start".into()));
    }
    params.region.validate()?;
    let lambdas = lambda_grid(params.n_lambda);
    let configs = lambdas
        .iter()
        .map(|&l| AlgorithmConfig::with_limits(params.kind, l, params.epsilon, params.max_iterations))
        .collect::<Result<Vec<_>>>()?;
    check_runnable(&configs[0], constellation)?;
    let starts = sample_region(params.region, params.n_starts, 1);

    let n = starts.len();
    let solved = (0..configs.len() * n)
        .into_par_iter()
        .map(|task| {
            let cfg = &configs[task / n];
            orbit_outcome(cfg, constellation, starts[task % n]).map(|o| o.is_solved())
        })
        .collect::<Result<Vec<bool>>>()?;
    let rates = solved.chunks(n).map(|row| row.iter().filter(|&&s| s).count() as f64 / n as f64).collect();

    Ok(SweepResult {
        kind: params.kind,
        lambdas,
        rates,
        starts_per_lambda: n,
        region: params.region,
        constellation_id: constellation.fingerprint(),
        epsilon: params.epsilon,
        max_iterations: params.max_iterations,
    })
}

/// Lambda with the highest rate; ties go to the lambda closest to 1, then to
/// the smaller lambda. Distances to 1 within `1e-9` count as equal so that
/// grid points placed symmetrically around 1 tie exactly.
pub fn pick_best_lambda(sweep: &SweepResult) -> Result<f64> {
    if sweep.lambdas.is_empty() || sweep.lambdas.len() != sweep.rates.len() {
        return Err(Error::InvalidConfig("sweep is empty or inconsistent".into()));
    }
    let mut best = 0;
    for j in 1..sweep.lambdas.len() {
        let (rj, rb) = (sweep.rates[j], sweep.rates[best]);
        if rj > rb {
            best = j;
        } else if rj == rb {
            let dj = (sweep.lambdas[j] - 1.0).abs();
            let db = (sweep.lambdas[best] - 1.0).abs();
            let closer = dj < db - 1e-9;
            let same = (dj - db).abs() <= 1e-9;
            if closer || (same && sweep.lambdas[j] < sweep.lambdas[best]) {
                best = j;
            }
        }
    }
    Ok(sweep.lambdas[best])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapMetadata {
    pub kind: AlgorithmKind,
    pub lambda: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub constellation_id: String,
    pub seed: Option<u64>,
}

/// Row-major iteration counts; row 0 is the top edge (`ymax`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationMap {
    pub region: Region,
    pub width: usize,
    pub height: usize,
    pub counts: Vec<u32>,
    pub metadata: MapMetadata,
}

impl IterationMap {
    pub fn count(&self, col: usize, row: usize) -> u32 {
        self.counts[row * self.width + col]
    }

    /// Success summary read off the counts (below the cap means solved).
    pub fn success_summary(&self) -> SuccessSummary {
        let cap = self.metadata.max_iterations as u32;
        let successes = self.counts.iter().filter(|&&c| c < cap).count();
        SuccessSummary::new(successes, self.counts.len())
    }

    /// Start point used for pixel `(col, row)`.
    pub fn pixel_start(&self, col: usize, row: usize) -> Point {
        pixel_center(self.region, self.width, self.height, col, row)
    }
}

/// Centre of pixel `(col, row)` in an image of `width x height` covering `region`.
pub fn pixel_center(region: Region, width: usize, height: usize, col: usize, row: usize) -> Point {
    let x = region.xmin + (col as f64 + 0.5) * region.width() / width as f64;
    let y = region.ymax - (row as f64 + 0.5) * region.height() / height as f64;
    Point::new(x, y)
}

fn map_metadata(config: &AlgorithmConfig, constellation: &Constellation) -> MapMetadata {
    MapMetadata {
        kind: config.kind,
        lambda: config.lambda,
        epsilon: config.epsilon,
        max_iterations: config.max_iterations,
        constellation_id: constellation.fingerprint(),
        seed: constellation.provenance().seed(),
    }
}

/// Iteration count at every pixel centre of a `width x height` raster.
pub fn cartographer(
    config: &AlgorithmConfig,
    constellation: &Constellation,
    region: Region,
    width: usize,
    height: usize,
) -> Result<IterationMap> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidConfig("map dimensions must be positive".into()));
    }
    if config.max_iterations > u32::MAX as usize {
        return Err(Error::InvalidConfig("iteration cap does not fit the map format".into()));
    }
    region.validate()?;
    check_runnable(config, constellation)?;
    let starts: Vec<Point> =
        (0..width * height).map(|i| pixel_center(region, width, height, i % width, i / width)).collect();
    let counts = iteration_counts(config, constellation, &starts)?;
    Ok(IterationMap { region, width, height, counts, metadata: map_metadata(config, constellation) })
}

/// One window of the progressive stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapBatch {
    /// One-based Halton index of the first entry.
    pub first_index: u64,
    pub entries: Vec<(Point, u32)>,
}

/// Iterator over batches of `(start, iteration count)` that walks the Halton
/// stream in index order. Each batch is computed in parallel on the ambient
/// rayon pool.
pub struct ProgressiveCartographer<'a> {
    config: AlgorithmConfig,
    constellation: &'a Constellation,
    region: Region,
    budget: u64,
    chunk: u64,
    next_index: u64,
}

impl<'a> ProgressiveCartographer<'a> {
    pub fn total_batches(&self) -> u64 {
        self.budget.div_ceil(self.chunk)
    }

    pub fn progress(&self) -> f64 {
        (self.next_index - 1) as f64 / self.budget as f64
    }
}

impl Iterator for ProgressiveCartographer<'_> {
    type Item = MapBatch;

    fn next(&mut self) -> Option<MapBatch> {
        let done = self.next_index - 1;
        if done >= self.budget {
            return None;
        }
        let take = self.chunk.min(self.budget - done);
        let starts = sample_region(self.region, take as usize, self.next_index);
        let counts = iteration_counts(&self.config, self.constellation, &starts)
            .expect("configuration validated at construction");
        let batch = MapBatch { first_index: self.next_index, entries: starts.into_iter().zip(counts).collect() };
        self.next_index += take;
        Some(batch)
    }
}

pub fn progressive_cartographer<'a>(
    config: &AlgorithmConfig,
    constellation: &'a Constellation,
    region: Region,
    sample_budget: u64,
    chunk: u64,
) -> Result<ProgressiveCartographer<'a>> {
    if chunk == 0 || sample_budget < chunk {
        return Err(Error::InvalidConfig(format!(
            "need budget >= chunk >= 1, got budget {sample_budget} chunk {chunk}"
        )));
    }
    region.validate()?;
    check_runnable(config, constellation)?;
    Ok(ProgressiveCartographer { config: *config, constellation, region, budget: sample_budget, chunk, next_index: 1 })
}

/// Orbits from one start for every algorithm at its default and tuned lambda.
pub fn orbit_panel(constellation: &Constellation, x0: Point) -> Result<Vec<OrbitTrace>> {
    let mut traces = Vec::with_capacity(8);
    for kind in AlgorithmKind::ALL {
        if kind == AlgorithmKind::CycDr && constellation.num_sets() < 2 {
            continue;
        }
        for cfg in [AlgorithmConfig::default_for(kind), AlgorithmConfig::best_for(kind)] {
            traces.push(run_orbit(&cfg, constellation, x0)?);
        }
    }
    Ok(traces)
}
