//! The four projection schemes: cyclic projections (CycP), extrapolated
//! parallel projections (ExParP), product-space Douglas-Rachford (DR) and
//! cyclic Douglas-Rachford (CycDR).
//!
//! Each scheme has a *governing* iterate that drives the recursion and a
//! *monitored* point that is checked against the stopping rule. One iteration
//! is one governing update: a full pass over all sets for the cyclic methods,
//! one product-space update for DR and one extrapolated step for ExParP.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Constellation, FeasibilityGauge, Point};

/// Below this squared norm the ExParP direction is treated as zero and the
/// iterate is held in place.
pub const EXPARP_STALL_THRESHOLD: f64 = 1e-24;

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_MAX_ITERATIONS: usize = 1000;
pub const LAMBDA_DEFAULT: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmKind {
    CycP,
    ExParP,
    #[serde(rename = "dr")]
    Dr,
    CycDr,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 4] =
        [AlgorithmKind::CycP, AlgorithmKind::ExParP, AlgorithmKind::Dr, AlgorithmKind::CycDr];

    /// Tuned relaxation parameter for each scheme.
    pub fn lambda_best(self) -> f64 {
        match self {
            AlgorithmKind::CycP => 1.5,
            AlgorithmKind::ExParP => 0.8,
            AlgorithmKind::Dr => 1.6,
            AlgorithmKind::CycDr => 1.2,
        }
    }

    pub fn lambda_default(self) -> f64 {
        LAMBDA_DEFAULT
    }

    pub fn tag(self) -> &'static str {
        match self {
            AlgorithmKind::CycP => "cycp",
            AlgorithmKind::ExParP => "exparp",
            AlgorithmKind::Dr => "dr",
            AlgorithmKind::CycDr => "cycdr",
        }
    }

    /// Display name used in reports.
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::CycP => "CycP",
            AlgorithmKind::ExParP => "ExParP",
            AlgorithmKind::Dr => "DR",
            AlgorithmKind::CycDr => "CycDR",
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AlgorithmKind::ALL
            .into_iter()
            .find(|k| k.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown algorithm '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmConfig {
    pub kind: AlgorithmKind,
    pub lambda: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
}

impl AlgorithmConfig {
    /// Config with the default tolerance and iteration cap.
    pub fn new(kind: AlgorithmKind, lambda: f64) -> Result<Self> {
        Self::with_limits(kind, lambda, DEFAULT_EPSILON, DEFAULT_MAX_ITERATIONS)
    }

    pub fn with_limits(kind: AlgorithmKind, lambda: f64, epsilon: f64, max_iterations: usize) -> Result<Self> {
        let cfg = Self { kind, lambda, epsilon, max_iterations };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn default_for(kind: AlgorithmKind) -> Self {
        Self::new(kind, kind.lambda_default()).expect("default lambda is valid")
    }

    pub fn best_for(kind: AlgorithmKind) -> Self {
        Self::new(kind, kind.lambda_best()).expect("tuned lambda is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 2.0) {
            return Err(Error::InvalidConfig(format!("lambda must lie strictly between 0 and 2, got {}", self.lambda)));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidConfig(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Governing iterate: a single point, or the DR product-space block with its
/// cached mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OrbitState {
    Single { current: Point },
    Block { block: Vec<Point>, mean: Point },
}

impl OrbitState {
    /// The representative point: the current iterate, or the block mean.
    pub fn point(&self) -> Point {
        match self {
            OrbitState::Single { current } => *current,
            OrbitState::Block { mean, .. } => *mean,
        }
    }

    fn block(block: Vec<Point>) -> Self {
        let mean = mean_of(&block);
        OrbitState::Block { block, mean }
    }
}

fn mean_of(points: &[Point]) -> Point {
    let sum = points.iter().fold(Point::ORIGIN, |acc, &p| acc + p);
    let m = points.len() as f64;
    Point::new(sum.x / m, sum.y / m)
}

pub fn init_state(kind: AlgorithmKind, constellation: &Constellation, x0: Point) -> OrbitState {
    match kind {
        AlgorithmKind::Dr => OrbitState::Block { block: vec![x0; constellation.num_sets()], mean: x0 },
        _ => OrbitState::Single { current: x0 },
    }
}

/// One full pass of relaxed projections `x <- (1 - lambda) x + lambda P_i x`, `i = 1..m`.
pub fn step_cycp(constellation: &Constellation, lambda: f64, x: Point) -> Point {
    constellation.sets().iter().fold(x, |x, set| {
        let p = set.project(x);
        (1.0 - lambda) * x + lambda * p
    })
}

/// One extrapolated parallel projection step.
pub fn step_exparp(constellation: &Constellation, lambda: f64, x: Point) -> Point {
    let mut num = 0.0;
    let mut v = Point::ORIGIN;
    for set in constellation.sets() {
        let p = set.project(x);
        num += x.dist_sq(p);
        v = v + (p - x);
    }
    if num == 0.0 {
        return x;
    }
    let den = v.norm_sq();
    if den <= EXPARP_STALL_THRESHOLD {
        return x;
    }
    x + (lambda * (num / den)) * v
}

/// One product-space Douglas-Rachford update; the mean is recomputed.
pub fn step_dr(constellation: &Constellation, lambda: f64, block: &[Point]) -> Vec<Point> {
    let mut next = block.to_vec();
    dr_in_place(constellation, lambda, &mut next, mean_of(block));
    next
}

fn dr_in_place(constellation: &Constellation, lambda: f64, block: &mut [Point], mean: Point) -> Point {
    for (xi, set) in block.iter_mut().zip(constellation.sets()) {
        let p = set.project(2.0 * mean - *xi);
        *xi = *xi + lambda * (p - mean);
    }
    mean_of(block)
}

/// One cycle of cyclic Douglas-Rachford blocks
/// `B_i = (1 - lambda/2) P_i + (lambda/4)(Id + R_{i+1} R_i)`, wrapping `m -> 1`.
pub fn step_cycdr(constellation: &Constellation, lambda: f64, x: Point) -> Result<Point> {
    let m = constellation.num_sets();
    if m < 2 {
        return Err(Error::DegenerateCycle(m));
    }
    Ok(cycdr_unchecked(constellation, lambda, x))
}

fn cycdr_unchecked(constellation: &Constellation, lambda: f64, x: Point) -> Point {
    let sets = constellation.sets();
    let m = sets.len();
    let keep = 1.0 - lambda / 2.0;
    let avg = lambda / 4.0;
    (0..m).fold(x, |x, i| {
        let p = sets[i].project(x);
        let r = 2.0 * p - x;
        let rr = sets[(i + 1) % m].reflect(r);
        keep * p + avg * (x + rr)
    })
}

/// Applies one governing update of `kind` to `state`.
pub fn step(kind: AlgorithmKind, constellation: &Constellation, lambda: f64, state: &OrbitState) -> Result<OrbitState> {
    let mut next = state.clone();
    if kind == AlgorithmKind::CycDr && constellation.num_sets() < 2 {
        return Err(Error::DegenerateCycle(constellation.num_sets()));
    }
    advance(kind, constellation, lambda, &mut next);
    Ok(next)
}

fn advance(kind: AlgorithmKind, constellation: &Constellation, lambda: f64, state: &mut OrbitState) {
    match state {
        OrbitState::Single { current } => {
            *current = match kind {
                AlgorithmKind::CycP => step_cycp(constellation, lambda, *current),
                AlgorithmKind::ExParP => step_exparp(constellation, lambda, *current),
                AlgorithmKind::CycDr => cycdr_unchecked(constellation, lambda, *current),
                AlgorithmKind::Dr => {
                    // Promote to block form on first use.
                    let block = step_dr(constellation, lambda, &vec![*current; constellation.num_sets()]);
                    *state = OrbitState::block(block);
                    return;
                }
            }
        }
        OrbitState::Block { block, mean } => {
            if kind == AlgorithmKind::Dr {
                *mean = dr_in_place(constellation, lambda, block, *mean);
            } else {
                let x = *mean;
                let mut single = OrbitState::Single { current: x };
                advance(kind, constellation, lambda, &mut single);
                *state = single;
            }
        }
    }
}

/// The point checked by the stopping rule.
pub fn monitored_point(kind: AlgorithmKind, constellation: &Constellation, state: &OrbitState) -> Point {
    match kind {
        AlgorithmKind::CycP | AlgorithmKind::CycDr => {
            let x = state.point();
            let sum = constellation.sets().iter().fold(Point::ORIGIN, |acc, s| acc + s.project(x));
            let m = constellation.num_sets() as f64;
            Point::new(sum.x / m, sum.y / m)
        }
        AlgorithmKind::ExParP | AlgorithmKind::Dr => state.point(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "iteration", rename_all = "lowercase")]
pub enum Outcome {
    /// Stopping rule met at this iteration index.
    Solved(usize),
    /// Iteration cap reached without meeting the stopping rule.
    Exhausted,
}

impl Outcome {
    pub fn is_solved(self) -> bool {
        matches!(self, Outcome::Solved(_))
    }

    /// Iteration count shown on maps: `k` when solved at `k`, the cap otherwise.
    pub fn iterations(self, cap: usize) -> usize {
        match self {
            Outcome::Solved(k) => k,
            Outcome::Exhausted => cap,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Solved(k) => write!(f, "Solved at {k}"),
            Outcome::Exhausted => f.write_str("Exhausted"),
        }
    }
}

/// Full record of one orbit. All lists are indexed by iteration, with index 0
/// holding the initial state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitTrace {
    pub config: AlgorithmConfig,
    pub start: Point,
    pub governing: Vec<OrbitState>,
    pub monitored: Vec<Point>,
    pub errors: Vec<f64>,
    pub outcome: Outcome,
}

impl OrbitTrace {
    pub fn len(&self) -> usize {
        self.monitored.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monitored.is_empty()
    }
}

/// Runs the stopping-rule loop, reporting every recorded state to `observe`.
fn drive(
    config: &AlgorithmConfig,
    constellation: &Constellation,
    x0: Point,
    mut observe: impl FnMut(&OrbitState, Point, f64),
) -> Result<Outcome> {
    config.validate()?;
    if config.kind == AlgorithmKind::CycDr && constellation.num_sets() < 2 {
        return Err(Error::DegenerateCycle(constellation.num_sets()));
    }
    let mut state = init_state(config.kind, constellation, x0);
    let gauge = match FeasibilityGauge::new(constellation, x0) {
        Ok(g) => g,
        Err(Error::StartInSolutionSet) => {
            observe(&state, x0, 0.0);
            return Ok(Outcome::Solved(0));
        }
        Err(e) => return Err(e),
    };

    let y = monitored_point(config.kind, constellation, &state);
    let d = gauge.eval(y);
    observe(&state, y, d);
    if d < config.epsilon {
        return Ok(Outcome::Solved(0));
    }
    for k in 1..=config.max_iterations {
        advance(config.kind, constellation, config.lambda, &mut state);
        let y = monitored_point(config.kind, constellation, &state);
        let d = gauge.eval(y);
        observe(&state, y, d);
        if d < config.epsilon {
            return Ok(Outcome::Solved(k));
        }
    }
    Ok(Outcome::Exhausted)
}

/// Runs one orbit from `x0` and records every snapshot.
pub fn run_orbit(config: &AlgorithmConfig, constellation: &Constellation, x0: Point) -> Result<OrbitTrace> {
    let mut governing = Vec::new();
    let mut monitored = Vec::new();
    let mut errors = Vec::new();
    let outcome = drive(config, constellation, x0, |state, y, d| {
        governing.push(state.clone());
        monitored.push(y);
        errors.push(d);
    })?;
    Ok(OrbitTrace { config: *config, start: x0, governing, monitored, errors, outcome })
}

/// Same stopping rule as [`run_orbit`] without recording the trace.
pub fn orbit_outcome(config: &AlgorithmConfig, constellation: &Constellation, x0: Point) -> Result<Outcome> {
    drive(config, constellation, x0, |_, _, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FinitePointSet;

    fn set(pts: &[(f64, f64)]) -> FinitePointSet {
        FinitePointSet::new(pts.iter().map(|&(x, y)| Point::new(x, y)).collect()).unwrap()
    }

    fn constellation(sets: &[&[(f64, f64)]]) -> Constellation {
        Constellation::new(sets.iter().map(|s| set(s)).collect(), None).unwrap()
    }

    fn p(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    #[test]
    fn init_state_examples() {
        let c3 = Constellation::all_origin(3);
        assert_eq!(
            init_state(AlgorithmKind::Dr, &c3, p(1.0, 2.0)),
            OrbitState::Block { block: vec![p(1.0, 2.0); 3], mean: p(1.0, 2.0) }
        );
        assert_eq!(init_state(AlgorithmKind::CycP, &c3, Point::ORIGIN), OrbitState::Single { current: Point::ORIGIN });
        assert_eq!(init_state(AlgorithmKind::CycDr, &c3, p(-5.0, 7.0)), OrbitState::Single { current: p(-5.0, 7.0) });
    }

    #[test]
    fn cycp_examples() {
        assert_eq!(step_cycp(&Constellation::all_origin(3), 1.0, p(5.0, 5.0)), Point::ORIGIN);
        assert_eq!(step_cycp(&Constellation::all_origin(2), 0.5, p(8.0, 0.0)), p(2.0, 0.0));
        let c = constellation(&[&[(0.0, 0.0), (10.0, 0.0)]]);
        assert_eq!(step_cycp(&c, 1.0, p(6.0, 0.0)), p(10.0, 0.0));
    }

    #[test]
    fn exparp_examples() {
        assert_eq!(step_exparp(&Constellation::all_origin(1), 1.0, p(3.0, 4.0)), Point::ORIGIN);
        let c = constellation(&[&[(0.0, 0.0)], &[(4.0, 0.0)]]);
        assert_eq!(step_exparp(&c, 1.0, Point::ORIGIN), p(4.0, 0.0));
        assert_eq!(step_exparp(&c, 0.5, Point::ORIGIN), p(2.0, 0.0));
    }

    #[test]
    fn exparp_holds_on_balanced_pull() {
        // Midpoint of two singletons: projections cancel exactly.
        let c = constellation(&[&[(-1.0, 0.0)], &[(1.0, 0.0)]]);
        assert_eq!(step_exparp(&c, 1.0, Point::ORIGIN), Point::ORIGIN);
        let cfg = AlgorithmConfig::new(AlgorithmKind::ExParP, 1.0).unwrap();
        assert_eq!(orbit_outcome(&cfg, &c, Point::ORIGIN).unwrap(), Outcome::Exhausted);
    }

    #[test]
    fn dr_examples() {
        let c = constellation(&[&[(0.0, 0.0)], &[(4.0, 0.0)]]);
        let next = step_dr(&c, 1.0, &[Point::ORIGIN, Point::ORIGIN]);
        assert_eq!(next, vec![Point::ORIGIN, p(4.0, 0.0)]);
        assert_eq!(mean_of(&next), p(2.0, 0.0));

        let one = Constellation::all_origin(1);
        for lambda in [0.3, 1.0, 1.7] {
            let x = p(2.0, -1.0);
            assert_eq!(step_dr(&one, lambda, &[x]), vec![(1.0 - lambda) * x]);
        }

        // P_i(2 mean - x_i) = mean for every component: fixed point.
        let fixed = [p(0.0, 0.0), p(4.0, 0.0)];
        let c2 = constellation(&[&[(2.0, 0.0), (9.0, 9.0)], &[(2.0, 0.0), (-9.0, 9.0)]]);
        assert_eq!(step_dr(&c2, 1.3, &fixed), fixed.to_vec());
    }

    #[test]
    fn cycdr_examples() {
        let c = Constellation::all_origin(2);
        assert_eq!(step_cycdr(&c, 1.0, p(1.0, 0.0)).unwrap(), p(0.25, 0.0));
        assert_eq!(step_cycdr(&c, 0.5, p(8.0, 8.0)).unwrap(), p(0.5, 0.5));
        let c3 = constellation(&[&[(1.0, 1.0), (3.0, 0.0)], &[(1.0, 1.0)], &[(5.0, 5.0), (1.0, 1.0)]]);
        assert_eq!(step_cycdr(&c3, 1.37, p(1.0, 1.0)).unwrap(), p(1.0, 1.0));
        assert_eq!(step_cycdr(&Constellation::all_origin(1), 1.0, p(1.0, 0.0)), Err(Error::DegenerateCycle(1)));
    }

    #[test]
    fn cycdr_block_diverges_beyond_two() {
        // Singleton blocks scale by lambda/2, so lambda > 2 grows the iterate.
        let c = Constellation::all_origin(2);
        let x = p(1.0, 0.0);
        let grown = cycdr_unchecked(&c, 2.5, x);
        assert!((grown.x - 1.25f64.powi(2)).abs() < 1e-15);
    }

    #[test]
    fn monitored_examples() {
        assert_eq!(
            monitored_point(
                AlgorithmKind::CycP,
                &Constellation::all_origin(3),
                &OrbitState::Single { current: p(9.0, 9.0) }
            ),
            Point::ORIGIN
        );
        let block = OrbitState::block(vec![Point::ORIGIN, p(4.0, 0.0)]);
        let c = constellation(&[&[(0.0, 0.0)], &[(4.0, 0.0)]]);
        assert_eq!(monitored_point(AlgorithmKind::Dr, &c, &block), p(2.0, 0.0));
        assert_eq!(
            monitored_point(AlgorithmKind::CycP, &c, &OrbitState::Single { current: Point::ORIGIN }),
            p(2.0, 0.0)
        );
    }

    #[test]
    fn run_orbit_examples() {
        let cfg = AlgorithmConfig::new(AlgorithmKind::CycP, 1.0).unwrap();
        let t = run_orbit(&cfg, &Constellation::all_origin(3), p(7.0, -3.0)).unwrap();
        assert_eq!(t.outcome, Outcome::Solved(0));
        assert_eq!(t.len(), 1);

        let cfg = AlgorithmConfig::new(AlgorithmKind::ExParP, 1.0).unwrap();
        let t = run_orbit(&cfg, &Constellation::all_origin(1), p(3.0, 4.0)).unwrap();
        assert_eq!(t.outcome, Outcome::Solved(1));
        assert_eq!(t.monitored[1], Point::ORIGIN);

        let cfg = AlgorithmConfig::new(AlgorithmKind::Dr, 1.9).unwrap();
        let t = run_orbit(&cfg, &Constellation::all_origin(1), p(1.0, 0.0)).unwrap();
        let expected = (6.0 / -(0.9f64.log10())).ceil() as usize;
        assert_eq!(expected, 132);
        assert_eq!(t.outcome, Outcome::Solved(expected));
    }

    #[test]
    fn run_orbit_start_in_solution_set() {
        let cfg = AlgorithmConfig::new(AlgorithmKind::Dr, 1.0).unwrap();
        let t = run_orbit(&cfg, &Constellation::all_origin(2), Point::ORIGIN).unwrap();
        assert_eq!(t.outcome, Outcome::Solved(0));
        assert_eq!(t.errors, vec![0.0]);
    }

    #[test]
    fn run_orbit_rejects_bad_input() {
        let cfg = AlgorithmConfig::new(AlgorithmKind::CycDr, 1.0).unwrap();
        assert_eq!(run_orbit(&cfg, &Constellation::all_origin(1), p(1.0, 0.0)).unwrap_err(), Error::DegenerateCycle(1));
        assert!(AlgorithmConfig::new(AlgorithmKind::Dr, 2.5).is_err());
        assert!(AlgorithmConfig::new(AlgorithmKind::Dr, 0.0).is_err());
        assert!(AlgorithmConfig::new(AlgorithmKind::Dr, 2.0).is_err());
        assert!(AlgorithmConfig::with_limits(AlgorithmKind::Dr, 1.0, 0.0, 10).is_err());
        assert!(AlgorithmConfig::with_limits(AlgorithmKind::Dr, 1.0, 1e-6, 0).is_err());
    }

    #[test]
    fn exhausted_trace_has_cap_plus_one_entries() {
        let c = constellation(&[&[(0.0, 0.0)], &[(5.0, 0.0)]]);
        let cfg = AlgorithmConfig::with_limits(AlgorithmKind::CycP, 1.0, 1e-6, 25).unwrap();
        let t = run_orbit(&cfg, &c, p(1.0, 1.0)).unwrap();
        assert_eq!(t.outcome, Outcome::Exhausted);
        assert_eq!(t.len(), 26);
        assert_eq!(t.governing.len(), 26);
        assert_eq!(t.errors.len(), 26);
    }

    #[test]
    fn algorithm_tags_round_trip() {
        for kind in AlgorithmKind::ALL {
            assert_eq!(kind.tag().parse::<AlgorithmKind>().unwrap(), kind);
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(json, format!("\"{}\"", kind.tag()));
        }
        assert!("dykstra".parse::<AlgorithmKind>().is_err());
    }
}
