//! Seeded constellation generators.
//!
//! Random constellations use the 128-bit PCG generator `Lcg128Xsl64`
//! (PCG XSL-RR 128/64, as implemented by `rand_pcg::Pcg64`) initialised with
//! `state = seed` and the PCG reference stream constant. Draws happen set by
//! set: first the point count, then one `(x, y)` pair per extra point, `x`
//! before `y`. A 64-bit word `w` becomes
//!
//! * a count in `1..=max` as `1 + ((w as u128 * max as u128) >> 64)`;
//! * a coordinate as `lo + ((w >> 11) * 2^-53) * (hi - lo)`.
//!
//! These rules are frozen: changing any of them changes every reference
//! constellation and golden file.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand_core::Rng;
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Constellation, FinitePointSet, Point, Region};

/// Stream selector handed to the PCG generator.
pub const PCG_STREAM: u128 = 0x0a02_bdbf_7bb3_c0a7_ac28_fa16_a64a_bf96;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomSpec {
    pub seed: u64,
    pub num_sets: usize,
    pub max_points_per_set: usize,
    #[serde(default = "Region::local")]
    pub region: Region,
}

impl RandomSpec {
    pub fn new(seed: u64, num_sets: usize, max_points_per_set: usize) -> Self {
        Self { seed, num_sets, max_points_per_set, region: Region::local() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_sets == 0 {
            return Err(Error::InvalidConfig("num_sets must be at least 1".into()));
        }
        if self.max_points_per_set == 0 {
            return Err(Error::InvalidConfig("max_points_per_set must be at least 1".into()));
        }
        self.region.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstellationPreset {
    FewSetsFewPoints,
    FewSetsManyPoints,
    ManySetsFewPoints,
    ManySetsManyPoints,
}

pub const FEW_SETS: usize = 3;
pub const MANY_SETS: usize = 10;
pub const FEW_POINTS: usize = 20;
pub const MANY_POINTS: usize = 100;

impl ConstellationPreset {
    pub const ALL: [ConstellationPreset; 4] = [
        ConstellationPreset::FewSetsFewPoints,
        ConstellationPreset::FewSetsManyPoints,
        ConstellationPreset::ManySetsFewPoints,
        ConstellationPreset::ManySetsManyPoints,
    ];

    /// `(number of sets, maximum points per set)`.
    pub fn shape(self) -> (usize, usize) {
        match self {
            ConstellationPreset::FewSetsFewPoints => (FEW_SETS, FEW_POINTS),
            ConstellationPreset::FewSetsManyPoints => (FEW_SETS, MANY_POINTS),
            ConstellationPreset::ManySetsFewPoints => (MANY_SETS, FEW_POINTS),
            ConstellationPreset::ManySetsManyPoints => (MANY_SETS, MANY_POINTS),
        }
    }

    /// Short tag, e.g. `few-many`.
    pub fn short(self) -> &'static str {
        match self {
            ConstellationPreset::FewSetsFewPoints => "few-few",
            ConstellationPreset::FewSetsManyPoints => "few-many",
            ConstellationPreset::ManySetsFewPoints => "many-few",
            ConstellationPreset::ManySetsManyPoints => "many-many",
        }
    }

    /// Seed of the shipped reference constellation for this preset.
    pub fn reference_seed(self) -> u64 {
        match self {
            ConstellationPreset::FewSetsFewPoints => 1001,
            ConstellationPreset::FewSetsManyPoints => 1002,
            ConstellationPreset::ManySetsFewPoints => 1015,
            ConstellationPreset::ManySetsManyPoints => 1004,
        }
    }

    pub fn reference(self) -> Constellation {
        random_constellation(&preset_spec(self, self.reference_seed())).expect("preset specs are valid")
    }
}

impl fmt::Display for ConstellationPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl FromStr for ConstellationPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        ConstellationPreset::ALL
            .into_iter()
            .find(|p| {
                p.short() == lower
                    || serde_json::to_value(p).ok().and_then(|v| v.as_str().map(|t| t == lower)).unwrap_or(false)
            })
            .ok_or_else(|| Error::InvalidConfig(format!("unknown preset '{s}'")))
    }
}

pub fn preset_spec(preset: ConstellationPreset, seed: u64) -> RandomSpec {
    let (num_sets, max_points) = preset.shape();
    RandomSpec::new(seed, num_sets, max_points)
}

/// One ring of `count` equispaced points on the circle of radius `radius`
/// centred at the origin, starting at angle `phase`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ring {
    pub radius: f64,
    pub count: usize,
    #[serde(default)]
    pub phase: f64,
}

impl Ring {
    pub fn new(radius: f64, count: usize) -> Self {
        Self { radius, count, phase: 0.0 }
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.count).map(move |j| {
            let angle = self.phase + TAU * j as f64 / self.count as f64;
            Point::new(self.radius * angle.cos(), self.radius * angle.sin())
        })
    }
}

/// Per-set ring lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleSpec {
    pub sets: Vec<Vec<Ring>>,
}

impl CircleSpec {
    /// Two sets, one ring each: radius 4 with 8 points and radius 8 with 16 points.
    pub fn two_rings() -> Self {
        Self { sets: vec![vec![Ring::new(4.0, 8)], vec![Ring::new(8.0, 16)]] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sets.is_empty() || self.sets.iter().any(|s| s.is_empty()) {
            return Err(Error::InvalidConfig("every circle set needs at least one ring".into()));
        }
        for ring in self.sets.iter().flatten() {
            if !(ring.radius > 0.0) || !ring.radius.is_finite() || ring.count == 0 || !ring.phase.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "ring needs positive radius and count, got radius {} count {}",
                    ring.radius, ring.count
                )));
            }
        }
        Ok(())
    }
}

/// How a constellation was produced; persisted alongside the geometry.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Random(RandomSpec),
    Circles(CircleSpec),
    #[default]
    Explicit,
}

impl Provenance {
    pub fn seed(&self) -> Option<u64> {
        match self {
            Provenance::Random(spec) => Some(spec.seed),
            _ => None,
        }
    }
}

fn unit_interval(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn bounded_count(word: u64, max: usize) -> usize {
    1 + ((word as u128 * max as u128) >> 64) as usize
}

/// Origin plus up to `max - 1` uniform points per set; the origin is a common
/// point of every set.
pub fn random_constellation(spec: &RandomSpec) -> Result<Constellation> {
    spec.validate()?;
    let region = spec.region;
    let mut rng = Pcg64::new(u128::from(spec.seed), PCG_STREAM);
    let mut sets = Vec::with_capacity(spec.num_sets);
    for _ in 0..spec.num_sets {
        let n = bounded_count(rng.next_u64(), spec.max_points_per_set);
        let mut points = Vec::with_capacity(n);
        points.push(Point::ORIGIN);
        for _ in 1..n {
            let x = region.xmin + unit_interval(rng.next_u64()) * region.width();
            let y = region.ymin + unit_interval(rng.next_u64()) * region.height();
            points.push(Point::new(x, y));
        }
        sets.push(FinitePointSet::new(points)?);
    }
    Constellation::with_provenance(sets, Some(Point::ORIGIN), Provenance::Random(spec.clone()))
}

pub fn circles_constellation(spec: &CircleSpec) -> Result<Constellation> {
    spec.validate()?;
    let sets = spec
        .sets
        .iter()
        .map(|rings| FinitePointSet::new(rings.iter().flat_map(|r| r.points()).collect()))
        .collect::<Result<Vec<_>>>()?;
    let hint = sets[0].points().iter().copied().find(|&p| sets.iter().all(|s| s.contains(p)));
    Constellation::with_provenance(sets, hint, Provenance::Circles(spec.clone()))
}

/// Regenerates a constellation from its provenance, when possible.
pub fn regenerate(provenance: &Provenance) -> Option<Result<Constellation>> {
    match provenance {
        Provenance::Random(spec) => Some(random_constellation(spec)),
        Provenance::Circles(spec) => Some(circles_constellation(spec)),
        Provenance::Explicit => None,
    }
}
