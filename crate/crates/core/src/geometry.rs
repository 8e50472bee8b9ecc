//! Plane primitives, nearest-point projection onto finite sets, and the
//! normalized feasibility gauge.

use std::collections::HashSet;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::generate::Provenance;

/// A point of the Euclidean plane.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist_sq(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    /// Bit pattern used for exact-equality hashing; `-0.0` folds onto `0.0`.
    fn key(self) -> (u64, u64) {
        ((self.x + 0.0).to_bits(), (self.y + 0.0).to_bits())
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<Point> for f64 {
    type Output = Point;
    fn mul(self, rhs: Point) -> Point {
        Point::new(self * rhs.x, self * rhs.y)
    }
}

/// Axis-aligned rectangle `[xmin, xmax] x [ymin, ymax]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Region {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self> {
        let region = Self { xmin, xmax, ymin, ymax };
        region.validate()?;
        Ok(region)
    }

    /// Square `[-half, half]^2`.
    pub fn square(half: f64) -> Self {
        Self { xmin: -half, xmax: half, ymin: -half, ymax: half }
    }

    /// The `[-10, 10]^2` window.
    pub fn local() -> Self {
        Self::square(10.0)
    }

    /// The `[-100, 100]^2` window.
    pub fn global() -> Self {
        Self::square(100.0)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.xmin, self.xmax, self.ymin, self.ymax].iter().all(|v| v.is_finite());
        if !finite || !(self.xmin < self.xmax) || !(self.ymin < self.ymax) {
            return Err(Error::InvalidGeometry(format!(
                "region [{}, {}] x [{}, {}] is empty or not finite",
                self.xmin, self.xmax, self.ymin, self.ymax
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    /// Maps unit-square coordinates `(u, v)` affinely onto the region.
    pub fn lerp(&self, u: f64, v: f64) -> Point {
        Point::new(self.xmin + u * self.width(), self.ymin + v * self.height())
    }

    /// Bounding box of `points`; degenerate extents are widened by one unit
    /// on each side so the result is always a valid region.
    pub fn bounding(points: impl IntoIterator<Item = Point>) -> Option<Self> {
        let mut iter = points.into_iter();
        let first = iter.next()?;
        let mut r = Self { xmin: first.x, xmax: first.x, ymin: first.y, ymax: first.y };
        for p in iter {
            r.xmin = r.xmin.min(p.x);
            r.xmax = r.xmax.max(p.x);
            r.ymin = r.ymin.min(p.y);
            r.ymax = r.ymax.max(p.y);
        }
        if r.xmin == r.xmax {
            r.xmin -= 1.0;
            r.xmax += 1.0;
        }
        if r.ymin == r.ymax {
            r.ymin -= 1.0;
            r.ymax += 1.0;
        }
        Some(r)
    }
}

/// A nonempty, duplicate-free, ordered list of points.
///
/// Order matters: when several members are equally close to a query point,
/// the projector returns the one with the lowest index.
#[derive(Clone, Debug, PartialEq)]
pub struct FinitePointSet {
    points: Vec<Point>,
}

impl FinitePointSet {
    /// Builds a set, dropping repeated points (first occurrence kept).
    pub fn new(points: Vec<Point>) -> Result<Self> {
        Self::build(points, false)
    }

    /// Builds a set, rejecting repeated points instead of dropping them.
    pub fn new_strict(points: Vec<Point>) -> Result<Self> {
        Self::build(points, true)
    }

    fn build(points: Vec<Point>, strict: bool) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidGeometry("point set is empty".into()));
        }
        if let Some(bad) = points.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidGeometry(format!("non-finite point ({}, {})", bad.x, bad.y)));
        }
        let mut seen = HashSet::with_capacity(points.len());
        let mut unique = Vec::with_capacity(points.len());
        for p in points {
            if seen.insert(p.key()) {
                unique.push(p);
            } else if strict {
                return Err(Error::InvalidGeometry(format!("duplicate point ({}, {})", p.x, p.y)));
            }
        }
        Ok(Self { points: unique })
    }

    pub fn singleton(p: Point) -> Self {
        assert!(p.is_finite(), "singleton point must be finite");
        Self { points: vec![p] }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, p: Point) -> bool {
        self.points.contains(&p)
    }

    /// Nearest member of the set to `q`; ties go to the lowest index.
    pub fn project(&self, q: Point) -> Point {
        let mut best = self.points[0];
        let mut best_d = q.dist_sq(best);
        for &s in &self.points[1..] {
            let d = q.dist_sq(s);
            if d < best_d {
                best = s;
                best_d = d;
            }
        }
        best
    }

    /// Reflection of `q` through its projection: `2 P(q) - q`.
    pub fn reflect(&self, q: Point) -> Point {
        let p = self.project(q);
        Point::new(2.0 * p.x - q.x, 2.0 * p.y - q.y)
    }
}

pub fn project(set: &FinitePointSet, q: Point) -> Point {
    set.project(q)
}

pub fn reflect(set: &FinitePointSet, q: Point) -> Point {
    set.reflect(q)
}

/// An ordered collection of constraint sets defining one feasibility problem.
#[derive(Clone, Debug, PartialEq)]
pub struct Constellation {
    sets: Vec<FinitePointSet>,
    region: Region,
    feasible_hint: Option<Point>,
    provenance: Provenance,
}

impl Constellation {
    pub fn new(sets: Vec<FinitePointSet>, feasible_hint: Option<Point>) -> Result<Self> {
        Self::with_provenance(sets, feasible_hint, Provenance::Explicit)
    }

    pub fn with_provenance(
        sets: Vec<FinitePointSet>,
        feasible_hint: Option<Point>,
        provenance: Provenance,
    ) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::InvalidGeometry("constellation has no sets".into()));
        }
        if let Some(h) = feasible_hint {
            if let Some(i) = sets.iter().position(|s| !s.contains(h)) {
                return Err(Error::InvalidGeometry(format!(
                    "feasible hint ({}, {}) is not a member of set {}",
                    h.x, h.y, i
                )));
            }
        }
        let region = Region::bounding(sets.iter().flat_map(|s| s.points().iter().copied())).expect("sets are nonempty");
        Ok(Self { sets, region, feasible_hint, provenance })
    }

    /// Every set equal to `{(0, 0)}`; handy closed-form fixture.
    pub fn all_origin(m: usize) -> Self {
        let sets = (0..m.max(1)).map(|_| FinitePointSet::singleton(Point::ORIGIN)).collect();
        Self::new(sets, Some(Point::ORIGIN)).expect("origin is common to all sets")
    }

    pub fn sets(&self) -> &[FinitePointSet] {
        &self.sets
    }

    pub fn num_sets(&self) -> usize {
        self.sets.len()
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn feasible_hint(&self) -> Option<Point> {
        self.feasible_hint
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// True when `p` is a member of every set (exact coordinate equality).
    pub fn contains(&self, p: Point) -> bool {
        self.sets.iter().all(|s| s.contains(p))
    }

    /// `sum_i ||y - P_i y||^2`.
    pub fn sum_dist_sq(&self, y: Point) -> f64 {
        self.sets.iter().map(|s| y.dist_sq(s.project(y))).sum()
    }

    /// Content hash of the geometry, used as a stable identifier.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for set in &self.sets {
            hasher.update((set.len() as u64).to_le_bytes());
            for p in set.points() {
                hasher.update(p.x.to_bits().to_le_bytes());
                hasher.update(p.y.to_bits().to_le_bytes());
            }
        }
        let digest = hasher.finalize();
        hex::encode(&digest[..8])
    }
}

/// The feasibility measure, normalized to 1 at the orbit's starting point.
#[derive(Clone, Copy, Debug)]
pub struct FeasibilityGauge<'a> {
    constellation: &'a Constellation,
    denominator: f64,
}

impl<'a> FeasibilityGauge<'a> {
    pub fn new(constellation: &'a Constellation, x0: Point) -> Result<Self> {
        if !x0.is_finite() {
            return Err(Error::InvalidConfig(format!("start ({}, {}) is not finite", x0.x, x0.y)));
        }
        let denominator = constellation.sum_dist_sq(x0);
        if denominator == 0.0 {
            return Err(Error::StartInSolutionSet);
        }
        Ok(Self { constellation, denominator })
    }

    pub fn denominator(&self) -> f64 {
        self.denominator
    }

    pub fn eval(&self, y: Point) -> f64 {
        (self.constellation.sum_dist_sq(y) / self.denominator).sqrt()
    }
}

pub fn make_gauge(constellation: &Constellation, x0: Point) -> Result<FeasibilityGauge<'_>> {
    FeasibilityGauge::new(constellation, x0)
}
