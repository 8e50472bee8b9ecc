//! On-disk formats: constellation documents (JSON), iteration maps (binary
//! PGM), and sweep/trace tables (CSV).
//!
//! Every artifact carries a [`Manifest`]. Constellation documents embed it,
//! PGM files carry it as a header comment, and CSV tables have it written
//! next to them as `<file>.manifest.json` so the table itself stays plain.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::algorithms::{AlgorithmKind, OrbitState, OrbitTrace};
use crate::error::{Error, Result};
use crate::experiments::{IterationMap, SweepResult};
use crate::generate::Provenance;
use crate::geometry::{Constellation, FinitePointSet, Point, Region};

pub const FORMAT_VERSION: u32 = 1;
const PGM_MANIFEST_TAG: &str = "# feaslab-manifest ";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayloadKind {
    Constellation,
    Trace,
    Sweep,
    Map,
}

/// Self-description shared by every persisted artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub payload: PayloadKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constellation_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<Provenance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<AlgorithmKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Region>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_lambda: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_starts: Option<usize>,
}

impl Manifest {
    pub fn new(payload: PayloadKind) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            payload,
            constellation_id: None,
            seed: None,
            spec: None,
            algorithm: None,
            lambda: None,
            epsilon: None,
            max_iterations: None,
            region: None,
            start: None,
            width: None,
            height: None,
            n_lambda: None,
            n_starts: None,
        }
    }

    fn with_constellation(mut self, c: &Constellation) -> Self {
        self.constellation_id = Some(c.fingerprint());
        self.seed = c.provenance().seed();
        self.spec = Some(c.provenance().clone());
        self
    }

    pub fn for_constellation(c: &Constellation) -> Self {
        Self::new(PayloadKind::Constellation).with_constellation(c)
    }

    pub fn for_trace(trace: &OrbitTrace, c: &Constellation) -> Self {
        let mut m = Self::new(PayloadKind::Trace).with_constellation(c);
        m.algorithm = Some(trace.config.kind);
        m.lambda = Some(trace.config.lambda);
        m.epsilon = Some(trace.config.epsilon);
        m.max_iterations = Some(trace.config.max_iterations);
        m.start = Some(trace.start);
        m
    }

    pub fn for_sweep(sweep: &SweepResult, c: &Constellation) -> Self {
        let mut m = Self::new(PayloadKind::Sweep).with_constellation(c);
        m.algorithm = Some(sweep.kind);
        m.epsilon = Some(sweep.epsilon);
        m.max_iterations = Some(sweep.max_iterations);
        m.region = Some(sweep.region);
        m.n_lambda = Some(sweep.lambdas.len());
        m.n_starts = Some(sweep.starts_per_lambda);
        m
    }

    /// Map manifest; the spec is attached when the constellation is at hand.
    pub fn for_map(map: &IterationMap, c: Option<&Constellation>) -> Self {
        let mut m = match c {
            Some(c) => Self::new(PayloadKind::Map).with_constellation(c),
            None => Self::new(PayloadKind::Map),
        };
        m.constellation_id = Some(map.metadata.constellation_id.clone());
        m.seed = map.metadata.seed;
        m.algorithm = Some(map.metadata.kind);
        m.lambda = Some(map.metadata.lambda);
        m.epsilon = Some(map.metadata.epsilon);
        m.max_iterations = Some(map.metadata.max_iterations);
        m.region = Some(map.region);
        m.width = Some(map.width);
        m.height = Some(map.height);
        m
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    fn check(&self, payload: PayloadKind) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::VersionMismatch { found: self.format_version, expected: FORMAT_VERSION });
        }
        if self.payload != payload {
            return Err(Error::Format(format!("expected a {payload:?} payload, found {:?}", self.payload)));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct ConstellationDoc {
    manifest: Manifest,
    feasible_hint: Option<Point>,
    sets: Vec<Vec<Point>>,
}

/// Serializes a constellation as pretty-printed JSON. Coordinates use the
/// shortest decimal that reads back to the same binary64 value.
pub fn write_constellation(c: &Constellation) -> String {
    let doc = ConstellationDoc {
        manifest: Manifest::for_constellation(c),
        feasible_hint: c.feasible_hint(),
        sets: c.sets().iter().map(|s| s.points().to_vec()).collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("constellation serializes");
    s.push('\n');
    s
}

pub fn read_constellation(text: &str) -> Result<Constellation> {
    let doc: ConstellationDoc = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    doc.manifest.check(PayloadKind::Constellation)?;
    let sets = doc.sets.into_iter().map(FinitePointSet::new_strict).collect::<Result<Vec<_>>>()?;
    let provenance = doc.manifest.spec.clone().unwrap_or_default();
    let c = Constellation::with_provenance(sets, doc.feasible_hint, provenance)?;
    if let Some(id) = &doc.manifest.constellation_id {
        if *id != c.fingerprint() {
            return Err(Error::Format(format!(
                "constellation id {id} does not match its geometry ({})",
                c.fingerprint()
            )));
        }
    }
    Ok(c)
}

/// Gray level for `count`: `round(255 * count / cap)` with halves rounded up,
/// in exact integer arithmetic.
pub fn gray_level(count: u32, cap: usize) -> u8 {
    let cap = cap.max(1) as u64;
    let count = u64::from(count).min(cap);
    ((2 * 255 * count + cap) / (2 * cap)) as u8
}

/// Binary PGM (P5, maxval 255) with the manifest as a header comment.
pub fn encode_map_pgm(map: &IterationMap, manifest: &Manifest) -> Vec<u8> {
    let json = serde_json::to_string(manifest).expect("manifest serializes");
    let mut header = String::new();
    let _ = write!(header, "P5\n{PGM_MANIFEST_TAG}{json}\n{} {}\n255\n", map.width, map.height);
    let mut out = header.into_bytes();
    out.reserve(map.counts.len());
    out.extend(map.counts.iter().map(|&c| gray_level(c, map.metadata.max_iterations)));
    out
}

/// Decoded PGM image.
#[derive(Clone, Debug, PartialEq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub manifest: Option<Manifest>,
    pub pixels: Vec<u8>,
}

/// Reads a binary PGM with maxval 255, picking up an embedded manifest.
pub fn decode_pgm(bytes: &[u8]) -> Result<PgmImage> {
    let mut pos = 0;
    let mut manifest = None;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos >= bytes.len() {
            return Err(Error::Format("truncated PGM header".into()));
        }
        if bytes[pos] == b'#' {
            let end = bytes[pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |e| pos + e);
            let line = std::str::from_utf8(&bytes[pos..end]).map_err(|e| Error::Format(e.to_string()))?;
            if let Some(json) = line.strip_prefix(PGM_MANIFEST_TAG) {
                manifest = Some(serde_json::from_str(json).map_err(|e| Error::Format(e.to_string()))?);
            }
            pos = end;
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if tokens[0] != "P5" || tokens[3] != "255" {
        return Err(Error::Format("expected a binary PGM with maxval 255".into()));
    }
    let parse = |t: &str| t.parse::<usize>().map_err(|e| Error::Format(format!("bad PGM dimension '{t}': {e}")));
    let (width, height) = (parse(&tokens[1])?, parse(&tokens[2])?);
    let pixels = bytes.get(pos..).unwrap_or_default().to_vec();
    if pixels.len() != width * height {
        return Err(Error::Format(format!("PGM payload has {} bytes, expected {}", pixels.len(), width * height)));
    }
    Ok(PgmImage { width, height, manifest, pixels })
}

/// `lambda,rate` table, one row per grid value.
pub fn write_sweep_csv(sweep: &SweepResult) -> String {
    let mut out = String::from("lambda,rate\n");
    for (l, r) in sweep.lambdas.iter().zip(&sweep.rates) {
        let _ = writeln!(out, "{l},{r}");
    }
    out
}

/// One row per recorded iteration. For DR the governing columns hold the
/// block mean.
pub fn write_trace_csv(trace: &OrbitTrace) -> String {
    let mut out = String::from("k,x,y,monitored_x,monitored_y,d\n");
    for (k, ((state, y), d)) in trace.governing.iter().zip(&trace.monitored).zip(&trace.errors).enumerate() {
        let g = match state {
            OrbitState::Single { current } => *current,
            OrbitState::Block { mean, .. } => *mean,
        };
        let _ = writeln!(out, "{k},{},{},{},{},{d}", g.x, g.y, y.x, y.y);
    }
    out
}
