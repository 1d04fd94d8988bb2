//! Finite boxes of the integer lattice and seeded i.i.d. edge-weight environments.
//!
//! Weights are never stored: every edge weight is the inverse CDF of a
//! uniform variate obtained by hashing `(seed, absolute edge coordinates)`.
//! Two fields built from the same seed and law agree on every edge they
//! share, whatever boxes they were built on, and translating a field is
//! exact.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{GeodesyError, Result};

/// A vertex of the lattice. Ordering is lexicographic on coordinates.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vertex(pub Vec<i64>);

impl Vertex {
    pub fn origin(dim: usize) -> Self {
        Vertex(vec![0; dim])
    }

    /// `k` times the unit vector along `axis`.
    pub fn axis(dim: usize, axis: usize, k: i64) -> Self {
        let mut c = vec![0; dim];
        c[axis] = k;
        Vertex(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn offset(&self, z: &[i64]) -> Vertex {
        Vertex(self.0.iter().zip(z).map(|(a, b)| a + b).collect())
    }

    pub fn sup_norm(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn euclidean_norm(&self) -> f64 {
        self.0.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>().sqrt()
    }

    pub fn dot(&self, rho: &[f64]) -> f64 {
        self.0.iter().zip(rho).map(|(&c, r)| c as f64 * r).sum()
    }

    /// True when the two vertices differ by a unit step along one axis.
    pub fn is_adjacent(&self, other: &Vertex) -> bool {
        self.dim() == other.dim()
            && self
                .0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| (a - b).unsigned_abs())
                .sum::<u64>()
                == 1
    }
}

impl fmt::Debug for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl<const N: usize> From<[i64; N]> for Vertex {
    fn from(c: [i64; N]) -> Self {
        Vertex(c.to_vec())
    }
}

impl From<Vec<i64>> for Vertex {
    fn from(c: Vec<i64>) -> Self {
        Vertex(c)
    }
}

/// Canonical name of the undirected edge `{base, base + e_axis}`.
///
/// `base` is always the lexicographically smaller endpoint, so each
/// undirected edge has exactly one `EdgeId`. The derived ordering
/// (base first, then axis) is the tie-break order used by the solvers.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId {
    pub base: Vertex,
    pub axis: usize,
}

impl EdgeId {
    pub fn new(base: Vertex, axis: usize) -> Self {
        EdgeId { base, axis }
    }

    /// Canonical id of the edge between two adjacent vertices.
    pub fn between(a: &Vertex, b: &Vertex) -> Result<Self> {
        if !a.is_adjacent(b) {
            return Err(GeodesyError::InvalidInput(format!(
                "{a} and {b} are not lattice neighbours"
            )));
        }
        let axis = a.0.iter().zip(&b.0).position(|(x, y)| x != y).unwrap();
        let base = if a < b { a.clone() } else { b.clone() };
        Ok(EdgeId { base, axis })
    }

    pub fn head(&self) -> Vertex {
        let mut c = self.base.0.clone();
        c[self.axis] += 1;
        Vertex(c)
    }

    pub fn endpoints(&self) -> (Vertex, Vertex) {
        (self.base.clone(), self.head())
    }

    pub fn translated(&self, z: &[i64]) -> EdgeId {
        EdgeId {
            base: self.base.offset(z),
            axis: self.axis,
        }
    }
}

impl fmt::Debug for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}, {}}}", self.base, self.head())
    }
}

/// Axis-aligned box `[lo, hi]` of `Z^d`, with `d >= 2`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawBox")]
pub struct LatticeBox {
    lo: Vec<i64>,
    hi: Vec<i64>,
    #[serde(skip)]
    strides: Vec<usize>,
}

#[derive(Deserialize)]
struct RawBox {
    lo: Vec<i64>,
    hi: Vec<i64>,
}

impl TryFrom<RawBox> for LatticeBox {
    type Error = GeodesyError;
    fn try_from(raw: RawBox) -> Result<Self> {
        LatticeBox::new(raw.lo, raw.hi)
    }
}

/// Vertex counts above this do not fit the solvers' 32-bit predecessor slots.
pub const MAX_VERTICES: usize = u32::MAX as usize - 1;

impl LatticeBox {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(GeodesyError::InvalidBox(format!(
                "lo has {} coordinates but hi has {}",
                lo.len(),
                hi.len()
            )));
        }
        if lo.len() < 2 {
            return Err(GeodesyError::InvalidBox(format!(
                "dimension must be at least 2, got {}",
                lo.len()
            )));
        }
        let mut strides = Vec::with_capacity(lo.len());
        let mut count: usize = 1;
        for (axis, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if l > h {
                return Err(GeodesyError::InvalidBox(format!(
                    "lo[{axis}] = {l} exceeds hi[{axis}] = {h}"
                )));
            }
            strides.push(count);
            let extent = usize::try_from(h - l + 1)
                .map_err(|_| GeodesyError::InvalidBox("extent overflow".into()))?;
            count = count
                .checked_mul(extent)
                .filter(|&c| c <= MAX_VERTICES)
                .ok_or_else(|| GeodesyError::InvalidBox("too many vertices".into()))?;
        }
        Ok(LatticeBox { lo, hi, strides })
    }

    /// The cube `[-radius, radius]^dim`.
    pub fn centered(dim: usize, radius: i64) -> Result<Self> {
        LatticeBox::new(vec![-radius; dim], vec![radius; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn hi(&self) -> &[i64] {
        &self.hi
    }

    pub fn extent(&self, axis: usize) -> usize {
        (self.hi[axis] - self.lo[axis] + 1) as usize
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn vertex_count(&self) -> usize {
        (0..self.dim()).map(|a| self.extent(a)).product()
    }

    pub fn contains(&self, v: &Vertex) -> bool {
        v.dim() == self.dim()
            && v.0
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(c, (l, h))| l <= c && c <= h)
    }

    /// Both endpoints inside the box.
    pub fn contains_edge(&self, e: &EdgeId) -> bool {
        e.axis < self.dim() && self.contains(&e.base) && e.base.0[e.axis] < self.hi[e.axis]
    }

    pub fn on_boundary(&self, v: &Vertex) -> bool {
        v.0.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .any(|(c, (l, h))| c == l || c == h)
    }

    /// Linear index of `v` (axis 0 varies fastest).
    pub fn index_of(&self, v: &Vertex) -> Option<usize> {
        if !self.contains(v) {
            return None;
        }
        Some(
            v.0.iter()
                .zip(&self.lo)
                .zip(&self.strides)
                .map(|((c, l), s)| (c - l) as usize * s)
                .sum(),
        )
    }

    pub fn vertex_at(&self, index: usize) -> Vertex {
        let mut c = Vec::with_capacity(self.dim());
        let mut rest = index;
        for axis in 0..self.dim() {
            let e = self.extent(axis);
            c.push(self.lo[axis] + (rest % e) as i64);
            rest /= e;
        }
        Vertex(c)
    }

    /// Coordinate of `index` along one axis.
    pub fn coord_at(&self, index: usize, axis: usize) -> i64 {
        self.lo[axis] + ((index / self.strides[axis]) % self.extent(axis)) as i64
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        (0..self.vertex_count()).map(move |i| self.vertex_at(i))
    }

    pub fn translated(&self, z: &[i64]) -> LatticeBox {
        let lo = self.lo.iter().zip(z).map(|(a, b)| a + b).collect();
        let hi = self.hi.iter().zip(z).map(|(a, b)| a + b).collect();
        LatticeBox {
            lo,
            hi,
            strides: self.strides.clone(),
        }
    }

    pub(crate) fn check_vertex(&self, v: &Vertex) -> Result<usize> {
        if v.dim() != self.dim() {
            return Err(GeodesyError::DimensionMismatch {
                expected: self.dim(),
                got: v.dim(),
            });
        }
        self.index_of(v)
            .ok_or_else(|| GeodesyError::OutOfBox(format!("vertex {v}")))
    }
}

/// Continuous edge-weight law on `[0, inf)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    Exponential { rate: f64 },
    Uniform { a: f64, b: f64 },
    ShiftedExponential { shift: f64, rate: f64 },
}

impl DistributionSpec {
    /// Rejects parameters that would produce atoms, negative weights or
    /// non-finite values.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GeodesyError::InvalidDistribution(m));
        match *self {
            DistributionSpec::Exponential { rate } => {
                if !(rate.is_finite() && rate > 0.0) {
                    return bad(format!("exponential rate must be positive, got {rate}"));
                }
            }
            DistributionSpec::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite() && a >= 0.0 && a < b) {
                    return bad(format!("uniform needs 0 <= a < b, got a={a} b={b}"));
                }
            }
            DistributionSpec::ShiftedExponential { shift, rate } => {
                if !(shift.is_finite() && shift >= 0.0) {
                    return bad(format!("shift must be non-negative, got {shift}"));
                }
                if !(rate.is_finite() && rate > 0.0) {
                    return bad(format!("exponential rate must be positive, got {rate}"));
                }
            }
        }
        Ok(())
    }

    /// Inverse CDF at `u` in the open interval (0, 1).
    #[inline]
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            // 1 - U has the same law as U, and -ln(u) stays positive for u < 1.
            DistributionSpec::Exponential { rate } => -u.ln() / rate,
            DistributionSpec::ShiftedExponential { shift, rate } => shift - u.ln() / rate,
            DistributionSpec::Uniform { a, b } => {
                let w = a + (b - a) * u;
                if w >= b {
                    f64::from_bits(b.to_bits() - 1)
                } else if w <= a {
                    f64::from_bits(a.to_bits() + 1).max(f64::MIN_POSITIVE)
                } else {
                    w
                }
            }
        }
    }

    pub fn cdf(&self, w: f64) -> f64 {
        match *self {
            DistributionSpec::Exponential { rate } => {
                if w <= 0.0 {
                    0.0
                } else {
                    1.0 - (-rate * w).exp()
                }
            }
            DistributionSpec::ShiftedExponential { shift, rate } => {
                if w <= shift {
                    0.0
                } else {
                    1.0 - (-rate * (w - shift)).exp()
                }
            }
            DistributionSpec::Uniform { a, b } => ((w - a) / (b - a)).clamp(0.0, 1.0),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DistributionSpec::Exponential { rate } => 1.0 / rate,
            DistributionSpec::ShiftedExponential { shift, rate } => shift + 1.0 / rate,
            DistributionSpec::Uniform { a, b } => 0.5 * (a + b),
        }
    }
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 64-bit hash of an absolute edge.
#[inline]
pub fn edge_hash(seed: u64, base: impl IntoIterator<Item = i64>, axis: usize) -> u64 {
    let mut h = splitmix(seed ^ 0x5851_f42d_4c95_7f2d);
    h = splitmix(h ^ axis as u64);
    for c in base {
        h = splitmix(h ^ c as u64);
    }
    h
}

/// Maps a hash to the open interval (0, 1) on a 2^-52 grid offset by half a step.
#[inline]
pub fn unit_open(h: u64) -> f64 {
    ((h >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

#[derive(Clone, Debug)]
enum Source {
    Hashed { seed: u64, dist: DistributionSpec },
    /// Explicit weights keyed by absolute edge.
    Fixture(Arc<BTreeMap<EdgeId, f64>>),
}

/// An immutable edge-weight configuration restricted to a box.
///
/// `offset` records accumulated shifts: the weight of box edge `e` is the
/// weight of absolute edge `e + offset`.
#[derive(Clone, Debug)]
pub struct WeightField {
    source: Source,
    bbox: LatticeBox,
    offset: Vec<i64>,
}

impl WeightField {
    pub fn new(seed: u64, dist: DistributionSpec, bbox: LatticeBox) -> Result<Self> {
        dist.validate()?;
        let offset = vec![0; bbox.dim()];
        Ok(WeightField {
            source: Source::Hashed { seed, dist },
            bbox,
            offset,
        })
    }

    /// A field with explicitly listed weights. Every edge of `bbox` must be present.
    pub fn from_fixture(bbox: LatticeBox, weights: BTreeMap<EdgeId, f64>) -> Result<Self> {
        for (e, &w) in &weights {
            if e.base.dim() != bbox.dim() || e.axis >= bbox.dim() {
                return Err(GeodesyError::InvalidFixture(format!(
                    "edge {e:?} has the wrong dimension"
                )));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(GeodesyError::InvalidFixture(format!(
                    "edge {e:?} has non-positive weight {w}"
                )));
            }
        }
        let field = WeightField {
            source: Source::Fixture(Arc::new(weights)),
            offset: vec![0; bbox.dim()],
            bbox,
        };
        for e in field.edges() {
            field.weight(&e)?;
        }
        Ok(field)
    }

    pub fn bbox(&self) -> &LatticeBox {
        &self.bbox
    }

    pub fn dim(&self) -> usize {
        self.bbox.dim()
    }

    pub fn distribution(&self) -> Option<DistributionSpec> {
        match &self.source {
            Source::Hashed { dist, .. } => Some(*dist),
            Source::Fixture(_) => None,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match &self.source {
            Source::Hashed { seed, .. } => Some(*seed),
            Source::Fixture(_) => None,
        }
    }

    /// Same configuration restricted to a different box.
    pub fn with_box(&self, bbox: LatticeBox) -> Result<Self> {
        if bbox.dim() != self.dim() {
            return Err(GeodesyError::DimensionMismatch {
                expected: self.dim(),
                got: bbox.dim(),
            });
        }
        let field = WeightField {
            source: self.source.clone(),
            bbox,
            offset: self.offset.clone(),
        };
        if let Source::Fixture(_) = field.source {
            for e in field.edges() {
                field.weight(&e)?;
            }
        }
        Ok(field)
    }

    /// Weight of a box edge.
    pub fn weight(&self, e: &EdgeId) -> Result<f64> {
        if e.base.dim() != self.dim() {
            return Err(GeodesyError::DimensionMismatch {
                expected: self.dim(),
                got: e.base.dim(),
            });
        }
        if !self.bbox.contains_edge(e) {
            return Err(GeodesyError::OutOfBox(format!("edge {e:?}")));
        }
        self.absolute_weight(e.base.0.iter().copied(), e.axis)
    }

    #[inline]
    fn absolute_weight(&self, base: impl Iterator<Item = i64>, axis: usize) -> Result<f64> {
        let abs = base.zip(&self.offset).map(|(c, z)| c + z);
        match &self.source {
            Source::Hashed { seed, dist } => Ok(dist.quantile(unit_open(edge_hash(*seed, abs, axis)))),
            Source::Fixture(map) => {
                let key = EdgeId::new(Vertex(abs.collect()), axis);
                map.get(&key)
                    .copied()
                    .ok_or(GeodesyError::MissingFixtureEdge(key))
            }
        }
    }

    /// `theta_z`: the returned field satisfies `w'({x,y}) = w({x+z, y+z})`,
    /// and its box is this box translated by `-z`.
    pub fn shifted(&self, z: &[i64]) -> Result<Self> {
        if z.len() != self.dim() {
            return Err(GeodesyError::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        let neg: Vec<i64> = z.iter().map(|c| -c).collect();
        Ok(WeightField {
            source: self.source.clone(),
            bbox: self.bbox.translated(&neg),
            offset: self.offset.iter().zip(z).map(|(a, b)| a + b).collect(),
        })
    }

    /// All edges with both endpoints in the box.
    pub fn edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        let d = self.dim();
        self.bbox.vertices().flat_map(move |v| {
            (0..d).filter_map(move |axis| {
                let e = EdgeId::new(v.clone(), axis);
                self.bbox.contains_edge(&e).then_some(e)
            })
        })
    }

    /// Identifier of the configuration (source and shift, not the box).
    pub fn fingerprint(&self) -> u64 {
        let mut h = match &self.source {
            Source::Hashed { seed, dist } => {
                let mut h = splitmix(*seed);
                let params: [f64; 2] = match *dist {
                    DistributionSpec::Exponential { rate } => [1.0, rate],
                    DistributionSpec::Uniform { a, b } => [a, b + 2.0],
                    DistributionSpec::ShiftedExponential { shift, rate } => [shift + 3.0, rate],
                };
                for p in params {
                    h = splitmix(h ^ p.to_bits());
                }
                h
            }
            Source::Fixture(map) => {
                let mut h = splitmix(0xf1);
                for (e, w) in map.iter() {
                    h = edge_hash(h, e.base.0.iter().copied(), e.axis);
                    h = splitmix(h ^ w.to_bits());
                }
                h
            }
        };
        for &z in &self.offset {
            h = splitmix(h ^ z as u64);
        }
        h
    }

    /// Weights of the whole box laid out for the solvers.
    pub fn table(&self) -> WeightTable {
        WeightTable::build(self)
    }
}

/// Dense per-vertex edge weights of a box: slot `v * d + axis` holds the
/// weight of `{v, v + e_axis}`, or NaN when that edge leaves the box or is
/// masked out.
#[derive(Clone, Debug)]
pub struct WeightTable {
    bbox: LatticeBox,
    weights: Vec<f64>,
}

impl WeightTable {
    fn build(field: &WeightField) -> Self {
        let bbox = field.bbox.clone();
        let d = bbox.dim();
        let n = bbox.vertex_count();
        let mut weights = vec![f64::NAN; n * d];
        let mut coords = bbox.lo.clone();
        for v in 0..n {
            for axis in 0..d {
                if coords[axis] < bbox.hi[axis] {
                    // Fixture coverage is checked at construction.
                    weights[v * d + axis] = field
                        .absolute_weight(coords.iter().copied(), axis)
                        .expect("fixture covers its box");
                }
            }
            for (c, (&lo, &hi)) in coords.iter_mut().zip(bbox.lo.iter().zip(&bbox.hi)) {
                if *c < hi {
                    *c += 1;
                    break;
                }
                *c = lo;
            }
        }
        WeightTable { bbox, weights }
    }

    pub fn bbox(&self) -> &LatticeBox {
        &self.bbox
    }

    /// Weight of the edge from `v` along `+axis`, if present.
    #[inline]
    pub fn forward(&self, v: usize, axis: usize) -> Option<f64> {
        let w = self.weights[v * self.bbox.dim() + axis];
        (!w.is_nan()).then_some(w)
    }

    #[inline]
    pub(crate) fn raw(&self) -> &[f64] {
        &self.weights
    }

    /// Removes every edge with an endpoint outside the kept vertex set.
    pub(crate) fn retain_vertices(&mut self, keep: impl Fn(usize) -> bool) {
        let d = self.bbox.dim();
        for v in 0..self.bbox.vertex_count() {
            let keep_v = keep(v);
            for axis in 0..d {
                let slot = v * d + axis;
                if self.weights[slot].is_nan() {
                    continue;
                }
                if !keep_v || !keep(v + self.bbox.strides[axis]) {
                    self.weights[slot] = f64::NAN;
                }
            }
        }
    }
}
