//! Label-setting shortest paths: passage times `T(., S)` to points, vertex
//! sets and half-spaces, with the predecessor forest of unique geodesics.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{GeodesyError, Result};
use crate::lattice::{EdgeId, LatticeBox, Vertex, WeightField, WeightTable};

const NO_PRED: u32 = u32::MAX;

/// Where a passage time is measured to.
///
/// `HalfSpace` is `{v : v . rho >= alpha}`; with non-negative weights the
/// first entry into the half-space is the passage time to the hyperplane
/// `v . rho = alpha`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSpec {
    Point { vertex: Vertex },
    VertexSet { vertices: Vec<Vertex> },
    HalfSpace { rho: Vec<f64>, alpha: f64 },
}

impl TargetSpec {
    pub fn point(v: impl Into<Vertex>) -> Self {
        TargetSpec::Point { vertex: v.into() }
    }

    pub fn half_space(rho: Vec<f64>, alpha: f64) -> Self {
        TargetSpec::HalfSpace { rho, alpha }
    }

    pub fn contains(&self, v: &Vertex) -> bool {
        match self {
            TargetSpec::Point { vertex } => vertex == v,
            TargetSpec::VertexSet { vertices } => vertices.contains(v),
            TargetSpec::HalfSpace { rho, alpha } => v.dot(rho) >= *alpha,
        }
    }

    fn source_indices(&self, bbox: &LatticeBox) -> Result<Vec<usize>> {
        match self {
            TargetSpec::Point { vertex } => Ok(vec![bbox.check_vertex(vertex)?]),
            TargetSpec::VertexSet { vertices } => {
                if vertices.is_empty() {
                    return Err(GeodesyError::InvalidTarget("empty vertex set".into()));
                }
                let mut idx = vertices
                    .iter()
                    .map(|v| bbox.check_vertex(v))
                    .collect::<Result<Vec<_>>>()?;
                idx.sort_unstable();
                idx.dedup();
                Ok(idx)
            }
            TargetSpec::HalfSpace { rho, alpha } => {
                if rho.len() != bbox.dim() {
                    return Err(GeodesyError::DimensionMismatch {
                        expected: bbox.dim(),
                        got: rho.len(),
                    });
                }
                if rho.iter().all(|&r| r == 0.0) || rho.iter().any(|r| !r.is_finite()) || !alpha.is_finite() {
                    return Err(GeodesyError::InvalidTarget(
                        "half-space needs a finite non-zero normal".into(),
                    ));
                }
                Ok(bbox
                    .vertices()
                    .enumerate()
                    .filter(|(_, v)| v.dot(rho) >= *alpha)
                    .map(|(i, _)| i)
                    .collect())
            }
        }
    }
}

/// Restriction of the lattice to a sub-graph.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubgraphMask {
    #[default]
    Full,
    /// Keeps the edges whose endpoints both satisfy `v[axis] >= threshold`.
    HalfPlane { axis: usize, threshold: i64 },
}

impl SubgraphMask {
    pub fn keeps(&self, v: &Vertex) -> bool {
        match *self {
            SubgraphMask::Full => true,
            SubgraphMask::HalfPlane { axis, threshold } => v.0.get(axis).is_some_and(|&c| c >= threshold),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match *self {
            SubgraphMask::HalfPlane { axis, .. } if axis >= dim => Err(GeodesyError::InvalidInput(format!(
                "mask axis {axis} out of range for dimension {dim}"
            ))),
            _ => Ok(()),
        }
    }
}

/// Rough peak memory of one solve, used by callers enforcing a memory cap.
pub fn estimated_solve_bytes(bbox: &LatticeBox) -> usize {
    // dist + pred + settled + table + heap entries
    bbox.vertex_count().saturating_mul(8 + 4 + 1 + 8 * bbox.dim() + 32)
}

/// A box environment prepared for repeated solves under one mask.
#[derive(Clone, Debug)]
pub struct PassageEngine {
    table: WeightTable,
    mask: SubgraphMask,
    fingerprint: u64,
}

#[derive(PartialEq)]
struct Entry {
    dist: f64,
    v: u32,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.v.cmp(&self.v))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PassageEngine {
    pub fn new(env: &WeightField, mask: SubgraphMask) -> Result<Self> {
        mask.validate(env.dim())?;
        let mut table = env.table();
        if let SubgraphMask::HalfPlane { axis, threshold } = mask {
            let bbox = env.bbox().clone();
            table.retain_vertices(|i| bbox.coord_at(i, axis) >= threshold);
        }
        Ok(PassageEngine {
            table,
            mask,
            fingerprint: env.fingerprint(),
        })
    }

    pub fn bbox(&self) -> &LatticeBox {
        self.table.bbox()
    }

    pub fn mask(&self) -> SubgraphMask {
        self.mask
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn table(&self) -> &WeightTable {
        &self.table
    }

    /// Multi-source solve from every target vertex inside the box and mask.
    pub fn solve(&self, target: &TargetSpec) -> Result<PassageMap> {
        let bbox = self.table.bbox();
        let sources: Vec<usize> = target
            .source_indices(bbox)?
            .into_iter()
            .filter(|&i| self.mask.keeps(&bbox.vertex_at(i)))
            .collect();
        if sources.is_empty() {
            return Err(GeodesyError::EmptyTarget);
        }
        let (dist, pred, tie_events) = self.run(&sources);
        Ok(PassageMap {
            bbox: bbox.clone(),
            target: target.clone(),
            mask: self.mask,
            dist,
            pred,
            tie_events,
            fingerprint: self.fingerprint,
        })
    }

    pub fn solve_point(&self, v: &Vertex) -> Result<PassageMap> {
        self.solve(&TargetSpec::point(v.clone()))
    }

    fn run(&self, sources: &[usize]) -> (Vec<f64>, Vec<u32>, u64) {
        let bbox = self.table.bbox();
        let d = bbox.dim();
        let strides = bbox.strides();
        let w = self.table.raw();
        let n = bbox.vertex_count();

        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![NO_PRED; n];
        let mut settled = vec![false; n];
        let mut ties = 0u64;
        let mut heap = BinaryHeap::with_capacity(n.min(1 << 16));
        for &s in sources {
            dist[s] = 0.0;
            heap.push(Entry { dist: 0.0, v: s as u32 });
        }

        while let Some(Entry { dist: dv, v }) = heap.pop() {
            let v = v as usize;
            if settled[v] {
                continue;
            }
            settled[v] = true;
            for (axis, &stride) in strides.iter().enumerate() {
                let fwd = w[v * d + axis];
                let back = if v >= stride { w[(v - stride) * d + axis] } else { f64::NAN };
                for (u, wt) in [(v + stride, fwd), (v.wrapping_sub(stride), back)] {
                    if wt.is_nan() || settled[u] {
                        continue;
                    }
                    let cand = dv + wt;
                    if cand < dist[u] {
                        dist[u] = cand;
                        pred[u] = v as u32;
                        heap.push(Entry { dist: cand, v: u as u32 });
                    } else if cand == dist[u] {
                        ties += 1;
                        let current = pred[u] as usize;
                        if edge_between(bbox, v, u) < edge_between(bbox, current, u) {
                            pred[u] = v as u32;
                        }
                    }
                }
            }
        }
        (dist, pred, ties)
    }
}

fn edge_between(bbox: &LatticeBox, a: usize, b: usize) -> EdgeId {
    EdgeId::between(&bbox.vertex_at(a), &bbox.vertex_at(b)).expect("solver only links neighbours")
}

/// Passage times to a target plus the geodesic forest toward it.
#[derive(Clone, Debug)]
pub struct PassageMap {
    bbox: LatticeBox,
    target: TargetSpec,
    mask: SubgraphMask,
    dist: Vec<f64>,
    pred: Vec<u32>,
    tie_events: u64,
    fingerprint: u64,
}

impl PassageMap {
    pub fn bbox(&self) -> &LatticeBox {
        &self.bbox
    }

    pub fn target(&self) -> &TargetSpec {
        &self.target
    }

    pub fn mask(&self) -> SubgraphMask {
        self.mask
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Exactly-equal relaxations seen during the solve.
    pub fn tie_events(&self) -> u64 {
        self.tie_events
    }

    /// `T(v, target)`, or `None` when the mask disconnects `v` from the target.
    pub fn dist(&self, v: &Vertex) -> Result<Option<f64>> {
        let i = self.bbox.check_vertex(v)?;
        Ok(self.dist_at(i))
    }

    /// Like [`dist`](Self::dist) but unreachable vertices are an error.
    pub fn time(&self, v: &Vertex) -> Result<f64> {
        self.dist(v)?.ok_or_else(|| GeodesyError::Unreachable(v.clone()))
    }

    pub fn dist_at(&self, index: usize) -> Option<f64> {
        let d = self.dist[index];
        d.is_finite().then_some(d)
    }

    /// Raw distances by vertex index; unreachable vertices hold `+inf`.
    pub fn distances(&self) -> &[f64] {
        &self.dist
    }

    pub fn is_source_at(&self, index: usize) -> bool {
        self.dist[index] == 0.0
    }

    /// Next vertex index toward the target.
    pub fn pred_at(&self, index: usize) -> Option<usize> {
        let p = self.pred[index];
        (p != NO_PRED).then_some(p as usize)
    }

    pub fn pred(&self, v: &Vertex) -> Result<Option<Vertex>> {
        let i = self.bbox.check_vertex(v)?;
        Ok(self.pred_at(i).map(|p| self.bbox.vertex_at(p)))
    }

    pub fn pred_edge(&self, v: &Vertex) -> Result<Option<EdgeId>> {
        Ok(self.pred(v)?.map(|p| EdgeId::between(v, &p).expect("pred is a neighbour")))
    }

    /// Vertex indices of the geodesic from `index` to the target.
    pub fn path_indices(&self, index: usize) -> Option<Vec<usize>> {
        self.dist_at(index)?;
        let mut path = vec![index];
        let mut cur = index;
        while let Some(p) = self.pred_at(cur) {
            path.push(p);
            cur = p;
        }
        Some(path)
    }

    pub fn geodesic(&self, x: &Vertex) -> Result<GeodesicPath> {
        let i = self.bbox.check_vertex(x)?;
        let idx = self.path_indices(i).ok_or_else(|| GeodesyError::Unreachable(x.clone()))?;
        Ok(GeodesicPath::new(idx.into_iter().map(|i| self.bbox.vertex_at(i)).collect()))
    }

    /// CSV with one row per vertex: coordinates, distance, and the
    /// predecessor step as (axis, sign). Unreachable vertices print `inf`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.bbox.dim();
        let header: Vec<String> = (0..d).map(|a| format!("x{a}")).collect();
        writeln!(out, "{},dist,pred_axis,pred_sign", header.join(","))?;
        for i in 0..self.dist.len() {
            let v = self.bbox.vertex_at(i);
            for c in &v.0 {
                write!(out, "{c},")?;
            }
            match self.dist_at(i) {
                Some(t) => write!(out, "{t},")?,
                None => write!(out, "inf,")?,
            }
            match self.pred_at(i) {
                Some(p) => {
                    let pv = self.bbox.vertex_at(p);
                    let axis = (0..d).find(|&a| pv.0[a] != v.0[a]).unwrap();
                    writeln!(out, "{axis},{}", pv.0[axis] - v.0[axis])?;
                }
                None => writeln!(out, ",")?,
            }
        }
        Ok(())
    }
}

/// An ordered lattice path; serialised as a JSON array of vertices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GeodesicPath {
    pub vertices: Vec<Vertex>,
}

impl GeodesicPath {
    pub fn new(vertices: Vec<Vertex>) -> Self {
        GeodesicPath { vertices }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn start(&self) -> Option<&Vertex> {
        self.vertices.first()
    }

    pub fn end(&self) -> Option<&Vertex> {
        self.vertices.last()
    }

    pub fn position(&self, v: &Vertex) -> Option<usize> {
        self.vertices.iter().position(|u| u == v)
    }

    pub fn is_lattice_path(&self) -> bool {
        self.vertices.windows(2).all(|w| w[0].is_adjacent(&w[1]))
    }

    /// Sum of edge weights, accumulated from the start.
    pub fn weight(&self, env: &WeightField) -> Result<f64> {
        let mut total = 0.0;
        for w in self.vertices.windows(2) {
            total += env.weight(&EdgeId::between(&w[0], &w[1])?)?;
        }
        Ok(total)
    }

    /// Prefix ending at the first occurrence of `v`.
    pub fn truncated_at(&self, v: &Vertex) -> Option<GeodesicPath> {
        let i = self.position(v)?;
        Some(GeodesicPath::new(self.vertices[..=i].to_vec()))
    }

    pub fn reversed(&self) -> GeodesicPath {
        GeodesicPath::new(self.vertices.iter().rev().cloned().collect())
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.vertices
            .windows(2)
            .map(|w| EdgeId::between(&w[0], &w[1]).expect("consecutive vertices are adjacent"))
    }
}

/// `T(., target)` over `env.box` restricted to `mask`.
pub fn passage_map(env: &WeightField, target: &TargetSpec, mask: SubgraphMask) -> Result<PassageMap> {
    PassageEngine::new(env, mask)?.solve(target)
}

/// `T(x, y)` on the full box.
pub fn point_passage(env: &WeightField, x: &Vertex, y: &Vertex) -> Result<f64> {
    env.bbox().check_vertex(x)?;
    let map = passage_map(env, &TargetSpec::point(y.clone()), SubgraphMask::Full)?;
    map.time(x)
}

/// The unique geodesic from `x` to `target` (deterministic under the tie-break rule).
pub fn geodesic(env: &WeightField, x: &Vertex, target: &TargetSpec, mask: SubgraphMask) -> Result<GeodesicPath> {
    passage_map(env, target, mask)?.geodesic(x)
}
