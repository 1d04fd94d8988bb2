//! Geodesic trees, eta indicator fields, coalescence detection and
//! competition (infection) partitions.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GeodesyError, Result};
use crate::lattice::{EdgeId, LatticeBox, Vertex, WeightField};
use crate::passage::{GeodesicPath, PassageEngine, PassageMap, SubgraphMask, TargetSpec};
use crate::TOL;

const NO_PARENT: u32 = u32::MAX;

/// The tree of all geodesics out of `root`, stored as parent pointers toward the root.
#[derive(Clone, Debug)]
pub struct GeodesicTree {
    root: Vertex,
    bbox: LatticeBox,
    parent: Vec<u32>,
    env_ref: u64,
}

impl GeodesicTree {
    pub fn from_passage_map(map: &PassageMap) -> Result<Self> {
        let TargetSpec::Point { vertex } = map.target() else {
            return Err(GeodesyError::InvalidInput("a geodesic tree needs a point root".into()));
        };
        let parent = (0..map.bbox().vertex_count())
            .map(|i| map.pred_at(i).map_or(NO_PARENT, |p| p as u32))
            .collect();
        Ok(GeodesicTree {
            root: vertex.clone(),
            bbox: map.bbox().clone(),
            parent,
            env_ref: map.fingerprint(),
        })
    }

    pub fn root(&self) -> &Vertex {
        &self.root
    }

    pub fn bbox(&self) -> &LatticeBox {
        &self.bbox
    }

    pub fn env_ref(&self) -> u64 {
        self.env_ref
    }

    pub fn parent(&self, v: &Vertex) -> Result<Option<Vertex>> {
        let i = self.bbox.check_vertex(v)?;
        Ok(self.parent_at(i).map(|p| self.bbox.vertex_at(p)))
    }

    pub fn parent_at(&self, index: usize) -> Option<usize> {
        let p = self.parent[index];
        (p != NO_PARENT).then_some(p as usize)
    }

    /// Overrides one parent pointer. Intended for building negative controls.
    pub fn set_parent(&mut self, child: &Vertex, parent: Option<&Vertex>) -> Result<()> {
        let c = self.bbox.check_vertex(child)?;
        self.parent[c] = match parent {
            Some(p) => self.bbox.check_vertex(p)? as u32,
            None => NO_PARENT,
        };
        Ok(())
    }

    /// Tree edges as (child, parent) pairs, in vertex-index order.
    pub fn edges(&self) -> Vec<(Vertex, Vertex)> {
        (0..self.parent.len())
            .filter_map(|i| self.parent_at(i).map(|p| (self.bbox.vertex_at(i), self.bbox.vertex_at(p))))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.parent.iter().filter(|&&p| p != NO_PARENT).count()
    }

    /// Vertices holding a parent pointer, plus the root.
    pub fn reachable_count(&self) -> usize {
        self.edge_count() + 1
    }

    /// Path `v -> ... -> root`; `None` if parent pointers loop or dead-end.
    pub fn path_to_root(&self, v: &Vertex) -> Result<Option<GeodesicPath>> {
        let i = self.bbox.check_vertex(v)?;
        Ok(self
            .index_path_to_root(i)
            .map(|p| GeodesicPath::new(p.into_iter().map(|j| self.bbox.vertex_at(j)).collect())))
    }

    fn index_path_to_root(&self, start: usize) -> Option<Vec<usize>> {
        let root = self.bbox.index_of(&self.root)?;
        let mut path = vec![start];
        let mut cur = start;
        while cur != root {
            cur = self.parent_at(cur)?;
            path.push(cur);
            if path.len() > self.parent.len() {
                return None;
            }
        }
        Some(path)
    }

    /// Hop count from the root for every vertex (`None` when the root is not reached).
    pub fn depths(&self) -> Vec<Option<usize>> {
        let n = self.parent.len();
        let mut depth: Vec<Option<usize>> = vec![None; n];
        let Some(root) = self.bbox.index_of(&self.root) else {
            return depth;
        };
        depth[root] = Some(0);
        // 0 = unknown, 1 = on the current walk, 2 = resolved
        let mut state = vec![0u8; n];
        state[root] = 2;
        let mut stack = Vec::new();
        for start in 0..n {
            let mut cur = start;
            while state[cur] == 0 {
                state[cur] = 1;
                stack.push(cur);
                match self.parent_at(cur) {
                    Some(p) => cur = p,
                    None => break,
                }
            }
            // a walk that ends on the current stack is a cycle or a dead end
            let mut base = if state[cur] == 2 { depth[cur] } else { None };
            while let Some(v) = stack.pop() {
                base = base.map(|d| d + 1);
                depth[v] = base;
                state[v] = 2;
            }
        }
        depth
    }

    /// True when following parent pointers never revisits a vertex
    /// (a 2-cycle `u <-> v` counts as a cycle).
    pub fn is_acyclic(&self) -> bool {
        let n = self.parent.len();
        let mut state = vec![0u8; n];
        for start in 0..n {
            let mut cur = start;
            let mut walk = Vec::new();
            loop {
                match state[cur] {
                    1 => return false,
                    2 => break,
                    _ => {}
                }
                state[cur] = 1;
                walk.push(cur);
                match self.parent_at(cur) {
                    Some(p) => cur = p,
                    None => break,
                }
            }
            for v in walk {
                state[v] = 2;
            }
        }
        true
    }

    /// Number of distinct tree branches crossing the sup-norm sphere of
    /// radius `r` (around the root) that continue out to radius `r_far`.
    pub fn branches_past_radius(&self, r: i64, r_far: i64) -> usize {
        let mut crossing = BTreeSet::new();
        for i in 0..self.parent.len() {
            let v = self.bbox.vertex_at(i);
            if sup_dist(&v, &self.root) < r_far {
                continue;
            }
            if let Some(path) = self.index_path_to_root(i) {
                if let Some(&j) = path
                    .iter()
                    .rev()
                    .find(|&&j| sup_dist(&self.bbox.vertex_at(j), &self.root) >= r)
                {
                    crossing.insert(j);
                }
            }
        }
        crossing.len()
    }

    pub fn to_document(&self) -> TreeDocument {
        let depths = self.depths();
        let nodes = (0..self.parent.len())
            .map(|i| TreeNode {
                v: self.bbox.vertex_at(i),
                parent: self.parent_at(i).map(|p| self.bbox.vertex_at(p)),
                depth: depths[i],
            })
            .collect();
        TreeDocument {
            bbox: self.bbox.clone(),
            root: self.root.clone(),
            nodes,
        }
    }
}

fn sup_dist(a: &Vertex, b: &Vertex) -> i64 {
    a.0.iter().zip(&b.0).map(|(x, y)| (x - y).abs()).max().unwrap_or(0)
}

/// `T(root, .)` tree of a single-source solve.
pub fn geodesic_tree(env: &WeightField, root: &Vertex) -> Result<GeodesicTree> {
    let map = PassageEngine::new(env, SubgraphMask::Full)?.solve_point(root)?;
    GeodesicTree::from_passage_map(&map)
}

/// Outcome of [`verify_tree`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeReport {
    pub acyclic: bool,
    /// Every vertex with a parent reaches the root, and only lattice neighbours are linked.
    pub connected: bool,
    pub edge_count: usize,
    pub reachable: usize,
    pub samples: usize,
    /// max |path weight(root -> v) - T(root, v)| over the sampled vertices.
    pub max_deviation: f64,
    /// Sampled vertices whose tree path differs from a freshly solved geodesic.
    pub subpath_violations: usize,
}

impl TreeReport {
    pub fn passes(&self) -> bool {
        self.acyclic
            && self.connected
            && self.edge_count + 1 == self.reachable
            && self.max_deviation <= TOL
            && self.subpath_violations == 0
    }
}

/// Checks tree structure, path weights and the directed-subpath property
/// on `samples` random vertices, each against an independent solve rooted
/// at the sampled vertex.
pub fn verify_tree(tree: &GeodesicTree, env: &WeightField, samples: usize, seed: u64) -> Result<TreeReport> {
    if tree.env_ref != env.fingerprint() || tree.bbox != *env.bbox() {
        return Err(GeodesyError::EnvironmentMismatch);
    }
    let acyclic = tree.is_acyclic();
    let n = tree.parent.len();
    let adjacent = (0..n).all(|i| match tree.parent_at(i) {
        Some(p) => tree.bbox.vertex_at(i).is_adjacent(&tree.bbox.vertex_at(p)),
        None => true,
    });
    let reaches_root = acyclic && (0..n).all(|i| tree.parent_at(i).is_none() || tree.index_path_to_root(i).is_some());
    let edge_count = tree.edge_count();
    let mut report = TreeReport {
        acyclic,
        connected: adjacent && reaches_root,
        edge_count,
        reachable: edge_count + 1,
        samples: 0,
        max_deviation: f64::INFINITY,
        subpath_violations: 0,
    };
    if !report.connected {
        return Ok(report);
    }

    let engine = PassageEngine::new(env, SubgraphMask::Full)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_dev: f64 = 0.0;
    for _ in 0..samples {
        let i = rng.gen_range(0..n);
        let v = tree.bbox.vertex_at(i);
        let Some(to_root) = tree.index_path_to_root(i) else {
            continue;
        };
        let from_root: Vec<Vertex> = to_root.iter().rev().map(|&j| tree.bbox.vertex_at(j)).collect();
        let path = GeodesicPath::new(from_root);
        let weight = path.weight(env)?;
        let oracle = engine.solve_point(&v)?;
        max_dev = max_dev.max((weight - oracle.time(&tree.root)?).abs());
        // Tree path root -> v against the geodesic toward v from the re-solve;
        // every terminal segment must match as well.
        if oracle.geodesic(&tree.root)? != path {
            report.subpath_violations += 1;
        }
        report.samples += 1;
    }
    report.max_deviation = max_dev;
    Ok(report)
}

/// The indicators `eta(x, y) = 1` iff `T(x, H) = T(y, H) + t_{xy}` for a half-space `H`.
#[derive(Clone, Debug)]
pub struct EtaField {
    rho: Vec<f64>,
    alpha: f64,
    map: PassageMap,
    /// Bit `2 * axis` is the `+axis` out-edge, bit `2 * axis + 1` the `-axis` one.
    bits: Vec<u8>,
}

impl EtaField {
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn passage(&self) -> &PassageMap {
        &self.map
    }

    /// Indicator of the directed edge `(x, y)`; `false` for edges outside the mask.
    pub fn eta(&self, x: &Vertex, y: &Vertex) -> Result<bool> {
        let bbox = self.map.bbox();
        let i = bbox.check_vertex(x)?;
        bbox.check_vertex(y)?;
        if !x.is_adjacent(y) {
            return Err(GeodesyError::InvalidInput(format!("{x} and {y} are not neighbours")));
        }
        let axis = (0..x.dim()).find(|&a| x.0[a] != y.0[a]).unwrap();
        let bit = 2 * axis + usize::from(y.0[axis] < x.0[axis]);
        Ok(self.bits[i] >> bit & 1 == 1)
    }

    /// Out-neighbours of `x` in the directed graph of eta = 1 edges.
    pub fn out_neighbours(&self, x: &Vertex) -> Result<Vec<Vertex>> {
        let bbox = self.map.bbox();
        let i = bbox.check_vertex(x)?;
        let mut out = Vec::new();
        for axis in 0..x.dim() {
            for (k, step) in [(0, 1), (1, -1)] {
                if self.bits[i] >> (2 * axis + k) & 1 == 1 {
                    let mut c = x.0.clone();
                    c[axis] += step;
                    out.push(Vertex(c));
                }
            }
        }
        Ok(out)
    }

    /// Reachable vertices outside the half-space with no eta = 1 out-edge.
    pub fn vertices_without_out_edge(&self) -> usize {
        (0..self.bits.len())
            .filter(|&i| self.map.dist_at(i).is_some_and(|t| t > 0.0) && self.bits[i] == 0)
            .count()
    }
}

/// Builds the eta field from a single multi-source solve to `{v : v . rho >= alpha}`.
pub fn eta_field(env: &WeightField, rho: Vec<f64>, alpha: f64, mask: SubgraphMask) -> Result<EtaField> {
    let engine = PassageEngine::new(env, mask)?;
    let map = engine.solve(&TargetSpec::half_space(rho.clone(), alpha))?;
    let bbox = map.bbox();
    let d = bbox.dim();
    let strides = bbox.strides();
    let table = engine.table();
    let mut bits = vec![0u8; bbox.vertex_count()];
    for (v, b) in bits.iter_mut().enumerate() {
        let Some(tv) = map.dist_at(v) else { continue };
        for (axis, &stride) in strides.iter().enumerate().take(d) {
            if let Some(w) = table.forward(v, axis) {
                let u = v + stride;
                if map.dist_at(u).is_some_and(|tu| (tv - (tu + w)).abs() <= TOL) {
                    *b |= 1 << (2 * axis);
                }
            }
            if v >= stride {
                let u = v - stride;
                if let Some(w) = table.forward(u, axis) {
                    if map.dist_at(u).is_some_and(|tu| (tv - (tu + w)).abs() <= TOL) {
                        *b |= 1 << (2 * axis + 1);
                    }
                }
            }
        }
    }
    Ok(EtaField { rho, alpha, map, bits })
}

/// Follows eta = 1 out-edges from `x` into the half-space, taking the
/// lexicographically smallest edge at each step, and certifies that the
/// walk's weight equals `T(x, H)`.
pub fn eta_walk(field: &EtaField, env: &WeightField, x: &Vertex) -> Result<GeodesicPath> {
    let map = &field.map;
    if map.fingerprint() != env.fingerprint() || map.bbox() != env.bbox() {
        return Err(GeodesyError::EnvironmentMismatch);
    }
    let bbox = map.bbox();
    let target_time = map.time(x)?;
    let mut path = vec![x.clone()];
    let mut cur = x.clone();
    let mut i = bbox.check_vertex(x)?;
    while !map.is_source_at(i) {
        let next = field
            .out_neighbours(&cur)?
            .into_iter()
            .min_by(|a, b| {
                let ea = EdgeId::between(&cur, a).unwrap();
                let eb = EdgeId::between(&cur, b).unwrap();
                ea.cmp(&eb)
            })
            .ok_or_else(|| GeodesyError::Structural(format!("no eta = 1 out-edge at {cur}")))?;
        i = bbox.index_of(&next).unwrap();
        cur = next;
        path.push(cur.clone());
        if path.len() > bbox.vertex_count() {
            return Err(GeodesyError::Structural("eta walk does not terminate".into()));
        }
    }
    let path = GeodesicPath::new(path);
    let w = path.weight(env)?;
    if (w - target_time).abs() > TOL {
        return Err(GeodesyError::Certification(format!(
            "eta walk from {x} weighs {w} but T(x, H) = {target_time}"
        )));
    }
    Ok(path)
}

/// First vertex of `p1` that also lies on `p2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coalescence {
    pub vertex: Vertex,
    pub index1: usize,
    pub index2: usize,
    /// The two paths agree from the meeting vertex to their ends.
    pub suffixes_agree: bool,
}

pub fn coalescence_point(p1: &GeodesicPath, p2: &GeodesicPath) -> Option<Coalescence> {
    let pos2: HashMap<&Vertex, usize> = p2.vertices.iter().enumerate().rev().map(|(i, v)| (v, i)).collect();
    let (index1, index2) = p1
        .vertices
        .iter()
        .enumerate()
        .find_map(|(i, v)| pos2.get(v).map(|&j| (i, j)))?;
    Some(Coalescence {
        vertex: p1.vertices[index1].clone(),
        index1,
        index2,
        suffixes_agree: p1.vertices[index1..] == p2.vertices[index2..],
    })
}

/// Owner of a vertex in a competition partition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Label {
    /// Index into the seed list (0-based).
    Seed(usize),
    /// Two seeds are within tolerance of each other.
    Contested,
}

/// Vertices labelled by their strictly closest seed in the passage-time metric.
#[derive(Clone, Debug)]
pub struct InfectionPartition {
    bbox: LatticeBox,
    seeds: Vec<Vertex>,
    labels: Vec<Label>,
    boundary_reach: Vec<bool>,
    contested: usize,
    connectivity_violations: usize,
}

impl InfectionPartition {
    pub fn seeds(&self) -> &[Vertex] {
        &self.seeds
    }

    pub fn bbox(&self) -> &LatticeBox {
        &self.bbox
    }

    pub fn label(&self, v: &Vertex) -> Result<Label> {
        Ok(self.labels[self.bbox.check_vertex(v)?])
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// Whether label `i` (0-based) owns some vertex on the box boundary.
    pub fn boundary_reach(&self) -> &[bool] {
        &self.boundary_reach
    }

    pub fn contested(&self) -> usize {
        self.contested
    }

    /// Vertices whose geodesic toward their own seed leaves their label set.
    pub fn connectivity_violations(&self) -> usize {
        self.connectivity_violations
    }

    pub fn count(&self, seed: usize) -> usize {
        self.labels.iter().filter(|&&l| l == Label::Seed(seed)).count()
    }

    /// Whether label `seed` owns a vertex at sup-norm distance `>= r` from the origin.
    pub fn reaches_sup_radius(&self, seed: usize, r: i64) -> bool {
        self.labels
            .iter()
            .enumerate()
            .any(|(i, &l)| l == Label::Seed(seed) && self.bbox.vertex_at(i).sup_norm() >= r)
    }

    pub fn to_document(&self) -> PartitionDocument {
        PartitionDocument {
            bbox: self.bbox.clone(),
            seeds: self.seeds.clone(),
            labels: self
                .labels
                .iter()
                .enumerate()
                .map(|(i, l)| LabelEntry {
                    v: self.bbox.vertex_at(i),
                    label: match l {
                        Label::Seed(s) => LabelValue::Seed(s + 1),
                        Label::Contested => LabelValue::Contested(Contested::Contested),
                    },
                })
                .collect(),
            boundary_reach: self.boundary_reach.clone(),
        }
    }
}

/// Labels every vertex by its closest seed using one single-source solve per seed.
pub fn infection_partition(env: &WeightField, seeds: &[Vertex]) -> Result<InfectionPartition> {
    if seeds.is_empty() {
        return Err(GeodesyError::InvalidInput("at least one seed is required".into()));
    }
    let bbox = env.bbox().clone();
    for (i, s) in seeds.iter().enumerate() {
        bbox.check_vertex(s)?;
        if seeds[..i].contains(s) {
            return Err(GeodesyError::InvalidInput(format!("seed {s} is repeated")));
        }
    }
    let engine = PassageEngine::new(env, SubgraphMask::Full)?;
    let maps = seeds
        .iter()
        .map(|s| engine.solve_point(s))
        .collect::<Result<Vec<_>>>()?;

    let n = bbox.vertex_count();
    let mut labels = Vec::with_capacity(n);
    let mut contested = 0;
    for v in 0..n {
        let mut best = (f64::INFINITY, 0usize);
        let mut second = f64::INFINITY;
        for (k, m) in maps.iter().enumerate() {
            let t = m.distances()[v];
            if t < best.0 {
                second = best.0;
                best = (t, k);
            } else if t < second {
                second = t;
            }
        }
        if second - best.0 <= TOL {
            contested += 1;
            labels.push(Label::Contested);
        } else {
            labels.push(Label::Seed(best.1));
        }
    }

    let mut connectivity_violations = 0;
    for v in 0..n {
        if let Label::Seed(k) = labels[v] {
            if let Some(p) = maps[k].pred_at(v) {
                if labels[p] != Label::Seed(k) {
                    connectivity_violations += 1;
                }
            }
        }
    }

    let mut boundary_reach = vec![false; seeds.len()];
    for (v, l) in labels.iter().enumerate() {
        if let Label::Seed(k) = *l {
            if !boundary_reach[k] && bbox.on_boundary(&bbox.vertex_at(v)) {
                boundary_reach[k] = true;
            }
        }
    }

    Ok(InfectionPartition {
        bbox,
        seeds: seeds.to_vec(),
        labels,
        boundary_reach,
        contested,
        connectivity_violations,
    })
}

/// JSON form of a [`GeodesicTree`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    #[serde(rename = "box")]
    pub bbox: LatticeBox,
    pub root: Vertex,
    pub nodes: Vec<TreeNode>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub v: Vertex,
    pub parent: Option<Vertex>,
    pub depth: Option<usize>,
}

/// JSON form of an [`InfectionPartition`]; labels are 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionDocument {
    #[serde(rename = "box")]
    pub bbox: LatticeBox,
    pub seeds: Vec<Vertex>,
    pub labels: Vec<LabelEntry>,
    pub boundary_reach: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub v: Vertex,
    pub label: LabelValue,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelValue {
    Seed(usize),
    Contested(Contested),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contested {
    Contested,
}
