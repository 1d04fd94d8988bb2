//! Browser bindings: each call builds a fresh environment on `[-radius, radius]^2`
//! and returns an SVG string.

use geodesy::geostruct::{geodesic_tree, infection_partition};
use geodesy::render::{self, HeatmapDocument};
use geodesy::{DistributionSpec, LatticeBox, PassageEngine, SubgraphMask, TargetSpec, Vertex, WeightField};
use wasm_bindgen::prelude::*;

/// Largest radius the demo accepts (a 201 x 201 box).
pub const MAX_RADIUS: i64 = 100;

fn fail(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// `kind` is "exponential" (p1 = rate), "uniform" (p1, p2 = bounds)
/// or "shifted-exponential" (p1 = shift, p2 = rate).
fn build_env(seed: u64, radius: i64, kind: &str, p1: f64, p2: f64) -> Result<WeightField, String> {
    if !(1..=MAX_RADIUS).contains(&radius) {
        return Err(format!("radius must be between 1 and {MAX_RADIUS}"));
    }
    let law = match kind {
        "exponential" => DistributionSpec::Exponential { rate: p1 },
        "uniform" => DistributionSpec::Uniform { a: p1, b: p2 },
        "shifted-exponential" => DistributionSpec::ShiftedExponential { shift: p1, rate: p2 },
        other => return Err(format!("unknown distribution {other:?}")),
    };
    let bbox = LatticeBox::centered(2, radius).map_err(|e| e.to_string())?;
    WeightField::new(seed, law, bbox).map_err(|e| e.to_string())
}

/// Parses "x,y;x,y;...".
fn parse_vertices(s: &str) -> Result<Vec<Vertex>, String> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let c: Vec<i64> = p
                .split(',')
                .map(|x| x.trim().parse().map_err(|_| format!("bad coordinate {x:?}")))
                .collect::<Result<_, _>>()?;
            if c.len() != 2 {
                return Err(format!("vertex {p:?} needs two coordinates"));
            }
            Ok(Vertex(c))
        })
        .collect()
}

/// Passage time from `(sx, sy)` to `(tx, ty)` with the geodesic drawn over a heat map
/// of times to the target.
#[wasm_bindgen]
pub struct PassageView {
    time: f64,
    svg: String,
}

#[wasm_bindgen]
impl PassageView {
    #[wasm_bindgen(getter)]
    pub fn time(&self) -> f64 {
        self.time
    }

    #[wasm_bindgen(getter)]
    pub fn svg(&self) -> String {
        self.svg.clone()
    }
}

pub fn passage_view_native(
    seed: u64,
    radius: i64,
    kind: &str,
    p1: f64,
    p2: f64,
    source: [i64; 2],
    target: [i64; 2],
) -> Result<PassageView, String> {
    let env = build_env(seed, radius, kind, p1, p2)?;
    let map = PassageEngine::new(&env, SubgraphMask::Full)
        .and_then(|e| e.solve(&TargetSpec::point(target)))
        .map_err(|e| e.to_string())?;
    let source = Vertex::from(source);
    let time = map.time(&source).map_err(|e| e.to_string())?;
    let path = map.geodesic(&source).map_err(|e| e.to_string())?;
    let svg = render::heatmap_svg(&HeatmapDocument::from_passage(&map), &[path]).map_err(|e| e.to_string())?;
    Ok(PassageView { time, svg })
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn passage_view(
    seed: u32,
    radius: i32,
    kind: &str,
    p1: f64,
    p2: f64,
    sx: i32,
    sy: i32,
    tx: i32,
    ty: i32,
) -> Result<PassageView, JsError> {
    let (sx, sy, tx, ty) = (sx as i64, sy as i64, tx as i64, ty as i64);
    passage_view_native(seed as u64, radius as i64, kind, p1, p2, [sx, sy], [tx, ty]).map_err(fail)
}

/// Geodesic tree rooted at the origin, with the branch from `highlight` (if any) marked.
pub fn tree_svg_native(seed: u64, radius: i64, kind: &str, p1: f64, p2: f64, highlight: &str) -> Result<String, String> {
    let env = build_env(seed, radius, kind, p1, p2)?;
    let tree = geodesic_tree(&env, &Vertex::from([0, 0])).map_err(|e| e.to_string())?;
    let mut paths = Vec::new();
    for v in parse_vertices(highlight)? {
        if let Some(p) = tree.path_to_root(&v).map_err(|e| e.to_string())? {
            paths.push(p);
        }
    }
    render::tree_svg(&tree.to_document(), &paths).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn tree_svg(seed: u32, radius: i32, kind: &str, p1: f64, p2: f64, highlight: &str) -> Result<String, JsError> {
    tree_svg_native(seed as u64, radius as i64, kind, p1, p2, highlight).map_err(fail)
}

/// Competition partition for seeds given as "x,y;x,y".
pub fn partition_svg_native(seed: u64, radius: i64, kind: &str, p1: f64, p2: f64, seeds: &str) -> Result<String, String> {
    let env = build_env(seed, radius, kind, p1, p2)?;
    let seeds = parse_vertices(seeds)?;
    let part = infection_partition(&env, &seeds).map_err(|e| e.to_string())?;
    render::partition_svg(&part.to_document(), &[]).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn partition_svg(seed: u32, radius: i32, kind: &str, p1: f64, p2: f64, seeds: &str) -> Result<String, JsError> {
    partition_svg_native(seed as u64, radius as i64, kind, p1, p2, seeds).map_err(fail)
}
