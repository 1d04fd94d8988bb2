//! Busemann proxies for the pair `(0, e2)` in the right half-plane `x[0] >= 0`.

use serde::{Deserialize, Serialize};

use super::{run_reps, vertex_field, CsvRecord, Margin};
use crate::error::{GeodesyError, Result};
use crate::geostruct::coalescence_point;
use crate::lattice::{DistributionSpec, LatticeBox, Vertex, WeightField};
use crate::passage::{GeodesicPath, PassageEngine, SubgraphMask, TargetSpec};
use crate::TOL;

pub const HALF_PLANE: SubgraphMask = SubgraphMask::HalfPlane { axis: 0, threshold: 0 };

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfPlaneParams {
    /// Target `{v : v[0] >= target_alpha}`, in lattice units.
    pub target_alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfPlaneCompare {
    pub rep: usize,
    pub seed: u64,
    /// Hitting vertices of the geodesics from `0` and from the second start.
    pub hit_top: Vertex,
    pub hit_bottom: Vertex,
    /// `T(0, a) - T(e2, a)` with `a` the hit of the geodesic from `0`.
    pub b_t: f64,
    /// Same with `a` the hit of the geodesic from `e2`.
    pub b_b: f64,
    pub delta_proxy: f64,
    /// First vertex shared by the two geodesics.
    pub crossing_vertex: Option<Vertex>,
    pub violation: bool,
    pub flagged: bool,
}

impl CsvRecord for HalfPlaneCompare {
    fn header() -> &'static [&'static str] {
        &["rep", "seed", "b_t", "b_b", "delta_proxy", "crossing_vertex", "violation", "flagged"]
    }
    fn fields(&self) -> Vec<String> {
        vec![
            self.rep.to_string(),
            self.seed.to_string(),
            self.b_t.to_string(),
            self.b_b.to_string(),
            self.delta_proxy.to_string(),
            self.crossing_vertex.as_ref().map_or_else(String::new, vertex_field),
            self.violation.to_string(),
            self.flagged.to_string(),
        ]
    }
}

/// One comparison on a given environment; `second_start` is normally `e2`.
/// The `rep`, `seed` and `flagged` fields are left for the caller.
pub fn halfplane_compare_env(env: &WeightField, alpha: f64, second_start: &Vertex) -> Result<HalfPlaneCompare> {
    Ok(compare_with_paths(env, alpha, second_start)?.0)
}

fn compare_with_paths(
    env: &WeightField,
    alpha: f64,
    second_start: &Vertex,
) -> Result<(HalfPlaneCompare, GeodesicPath, GeodesicPath)> {
    if env.dim() != 2 {
        return Err(GeodesyError::DimensionMismatch { expected: 2, got: env.dim() });
    }
    let origin = Vertex::origin(2);
    let engine = PassageEngine::new(env, HALF_PLANE)?;
    let map = engine.solve(&TargetSpec::half_space(vec![1.0, 0.0], alpha))?;
    let top = map.geodesic(&origin)?;
    let bottom = map.geodesic(second_start)?;
    let a = top.end().cloned().expect("non-empty geodesic");
    let b = bottom.end().cloned().expect("non-empty geodesic");

    let proxy = |hit: &Vertex| -> Result<f64> {
        let m = engine.solve_point(hit)?;
        Ok(m.time(&origin)? - m.time(second_start)?)
    };
    let b_t = proxy(&a)?;
    let b_b = if a == b { b_t } else { proxy(&b)? };
    let delta_proxy = b_t - b_b;
    let crossing_vertex = coalescence_point(&top, &bottom).map(|c| c.vertex);
    let record = HalfPlaneCompare {
        rep: 0,
        seed: env.seed().unwrap_or(0),
        violation: crossing_vertex.is_some() && delta_proxy < -TOL,
        hit_top: a,
        hit_bottom: b,
        b_t,
        b_b,
        delta_proxy,
        crossing_vertex,
        flagged: false,
    };
    Ok((record, top, bottom))
}

pub fn halfplane_compare(
    dist: DistributionSpec,
    target_alpha: f64,
    l: i64,
    reps: usize,
    seed0: u64,
    workers: Option<usize>,
) -> Result<Vec<HalfPlaneCompare>> {
    if !(target_alpha.is_finite() && target_alpha > 0.0) {
        return Err(GeodesyError::InvalidInput("target_alpha must be positive".into()));
    }
    let margin = Margin::new(l)?;
    margin.require_within(target_alpha.ceil() as i64, "target_alpha")?;
    let bbox = LatticeBox::centered(2, l)?;
    let e2 = Vertex::axis(2, 1, 1);
    run_reps(reps, workers, |rep| {
        let seed = seed0.wrapping_add(rep as u64);
        let env = WeightField::new(seed, dist, bbox.clone())?;
        let (mut r, top, bottom) = compare_with_paths(&env, target_alpha, &e2)?;
        r.flagged = margin.touches_band(&top) || margin.touches_band(&bottom);
        r.rep = rep;
        r.seed = seed;
        Ok(r)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfPlaneSummary {
    pub reps: usize,
    pub with_crossing: usize,
    pub violations: usize,
    pub flagged: usize,
    pub min_delta_with_crossing: Option<f64>,
    pub mean_delta: f64,
}

pub fn summarize(records: &[HalfPlaneCompare]) -> HalfPlaneSummary {
    let used: Vec<&HalfPlaneCompare> = records.iter().filter(|r| !r.flagged).collect();
    let crossing: Vec<f64> = used
        .iter()
        .filter(|r| r.crossing_vertex.is_some())
        .map(|r| r.delta_proxy)
        .collect();
    HalfPlaneSummary {
        reps: records.len(),
        with_crossing: crossing.len(),
        violations: used.iter().filter(|r| r.violation).count(),
        flagged: records.len() - used.len(),
        min_delta_with_crossing: crossing.iter().cloned().reduce(f64::min),
        mean_delta: if used.is_empty() {
            0.0
        } else {
            used.iter().map(|r| r.delta_proxy).sum::<f64>() / used.len() as f64
        },
    }
}
