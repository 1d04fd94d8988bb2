//! Where does the geodesic from the origin to a far hyperplane land?

use serde::{Deserialize, Serialize};

use super::shape::pilot_g_hat;
use super::{run_reps, vertex_field, CsvRecord, Margin};
use crate::error::{GeodesyError, Result};
use crate::geostruct::{eta_field, eta_walk};
use crate::lattice::{DistributionSpec, LatticeBox, Vertex, WeightField};
use crate::passage::{GeodesicPath, SubgraphMask};
use crate::stats::{interquartile_range, quantile};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectednessParams {
    pub zeta: Vec<f64>,
    /// Hyperplane levels in passage-time units: `H = {v : v . (g zeta) >= alpha}`.
    pub alphas: Vec<f64>,
    /// Time constant along `zeta`; estimated by a 20-replication pilot when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_hat: Option<f64>,
}

/// Signed angle from `zeta` to `v` in the plane.
pub fn hit_angle(zeta: &[f64], v: &Vertex) -> f64 {
    let (x, y) = (v.0[0] as f64, v.0[1] as f64);
    (zeta[0] * y - zeta[1] * x).atan2(zeta[0] * x + zeta[1] * y)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionRecord {
    pub rep: usize,
    pub seed: u64,
    pub alpha: f64,
    pub hit: Vertex,
    /// `None` when the origin already lies in the half-space.
    pub angle: Option<f64>,
    pub path_len: usize,
    pub flagged: bool,
}

impl CsvRecord for DirectionRecord {
    fn header() -> &'static [&'static str] {
        &["rep", "seed", "alpha", "hit", "angle", "path_len", "flagged"]
    }
    fn fields(&self) -> Vec<String> {
        vec![
            self.rep.to_string(),
            self.seed.to_string(),
            self.alpha.to_string(),
            vertex_field(&self.hit),
            self.angle.map_or_else(String::new, |a| a.to_string()),
            self.path_len.to_string(),
            self.flagged.to_string(),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaSummary {
    pub alpha: f64,
    pub count: usize,
    pub degenerate: usize,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub iqr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionStats {
    pub zeta: Vec<f64>,
    pub g_hat: f64,
    pub per_alpha: Vec<AlphaSummary>,
    pub flagged_reps: usize,
    #[serde(skip)]
    pub records: Vec<DirectionRecord>,
}

impl DirectionStats {
    pub fn summary(&self) -> &Self {
        self
    }

    pub fn at(&self, alpha: f64) -> Option<&AlphaSummary> {
        self.per_alpha.iter().find(|a| a.alpha == alpha)
    }

    /// Hit angles at one level, excluding flagged replications.
    pub fn angles(&self, alpha: f64) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.alpha == alpha && !r.flagged)
            .filter_map(|r| r.angle)
            .collect()
    }
}

/// Geodesic from the origin to `{v : v . rho >= alpha}` found by an eta walk,
/// with its hitting angle relative to `zeta`.
pub fn hyperplane_geodesic(
    env: &WeightField,
    zeta: &[f64],
    g_hat: f64,
    alpha: f64,
) -> Result<(GeodesicPath, Option<f64>)> {
    let origin = Vertex::origin(env.dim());
    let rho: Vec<f64> = zeta.iter().map(|z| z * g_hat).collect();
    if origin.dot(&rho) >= alpha {
        return Ok((GeodesicPath::new(vec![origin]), None));
    }
    let field = eta_field(env, rho, alpha, SubgraphMask::Full)?;
    let walk = eta_walk(&field, env, &origin)?;
    let angle = hit_angle(zeta, walk.end().expect("non-empty walk"));
    Ok((walk, Some(angle)))
}

fn unit(v: &[f64]) -> Result<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if v.len() != 2 || !(n.is_finite() && n > 0.0) {
        return Err(GeodesyError::InvalidInput(format!("zeta must be a non-zero planar vector, got {v:?}")));
    }
    Ok(v.iter().map(|x| x / n).collect())
}

pub fn directedness_experiment(
    dist: DistributionSpec,
    params: &DirectednessParams,
    l: i64,
    reps: usize,
    seed0: u64,
    workers: Option<usize>,
) -> Result<DirectionStats> {
    let zeta = unit(&params.zeta)?;
    if params.alphas.is_empty() || params.alphas.iter().any(|a| !a.is_finite()) {
        return Err(GeodesyError::InvalidInput("alphas must be finite and non-empty".into()));
    }
    let margin = Margin::new(l)?;
    let g_hat = match params.g_hat {
        Some(g) if g.is_finite() && g > 0.0 => g,
        Some(g) => return Err(GeodesyError::InvalidInput(format!("g_hat must be positive, got {g}"))),
        None => pilot_g_hat(dist, &zeta, l, seed0, workers)?,
    };
    let max_alpha = params.alphas.iter().cloned().fold(f64::MIN, f64::max);
    margin.require_within((max_alpha / g_hat).ceil() as i64, "max alpha / g_hat")?;

    let bbox = LatticeBox::centered(2, l)?;
    let per_rep = run_reps(reps, workers, |rep| {
        let seed = seed0.wrapping_add(rep as u64);
        let env = WeightField::new(seed, dist, bbox.clone())?;
        let mut out = Vec::with_capacity(params.alphas.len());
        for &alpha in &params.alphas {
            let (walk, angle) = hyperplane_geodesic(&env, &zeta, g_hat, alpha)?;
            out.push(DirectionRecord {
                rep,
                seed,
                alpha,
                hit: walk.end().cloned().expect("non-empty walk"),
                angle,
                path_len: walk.len(),
                flagged: margin.touches_band(&walk),
            });
        }
        let flagged = out.iter().any(|r| r.flagged);
        for r in &mut out {
            r.flagged = flagged;
        }
        Ok(out)
    })?;
    let flagged_reps = per_rep.iter().filter(|r| r.first().is_some_and(|x| x.flagged)).count();
    let records: Vec<DirectionRecord> = per_rep.into_iter().flatten().collect();

    let per_alpha = params
        .alphas
        .iter()
        .map(|&alpha| {
            let rows: Vec<&DirectionRecord> = records.iter().filter(|r| r.alpha == alpha && !r.flagged).collect();
            let angles: Vec<f64> = rows.iter().filter_map(|r| r.angle).collect();
            AlphaSummary {
                alpha,
                count: angles.len(),
                degenerate: rows.len() - angles.len(),
                q25: quantile(&angles, 0.25),
                median: quantile(&angles, 0.5),
                q75: quantile(&angles, 0.75),
                iqr: interquartile_range(&angles),
            }
        })
        .collect();

    Ok(DirectionStats {
        zeta,
        g_hat,
        per_alpha,
        flagged_reps,
        records,
    })
}
