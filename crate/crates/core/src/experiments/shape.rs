//! Time-constant and limit-shape estimation from `T(0, round(n theta))`.

use serde::{Deserialize, Serialize};

use super::{run_reps, vertex_field, CsvRecord, Margin};
use crate::error::{GeodesyError, Result};
use crate::lattice::{DistributionSpec, LatticeBox, Vertex, WeightField};
use crate::passage::{PassageEngine, SubgraphMask};
use crate::stats::MeanEstimate;
use crate::TOL;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeParams {
    /// Explicit directions; normalised to unit length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<Vec<Vec<f64>>>,
    /// Number of equally spaced planar directions when `directions` is absent (default 16).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction_count: Option<usize>,
    pub sizes: Vec<i64>,
}

impl ShapeParams {
    pub fn directions(&self) -> Vec<Vec<f64>> {
        match &self.directions {
            Some(d) => d.clone(),
            None => planar_directions(self.direction_count.unwrap_or(16)),
        }
    }
}

/// `m` unit vectors at angles `2 pi k / m`, starting at `e1`.
pub fn planar_directions(m: usize) -> Vec<Vec<f64>> {
    (0..m)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / m as f64;
            let (s, c) = a.sin_cos();
            // exact zeros on the axes
            let snap = |x: f64| if x.abs() < 1e-12 { 0.0 } else { x };
            vec![snap(c), snap(s)]
        })
        .collect()
}

/// Lattice point nearest to `n * theta`.
pub fn lattice_point(theta: &[f64], n: i64) -> Vertex {
    Vertex(theta.iter().map(|t| (t * n as f64).round() as i64).collect())
}

/// Quick 20-replication estimate of `g(theta)` at half the safe radius.
pub(crate) fn pilot_g_hat(
    dist: DistributionSpec,
    theta: &[f64],
    l: i64,
    seed0: u64,
    workers: Option<usize>,
) -> Result<f64> {
    let size = (Margin::new(l)?.inner_radius() / 2).max(1);
    let pilot = estimate_shape(dist, &[theta.to_vec()], &[size], l, 20, seed0 ^ 0x9e37_79b9, workers)?;
    Ok(pilot.g_hat[0].g_hat().mean)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeRecord {
    pub rep: usize,
    pub seed: u64,
    pub direction: usize,
    pub size: i64,
    pub vertex: Vertex,
    pub time: f64,
    /// `T(0, v) / |v|`
    pub ratio: f64,
    pub flagged: bool,
}

impl CsvRecord for ShapeRecord {
    fn header() -> &'static [&'static str] {
        &["rep", "seed", "direction", "size", "vertex", "time", "ratio", "flagged"]
    }
    fn fields(&self) -> Vec<String> {
        vec![
            self.rep.to_string(),
            self.seed.to_string(),
            self.direction.to_string(),
            self.size.to_string(),
            vertex_field(&self.vertex),
            self.time.to_string(),
            self.ratio.to_string(),
            self.flagged.to_string(),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeEstimate {
    pub size: i64,
    pub estimate: MeanEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionEstimate {
    pub direction: Vec<f64>,
    /// One estimate per requested size, in the order given.
    pub by_size: Vec<SizeEstimate>,
}

impl DirectionEstimate {
    /// Estimate at the largest size.
    pub fn g_hat(&self) -> MeanEstimate {
        self.by_size
            .iter()
            .max_by_key(|s| s.size)
            .expect("at least one size")
            .estimate
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryCheck {
    pub first: usize,
    pub second: usize,
    /// |g(first) - g(second)| / combined stderr
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityCheck {
    pub direction: usize,
    /// `lambda g(prev) + mu g(next) - g(theta)` where `theta = lambda prev + mu next`;
    /// non-negative for a norm.
    pub slack: f64,
    pub stderr: f64,
}

impl ConvexityCheck {
    pub fn passes(&self, k: f64) -> bool {
        self.slack >= -k * self.stderr
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeEstimate {
    pub dist: DistributionSpec,
    pub sizes: Vec<i64>,
    pub reps: usize,
    pub g_hat: Vec<DirectionEstimate>,
    /// `theta / g(theta)` at the largest size.
    pub boundary: Vec<Vec<f64>>,
    pub subadditivity_violations: usize,
    pub flagged: usize,
    #[serde(skip)]
    pub records: Vec<ShapeRecord>,
}

#[derive(Serialize)]
pub struct ShapeSummary<'a> {
    pub g_hat: &'a [DirectionEstimate],
    pub boundary: &'a [Vec<f64>],
    pub symmetry: Vec<SymmetryCheck>,
    pub convexity: Vec<ConvexityCheck>,
    pub subadditivity_violations: usize,
    pub flagged: usize,
}

fn same_direction(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9)
}

impl ShapeEstimate {
    pub fn direction_index(&self, theta: &[f64]) -> Option<usize> {
        self.g_hat.iter().position(|d| same_direction(&d.direction, theta))
    }

    pub fn g_hat_along(&self, theta: &[f64]) -> Option<MeanEstimate> {
        self.direction_index(theta).map(|i| self.g_hat[i].g_hat())
    }

    /// Pairs related by `theta -> -theta` or by swapping two coordinates.
    pub fn symmetry_checks(&self) -> Vec<SymmetryCheck> {
        let mut out = Vec::new();
        let d = self.g_hat.first().map_or(0, |x| x.direction.len());
        for (i, di) in self.g_hat.iter().enumerate() {
            let mut images = vec![di.direction.iter().map(|x| -x).collect::<Vec<_>>()];
            for a in 0..d {
                for b in a + 1..d {
                    let mut s = di.direction.clone();
                    s.swap(a, b);
                    images.push(s);
                }
            }
            for img in images {
                if let Some(j) = self.direction_index(&img) {
                    if j > i {
                        let (gi, gj) = (di.g_hat(), self.g_hat[j].g_hat());
                        let se = gi.combined_stderr(&gj);
                        let diff = (gi.mean - gj.mean).abs();
                        let z = if diff == 0.0 { 0.0 } else { diff / se };
                        out.push(SymmetryCheck { first: i, second: j, z });
                    }
                }
            }
        }
        out
    }

    /// Midpoint-convexity of the planar boundary at each direction, checked
    /// as `g(theta) <= lambda g(prev) + mu g(next)` for the angular neighbours.
    pub fn convexity_checks(&self) -> Vec<ConvexityCheck> {
        if self.g_hat.len() < 3 || self.g_hat[0].direction.len() != 2 {
            return Vec::new();
        }
        let mut order: Vec<(f64, usize)> = self
            .g_hat
            .iter()
            .enumerate()
            .map(|(i, d)| (d.direction[1].atan2(d.direction[0]), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let m = order.len();
        let mut out = Vec::new();
        for k in 0..m {
            let (ap, p) = order[(k + m - 1) % m];
            let (ai, i) = order[k];
            let (an, n) = order[(k + 1) % m];
            let gap = (an - ap).rem_euclid(std::f64::consts::TAU);
            if gap >= std::f64::consts::PI || (ai - ap).rem_euclid(std::f64::consts::TAU) >= gap {
                continue;
            }
            let (a, b, t) = (&self.g_hat[p].direction, &self.g_hat[n].direction, &self.g_hat[i].direction);
            let det = a[0] * b[1] - a[1] * b[0];
            let lambda = (t[0] * b[1] - t[1] * b[0]) / det;
            let mu = (a[0] * t[1] - a[1] * t[0]) / det;
            let (gp, gi, gn) = (self.g_hat[p].g_hat(), self.g_hat[i].g_hat(), self.g_hat[n].g_hat());
            let slack = lambda * gp.mean + mu * gn.mean - gi.mean;
            let stderr = (gi.stderr.powi(2) + (lambda * gp.stderr).powi(2) + (mu * gn.stderr).powi(2)).sqrt();
            out.push(ConvexityCheck { direction: i, slack, stderr });
        }
        out
    }

    pub fn summary(&self) -> ShapeSummary<'_> {
        ShapeSummary {
            g_hat: &self.g_hat,
            boundary: &self.boundary,
            symmetry: self.symmetry_checks(),
            convexity: self.convexity_checks(),
            subadditivity_violations: self.subadditivity_violations,
            flagged: self.flagged,
        }
    }
}

struct RepResult {
    records: Vec<ShapeRecord>,
    subadditivity_violations: usize,
}

/// Estimates `g(theta)` by the mean of `T(0, round(n theta)) / |round(n theta)|`
/// over replications on `[-L, L]^d`, and checks subadditivity along the axes.
pub fn estimate_shape(
    dist: DistributionSpec,
    directions: &[Vec<f64>],
    sizes: &[i64],
    l: i64,
    reps: usize,
    seed0: u64,
    workers: Option<usize>,
) -> Result<ShapeEstimate> {
    dist.validate()?;
    let dim = directions
        .first()
        .ok_or_else(|| GeodesyError::InvalidInput("no directions".into()))?
        .len();
    let mut units = Vec::with_capacity(directions.len());
    for d in directions {
        let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        if d.len() != dim || !(norm.is_finite() && norm > 0.0) {
            return Err(GeodesyError::InvalidInput(format!("bad direction {d:?}")));
        }
        units.push(d.iter().map(|x| x / norm).collect::<Vec<f64>>());
    }
    if sizes.is_empty() || sizes.iter().any(|&n| n < 1) {
        return Err(GeodesyError::InvalidInput("sizes must be positive".into()));
    }
    let margin = Margin::new(l)?;
    let n_max = *sizes.iter().max().unwrap();
    let reach = units
        .iter()
        .flat_map(|u| sizes.iter().map(move |&n| lattice_point(u, n).sup_norm()))
        .max()
        .unwrap_or(0);
    margin.require_within(reach.max(n_max), "max size * direction")?;
    let bbox = LatticeBox::centered(dim, l)?;
    let origin = Vertex::origin(dim);

    let per_rep = run_reps(reps, workers, |rep| {
        let seed = seed0.wrapping_add(rep as u64);
        let env = WeightField::new(seed, dist, bbox.clone())?;
        let engine = PassageEngine::new(&env, SubgraphMask::Full)?;
        let from_origin = engine.solve_point(&origin)?;
        let mut records = Vec::with_capacity(units.len() * sizes.len());
        let mut flagged = false;
        for (di, u) in units.iter().enumerate() {
            for &n in sizes {
                let v = lattice_point(u, n);
                let time = from_origin.time(&v)?;
                flagged |= margin.touches_band(&from_origin.geodesic(&v)?);
                records.push(ShapeRecord {
                    rep,
                    seed,
                    direction: di,
                    size: n,
                    ratio: time / v.euclidean_norm(),
                    vertex: v,
                    time,
                    flagged: false,
                });
            }
        }
        for r in &mut records {
            r.flagged = flagged;
        }

        let mut subadditivity_violations = 0;
        let m = n_max / 2;
        if m >= 1 {
            for axis in 0..dim {
                let mid = Vertex::axis(dim, axis, m);
                let far = Vertex::axis(dim, axis, n_max);
                let from_mid = engine.solve_point(&mid)?;
                let whole = from_origin.time(&far)?;
                if whole > from_origin.time(&mid)? + from_mid.time(&far)? + TOL {
                    subadditivity_violations += 1;
                }
            }
        }
        Ok(RepResult {
            records,
            subadditivity_violations,
        })
    })?;

    let flagged = per_rep.iter().filter(|r| r.records.first().is_some_and(|x| x.flagged)).count();
    let subadditivity_violations = per_rep.iter().map(|r| r.subadditivity_violations).sum();
    let records: Vec<ShapeRecord> = per_rep.into_iter().flat_map(|r| r.records).collect();

    let g_hat: Vec<DirectionEstimate> = units
        .iter()
        .enumerate()
        .map(|(di, u)| DirectionEstimate {
            direction: u.clone(),
            by_size: sizes
                .iter()
                .map(|&n| {
                    let xs: Vec<f64> = records
                        .iter()
                        .filter(|r| !r.flagged && r.direction == di && r.size == n)
                        .map(|r| r.ratio)
                        .collect();
                    SizeEstimate {
                        size: n,
                        estimate: MeanEstimate::from_samples(&xs),
                    }
                })
                .collect(),
        })
        .collect();
    let boundary = g_hat
        .iter()
        .map(|d| {
            let g = d.g_hat().mean;
            d.direction.iter().map(|x| x / g).collect()
        })
        .collect();

    Ok(ShapeEstimate {
        dist,
        sizes: sizes.to_vec(),
        reps,
        g_hat,
        boundary,
        subadditivity_violations,
        flagged,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planar_directions_hit_axes_exactly() {
        let d = planar_directions(16);
        assert_eq!(d[0], vec![1.0, 0.0]);
        assert_eq!(d[4], vec![0.0, 1.0]);
        assert_eq!(d[8], vec![-1.0, 0.0]);
        assert_eq!(lattice_point(&d[2], 10), Vertex::from([7, 7]));
    }

    #[test]
    fn small_shape_run() {
        let dist = DistributionSpec::Exponential { rate: 1.0 };
        let est = estimate_shape(dist, &planar_directions(8), &[4, 8], 12, 6, 1, None).unwrap();
        assert_eq!(est.subadditivity_violations, 0);
        assert_eq!(est.records.len(), 6 * 8 * 2);
        for d in &est.g_hat {
            assert!(d.g_hat().mean > 0.0);
        }
        assert!(!est.symmetry_checks().is_empty());
        assert_eq!(est.convexity_checks().len(), 8);
        assert!(est.g_hat_along(&[0.0, 1.0]).is_some());
    }

    #[test]
    fn margin_is_enforced() {
        let dist = DistributionSpec::Exponential { rate: 1.0 };
        let r = estimate_shape(dist, &planar_directions(4), &[16], 16, 2, 0, None);
        assert!(matches!(r, Err(GeodesyError::MarginViolation(_))));
    }

    #[test]
    fn convexity_of_a_norm_has_non_negative_slack() {
        // g = l1 norm sampled exactly at 8 directions
        let dirs = planar_directions(8);
        let g_hat = dirs
            .iter()
            .map(|d| DirectionEstimate {
                direction: d.clone(),
                by_size: vec![SizeEstimate {
                    size: 1,
                    estimate: MeanEstimate {
                        mean: d[0].abs() + d[1].abs(),
                        stderr: 0.0,
                        n: 1,
                    },
                }],
            })
            .collect();
        let est = ShapeEstimate {
            dist: DistributionSpec::Exponential { rate: 1.0 },
            sizes: vec![1],
            reps: 1,
            g_hat,
            boundary: vec![],
            subadditivity_violations: 0,
            flagged: 0,
            records: vec![],
        };
        let checks = est.convexity_checks();
        assert_eq!(checks.len(), 8);
        for c in checks {
            assert!(c.slack >= -1e-12, "{c:?}");
        }
    }
}
