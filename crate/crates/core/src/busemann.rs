//! Busemann estimators: point targets `B_z`, half-space targets `B_alpha`,
//! sequences along a geodesic ray, and the averaging statistic relating
//! `B_{K l e1}(0, l e1)` to `T(0, n l e1) / n`.

use serde::{Deserialize, Serialize};

use crate::error::{GeodesyError, Result};
use crate::experiments::{run_reps, Margin};
use crate::lattice::{DistributionSpec, LatticeBox, Vertex, WeightField};
use crate::passage::{GeodesicPath, PassageEngine, PassageMap, SubgraphMask, TargetSpec};
use crate::stats::MeanEstimate;
use crate::TOL;

/// `B_z(x, y) = T(x, z) - T(y, z)` from one solve rooted at `z`.
pub fn busemann_point(env: &WeightField, x: &Vertex, y: &Vertex, z: &Vertex) -> Result<f64> {
    let map = PassageEngine::new(env, SubgraphMask::Full)?.solve_point(z)?;
    Ok(map.time(x)? - map.time(y)?)
}

/// Rounds every finite time onto a common grid `q * Z` fine enough that
/// sums and differences of up to two differences stay exact.
fn snap_to_grid(times: &[f64]) -> Vec<f64> {
    let max = times
        .iter()
        .filter(|t| t.is_finite())
        .fold(1.0f64, |m, &t| m.max(t.abs()));
    let e = max.log2().ceil() as i32;
    let q = 2f64.powi(e - 51);
    times
        .iter()
        .map(|&t| if t.is_finite() { (t / q).round() * q } else { t })
        .collect()
}

/// `B(x0, x) = T(x0, S) - T(x, S)` for every `x` in the box, from one solve.
///
/// Passage times are snapped to a dyadic grid (spacing about `1e-16`
/// relative) so that `B(x, y) + B(y, z) - B(x, z)` is exactly zero.
#[derive(Clone, Debug)]
pub struct BusemannWindow {
    origin: Vertex,
    origin_index: usize,
    map: PassageMap,
    snapped: Vec<f64>,
}

impl BusemannWindow {
    pub fn origin(&self) -> &Vertex {
        &self.origin
    }

    pub fn target(&self) -> &TargetSpec {
        self.map.target()
    }

    pub fn mask(&self) -> SubgraphMask {
        self.map.mask()
    }

    pub fn bbox(&self) -> &LatticeBox {
        self.map.bbox()
    }

    pub fn passage(&self) -> &PassageMap {
        &self.map
    }

    /// `B(origin, x)`; `None` when `x` cannot reach the target.
    pub fn value(&self, x: &Vertex) -> Result<Option<f64>> {
        self.b(&self.origin, x)
    }

    pub fn value_at(&self, index: usize) -> Option<f64> {
        let t = self.snapped[index];
        t.is_finite().then(|| self.snapped[self.origin_index] - t)
    }

    /// `B(x, y) = T(x, S) - T(y, S)`.
    pub fn b(&self, x: &Vertex, y: &Vertex) -> Result<Option<f64>> {
        let i = self.bbox().check_vertex(x)?;
        let j = self.bbox().check_vertex(y)?;
        let (tx, ty) = (self.snapped[i], self.snapped[j]);
        Ok((tx.is_finite() && ty.is_finite()).then_some(tx - ty))
    }

    /// Window radius: sup-norm distance from the origin to the nearest box face.
    pub fn radius(&self) -> i64 {
        let b = self.bbox();
        (0..b.dim())
            .map(|a| (self.origin.0[a] - b.lo()[a]).min(b.hi()[a] - self.origin.0[a]))
            .min()
            .unwrap_or(0)
    }
}

pub fn busemann_window(
    env: &WeightField,
    origin: &Vertex,
    target: &TargetSpec,
    mask: SubgraphMask,
) -> Result<BusemannWindow> {
    let map = PassageEngine::new(env, mask)?.solve(target)?;
    window_from_map(map, origin)
}

/// Reuses an existing solve as a Busemann window around `origin`.
pub fn window_from_map(map: PassageMap, origin: &Vertex) -> Result<BusemannWindow> {
    let origin_index = map.bbox().check_vertex(origin)?;
    if map.dist_at(origin_index).is_none() {
        return Err(GeodesyError::Unreachable(origin.clone()));
    }
    let snapped = snap_to_grid(map.distances());
    Ok(BusemannWindow {
        origin: origin.clone(),
        origin_index,
        map,
        snapped,
    })
}

/// Terms `T(x, z_n) - T(y, z_n)` along a geodesic `gamma = (z_1, z_2, ...)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RaySequence {
    pub x: Vertex,
    pub y: Vertex,
    pub gamma: GeodesicPath,
    /// Positions along `gamma` (0-based) at which terms were sampled.
    pub positions: Vec<usize>,
    pub terms: Vec<f64>,
    /// `T(x, y)`, the a-priori bound on every term.
    pub t_xy: f64,
}

impl RaySequence {
    pub fn last_term(&self) -> Option<f64> {
        self.terms.last().copied()
    }

    /// Total variation of the second half of the sampled terms.
    pub fn tail_total_variation(&self) -> f64 {
        let start = self.terms.len() / 2;
        self.terms[start..].windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    pub fn converged(&self) -> bool {
        self.tail_total_variation() < 1e-6 * self.t_xy
    }

    /// Number of increases larger than `tol` between consecutive terms.
    pub fn monotonicity_violations(&self, tol: f64) -> usize {
        self.terms.windows(2).filter(|w| w[1] > w[0] + tol).count()
    }

    /// CSV with columns `n,term` (n is the 1-based ray index).
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n,term")?;
        for (p, t) in self.positions.iter().zip(&self.terms) {
            writeln!(out, "{},{t}", p + 1)?;
        }
        Ok(())
    }
}

/// Samples `B^{(n)}(x, y)` at every `stride`-th vertex of `gamma` (and its last vertex).
///
/// `T(x, z_n)` and `T(y, z_n)` are read from solves rooted at `x` and at
/// `y`, which by symmetry of `T` equals rooting one solve at each `z_n`.
pub fn busemann_ray(env: &WeightField, x: &Vertex, y: &Vertex, gamma: &GeodesicPath, stride: usize) -> Result<RaySequence> {
    if stride == 0 {
        return Err(GeodesyError::InvalidInput("stride must be at least 1".into()));
    }
    let (Some(first), Some(last)) = (gamma.start(), gamma.end()) else {
        return Err(GeodesyError::InvalidInput("empty ray".into()));
    };
    if !gamma.is_lattice_path() {
        return Err(GeodesyError::InvalidInput("ray is not a lattice path".into()));
    }
    let engine = PassageEngine::new(env, SubgraphMask::Full)?;
    let from_first = engine.solve_point(first)?;
    let w = gamma.weight(env)?;
    let t = from_first.time(last)?;
    if (w - t).abs() > TOL {
        return Err(GeodesyError::Certification(format!(
            "ray weighs {w} but T(z_1, z_end) = {t}"
        )));
    }
    let from_x = engine.solve_point(x)?;
    let from_y = if y == first { from_first } else { engine.solve_point(y)? };

    let mut positions: Vec<usize> = (0..gamma.len()).step_by(stride).collect();
    if positions.last() != Some(&(gamma.len() - 1)) {
        positions.push(gamma.len() - 1);
    }
    let terms = positions
        .iter()
        .map(|&p| {
            let z = &gamma.vertices[p];
            Ok(from_x.time(z)? - from_y.time(z)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RaySequence {
        x: x.clone(),
        y: y.clone(),
        gamma: gamma.clone(),
        positions,
        terms,
        t_xy: from_x.time(y)?,
    })
}

/// Per-replication record of [`gm_statistic`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmRecord {
    pub rep: usize,
    pub seed: u64,
    /// mean over K = 1..n of `B_{K l e1}(0, l e1)`
    pub mean_b: f64,
    /// `T(0, n l e1) / n`
    pub t_over_n: f64,
    /// `T(0, l e1)`, bounding every `|B|`
    pub t_step: f64,
    pub bound_violations: usize,
    /// A geodesic touched the margin band; the replication is excluded.
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmSummary {
    pub busemann_mean: MeanEstimate,
    pub passage_mean: MeanEstimate,
    pub difference: f64,
    /// `sqrt(se_b^2 + se_t^2)`
    pub combined_stderr: f64,
    /// Standard error of the per-replication differences.
    pub paired_stderr: f64,
    pub bound_violations: usize,
    pub flagged: usize,
    pub reps: usize,
    pub seed0: u64,
}

impl GmSummary {
    pub fn within(&self, k_stderr: f64) -> bool {
        self.difference.abs() < k_stderr * self.combined_stderr
    }
}

/// Parameters of the averaging statistic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmParams {
    pub ell: i64,
    pub n: i64,
}

pub fn gm_records(
    dist: DistributionSpec,
    params: &GmParams,
    l: i64,
    reps: usize,
    seed0: u64,
    workers: Option<usize>,
) -> Result<Vec<GmRecord>> {
    let GmParams { ell, n } = *params;
    if ell < 1 || n < 1 {
        return Err(GeodesyError::InvalidInput("ell and n must be positive".into()));
    }
    let margin = Margin::new(l)?;
    margin.require_within(n * ell, "n * ell")?;
    dist.validate()?;
    let bbox = LatticeBox::centered(2, l)?;
    let origin = Vertex::origin(2);
    let step = Vertex::axis(2, 0, ell);
    run_reps(reps, workers, |rep| {
        let seed = seed0.wrapping_add(rep as u64);
        let env = WeightField::new(seed, dist, bbox.clone())?;
        let engine = PassageEngine::new(&env, SubgraphMask::Full)?;
        let mut sum_b = 0.0;
        let mut t_step = f64::NAN;
        let mut t_far = f64::NAN;
        let mut bs = Vec::with_capacity(n as usize);
        let mut flagged = false;
        for k in 1..=n {
            let map = engine.solve_point(&Vertex::axis(2, 0, k * ell))?;
            let b = map.time(&origin)? - map.time(&step)?;
            if k == 1 {
                t_step = map.time(&origin)?;
            }
            if k == n {
                t_far = map.time(&origin)?;
            }
            flagged |= margin.touches_band(&map.geodesic(&origin)?) || margin.touches_band(&map.geodesic(&step)?);
            sum_b += b;
            bs.push(b);
        }
        let bound_violations = bs.iter().filter(|b| b.abs() > t_step + TOL).count();
        Ok(GmRecord {
            rep,
            seed,
            mean_b: sum_b / n as f64,
            t_over_n: t_far / n as f64,
            t_step,
            bound_violations,
            flagged,
        })
    })
}

pub fn gm_summarize(records: &[GmRecord], seed0: u64) -> GmSummary {
    let kept: Vec<&GmRecord> = records.iter().filter(|r| !r.flagged).collect();
    let b: Vec<f64> = kept.iter().map(|r| r.mean_b).collect();
    let t: Vec<f64> = kept.iter().map(|r| r.t_over_n).collect();
    let d: Vec<f64> = kept.iter().map(|r| r.mean_b - r.t_over_n).collect();
    let busemann_mean = MeanEstimate::from_samples(&b);
    let passage_mean = MeanEstimate::from_samples(&t);
    GmSummary {
        difference: busemann_mean.mean - passage_mean.mean,
        combined_stderr: busemann_mean.combined_stderr(&passage_mean),
        paired_stderr: MeanEstimate::from_samples(&d).stderr,
        busemann_mean,
        passage_mean,
        bound_violations: records.iter().map(|r| r.bound_violations).sum(),
        flagged: records.len() - kept.len(),
        reps: records.len(),
        seed0,
    }
}

/// Monte Carlo comparison of `mean_{K, reps} B_{K l e1}(0, l e1)` with
/// `mean_reps T(0, n l e1) / n` on `[-L, L]^2`; the two agree in expectation.
pub fn gm_statistic(
    dist: DistributionSpec,
    ell: i64,
    n: i64,
    l: i64,
    reps: usize,
    seed0: u64,
) -> Result<GmSummary> {
    let records = gm_records(dist, &GmParams { ell, n }, l, reps, seed0, None)?;
    Ok(gm_summarize(&records, seed0))
}

/// Maximum normalised deviation `|B(o, x) - rho . (x - o)| / |x - o|` over one Euclidean shell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellMax {
    pub radius: i64,
    pub max_deviation: f64,
    pub vertices: usize,
}

/// Shell maxima at radii 16, 32, 64, ... up to the window radius.
pub fn sublinearity_diagnostic(window: &BusemannWindow, rho_hat: &[f64]) -> Result<Vec<ShellMax>> {
    let radius = window.radius();
    if radius < 16 {
        return Err(GeodesyError::InvalidInput(format!(
            "window radius {radius} is below 16"
        )));
    }
    let shells: Vec<i64> = std::iter::successors(Some(16i64), |r| Some(r * 2))
        .take_while(|&r| r <= radius)
        .collect();
    sublinearity_shells(window, rho_hat, &shells)
}

/// Shell maxima at the given radii; shell `r` holds vertices with `r - 1/2 <= |x - o| < r + 1/2`.
pub fn sublinearity_shells(window: &BusemannWindow, rho_hat: &[f64], shells: &[i64]) -> Result<Vec<ShellMax>> {
    let bbox = window.bbox();
    if rho_hat.len() != bbox.dim() {
        return Err(GeodesyError::DimensionMismatch {
            expected: bbox.dim(),
            got: rho_hat.len(),
        });
    }
    let mut out: Vec<ShellMax> = shells
        .iter()
        .map(|&radius| ShellMax {
            radius,
            max_deviation: 0.0,
            vertices: 0,
        })
        .collect();
    let o = window.origin();
    for i in 0..bbox.vertex_count() {
        let x = bbox.vertex_at(i);
        let rel = Vertex(x.0.iter().zip(&o.0).map(|(a, b)| a - b).collect());
        let r = rel.euclidean_norm();
        let Some(shell) = out.iter_mut().find(|s| (r - s.radius as f64).abs() < 0.5 || r - s.radius as f64 == -0.5)
        else {
            continue;
        };
        let Some(b) = window.value_at(i) else { continue };
        let dev = (b - rel.dot(rho_hat)).abs() / r;
        shell.max_deviation = shell.max_deviation.max(dev);
        shell.vertices += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::EdgeId;
    use crate::passage::passage_map;
    use std::collections::BTreeMap;

    fn square() -> WeightField {
        let mut m = BTreeMap::new();
        m.insert(EdgeId::new(Vertex::from([0, 0]), 0), 0.5);
        m.insert(EdgeId::new(Vertex::from([1, 0]), 1), 0.7);
        m.insert(EdgeId::new(Vertex::from([0, 0]), 1), 0.9);
        m.insert(EdgeId::new(Vertex::from([0, 1]), 0), 0.4);
        WeightField::from_fixture(LatticeBox::new(vec![0, 0], vec![1, 1]).unwrap(), m).unwrap()
    }

    fn exp_env(seed: u64, r: i64) -> WeightField {
        WeightField::new(seed, DistributionSpec::Exponential { rate: 1.0 }, LatticeBox::centered(2, r).unwrap()).unwrap()
    }

    #[test]
    fn square_point_busemann() {
        let env = square();
        let (a, b, z) = (Vertex::from([0, 0]), Vertex::from([0, 1]), Vertex::from([1, 1]));
        let v = busemann_point(&env, &a, &b, &z).unwrap();
        assert!((v - 0.8).abs() < 1e-12);
        assert_eq!(busemann_point(&env, &b, &a, &z).unwrap(), -v);
        assert_eq!(busemann_point(&env, &a, &a, &z).unwrap(), 0.0);
        assert!(v.abs() <= 0.9);
    }

    #[test]
    fn square_half_space_window() {
        let env = square();
        let w = busemann_window(
            &env,
            &[0, 0].into(),
            &TargetSpec::half_space(vec![1.0, 0.0], 1.0),
            SubgraphMask::Full,
        )
        .unwrap();
        assert_eq!(w.value(&[0, 0].into()).unwrap(), Some(0.0));
        let b = w.b(&[0, 0].into(), &[0, 1].into()).unwrap().unwrap();
        assert!((b - 0.1).abs() < 1e-12);
    }

    #[test]
    fn window_additivity_is_exact() {
        let env = exp_env(2, 10);
        let w = busemann_window(&env, &[0, 0].into(), &TargetSpec::point([7, -3]), SubgraphMask::Full).unwrap();
        let vs: Vec<Vertex> = env.bbox().vertices().step_by(11).collect();
        for x in &vs {
            for y in &vs {
                let bxy = w.b(x, y).unwrap().unwrap();
                assert_eq!(bxy, -w.b(y, x).unwrap().unwrap());
                for z in vs.iter().step_by(3) {
                    let s = bxy + w.b(y, z).unwrap().unwrap() - w.b(x, z).unwrap().unwrap();
                    assert_eq!(s, 0.0);
                }
            }
        }
    }

    #[test]
    fn snapping_is_tiny() {
        let ts = [0.0, 1.2345678901234567, 250.333333333333, f64::INFINITY];
        let s = snap_to_grid(&ts);
        for (a, b) in ts.iter().zip(&s) {
            if a.is_finite() {
                assert!((a - b).abs() <= 1e-12);
            } else {
                assert!(b.is_infinite());
            }
        }
    }

    #[test]
    fn ray_terms() {
        let env = exp_env(5, 20);
        let map = passage_map(&env, &TargetSpec::half_space(vec![1.0, 0.0], 18.0), SubgraphMask::Full).unwrap();
        let gamma = map.geodesic(&[-15, 0].into()).unwrap();
        let z1 = gamma.vertices[0].clone();
        let x = Vertex::from([-15, 4]);

        let seq = busemann_ray(&env, &x, &z1, &gamma, 3).unwrap();
        assert_eq!(seq.monotonicity_violations(1e-9), 0);
        assert!(seq.terms.iter().all(|t| t.abs() <= seq.t_xy + 1e-9));
        assert_eq!(*seq.positions.last().unwrap(), gamma.len() - 1);

        let same = busemann_ray(&env, &x, &x, &gamma, 1).unwrap();
        assert!(same.terms.iter().all(|&t| t == 0.0));

        // x = z_i, y = z_j (j > i): terms equal T(x, y) beyond j
        let (i, j) = (2, 9);
        let (xi, yj) = (gamma.vertices[i].clone(), gamma.vertices[j].clone());
        let seq = busemann_ray(&env, &xi, &yj, &gamma, 1).unwrap();
        for (p, t) in seq.positions.iter().zip(&seq.terms) {
            if *p > j {
                assert!((t - seq.t_xy).abs() < 1e-9);
            }
        }

        let mut broken = gamma.clone();
        broken.vertices.swap(1, 2);
        assert!(busemann_ray(&env, &x, &z1, &broken, 1).is_err());
        assert!(busemann_ray(&env, &x, &z1, &gamma, 0).is_err());
    }

    #[test]
    fn gm_degenerate_case() {
        let dist = DistributionSpec::Exponential { rate: 1.0 };
        let recs = gm_records(dist, &GmParams { ell: 1, n: 1 }, 16, 4, 3, None).unwrap();
        for r in &recs {
            assert_eq!(r.mean_b, r.t_over_n);
            assert_eq!(r.mean_b, r.t_step);
        }
        let s = gm_summarize(&recs, 3);
        assert_eq!(s.difference, 0.0);
        assert!(matches!(
            gm_records(dist, &GmParams { ell: 4, n: 16 }, 32, 2, 0, None),
            Err(GeodesyError::MarginViolation(_))
        ));
    }

    #[test]
    fn gm_bound_holds() {
        let dist = DistributionSpec::Exponential { rate: 1.0 };
        let recs = gm_records(dist, &GmParams { ell: 2, n: 4 }, 24, 6, 11, None).unwrap();
        assert!(recs.iter().all(|r| r.bound_violations == 0));
    }

    #[test]
    fn sublinearity_controls() {
        let env = exp_env(9, 20);
        let w = busemann_window(&env, &[0, 0].into(), &TargetSpec::point([20, 0]), SubgraphMask::Full).unwrap();
        let shells = sublinearity_diagnostic(&w, &[0.0, 0.0]).unwrap();
        assert_eq!(shells.len(), 1);
        assert!(shells[0].max_deviation > 0.0);
        assert!(shells[0].vertices > 0);

        let small = busemann_window(
            &exp_env(9, 8),
            &[0, 0].into(),
            &TargetSpec::point([8, 0]),
            SubgraphMask::Full,
        )
        .unwrap();
        assert!(sublinearity_diagnostic(&small, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn sublinearity_of_linear_field_is_zero() {
        // Unit weights on the axis-0 edges and huge weights elsewhere make
        // T(x, {x0 >= 40}) = 40 - x0 for x0 <= 40, so B(0, x) = x0 exactly.
        let bbox = LatticeBox::new(vec![-40, -40], vec![40, 40]).unwrap();
        let mut m = BTreeMap::new();
        for v in bbox.vertices() {
            for axis in 0..2 {
                let e = EdgeId::new(v.clone(), axis);
                if bbox.contains_edge(&e) {
                    m.insert(e, if axis == 0 { 1.0 } else { 1e6 });
                }
            }
        }
        let env = WeightField::from_fixture(bbox, m).unwrap();
        let w = busemann_window(&env, &[0, 0].into(), &TargetSpec::half_space(vec![1.0, 0.0], 40.0), SubgraphMask::Full)
            .unwrap();
        let shells = sublinearity_shells(&w, &[1.0, 0.0], &[16, 32]).unwrap();
        for s in shells {
            assert_eq!(s.max_deviation, 0.0);
            assert!(s.vertices > 0);
        }
    }
}
