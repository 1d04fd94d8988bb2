//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use geodesy::busemann::{busemann_ray, busemann_window, gm_statistic, sublinearity_shells};
use geodesy::experiments::shape::planar_directions;
use geodesy::experiments::{self, coexistence_experiment, estimate_shape, halfplane};
use geodesy::geostruct::{eta_field, eta_walk, geodesic_tree, verify_tree};
use geodesy::passage::geodesic;
use geodesy::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXP1: DistributionSpec = DistributionSpec::Exponential { rate: 1.0 };

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// `g(e1)` from criterion 10, reused by criterion 11.
static G_E1: OnceLock<f64> = OnceLock::new();

fn box_edges(bbox: &LatticeBox) -> Vec<EdgeId> {
    let mut out = Vec::new();
    for v in bbox.vertices() {
        for axis in 0..bbox.dim() {
            let mut w = v.clone();
            w.0[axis] += 1;
            if bbox.contains(&w) {
                out.push(EdgeId::new(v.clone(), axis));
            }
        }
    }
    out
}

/// All-pairs shortest paths by Floyd-Warshall over an explicit edge list.
fn floyd_warshall(vertices: &[Vertex], weights: &BTreeMap<EdgeId, f64>) -> Vec<Vec<f64>> {
    let index: HashMap<&Vertex, usize> = vertices.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let n = vertices.len();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for (e, &w) in weights {
        let (a, b) = e.endpoints();
        let (i, j) = (index[&a], index[&b]);
        d[i][j] = d[i][j].min(w);
        d[j][i] = d[j][i].min(w);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

fn c1_oracle() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut envs = 0;
    for (dim, hi) in [(2usize, 3i64), (3, 2)] {
        for s in 0..50u64 {
            let bbox = LatticeBox::new(vec![0; dim], vec![hi; dim])?;
            let mut rng = ChaCha8Rng::seed_from_u64(s * 31 + dim as u64);
            let weights: BTreeMap<EdgeId, f64> = box_edges(&bbox)
                .into_iter()
                .map(|e| (e, rng.gen_range(0.05..3.0)))
                .collect();
            let env = WeightField::from_fixture(bbox.clone(), weights.clone())?;
            let vertices: Vec<Vertex> = bbox.vertices().collect();
            let fw = floyd_warshall(&vertices, &weights);
            let engine = PassageEngine::new(&env, SubgraphMask::Full)?;
            for (j, target) in vertices.iter().enumerate() {
                let map = engine.solve_point(target)?;
                for (i, v) in vertices.iter().enumerate() {
                    worst = worst.max((map.time(v)? - fw[i][j]).abs());
                }
            }
            envs += 1;
        }
    }
    Ok(outcome(worst <= 1e-9, format!("{envs} environments, max |T - oracle| = {worst:.3e}")))
}

fn grid64(seed: u64) -> Result<WeightField> {
    WeightField::new(seed, EXP1, LatticeBox::new(vec![0, 0], vec![63, 63])?)
}

fn c2_ties() -> Result<Outcome> {
    let mut ties = 0;
    for s in 0..100 {
        let env = grid64(s)?;
        ties += PassageEngine::new(&env, SubgraphMask::Full)?
            .solve_point(&Vertex::from([32, 32]))?
            .tie_events();
    }
    Ok(outcome(ties == 0, format!("tie events over 100 environments = {ties}")))
}

fn c3_tree() -> Result<Outcome> {
    let (mut bad, mut samples, mut cyclic) = (0, 0, 0);
    for s in 0..100 {
        let env = grid64(s)?;
        let tree = geodesic_tree(&env, &Vertex::from([32, 32]))?;
        let report = verify_tree(&tree, &env, 40, s)?;
        cyclic += usize::from(!report.acyclic);
        bad += usize::from(!report.passes());
        samples += report.samples;
    }
    Ok(outcome(
        bad == 0 && cyclic == 0,
        format!("100 trees, {samples} sub-path spot checks, {cyclic} cyclic, {bad} failing reports"),
    ))
}

fn random_vertex(rng: &mut ChaCha8Rng, bbox: &LatticeBox) -> Vertex {
    bbox.vertex_at(rng.gen_range(0..bbox.vertex_count()))
}

fn c4_algebra() -> Result<Outcome> {
    let (mut bound, mut additivity, mut antisym, mut ray) = (0, 0, 0, 0);
    let mut triples = 0;
    for s in 0..20u64 {
        let env = WeightField::new(500 + s, EXP1, LatticeBox::centered(2, 24)?)?;
        let target = if s % 2 == 0 {
            TargetSpec::point(Vertex::from([20, 7]))
        } else {
            TargetSpec::half_space(vec![1.0, 0.3], 15.0)
        };
        let window = busemann_window(&env, &Vertex::origin(2), &target, SubgraphMask::Full)?;
        let engine = PassageEngine::new(&env, SubgraphMask::Full)?;
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        for _ in 0..500 {
            let bbox = env.bbox();
            let (x, y, z) = (random_vertex(&mut rng, bbox), random_vertex(&mut rng, bbox), random_vertex(&mut rng, bbox));
            let from_x = engine.solve_point(&x)?;
            let b = |p: &Vertex, q: &Vertex| window.b(p, q).map(|v| v.expect("connected box"));
            let (bxy, byz, bxz) = (b(&x, &y)?, b(&y, &z)?, b(&x, &z)?);
            bound += usize::from(bxy.abs() > from_x.time(&y)? + 1e-9);
            additivity += usize::from(bxy + byz - bxz != 0.0);
            antisym += usize::from(bxy != -b(&y, &x)?);
            let path = window.passage().geodesic(&x)?;
            let on_ray = &path.vertices[rng.gen_range(0..path.len())];
            ray += usize::from((b(&x, on_ray)? - from_x.time(on_ray)?).abs() > 1e-9);
            triples += 1;
        }
    }
    let total = bound + additivity + antisym + ray;
    Ok(outcome(
        total == 0,
        format!(
            "{triples} triples over 20 seeds; violations: bound {bound}, additivity {additivity}, antisymmetry {antisym}, along-ray {ray}"
        ),
    ))
}

fn c5_monotone() -> Result<Outcome> {
    let (mut violations, mut shortest) = (0, usize::MAX);
    for s in 0..100u64 {
        let env = WeightField::new(2000 + s, EXP1, LatticeBox::centered(2, 128)?)?;
        let y = Vertex::origin(2);
        let gamma = geodesic(&env, &y, &TargetSpec::point(Vertex::from([110, 0])), SubgraphMask::Full)?;
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let x = Vertex::from([rng.gen_range(-10..=10), rng.gen_range(-10..=10)]);
        let seq = busemann_ray(&env, &x, &y, &gamma, 1)?;
        violations += seq.monotonicity_violations(1e-9);
        shortest = shortest.min(gamma.len());
    }
    Ok(outcome(
        violations == 0 && shortest >= 100,
        format!("100 rays, shortest {shortest} vertices, {violations} increases beyond 1e-9"),
    ))
}

fn c6_eta() -> Result<Outcome> {
    let (mut violations, mut walks) = (0, 0);
    let mut worst: f64 = 0.0;
    for s in 0..100u64 {
        let env = WeightField::new(3000 + s, EXP1, LatticeBox::centered(2, 32)?)?;
        let field = eta_field(&env, vec![0.45, 0.15], 6.0, SubgraphMask::Full)?;
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let mut started = 0;
        while started < 20 {
            let x = random_vertex(&mut rng, env.bbox());
            let target = field.passage().time(&x)?;
            if target == 0.0 {
                continue;
            }
            started += 1;
            walks += 1;
            match eta_walk(&field, &env, &x) {
                Ok(walk) => {
                    let dev = (walk.weight(&env)? - target).abs();
                    worst = worst.max(dev);
                    violations += usize::from(dev > 1e-9 || !field.passage().target().contains(walk.end().unwrap()));
                }
                Err(_) => violations += 1,
            }
        }
    }
    Ok(outcome(
        violations == 0,
        format!("{walks} walks over 100 environments, max |weight - T(x,H)| = {worst:.3e}, {violations} violations"),
    ))
}

fn c7_gm() -> Result<Outcome> {
    let s = gm_statistic(EXP1, 4, 16, 128, 200, 70_000)?;
    Ok(outcome(
        s.within(3.0) && s.bound_violations == 0,
        format!(
            "mean B = {:.4}, mean T/n = {:.4}, |diff| = {:.4} vs 3 x {:.4}; {} flagged, {} bound violations",
            s.busemann_mean.mean,
            s.passage_mean.mean,
            s.difference.abs(),
            s.combined_stderr,
            s.flagged,
            s.bound_violations
        ),
    ))
}

fn c8_coexistence() -> Result<Outcome> {
    let r = coexistence_experiment(EXP1, 4, 128, 200, 80_000, None)?;
    Ok(outcome(
        r.ci99.0 > 0.0,
        format!("fraction {:.3} ({}/{}), 99% Wilson interval [{:.3}, {:.3}]", r.fraction, r.successes, r.reps, r.ci99.0, r.ci99.1),
    ))
}

fn c9_halfplane() -> Result<Outcome> {
    let rs = experiments::halfplane_compare(EXP1, 80.0, 120, 200, 90_000, None)?;
    let crossing: Vec<_> = rs.iter().filter(|r| r.crossing_vertex.is_some()).collect();
    let violations = crossing.iter().filter(|r| r.delta_proxy < -1e-9).count();
    let min = crossing.iter().map(|r| r.delta_proxy).fold(f64::INFINITY, f64::min);
    let s = halfplane::summarize(&rs);
    Ok(outcome(
        violations == 0,
        format!(
            "{} of {} reps have a crossing vertex, {violations} violations, min delta {min:.3e}, {} flagged",
            crossing.len(),
            rs.len(),
            s.flagged
        ),
    ))
}

fn c10_shape() -> Result<Outcome> {
    let est = estimate_shape(EXP1, &planar_directions(16), &[64, 256], 293, 100, 100_000, None)?;
    let g1 = est.g_hat_along(&[1.0, 0.0]).expect("e1 present");
    let g2 = est.g_hat_along(&[0.0, 1.0]).expect("e2 present");
    let z = (g1.mean - g2.mean).abs() / g1.combined_stderr(&g2);
    let convexity = est.convexity_checks();
    let bad_convex = convexity.iter().filter(|c| !c.passes(3.0)).count();
    let _ = G_E1.set(g1.mean);
    Ok(outcome(
        z < 3.0 && est.subadditivity_violations == 0 && bad_convex == 0 && convexity.len() == 16,
        format!(
            "g(e1) = {:.4} +- {:.4}, g(e2) = {:.4} +- {:.4} (z = {z:.2}); subadditivity violations {}; convexity failures {bad_convex}/{}; {} flagged",
            g1.mean,
            g1.stderr,
            g2.mean,
            g2.stderr,
            est.subadditivity_violations,
            convexity.len(),
            est.flagged
        ),
    ))
}

fn c11_sublinearity() -> Result<Outcome> {
    let g = *G_E1.get_or_init(|| {
        estimate_shape(EXP1, &[vec![1.0, 0.0]], &[256], 293, 100, 100_000, None)
            .map(|e| e.g_hat[0].g_hat().mean)
            .unwrap_or(f64::NAN)
    });
    let rho_hat = [g, 0.0];
    let target = TargetSpec::half_space(vec![1.0, 0.0], 160.0);
    let (mut s16, mut s64) = (Vec::new(), Vec::new());
    for s in 0..50u64 {
        let env = WeightField::new(110_000 + s, EXP1, LatticeBox::centered(2, 192)?)?;
        let window = busemann_window(&env, &Vertex::origin(2), &target, SubgraphMask::Full)?;
        let shells = sublinearity_shells(&window, &rho_hat, &[16, 64])?;
        s16.push(shells[0].max_deviation);
        s64.push(shells[1].max_deviation);
    }
    let (m16, m64) = (stats::MeanEstimate::from_samples(&s16), stats::MeanEstimate::from_samples(&s64));
    Ok(outcome(
        m64.mean < m16.mean,
        format!(
            "rho_hat = ({g:.4}, 0); mean shell-16 deviation {:.4} +- {:.4}, shell-64 {:.4} +- {:.4}",
            m16.mean, m16.stderr, m64.mean, m64.stderr
        ),
    ))
}

fn c12_determinism() -> Result<Outcome> {
    let configs = [
        r#"{"experiment": "coexistence", "dist": {"kind": "exponential", "rate": 1.0},
            "L": 24, "reps": 6, "seed0": 5, "params": {"ell": 3}}"#,
        r#"{"experiment": "halfplane_compare", "dist": {"kind": "uniform", "a": 0.5, "b": 1.5},
            "L": 24, "reps": 6, "seed0": 9, "params": {"target_alpha": 12}}"#,
        r#"{"experiment": "shape", "dist": {"kind": "shifted_exponential", "shift": 0.2, "rate": 2.0},
            "L": 32, "reps": 5, "seed0": 1, "params": {"direction_count": 8, "sizes": [8, 16]}}"#,
    ];
    let mut mismatches = 0;
    for text in configs {
        let cfg = experiments::ExperimentConfig::from_json(text)?;
        let a = experiments::run(&cfg, Some(1))?;
        let b = experiments::run(&cfg, None)?;
        let c = experiments::run(&cfg, Some(3))?;
        mismatches += usize::from(a.records_csv != b.records_csv || a.records_csv != c.records_csv);
    }
    Ok(outcome(
        mismatches == 0,
        format!("{} configs rerun with 1, default and 3 workers; {mismatches} differing records.csv", configs.len()),
    ))
}

type Criterion = (u32, &'static str, u64, fn() -> Result<Outcome>);

fn main() {
    let criteria: [Criterion; 12] = [
        (1, "oracle equivalence", 10, c1_oracle),
        (2, "no ties in continuous environments", 30, c2_ties),
        (3, "geodesic tree invariants", 60, c3_tree),
        (4, "Busemann algebra", 60, c4_algebra),
        (5, "monotone Busemann sequence along rays", 120, c5_monotone),
        (6, "eta walks are geodesics", 60, c6_eta),
        (7, "averaging identity", 300, c7_gm),
        (8, "coexistence", 300, c8_coexistence),
        (9, "half-plane crossing inequality", 300, c9_halfplane),
        (10, "shape sanity", 600, c10_shape),
        (11, "Busemann sublinearity trend", 600, c11_sublinearity),
        (12, "determinism", 60, c12_determinism),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (n, name, budget, f) in criteria {
        if filter.as_deref().is_some_and(|p| !name.contains(p) && p != n.to_string()) {
            continue;
        }
        let start = Instant::now();
        let result = f();
        let elapsed = start.elapsed();
        let in_time = elapsed < Duration::from_secs(budget);
        let (pass, detail) = match result {
            Ok(o) => (o.pass && in_time, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "{} [{n:>2}] {name}: {detail} ({:.1}s of {budget}s)",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
