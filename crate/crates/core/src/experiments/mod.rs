//! Config-driven Monte Carlo experiments.
//!
//! Every replication `rep` uses the environment seeded by `seed0 + rep`,
//! replications run in parallel, and results are gathered in replication
//! order, so a config always reproduces the same records.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::busemann::{gm_records, gm_summarize, GmParams};
use crate::error::{GeodesyError, Result};
use crate::lattice::{DistributionSpec, Vertex};
use crate::passage::GeodesicPath;

pub mod coalescence;
pub mod coexistence;
pub mod directedness;
pub mod halfplane;
pub mod shape;
pub mod sublinearity;

pub use coalescence::{coalescence_experiment, CoalescenceParams, CoalescenceRecord, CoalescenceResult};
pub use coexistence::{coexistence_experiment, competition_records, CoexistenceParams, CoexistenceRecord, CoexistenceResult};
pub use directedness::{directedness_experiment, hit_angle, DirectednessParams, DirectionRecord, DirectionStats};
pub use halfplane::{halfplane_compare, halfplane_compare_env, HalfPlaneCompare, HalfPlaneParams};
pub use shape::{estimate_shape, ShapeEstimate, ShapeParams};
pub use sublinearity::{sublinearity_experiment, SublinearityParams, SublinearityResult};

/// The outer band `L - ceil(L/8) < |v|_inf <= L` that recorded geodesics must avoid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Margin {
    l: i64,
    width: i64,
}

impl Margin {
    pub fn new(l: i64) -> Result<Self> {
        if l < 1 {
            return Err(GeodesyError::InvalidInput(format!("L must be positive, got {l}")));
        }
        Ok(Margin { l, width: (l + 7) / 8 })
    }

    pub fn width(&self) -> i64 {
        self.width
    }

    /// Largest sup-norm radius outside the band.
    pub fn inner_radius(&self) -> i64 {
        self.l - self.width
    }

    pub fn in_band(&self, v: &Vertex) -> bool {
        v.sup_norm() > self.inner_radius()
    }

    pub fn touches_band(&self, path: &GeodesicPath) -> bool {
        path.vertices.iter().any(|v| self.in_band(v))
    }

    /// Errors unless `extent` (a sup-norm reach) stays inside the inner box.
    pub fn require_within(&self, extent: i64, what: &str) -> Result<()> {
        if extent > self.inner_radius() {
            return Err(GeodesyError::MarginViolation(format!(
                "{what} = {extent} exceeds the safe radius {} of L = {}",
                self.inner_radius(),
                self.l
            )));
        }
        Ok(())
    }
}

/// Runs `f(rep)` for every replication, in parallel, returning results in rep order.
pub fn run_reps<T, F>(reps: usize, workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let go = || (0..reps).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
    match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| GeodesyError::InvalidInput(format!("worker pool: {e}")))?
            .install(go),
        None => go(),
    }
}

/// One CSV row per replication (or per replication and sub-case).
pub trait CsvRecord {
    fn header() -> &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

pub fn records_to_csv<R: CsvRecord>(records: &[R]) -> String {
    let mut out = R::header().join(",");
    out.push('\n');
    for r in records {
        out.push_str(&r.fields().join(","));
        out.push('\n');
    }
    out
}

/// Vertex as a CSV-safe field, e.g. `4;-2`.
pub(crate) fn vertex_field(v: &Vertex) -> String {
    v.0.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";")
}

/// A parsed experiment config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub experiment: Experiment,
    pub dist: DistributionSpec,
    #[serde(rename = "L")]
    pub l: i64,
    pub reps: usize,
    pub seed0: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", content = "params", rename_all = "snake_case")]
pub enum Experiment {
    Shape(ShapeParams),
    Coexistence(CoexistenceParams),
    Directedness(DirectednessParams),
    Coalescence(CoalescenceParams),
    HalfplaneCompare(HalfPlaneParams),
    GmAverage(GmParams),
    Sublinearity(SublinearityParams),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Shape(_) => "shape",
            Experiment::Coexistence(_) => "coexistence",
            Experiment::Directedness(_) => "directedness",
            Experiment::Coalescence(_) => "coalescence",
            Experiment::HalfplaneCompare(_) => "halfplane_compare",
            Experiment::GmAverage(_) => "gm_average",
            Experiment::Sublinearity(_) => "sublinearity",
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        if cfg.reps == 0 {
            return Err(GeodesyError::InvalidInput("reps must be at least 1".into()));
        }
        cfg.dist.validate()?;
        Ok(cfg)
    }
}

/// Records and summary of one experiment run.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutput {
    pub records_csv: String,
    pub summary: serde_json::Value,
    /// Replications excluded because a geodesic touched the margin band.
    pub flagged: usize,
    pub reps: usize,
}

impl ExperimentOutput {
    pub fn flagged_fraction(&self) -> f64 {
        if self.reps == 0 {
            0.0
        } else {
            self.flagged as f64 / self.reps as f64
        }
    }
}

fn summary_value<S: Serialize>(cfg: &ExperimentConfig, result: S) -> Result<serde_json::Value> {
    Ok(serde_json::json!({
        "experiment": cfg.experiment.name(),
        "reps": cfg.reps,
        "seed0": cfg.seed0,
        "L": cfg.l,
        "dist": cfg.dist,
        "params": &cfg.experiment,
        "result": result,
    }))
}

/// Runs the experiment named by `cfg`.
pub fn run(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentOutput> {
    let (reps, seed0, l, dist) = (cfg.reps, cfg.seed0, cfg.l, cfg.dist);
    match &cfg.experiment {
        Experiment::Shape(p) => {
            let est = estimate_shape(dist, &p.directions(), &p.sizes, l, reps, seed0, workers)?;
            Ok(ExperimentOutput {
                records_csv: records_to_csv(&est.records),
                flagged: est.flagged,
                reps,
                summary: summary_value(cfg, est.summary())?,
            })
        }
        Experiment::Coexistence(p) => {
            let r = coexistence_experiment(dist, p.ell, l, reps, seed0, workers)?;
            Ok(ExperimentOutput {
                records_csv: records_to_csv(&r.records),
                flagged: 0,
                reps,
                summary: summary_value(cfg, r.summary())?,
            })
        }
        Experiment::Directedness(p) => {
            let s = directedness_experiment(dist, p, l, reps, seed0, workers)?;
            Ok(ExperimentOutput {
                records_csv: records_to_csv(&s.records),
                flagged: s.flagged_reps,
                reps,
                summary: summary_value(cfg, s.summary())?,
            })
        }
        Experiment::Coalescence(p) => {
            let r = coalescence_experiment(dist, &p.offsets, p.target_alpha, l, reps, seed0, workers)?;
            Ok(ExperimentOutput {
                records_csv: records_to_csv(&r.records),
                flagged: r.flagged_reps,
                reps,
                summary: summary_value(cfg, r.summary(p.histogram_bin))?,
            })
        }
        Experiment::HalfplaneCompare(p) => {
            let rs = halfplane_compare(dist, p.target_alpha, l, reps, seed0, workers)?;
            let flagged = rs.iter().filter(|r| r.flagged).count();
            Ok(ExperimentOutput {
                records_csv: records_to_csv(&rs),
                flagged,
                reps,
                summary: summary_value(cfg, halfplane::summarize(&rs))?,
            })
        }
        Experiment::GmAverage(p) => {
            let recs = gm_records(dist, p, l, reps, seed0, workers)?;
            let summary = gm_summarize(&recs, seed0);
            Ok(ExperimentOutput {
                records_csv: records_to_csv(&recs),
                flagged: summary.flagged,
                reps,
                summary: summary_value(cfg, summary)?,
            })
        }
        Experiment::Sublinearity(p) => {
            let r = sublinearity_experiment(dist, p, l, reps, seed0, workers)?;
            Ok(ExperimentOutput {
                records_csv: records_to_csv(&r.records),
                flagged: r.flagged_reps,
                reps,
                summary: summary_value(cfg, r.summary())?,
            })
        }
    }
}

impl CsvRecord for crate::busemann::GmRecord {
    fn header() -> &'static [&'static str] {
        &["rep", "seed", "mean_b", "t_over_n", "t_step", "bound_violations", "flagged"]
    }
    fn fields(&self) -> Vec<String> {
        vec![
            self.rep.to_string(),
            self.seed.to_string(),
            self.mean_b.to_string(),
            self.t_over_n.to_string(),
            self.t_step.to_string(),
            self.bound_violations.to_string(),
            self.flagged.to_string(),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margin_band() {
        let m = Margin::new(128).unwrap();
        assert_eq!(m.width(), 16);
        assert_eq!(m.inner_radius(), 112);
        assert!(m.require_within(112, "x").is_ok());
        assert!(matches!(m.require_within(113, "x"), Err(GeodesyError::MarginViolation(_))));
        assert!(m.in_band(&Vertex::from([0, -113])));
        assert!(!m.in_band(&Vertex::from([112, 112])));
        assert_eq!(Margin::new(120).unwrap().inner_radius(), 105);
    }

    #[test]
    fn reps_come_back_in_order() {
        let out = run_reps(50, Some(3), |r| Ok(r * r)).unwrap();
        assert_eq!(out, (0..50).map(|r| r * r).collect::<Vec<_>>());
        let err = run_reps(5, None, |r| if r == 3 { Err(GeodesyError::EmptyTarget) } else { Ok(r) });
        assert!(err.is_err());
    }

    #[test]
    fn config_parsing() {
        let text = r#"{
            "experiment": "coexistence",
            "dist": {"kind": "exponential", "rate": 1.0},
            "L": 16, "reps": 2, "seed0": 7,
            "params": {"ell": 2}
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.experiment, Experiment::Coexistence(CoexistenceParams { ell: 2 }));
        assert_eq!(cfg.l, 16);

        let bad = text.replace("\"ell\": 2", "\"ell\": 2, \"bogus\": 1");
        let err = ExperimentConfig::from_json(&bad).unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
        let bad = text.replace("coexistence", "nope");
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }
}
