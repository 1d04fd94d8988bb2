//! Two-seed competition: do both infection clusters reach the margin band?

use serde::{Deserialize, Serialize};

use super::{run_reps, CsvRecord, Margin};
use crate::error::{GeodesyError, Result};
use crate::geostruct::infection_partition;
use crate::lattice::{DistributionSpec, LatticeBox, Vertex, WeightField};
use crate::stats::wilson_interval;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoexistenceParams {
    pub ell: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoexistenceRecord {
    pub rep: usize,
    pub seed: u64,
    /// Per seed: whether its cluster leaves the inner box of radius `L - ceil(L/8)`.
    pub reach: Vec<bool>,
    pub sizes: Vec<usize>,
    pub contested: usize,
    pub connectivity_violations: usize,
}

impl CoexistenceRecord {
    pub fn all_reach(&self) -> bool {
        self.reach.iter().all(|&r| r)
    }
}

impl CsvRecord for CoexistenceRecord {
    fn header() -> &'static [&'static str] {
        &["rep", "seed", "reach", "sizes", "coexist", "contested", "connectivity_violations"]
    }
    fn fields(&self) -> Vec<String> {
        let join = |xs: Vec<String>| xs.join(";");
        vec![
            self.rep.to_string(),
            self.seed.to_string(),
            join(self.reach.iter().map(|r| u8::from(*r).to_string()).collect()),
            join(self.sizes.iter().map(|s| s.to_string()).collect()),
            self.all_reach().to_string(),
            self.contested.to_string(),
            self.connectivity_violations.to_string(),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoexistenceResult {
    pub fraction: f64,
    /// 99% Wilson interval for the coexistence probability.
    pub ci99: (f64, f64),
    pub successes: usize,
    pub reps: usize,
    pub contested: usize,
    pub connectivity_violations: usize,
    #[serde(skip)]
    pub records: Vec<CoexistenceRecord>,
}

impl CoexistenceResult {
    pub fn summary(&self) -> &Self {
        self
    }
}

/// Competition partitions for fixed seeds on `[-L, L]^2`, one per replication.
pub fn competition_records(
    dist: DistributionSpec,
    seeds: &[Vertex],
    l: i64,
    reps: usize,
    seed0: u64,
    workers: Option<usize>,
) -> Result<Vec<CoexistenceRecord>> {
    let margin = Margin::new(l)?;
    for s in seeds {
        margin.require_within(s.sup_norm(), "seed position")?;
    }
    let bbox = LatticeBox::centered(2, l)?;
    let band = margin.inner_radius() + 1;
    run_reps(reps, workers, |rep| {
        let seed = seed0.wrapping_add(rep as u64);
        let env = WeightField::new(seed, dist, bbox.clone())?;
        let part = infection_partition(&env, seeds)?;
        Ok(CoexistenceRecord {
            rep,
            seed,
            reach: (0..seeds.len()).map(|k| part.reaches_sup_radius(k, band)).collect(),
            sizes: (0..seeds.len()).map(|k| part.count(k)).collect(),
            contested: part.contested(),
            connectivity_violations: part.connectivity_violations(),
        })
    })
}

pub fn summarize(records: Vec<CoexistenceRecord>) -> CoexistenceResult {
    let reps = records.len();
    let successes = records.iter().filter(|r| r.all_reach()).count();
    CoexistenceResult {
        fraction: if reps == 0 { 0.0 } else { successes as f64 / reps as f64 },
        ci99: wilson_interval(successes, reps, 0.99),
        successes,
        reps,
        contested: records.iter().map(|r| r.contested).sum(),
        connectivity_violations: records.iter().map(|r| r.connectivity_violations).sum(),
        records,
    }
}

/// Seeds `0` and `ell e1`; coexistence means both clusters reach the margin band.
pub fn coexistence_experiment(
    dist: DistributionSpec,
    ell: i64,
    l: i64,
    reps: usize,
    seed0: u64,
    workers: Option<usize>,
) -> Result<CoexistenceResult> {
    if ell == 0 {
        return Err(GeodesyError::InvalidInput("seeds must be distinct (ell = 0)".into()));
    }
    let seeds = [Vertex::origin(2), Vertex::axis(2, 0, ell)];
    Ok(summarize(competition_records(dist, &seeds, l, reps, seed0, workers)?))
}
