//! Shell maxima of `|B(0, x) - rho_hat . x| / |x|` for a half-space Busemann window.

use serde::{Deserialize, Serialize};

use super::shape::pilot_g_hat;
use super::{run_reps, CsvRecord, Margin};
use crate::busemann::{busemann_window, sublinearity_shells};
use crate::error::{GeodesyError, Result};
use crate::lattice::{DistributionSpec, LatticeBox, Vertex, WeightField};
use crate::passage::{SubgraphMask, TargetSpec};
use crate::stats::MeanEstimate;

fn default_shells() -> Vec<i64> {
    vec![16, 32, 64]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SublinearityParams {
    /// Target `{v : v[0] >= alpha}`, in lattice units.
    pub alpha: f64,
    /// `rho_hat = g_hat e1`; estimated by a pilot when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_hat: Option<f64>,
    #[serde(default = "default_shells")]
    pub shells: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellRecord {
    pub rep: usize,
    pub seed: u64,
    pub shell: i64,
    pub max_deviation: f64,
    pub vertices: usize,
    pub flagged: bool,
}

impl CsvRecord for ShellRecord {
    fn header() -> &'static [&'static str] {
        &["rep", "seed", "shell", "max_deviation", "vertices", "flagged"]
    }
    fn fields(&self) -> Vec<String> {
        vec![
            self.rep.to_string(),
            self.seed.to_string(),
            self.shell.to_string(),
            self.max_deviation.to_string(),
            self.vertices.to_string(),
            self.flagged.to_string(),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellSummary {
    pub shell: i64,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SublinearityResult {
    pub g_hat: f64,
    pub shells: Vec<ShellSummary>,
    pub flagged_reps: usize,
    #[serde(skip)]
    pub records: Vec<ShellRecord>,
}

impl SublinearityResult {
    pub fn summary(&self) -> &Self {
        self
    }

    pub fn shell(&self, r: i64) -> Option<&ShellSummary> {
        self.shells.iter().find(|s| s.shell == r)
    }
}

pub fn sublinearity_experiment(
    dist: DistributionSpec,
    params: &SublinearityParams,
    l: i64,
    reps: usize,
    seed0: u64,
    workers: Option<usize>,
) -> Result<SublinearityResult> {
    let margin = Margin::new(l)?;
    if !(params.alpha.is_finite() && params.alpha > 0.0) {
        return Err(GeodesyError::InvalidInput("alpha must be positive".into()));
    }
    margin.require_within(params.alpha.ceil() as i64, "alpha")?;
    if params.shells.is_empty() || params.shells.iter().any(|&r| r < 1) {
        return Err(GeodesyError::InvalidInput("shells must be positive radii".into()));
    }
    for &r in &params.shells {
        margin.require_within(r, "shell radius")?;
    }
    let g_hat = match params.g_hat {
        Some(g) if g.is_finite() && g > 0.0 => g,
        Some(g) => return Err(GeodesyError::InvalidInput(format!("g_hat must be positive, got {g}"))),
        None => pilot_g_hat(dist, &[1.0, 0.0], l, seed0, workers)?,
    };
    let rho_hat = [g_hat, 0.0];
    let bbox = LatticeBox::centered(2, l)?;
    let target = TargetSpec::half_space(vec![1.0, 0.0], params.alpha);
    let origin = Vertex::origin(2);

    let per_rep = run_reps(reps, workers, |rep| {
        let seed = seed0.wrapping_add(rep as u64);
        let env = WeightField::new(seed, dist, bbox.clone())?;
        let window = busemann_window(&env, &origin, &target, SubgraphMask::Full)?;
        let flagged = margin.touches_band(&window.passage().geodesic(&origin)?);
        Ok(sublinearity_shells(&window, &rho_hat, &params.shells)?
            .into_iter()
            .map(|s| ShellRecord {
                rep,
                seed,
                shell: s.radius,
                max_deviation: s.max_deviation,
                vertices: s.vertices,
                flagged,
            })
            .collect::<Vec<_>>())
    })?;
    let flagged_reps = per_rep.iter().filter(|r| r.first().is_some_and(|x| x.flagged)).count();
    let records: Vec<ShellRecord> = per_rep.into_iter().flatten().collect();
    let shells = params
        .shells
        .iter()
        .map(|&shell| {
            let xs: Vec<f64> = records
                .iter()
                .filter(|r| r.shell == shell && !r.flagged)
                .map(|r| r.max_deviation)
                .collect();
            let m = MeanEstimate::from_samples(&xs);
            ShellSummary {
                shell,
                mean: m.mean,
                stderr: m.stderr,
                n: m.n,
            }
        })
        .collect();
    Ok(SublinearityResult {
        g_hat,
        shells,
        flagged_reps,
        records,
    })
}
