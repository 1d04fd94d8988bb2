//! Do geodesics from nearby starts to a common half-space merge before hitting it?

use serde::{Deserialize, Serialize};

use super::{run_reps, vertex_field, CsvRecord, Margin};
use crate::error::{GeodesyError, Result};
use crate::geostruct::coalescence_point;
use crate::lattice::{DistributionSpec, LatticeBox, Vertex, WeightField};
use crate::passage::{PassageEngine, PassageMap, SubgraphMask, TargetSpec};

fn default_bin() -> usize {
    8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoalescenceParams {
    pub offsets: Vec<Vertex>,
    /// Target half-space `{v : v[0] >= target_alpha}`, in lattice units.
    pub target_alpha: f64,
    #[serde(default = "default_bin")]
    pub histogram_bin: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoalescenceRecord {
    pub rep: usize,
    pub seed: u64,
    pub offset: Vertex,
    pub merged: bool,
    /// Steps along the geodesic from the origin to the first shared vertex.
    pub depth: Option<usize>,
    pub meeting: Option<Vertex>,
    pub flagged: bool,
}

impl CsvRecord for CoalescenceRecord {
    fn header() -> &'static [&'static str] {
        &["rep", "seed", "offset", "merged", "depth", "meeting", "flagged"]
    }
    fn fields(&self) -> Vec<String> {
        vec![
            self.rep.to_string(),
            self.seed.to_string(),
            vertex_field(&self.offset),
            self.merged.to_string(),
            self.depth.map_or_else(String::new, |d| d.to_string()),
            self.meeting.as_ref().map_or_else(String::new, vertex_field),
            self.flagged.to_string(),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffsetSummary {
    pub offset: Vertex,
    pub frequency: f64,
    pub stderr: f64,
    pub used: usize,
    /// `(bin start, count)` of merge depths.
    pub histogram: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoalescenceSummary {
    pub target_alpha: f64,
    pub per_offset: Vec<OffsetSummary>,
    pub flagged_reps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoalescenceResult {
    pub offsets: Vec<Vertex>,
    pub target_alpha: f64,
    pub flagged_reps: usize,
    pub records: Vec<CoalescenceRecord>,
}

impl CoalescenceResult {
    /// Merge frequency and its binomial standard error over unflagged reps.
    pub fn frequency(&self, offset: &Vertex) -> Option<(f64, f64, usize)> {
        let rows: Vec<&CoalescenceRecord> = self
            .records
            .iter()
            .filter(|r| &r.offset == offset && !r.flagged)
            .collect();
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        let p = rows.iter().filter(|r| r.merged).count() as f64 / n;
        Some((p, (p * (1.0 - p) / n).sqrt(), rows.len()))
    }

    pub fn summary(&self, bin: usize) -> CoalescenceSummary {
        let bin = bin.max(1);
        let per_offset = self
            .offsets
            .iter()
            .map(|o| {
                let (frequency, stderr, used) = self.frequency(o).unwrap_or((0.0, 0.0, 0));
                let mut hist = std::collections::BTreeMap::new();
                for r in self.records.iter().filter(|r| &r.offset == o && !r.flagged && r.merged) {
                    *hist.entry(r.depth.unwrap_or(0) / bin * bin).or_insert(0) += 1;
                }
                OffsetSummary {
                    offset: o.clone(),
                    frequency,
                    stderr,
                    used,
                    histogram: hist.into_iter().collect(),
                }
            })
            .collect();
        CoalescenceSummary {
            target_alpha: self.target_alpha,
            per_offset,
            flagged_reps: self.flagged_reps,
        }
    }
}

/// `(merged, depth, meeting vertex, vertices of both geodesics)`.
pub type MergeOutcome = (bool, Option<usize>, Option<Vertex>, Vec<Vertex>);

/// Merge test for one offset against a half-space solve: the geodesics from
/// the origin and from `offset` share a vertex outside the target.
pub fn merge_record(map: &PassageMap, offset: &Vertex) -> Result<MergeOutcome> {
    let origin = Vertex::origin(map.bbox().dim());
    let p1 = map.geodesic(&origin)?;
    let p2 = map.geodesic(offset)?;
    let meet = coalescence_point(&p1, &p2);
    let merged = meet.as_ref().is_some_and(|c| !map.target().contains(&c.vertex));
    let mut touched = p1.vertices;
    touched.extend(p2.vertices);
    Ok(match meet {
        Some(c) if merged => (true, Some(c.index1), Some(c.vertex), touched),
        _ => (false, None, None, touched),
    })
}

pub fn coalescence_experiment(
    dist: DistributionSpec,
    offsets: &[Vertex],
    target_alpha: f64,
    l: i64,
    reps: usize,
    seed0: u64,
    workers: Option<usize>,
) -> Result<CoalescenceResult> {
    if offsets.is_empty() {
        return Err(GeodesyError::InvalidInput("no offsets given".into()));
    }
    if !target_alpha.is_finite() {
        return Err(GeodesyError::InvalidInput("target_alpha must be finite".into()));
    }
    let margin = Margin::new(l)?;
    for o in offsets {
        if o.dim() != 2 {
            return Err(GeodesyError::DimensionMismatch { expected: 2, got: o.dim() });
        }
        margin.require_within(o.sup_norm(), "offset")?;
    }
    margin.require_within(target_alpha.ceil() as i64, "target_alpha")?;
    let bbox = LatticeBox::centered(2, l)?;
    let target = TargetSpec::half_space(vec![1.0, 0.0], target_alpha);

    let per_rep = run_reps(reps, workers, |rep| {
        let seed = seed0.wrapping_add(rep as u64);
        let env = WeightField::new(seed, dist, bbox.clone())?;
        let map = PassageEngine::new(&env, SubgraphMask::Full)?.solve(&target)?;
        let mut out = Vec::with_capacity(offsets.len());
        let mut flagged = false;
        for o in offsets {
            let (merged, depth, meeting, touched) = merge_record(&map, o)?;
            flagged |= touched.iter().any(|v| margin.in_band(v));
            out.push(CoalescenceRecord {
                rep,
                seed,
                offset: o.clone(),
                merged,
                depth,
                meeting,
                flagged: false,
            });
        }
        for r in &mut out {
            r.flagged = flagged;
        }
        Ok(out)
    })?;
    let flagged_reps = per_rep.iter().filter(|r| r[0].flagged).count();
    Ok(CoalescenceResult {
        offsets: offsets.to_vec(),
        target_alpha,
        flagged_reps,
        records: per_rep.into_iter().flatten().collect(),
    })
}
