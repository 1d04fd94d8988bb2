//! Flag value parsers.

use std::collections::BTreeMap;
use std::path::Path;

use geodesy::{DistributionSpec, EdgeId, LatticeBox, SubgraphMask, TargetSpec, Vertex, WeightField};
use serde::{Deserialize, Serialize};

/// `--dist` values.
#[derive(Clone, Debug, PartialEq)]
pub enum DistArg {
    Law(DistributionSpec),
    Fixture(String),
}

fn numbers<T: std::str::FromStr>(s: &str, sep: char, what: &str) -> Result<Vec<T>, String> {
    s.split(sep)
        .map(|x| x.trim().parse::<T>().map_err(|_| format!("bad {what} component {x:?} in {s:?}")))
        .collect()
}

pub fn vertex(s: &str) -> Result<Vertex, String> {
    let c: Vec<i64> = numbers(s, ',', "vertex")?;
    if c.len() < 2 {
        return Err(format!("vertex {s:?} needs at least two coordinates"));
    }
    Ok(Vertex(c))
}

pub fn dist(s: &str) -> Result<DistArg, String> {
    let (kind, rest) = s.split_once(':').ok_or_else(|| format!("expected KIND:PARAMS, got {s:?}"))?;
    let law = match kind {
        "fixture" => return Ok(DistArg::Fixture(rest.to_string())),
        "exponential" => match numbers::<f64>(rest, ',', "rate")?[..] {
            [rate] => DistributionSpec::Exponential { rate },
            _ => return Err("exponential takes one rate".into()),
        },
        "uniform" => match numbers::<f64>(rest, ',', "bound")?[..] {
            [a, b] => DistributionSpec::Uniform { a, b },
            _ => return Err("uniform takes a,b".into()),
        },
        "shifted-exponential" => match numbers::<f64>(rest, ',', "parameter")?[..] {
            [shift, rate] => DistributionSpec::ShiftedExponential { shift, rate },
            _ => return Err("shifted-exponential takes shift,rate".into()),
        },
        other => return Err(format!("unknown distribution {other:?}")),
    };
    law.validate().map_err(|e| e.to_string())?;
    Ok(DistArg::Law(law))
}

/// `R` (the box `[-R, R]^2`) or `LO:HI` such as `-4,-4:4,4`.
pub fn lattice_box(s: &str) -> Result<LatticeBox, String> {
    let b = match s.split_once(':') {
        Some((lo, hi)) => LatticeBox::new(numbers(lo, ',', "box")?, numbers(hi, ',', "box")?),
        None => LatticeBox::centered(2, s.trim().parse().map_err(|_| format!("bad box {s:?}"))?),
    };
    b.map_err(|e| e.to_string())
}

/// `point:X,Y`, `set:X,Y;X,Y` or `halfspace:R1,R2@ALPHA`.
pub fn target(s: &str) -> Result<TargetSpec, String> {
    let (kind, rest) = s.split_once(':').ok_or_else(|| format!("expected KIND:VALUE, got {s:?}"))?;
    match kind {
        "point" => Ok(TargetSpec::point(vertex(rest)?)),
        "set" => Ok(TargetSpec::VertexSet {
            vertices: rest.split(';').map(vertex).collect::<Result<_, _>>()?,
        }),
        "halfspace" => {
            let (rho, alpha) = rest.split_once('@').ok_or("halfspace needs RHO@ALPHA")?;
            let alpha = alpha.trim().parse().map_err(|_| format!("bad alpha {alpha:?}"))?;
            Ok(TargetSpec::half_space(numbers(rho, ',', "normal")?, alpha))
        }
        other => Err(format!("unknown target kind {other:?}")),
    }
}

/// `half-plane` (keep `x[0] >= 0`) or `half-plane:AXIS,THRESHOLD`.
pub fn mask(s: &str) -> Result<SubgraphMask, String> {
    match s.split_once(':') {
        None if s == "half-plane" => Ok(SubgraphMask::HalfPlane { axis: 0, threshold: 0 }),
        None if s == "full" => Ok(SubgraphMask::Full),
        Some(("half-plane", rest)) => match numbers::<i64>(rest, ',', "mask")?[..] {
            [axis, threshold] if axis >= 0 => Ok(SubgraphMask::HalfPlane {
                axis: axis as usize,
                threshold,
            }),
            _ => Err("half-plane takes AXIS,THRESHOLD".into()),
        },
        _ => Err(format!("unknown mask {s:?}")),
    }
}

/// On-disk form of an explicit environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureFile {
    #[serde(rename = "box")]
    pub bbox: LatticeBox,
    pub edges: Vec<FixtureEdge>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureEdge {
    pub base: Vertex,
    pub axis: usize,
    pub weight: f64,
}

impl FixtureFile {
    pub fn from_env(env: &WeightField) -> geodesy::Result<Self> {
        let edges = env
            .edges()
            .map(|e| {
                Ok(FixtureEdge {
                    weight: env.weight(&e)?,
                    base: e.base,
                    axis: e.axis,
                })
            })
            .collect::<geodesy::Result<_>>()?;
        Ok(FixtureFile {
            bbox: env.bbox().clone(),
            edges,
        })
    }

    pub fn into_env(self) -> geodesy::Result<WeightField> {
        let mut map = BTreeMap::new();
        for e in self.edges {
            let id = EdgeId::new(e.base, e.axis);
            if map.insert(id.clone(), e.weight).is_some() {
                return Err(geodesy::GeodesyError::InvalidFixture(format!("edge {id:?} listed twice")));
            }
        }
        WeightField::from_fixture(self.bbox, map)
    }
}

pub fn load_fixture(path: &Path) -> Result<WeightField, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let file: FixtureFile = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    file.into_env().map_err(|e| format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_values() {
        assert_eq!(vertex("3,-4").unwrap(), Vertex::from([3, -4]));
        assert!(vertex("3").is_err());
        assert_eq!(dist("exponential:2").unwrap(), DistArg::Law(DistributionSpec::Exponential { rate: 2.0 }));
        assert!(dist("uniform:1,0").is_err());
        assert!(dist("poisson:1").is_err());
        assert_eq!(dist("fixture:a.json").unwrap(), DistArg::Fixture("a.json".into()));
        assert_eq!(lattice_box("2").unwrap(), LatticeBox::centered(2, 2).unwrap());
        assert_eq!(lattice_box("0,0,0:1,1,1").unwrap().dim(), 3);
        assert_eq!(target("halfspace:1,0@3.5").unwrap(), TargetSpec::half_space(vec![1.0, 0.0], 3.5));
        assert_eq!(
            target("set:0,0;1,1").unwrap(),
            TargetSpec::VertexSet {
                vertices: vec![Vertex::from([0, 0]), Vertex::from([1, 1])]
            }
        );
        assert_eq!(mask("half-plane:1,-2").unwrap(), SubgraphMask::HalfPlane { axis: 1, threshold: -2 });
    }

    #[test]
    fn fixture_round_trip() {
        let env = WeightField::new(5, DistributionSpec::Exponential { rate: 1.0 }, LatticeBox::centered(2, 2).unwrap()).unwrap();
        let file = FixtureFile::from_env(&env).unwrap();
        let text = serde_json::to_string(&file).unwrap();
        let back: FixtureFile = serde_json::from_str(&text).unwrap();
        let env2 = back.into_env().unwrap();
        for e in env.edges() {
            assert_eq!(env.weight(&e).unwrap(), env2.weight(&e).unwrap());
        }
    }
}
