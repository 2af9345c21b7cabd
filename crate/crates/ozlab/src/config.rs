//! Validated run configuration for the Monte Carlo engine.

use serde_json::Value;

use crate::error::{Error, Result};
use crate::ising::IsingModel;
use crate::lattice::Point;

/// A validated Monte Carlo model configuration.
#[derive(Clone, Debug)]
pub struct IsingRunConfig {
    pub model: IsingModel,
    pub extents: Vec<usize>,
    pub periodic: bool,
}

/// Parse and validate a model configuration, naming the offending key in
/// every rejection.
pub fn validate_config(text: &str) -> Result<IsingRunConfig> {
    let root: Value = serde_json::from_str(text)
        .map_err(|e| Error::usage(format!("config is not valid JSON: {e}")))?;
    let obj = root
        .as_object()
        .ok_or_else(|| Error::usage("config must be a JSON object"))?;

    let dim = obj
        .get("dim")
        .ok_or_else(|| Error::usage("missing key \"dim\""))?
        .as_u64()
        .ok_or_else(|| Error::usage("key \"dim\" must be a positive integer"))?
        as usize;

    let beta = obj
        .get("beta")
        .ok_or_else(|| Error::usage("missing key \"beta\""))?
        .as_f64()
        .ok_or_else(|| Error::usage("key \"beta\" must be a number"))?;

    let couplings_json = obj
        .get("couplings")
        .ok_or_else(|| Error::usage("missing key \"couplings\""))?
        .as_array()
        .ok_or_else(|| Error::usage("key \"couplings\" must be an array"))?;
    let mut couplings = Vec::new();
    for (i, c) in couplings_json.iter().enumerate() {
        let cobj = c
            .as_object()
            .ok_or_else(|| Error::usage(format!("couplings[{i}] must be an object")))?;
        let v = cobj
            .get("v")
            .ok_or_else(|| Error::usage(format!("couplings[{i}] missing key \"v\"")))?
            .as_array()
            .ok_or_else(|| Error::usage(format!("couplings[{i}].v must be an array")))?
            .iter()
            .map(|x| {
                x.as_i64()
                    .ok_or_else(|| Error::usage(format!("couplings[{i}].v must hold integers")))
            })
            .collect::<Result<Vec<i64>>>()?;
        let j = cobj
            .get("J")
            .ok_or_else(|| Error::usage(format!("couplings[{i}] missing key \"J\"")))?
            .as_f64()
            .ok_or_else(|| Error::usage(format!("couplings[{i}].J must be a number")))?;
        couplings.push((Point(v), j));
    }

    // explicit pairwise symmetry check so asymmetric inputs are named
    for (v, j) in &couplings {
        if let Some((_, j2)) = couplings.iter().find(|(w, _)| *w == v.scale(-1)) {
            if j != j2 {
                return Err(Error::usage(format!(
                    "couplings violate the J[v] == J[-v] symmetry requirement at v = {:?}: {j} vs {j2}",
                    v.0
                )));
            }
        }
    }

    let extents = obj
        .get("extents")
        .ok_or_else(|| Error::usage("missing key \"extents\""))?
        .as_array()
        .ok_or_else(|| Error::usage("key \"extents\" must be an array"))?
        .iter()
        .map(|x| {
            x.as_u64()
                .map(|v| v as usize)
                .ok_or_else(|| Error::usage("key \"extents\" must hold positive integers"))
        })
        .collect::<Result<Vec<usize>>>()?;
    if extents.len() != dim {
        return Err(Error::usage(format!(
            "key \"extents\" has {} entries but \"dim\" is {dim}",
            extents.len()
        )));
    }

    let periodic = match obj.get("periodic") {
        None => true,
        Some(v) => v
            .as_bool()
            .ok_or_else(|| Error::usage("key \"periodic\" must be a boolean"))?,
    };
    if !periodic {
        return Err(Error::usage(
            "key \"periodic\" must be true; only periodic boundaries ship in v1",
        ));
    }

    let mut model = IsingModel::new(dim, couplings, beta)
        .map_err(|e| Error::usage(format!("invalid model: {e}")))?;
    if let Some(bound) = obj.get("beta_bound") {
        let b = bound
            .as_f64()
            .ok_or_else(|| Error::usage("key \"beta_bound\" must be a number"))?;
        model.beta_bound = Some(b);
    }

    Ok(IsingRunConfig {
        model,
        extents,
        periodic,
    })
}
