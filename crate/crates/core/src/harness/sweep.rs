//! Cartesian parameter sweeps over a config template.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::{Error, Result};

use super::config::ExperimentConfig;
use super::run::run_experiment;

/// Maps dotted config paths (e.g. `adversary.budget`) to the values to try.
pub type ParameterGrid = BTreeMap<String, Vec<Value>>;

pub fn parse_grid(text: &str) -> Result<ParameterGrid> {
    let grid: ParameterGrid = serde_json::from_str(text).map_err(|e| Error::Config(format!("grid: {e}")))?;
    if grid.values().any(Vec::is_empty) {
        return Err(Error::Config("grid axes must be nonempty".into()));
    }
    Ok(grid)
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("grid path {path}: {part} is not inside an object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Err(Error::Config("empty grid path".into()))
}

/// Every grid point, in lexicographic order of (axis name, value index).
pub fn expand_grid(template: &ExperimentConfig, grid: &ParameterGrid) -> Result<Vec<(BTreeMap<String, Value>, ExperimentConfig)>> {
    let base = serde_json::to_value(template)?;
    let axes: Vec<(&String, &Vec<Value>)> = grid.iter().collect();
    let total: usize = axes.iter().map(|(_, v)| v.len()).product();
    let mut out = Vec::with_capacity(total);
    for mut idx in 0..total {
        let mut point = BTreeMap::new();
        let mut cfg = base.clone();
        for (name, values) in axes.iter().rev() {
            let v = values[idx % values.len()].clone();
            idx /= values.len();
            set_path(&mut cfg, name, v.clone())?;
            point.insert((*name).clone(), v);
        }
        let parsed: ExperimentConfig = serde_json::from_value(cfg).map_err(|e| Error::Config(e.to_string()))?;
        parsed.validate()?;
        out.push((point, parsed));
    }
    Ok(out)
}

#[derive(Serialize)]
struct SweepEntry {
    run: String,
    parameters: BTreeMap<String, Value>,
}

/// Runs every grid point into `out/run_NNN/` and writes `out/sweep.json`.
pub fn run_sweep(template: &ExperimentConfig, grid: &ParameterGrid, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let mut manifest = Vec::new();
    for (i, (point, mut cfg)) in expand_grid(template, grid)?.into_iter().enumerate() {
        let name = format!("run_{i:03}");
        cfg.output_dir = Some(out.join(&name));
        log::info!("sweep point {name}: {point:?}");
        run_experiment(&cfg)?;
        manifest.push(SweepEntry { run: name, parameters: point });
    }
    std::fs::write(out.join("sweep.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}
