//! Checkpoint averaging: elementwise mean of the last k saved parameter
//! sets, used for inference.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::model::checkpoint::{load_checkpoint, load_manifest};
use crate::model::config::ModelConfig;
use crate::model::params::ParamStore;

/// Arithmetic mean per tensor across checkpoints with identical manifests.
pub fn average_checkpoints(paths: &[PathBuf]) -> Result<(ModelConfig, ParamStore)> {
    if paths.is_empty() {
        return Err(Error::Argument("no checkpoints to average".into()));
    }
    let reference = load_manifest(&paths[0])?;
    for p in &paths[1..] {
        let m = load_manifest(p)?;
        if m.tensors != reference.tensors || m.config != reference.config {
            return Err(Error::Incompatible(format!(
                "manifest of {} differs from {}",
                p.display(),
                paths[0].display()
            )));
        }
    }

    let (config, mut acc) = load_checkpoint(&paths[0])?;
    for p in &paths[1..] {
        let (_, store) = load_checkpoint(p)?;
        let names: Vec<String> = acc.names().map(|s| s.to_string()).collect();
        for name in names {
            let sum = acc.get(&name).unwrap() + store.get(&name).unwrap();
            acc.set(&name, sum.into_owned())?;
        }
    }
    let k = paths.len() as f64;
    let names: Vec<String> = acc.names().map(|s| s.to_string()).collect();
    for name in names {
        let mean = acc.get(&name).unwrap().mapv(|x| x / k);
        acc.set(&name, mean)?;
    }
    Ok((config, acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::checkpoint::save_checkpoint;
    use crate::model::params::init_params;
    use ndarray::Array2;

    fn store_filled(config: &ModelConfig, value: f64) -> ParamStore {
        let mut store = init_params(config);
        let names: Vec<String> = store.names().map(|s| s.to_string()).collect();
        for name in names {
            let shape = store.get(&name).unwrap().raw_dim();
            store.set(&name, Array2::from_elem(shape, value)).unwrap();
        }
        store
    }

    #[test]
    fn identical_checkpoints_average_to_themselves() {
        let config = ModelConfig::tiny();
        let params = init_params(&config);
        let dir = tempfile::tempdir().unwrap();
        let mut paths = Vec::new();
        for i in 0..3 {
            let p = dir.path().join(format!("epoch_{i}"));
            save_checkpoint(&p, &config, &params).unwrap();
            paths.push(p);
        }
        let (_, avg) = average_checkpoints(&paths).unwrap();
        for (name, t) in avg.iter() {
            let orig = params.get(name).unwrap();
            for (a, b) in t.iter().zip(orig.iter()) {
                assert_eq!(*a as f32, *b as f32, "{name}");
            }
        }
    }

    #[test]
    fn zero_and_two_average_to_one_everywhere() {
        let config = ModelConfig::tiny();
        let dir = tempfile::tempdir().unwrap();
        let p0 = dir.path().join("a");
        let p2 = dir.path().join("b");
        save_checkpoint(&p0, &config, &store_filled(&config, 0.0)).unwrap();
        save_checkpoint(&p2, &config, &store_filled(&config, 2.0)).unwrap();
        let (_, avg) = average_checkpoints(&[p0, p2]).unwrap();
        for (_, t) in avg.iter() {
            assert!(t.iter().all(|&x| x == 1.0));
        }
    }

    #[test]
    fn random_triple_matches_independent_elementwise_mean() {
        let config = ModelConfig::tiny();
        let dir = tempfile::tempdir().unwrap();
        let stores: Vec<ParamStore> = (0..3)
            .map(|i| init_params(&ModelConfig { seed: 10 + i, ..config.clone() }))
            .collect();
        let mut paths = Vec::new();
        for (i, s) in stores.iter().enumerate() {
            let p = dir.path().join(format!("c{i}"));
            save_checkpoint(&p, &config, s).unwrap();
            paths.push(p);
        }
        let (_, avg) = average_checkpoints(&paths).unwrap();
        for (name, t) in avg.iter() {
            for (idx, &x) in t.indexed_iter() {
                // the store round-trips through f32, so compare against the
                // mean of the f32-truncated values
                let mean: f64 = stores
                    .iter()
                    .map(|s| s.get(name).unwrap()[idx] as f32 as f64)
                    .sum::<f64>()
                    / 3.0;
                assert!((x - mean).abs() < 1e-12, "{name}{idx:?}");
            }
        }
    }

    #[test]
    fn mismatched_manifests_are_rejected() {
        let a = ModelConfig::tiny();
        let b = ModelConfig { d_model: 16, ffn_dim: 32, ..ModelConfig::tiny() };
        let dir = tempfile::tempdir().unwrap();
        let pa = dir.path().join("a");
        let pb = dir.path().join("b");
        save_checkpoint(&pa, &a, &init_params(&a)).unwrap();
        save_checkpoint(&pb, &b, &init_params(&b)).unwrap();
        assert!(matches!(average_checkpoints(&[pa, pb]), Err(Error::Incompatible(_))));
    }
}
