//! Precomputed image patch features.
//!
//! Binary layout (little-endian):
//!   magic `IMF1`
//!   u64 n_items, u64 n_patches, u64 feature_dim
//!   id table: n_items entries of (u32 byte length, UTF-8 bytes)
//!   payload: n_items * n_patches * feature_dim f32, row-major
//!
//! The reader validates dimensions against the header and rejects
//! non-finite values; write/read round-trips bit-exactly.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"IMF1";

/// All patch-feature matrices of a split, indexed by image id.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageFeatureSet {
    pub n_items: usize,
    pub n_patches: usize,
    pub feature_dim: usize,
    /// Ids in file order; `data` row blocks follow the same order.
    pub ids: Vec<String>,
    id_index: HashMap<String, usize>,
    /// Flat payload, `n_items * n_patches * feature_dim`.
    data: Vec<f32>,
}

impl ImageFeatureSet {
    pub fn new(ids: Vec<String>, n_patches: usize, feature_dim: usize, data: Vec<f32>) -> Result<Self> {
        let n_items = ids.len();
        let expected = n_items * n_patches * feature_dim;
        if data.len() != expected {
            return Err(Error::Shape {
                context: "feature payload".into(),
                left: expected.to_string(),
                right: data.len().to_string(),
            });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Validation(format!("non-finite feature value at offset {pos}")));
        }
        let mut id_index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if id_index.insert(id.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate image id {id:?}")));
            }
        }
        Ok(ImageFeatureSet { n_items, n_patches, feature_dim, ids, id_index, data })
    }

    pub fn contains(&self, image_id: &str) -> bool {
        self.id_index.contains_key(image_id)
    }

    pub fn index_of(&self, image_id: &str) -> Option<usize> {
        self.id_index.get(image_id).copied()
    }

    /// Patch matrix (`n_patches x feature_dim`) for an image, widened to f64.
    pub fn get(&self, image_id: &str) -> Option<Array2<f64>> {
        let &row = self.id_index.get(image_id)?;
        let stride = self.n_patches * self.feature_dim;
        let block = &self.data[row * stride..(row + 1) * stride];
        Some(
            Array2::from_shape_vec(
                (self.n_patches, self.feature_dim),
                block.iter().map(|&x| x as f64).collect(),
            )
            .expect("block length matches shape"),
        )
    }

    pub fn raw(&self) -> &[f32] {
        &self.data
    }
}

/// Write a feature set in the documented binary layout.
pub fn write_features(path: &Path, set: &ImageFeatureSet) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let werr = |e| Error::io(path.display().to_string(), e);
    f.write_all(MAGIC).map_err(werr)?;
    f.write_all(&(set.n_items as u64).to_le_bytes()).map_err(werr)?;
    f.write_all(&(set.n_patches as u64).to_le_bytes()).map_err(werr)?;
    f.write_all(&(set.feature_dim as u64).to_le_bytes()).map_err(werr)?;
    for id in &set.ids {
        f.write_all(&(id.len() as u32).to_le_bytes()).map_err(werr)?;
        f.write_all(id.as_bytes()).map_err(werr)?;
    }
    let mut payload = Vec::with_capacity(set.data.len() * 4);
    for &x in &set.data {
        payload.extend_from_slice(&x.to_le_bytes());
    }
    f.write_all(&payload).map_err(werr)?;
    Ok(())
}

/// Read and validate a feature file.
pub fn load_image_features(path: &Path) -> Result<ImageFeatureSet> {
    let display = path.display().to_string();
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(display.clone(), e))?;
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic).map_err(|e| Error::io(display.clone(), e))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("{display}: bad magic {magic:?}, expected \"IMF1\"")));
    }
    let n_items = read_u64(&mut f, &display)? as usize;
    let n_patches = read_u64(&mut f, &display)? as usize;
    let feature_dim = read_u64(&mut f, &display)? as usize;

    let mut ids = Vec::with_capacity(n_items);
    for _ in 0..n_items {
        let mut lenb = [0u8; 4];
        f.read_exact(&mut lenb).map_err(|e| Error::io(display.clone(), e))?;
        let len = u32::from_le_bytes(lenb) as usize;
        let mut buf = vec![0u8; len];
        f.read_exact(&mut buf).map_err(|e| Error::io(display.clone(), e))?;
        let id = String::from_utf8(buf)
            .map_err(|_| Error::Format(format!("{display}: image id is not UTF-8")))?;
        ids.push(id);
    }

    let expected = (n_items * n_patches * feature_dim) as u64 * 4;
    let mut payload = Vec::new();
    f.read_to_end(&mut payload).map_err(|e| Error::io(display.clone(), e))?;
    if payload.len() as u64 != expected {
        return Err(Error::Size { path: display, expected, actual: payload.len() as u64 });
    }
    let mut data = Vec::with_capacity(payload.len() / 4);
    for chunk in payload.chunks_exact(4) {
        let x = f32::from_le_bytes(chunk.try_into().unwrap());
        data.push(x);
    }
    if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
        return Err(Error::Validation(format!("non-finite feature value at offset {pos}")));
    }
    ImageFeatureSet::new(ids, n_patches, feature_dim, data)
}

fn read_u64(f: &mut std::fs::File, path: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    f.read_exact(&mut b).map_err(|e| Error::io(path.to_string(), e))?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_set() -> ImageFeatureSet {
        let ids = vec!["img_a".to_string(), "img_b".to_string()];
        let data: Vec<f32> = (0..2 * 4 * 8).map(|i| i as f32 * 0.25 - 3.0).collect();
        ImageFeatureSet::new(ids, 4, 8, data).unwrap()
    }

    #[test]
    fn dimensions_and_lookup() {
        let set = sample_set();
        assert_eq!((set.n_items, set.n_patches, set.feature_dim), (2, 4, 8));
        let m = set.get("img_b").unwrap();
        assert_eq!(m.dim(), (4, 8));
        assert_eq!(m[(0, 0)], 32.0 * 0.25 - 3.0);
        assert!(set.get("missing").is_none());
    }

    #[test]
    fn roundtrip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.imf");
        let set = sample_set();
        write_features(&p, &set).unwrap();
        let loaded = load_image_features(&p).unwrap();
        assert_eq!(loaded, set);
        // and the file itself is stable under rewrite
        let p2 = dir.path().join("g.imf");
        write_features(&p2, &loaded).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn truncated_payload_reports_expected_vs_actual() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.imf");
        write_features(&p, &sample_set()).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 16]).unwrap();
        match load_image_features(&p) {
            Err(Error::Size { expected, actual, .. }) => {
                assert_eq!(expected, 2 * 4 * 8 * 4);
                assert_eq!(actual, 2 * 4 * 8 * 4 - 16);
            }
            other => panic!("expected size error, got {other:?}"),
        }
    }

    #[test]
    fn nan_payload_is_rejected() {
        let ids = vec!["x".to_string()];
        let mut data = vec![0.0f32; 4];
        data[2] = f32::NAN;
        assert!(matches!(ImageFeatureSet::new(ids, 2, 2, data), Err(Error::Validation(_))));
    }

    #[test]
    fn duplicate_image_ids_are_rejected() {
        let ids = vec!["x".to_string(), "x".to_string()];
        let data = vec![0.0f32; 8];
        assert!(matches!(ImageFeatureSet::new(ids, 2, 2, data), Err(Error::Validation(_))));
    }
}
