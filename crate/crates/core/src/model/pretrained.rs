//! Fixed code embeddings for the `pretrained` embedding mode.
//!
//! Any `input_dim × embed_dim` table can be plugged in through a checkpoint
//! holding a `W_e` tensor. For runs without one, [`cooccurrence_embedding`]
//! derives a table from code co-occurrence in the training sequences.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::features::Step;
use crate::tensor::{Checkpoint, Tensor};

/// RMS of the entries of a derived table.
pub const EMBEDDING_RMS: f64 = 0.5;

/// Load `W_e` from a checkpoint manifest and check its shape.
pub fn load_embedding(manifest: &Path, input_dim: usize, embed_dim: usize) -> Result<Tensor> {
    let ck = Checkpoint::read(manifest)?;
    let w = ck.get("W_e").ok_or_else(|| Error::Checkpoint {
        path: manifest.to_path_buf(),
        message: "no `W_e` tensor".into(),
    })?;
    if w.shape() != (input_dim, embed_dim) {
        return Err(Error::Shape {
            op: "pretrained embedding",
            detail: format!("expected {input_dim}x{embed_dim}, file has {}x{}", w.rows(), w.cols()),
        });
    }
    Ok(w.clone())
}

/// Save a table in the checkpoint format read by [`load_embedding`].
pub fn save_embedding(w: &Tensor, manifest: &Path) -> Result<()> {
    Checkpoint {
        config: serde_json::json!({ "kind": "embedding" }),
        tensors: vec![("W_e".to_string(), w.clone())],
    }
    .write(manifest)
}

/// Spectral embedding of the positive PMI matrix of codes sharing a step or
/// sitting in adjacent steps. Rows are scaled so the table has RMS
/// [`EMBEDDING_RMS`]; each column's largest entry is made positive so the
/// result does not depend on the eigen solver's sign choice.
pub fn cooccurrence_embedding(sequences: &[&[Step]], input_dim: usize, embed_dim: usize) -> Result<Tensor> {
    if input_dim == 0 || embed_dim == 0 {
        return Err(Error::Config("embedding dimensions must be positive".into()));
    }
    let mut c = DMatrix::<f64>::zeros(input_dim, input_dim);
    let mut bump = |a: &[u32], b: &[u32]| {
        for &i in a {
            for &j in b {
                if i != j {
                    c[(i as usize, j as usize)] += 1.0;
                }
            }
        }
    };
    for seq in sequences {
        for (t, step) in seq.iter().enumerate() {
            bump(&step.x, &step.x);
            if t + 1 < seq.len() {
                bump(&step.x, &seq[t + 1].x);
                bump(&seq[t + 1].x, &step.x);
            }
        }
    }
    let row: Vec<f64> = (0..input_dim).map(|i| c.row(i).sum()).collect();
    let total: f64 = row.iter().sum();
    let mut ppmi = DMatrix::<f64>::zeros(input_dim, input_dim);
    if total > 0.0 {
        for i in 0..input_dim {
            for j in 0..input_dim {
                let v = c[(i, j)];
                if v > 0.0 {
                    ppmi[(i, j)] = (v * total / (row[i] * row[j])).ln().max(0.0);
                }
            }
        }
    }
    let eig = ppmi.symmetric_eigen();
    let mut order: Vec<usize> = (0..input_dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut w = Tensor::zeros(input_dim, embed_dim);
    for (k, &e) in order.iter().take(embed_dim).enumerate() {
        let scale = eig.eigenvalues[e].max(0.0).sqrt();
        let col = eig.eigenvectors.column(e);
        let pivot = (0..input_dim).max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs()).then(b.cmp(&a)));
        let sign = match pivot {
            Some(p) if col[p] < 0.0 => -1.0,
            _ => 1.0,
        };
        for i in 0..input_dim {
            w.set(i, k, sign * scale * col[i]);
        }
    }
    let rms = (w.data().iter().map(|v| v * v).sum::<f64>() / w.len() as f64).sqrt();
    if rms > 0.0 {
        w = w.map(|v| v * EMBEDDING_RMS / rms);
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    fn step(x: &[u32]) -> Step {
        Step { day_offset: 0, x: x.to_vec() }
    }

    #[test]
    fn codes_that_always_co_occur_embed_alike() {
        // {0,1} always together, {2,3} always together, the pairs never meet
        let seqs: Vec<Vec<Step>> = (0..40)
            .map(|i| if i % 2 == 0 { vec![step(&[0, 1, 4])] } else { vec![step(&[2, 3, 5])] })
            .collect();
        let refs: Vec<&[Step]> = seqs.iter().map(|s| s.as_slice()).collect();
        let w = cooccurrence_embedding(&refs, 6, 3).unwrap();
        assert_eq!(w.shape(), (6, 3));
        assert!(cosine(w.row_slice(0), w.row_slice(1)) > 0.9);
        assert!(cosine(w.row_slice(0), w.row_slice(2)).abs() < 0.5);
        let rms = (w.data().iter().map(|v| v * v).sum::<f64>() / 18.0).sqrt();
        assert!((rms - EMBEDDING_RMS).abs() < 1e-12);
        assert_eq!(w, cooccurrence_embedding(&refs, 6, 3).unwrap());
    }

    #[test]
    fn save_and_load_round_trip() {
        let seqs = [vec![step(&[0, 1]), step(&[1, 2])]];
        let refs: Vec<&[Step]> = seqs.iter().map(|s| s.as_slice()).collect();
        let w = cooccurrence_embedding(&refs, 4, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("embedding.json");
        save_embedding(&w, &path).unwrap();
        assert_eq!(load_embedding(&path, 4, 2).unwrap(), w);
        assert!(matches!(load_embedding(&path, 5, 2), Err(Error::Shape { .. })));
    }
}
