use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoteParams {
    pub k: usize,
    /// Minority count after augmentation as a share of the majority count.
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for SmoteParams {
    fn default() -> Self {
        SmoteParams { k: 5, target_ratio: 1.0, seed: 1 }
    }
}

/// A synthetic row `x[base] + lambda·(x[neighbor] - x[base])`, indices into
/// the original table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticOrigin {
    pub base: usize,
    pub neighbor: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct Oversampled {
    /// Original rows first, unchanged, then the synthetic rows.
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
    pub origins: Vec<SyntheticOrigin>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Oversample the minority class until it holds
/// `round(target_ratio · majority)` rows. Each synthetic row interpolates a
/// random minority row towards one of its `k` nearest minority neighbours
/// (Euclidean, ties by row order).
pub fn smote(features: &[Vec<f64>], labels: &[bool], params: &SmoteParams) -> Result<Oversampled> {
    assert_eq!(features.len(), labels.len(), "one label per row");
    if params.k == 0 || !(params.target_ratio > 0.0) {
        return Err(Error::Config("SMOTE needs k ≥ 1 and a positive target ratio".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let minority_label = pos * 2 <= labels.len();
    let minority: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == minority_label).collect();
    let majority = labels.len() - minority.len();
    if minority.len() < params.k + 1 {
        return Err(Error::TooFewMinority { have: minority.len(), need: params.k + 1 });
    }
    let target = (params.target_ratio * majority as f64).round() as usize;
    let needed = target.saturating_sub(minority.len());

    let neighbours: Vec<Vec<usize>> = minority
        .iter()
        .map(|&i| {
            let mut others: Vec<(f64, usize)> = minority
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| (sq_dist(&features[i], &features[j]), j))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.into_iter().take(params.k).map(|(_, j)| j).collect()
        })
        .collect();

    let mut r = rng(params.seed);
    let mut out = Oversampled { features: features.to_vec(), labels: labels.to_vec(), origins: Vec::with_capacity(needed) };
    for _ in 0..needed {
        let m = r.random_range(0..minority.len());
        let base = minority[m];
        let neighbor = neighbours[m][r.random_range(0..params.k)];
        let lambda: f64 = r.random();
        let row = features[base]
            .iter()
            .zip(&features[neighbor])
            .map(|(&a, &b)| a + lambda * (b - a))
            .collect();
        out.features.push(row);
        out.labels.push(minority_label);
        out.origins.push(SyntheticOrigin { base, neighbor, lambda });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(n_major: usize, n_minor: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut r = rng(5);
        let mut f = Vec::new();
        let mut l = Vec::new();
        for i in 0..n_major + n_minor {
            f.push((0..3).map(|_| r.random_range(-1.0..1.0)).collect());
            l.push(i >= n_major);
        }
        (f, l)
    }

    #[test]
    fn two_points_give_points_on_their_segment() {
        let f = vec![vec![0.0, 0.0], vec![2.0, 4.0], vec![9.0, 9.0], vec![8.0, 8.0], vec![7.0, 7.0]];
        let l = vec![true, true, false, false, false];
        let out = smote(&f, &l, &SmoteParams { k: 1, ..Default::default() }).unwrap();
        assert_eq!(out.labels.iter().filter(|&&x| x).count(), 3);
        for row in &out.features[5..] {
            let t = row[0] / 2.0;
            assert!((0.0..=1.0).contains(&t));
            assert!((row[1] - 4.0 * t).abs() < 1e-12);
        }
    }

    #[test]
    fn balances_to_target_ratio() {
        let (f, l) = table(90, 10);
        for (ratio, want) in [(1.0, 90), (0.5, 45)] {
            let out = smote(&f, &l, &SmoteParams { target_ratio: ratio, ..Default::default() }).unwrap();
            assert_eq!(out.labels.iter().filter(|&&x| x).count(), want);
            assert_eq!(out.labels.iter().filter(|&&x| !x).count(), 90);
        }
    }

    #[test]
    fn originals_preserved_and_origins_reproduce_rows() {
        let (f, l) = table(40, 8);
        let out = smote(&f, &l, &SmoteParams::default()).unwrap();
        assert_eq!(&out.features[..f.len()], &f[..]);
        assert_eq!(&out.labels[..l.len()], &l[..]);
        for (o, row) in out.origins.iter().zip(&out.features[f.len()..]) {
            assert!(l[o.base] && l[o.neighbor] && o.base != o.neighbor);
            for d in 0..3 {
                let want = f[o.base][d] + o.lambda * (f[o.neighbor][d] - f[o.base][d]);
                assert_eq!(row[d], want);
            }
        }
    }

    #[test]
    fn too_few_minority_is_an_error() {
        let (f, l) = table(20, 5);
        assert!(matches!(
            smote(&f, &l, &SmoteParams::default()),
            Err(Error::TooFewMinority { have: 5, need: 6 })
        ));
    }
}
