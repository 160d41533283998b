use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CleanDataset, DataError};

pub const DEFAULT_SMOTE_K: usize = 5;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices (into `points`) of the `k` nearest other points to each point.
/// Distance ties go to the lower index.
fn nearest_neighbors(points: &[&[f64]], k: usize) -> Vec<Vec<usize>> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut others: Vec<(f64, usize)> = points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, q)| (sq_dist(p, q), j))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

/// Oversamples the minority class with SMOTE until both classes have the
/// majority count.
///
/// Original rows are kept unchanged and in order; synthetic rows are
/// appended. Synthetic row `s` starts from minority sample `s mod m`, picks
/// one of its `k` nearest minority neighbors uniformly and interpolates with
/// a factor drawn uniformly from `[0, 1)`.
pub fn smote_balance(data: &CleanDataset, k: usize, seed: u64) -> Result<CleanDataset, DataError> {
    let [c0, c1] = data.class_counts();
    if c0 == c1 {
        return Ok(data.clone());
    }
    let (minority, majority_count) = if c0 < c1 { (0u8, c1) } else { (1u8, c0) };
    let minority_rows = data.rows_of_class(minority);
    let m = minority_rows.len();
    if m < 2 {
        return Err(DataError::TooSmall {
            what: "minority samples",
            needed: 2,
            got: m,
        });
    }
    if k == 0 {
        return Err(DataError::Inconsistent("SMOTE needs k >= 1".into()));
    }
    let k = if k > m - 1 {
        warn!(
            "SMOTE k={k} exceeds minority size {m} - 1; clamping to {}",
            m - 1
        );
        m - 1
    } else {
        k
    };

    let points: Vec<&[f64]> = minority_rows
        .iter()
        .map(|&i| data.x()[i].as_slice())
        .collect();
    let neighbors = nearest_neighbors(&points, k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let needed = majority_count - m;

    let (names, mut x, mut y) = data.clone().into_parts();
    x.reserve(needed);
    y.reserve(needed);
    for s in 0..needed {
        let base = s % m;
        let nb = neighbors[base][rng.random_range(0..k)];
        let t: f64 = rng.random();
        let synthetic = points[base]
            .iter()
            .zip(points[nb])
            .map(|(a, b)| a + t * (b - a))
            .collect();
        x.push(synthetic);
        y.push(minority);
    }
    CleanDataset::new(names, x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(x: Vec<Vec<f64>>, y: Vec<u8>) -> CleanDataset {
        let n = x[0].len();
        CleanDataset::new((0..n).map(|j| format!("f{j}")).collect(), x, y).unwrap()
    }

    #[test]
    fn balanced_input_unchanged() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let y = (0..20).map(|i| (i % 2) as u8).collect();
        let d = dataset(x, y);
        assert_eq!(smote_balance(&d, 5, 1).unwrap(), d);
    }

    #[test]
    fn upsamples_to_majority() {
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let y = vec![0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1];
        let d = dataset(x, y);
        let out = smote_balance(&d, 3, 9).unwrap();
        assert_eq!(out.class_counts(), [8, 8]);
        assert_eq!(&out.x()[..12], d.x());
        assert_eq!(&out.y()[..12], d.y());
    }

    #[test]
    fn synthetic_points_on_segment() {
        let mut x = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let mut y = vec![1, 1];
        for i in 0..6 {
            x.push(vec![5.0 + i as f64, -3.0]);
            y.push(0);
        }
        let out = smote_balance(&dataset(x, y), 1, 3).unwrap();
        assert_eq!(out.class_counts(), [6, 6]);
        for row in &out.x()[8..] {
            assert_eq!(row[0], row[1]);
            assert!((0.0..=1.0).contains(&row[0]));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let x: Vec<Vec<f64>> = (0..15)
            .map(|i| vec![(i as f64).sin(), (i as f64).cos()])
            .collect();
        let y = (0..15).map(|i| u8::from(i % 3 == 0)).collect();
        let d = dataset(x, y);
        assert_eq!(
            smote_balance(&d, 2, 4).unwrap(),
            smote_balance(&d, 2, 4).unwrap()
        );
        assert_ne!(
            smote_balance(&d, 2, 4).unwrap(),
            smote_balance(&d, 2, 5).unwrap()
        );
    }

    #[test]
    fn clamps_k_and_rejects_tiny_minority() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let d = dataset(x.clone(), vec![0, 0, 0, 0, 1, 1]);
        assert_eq!(smote_balance(&d, 5, 0).unwrap().class_counts(), [4, 4]);
        let d = dataset(x, vec![0, 0, 0, 0, 0, 1]);
        assert!(matches!(
            smote_balance(&d, 5, 0),
            Err(DataError::TooSmall { .. })
        ));
    }

    #[test]
    fn neighbor_order() {
        let pts: Vec<Vec<f64>> = vec![vec![0.0], vec![1.0], vec![3.0], vec![-1.0]];
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let nn = nearest_neighbors(&refs, 2);
        assert_eq!(nn[0], vec![1, 3]);
        assert_eq!(nn[2], vec![1, 0]);
    }
}
