use std::collections::HashSet;

use log::warn;

use super::{CleanDataset, DataError, RawTable};

/// Mean-imputes missing cells, drops duplicate rows (first occurrence wins)
/// and constant columns.
///
/// Rows without a label are dropped before anything else. A column with no
/// observed value at all is treated as constant.
pub fn clean(raw: &RawTable) -> Result<CleanDataset, DataError> {
    if raw.n_features() == 0 {
        return Err(DataError::TooSmall {
            what: "features",
            needed: 1,
            got: 0,
        });
    }
    let labelled: Vec<usize> = (0..raw.n_rows())
        .filter(|&i| raw.labels[i].is_some())
        .collect();
    if labelled.len() < raw.n_rows() {
        warn!(
            "dropping {} rows with no label",
            raw.n_rows() - labelled.len()
        );
    }
    if labelled.len() < 2 {
        return Err(DataError::TooSmall {
            what: "rows",
            needed: 2,
            got: labelled.len(),
        });
    }

    let n = raw.n_features();
    let means = column_means(raw, &labelled);

    let mut seen: HashSet<(Vec<u64>, u8)> = HashSet::with_capacity(labelled.len());
    let mut x = Vec::with_capacity(labelled.len());
    let mut y = Vec::with_capacity(labelled.len());
    for &i in &labelled {
        let row = impute_row(&raw.cells[i], &means);
        let label = raw.labels[i].expect("filtered to labelled rows");
        // -0.0 and 0.0 compare equal
        let key: Vec<u64> = row.iter().map(|v| (v + 0.0).to_bits()).collect();
        if seen.insert((key, label)) {
            x.push(row);
            y.push(label);
        }
    }

    let keep: Vec<usize> = (0..n)
        .filter(|&j| means[j].is_some() && x.iter().any(|r| r[j] != x[0][j]))
        .collect();
    if keep.is_empty() {
        return Err(DataError::AllConstant);
    }
    if keep.len() < n {
        log::debug!("dropping {} constant columns", n - keep.len());
    }
    let names = keep.iter().map(|&j| raw.feature_names[j].clone()).collect();
    let x = x
        .into_iter()
        .map(|r| keep.iter().map(|&j| r[j]).collect())
        .collect();

    for class in [0u8, 1] {
        if !y.contains(&class) {
            return Err(DataError::MissingClass(class));
        }
    }
    CleanDataset::new(names, x, y)
}

/// Per-column mean over the observed cells of `rows`; `None` when a column
/// has no observed value.
fn column_means(raw: &RawTable, rows: &[usize]) -> Vec<Option<f64>> {
    (0..raw.n_features())
        .map(|j| {
            let (sum, count) = rows
                .iter()
                .filter_map(|&i| raw.cells[i][j])
                .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
            (count > 0).then(|| sum / count as f64)
        })
        .collect()
}

fn impute_row(cells: &[Option<f64>], means: &[Option<f64>]) -> Vec<f64> {
    cells
        .iter()
        .zip(means)
        .map(|(cell, mean)| cell.or(*mean).unwrap_or(0.0))
        .collect()
}

/// Mean imputation alone, over every row of `raw`.
pub fn impute_missing(raw: &RawTable) -> Vec<Vec<f64>> {
    let rows: Vec<usize> = (0..raw.n_rows()).collect();
    let means = column_means(raw, &rows);
    raw.cells.iter().map(|r| impute_row(r, &means)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn imputation_preserves_observed_mean(
            cols in prop::collection::vec(
                prop::collection::vec(prop::option::weighted(0.7, -1e3f64..1e3), 2..30),
                1..4,
            )
        ) {
            let rows = cols[0].len();
            let cells: Vec<Vec<Option<f64>>> = (0..rows)
                .map(|i| cols.iter().map(|c| c.get(i).copied().flatten()).collect())
                .collect();
            let t = RawTable {
                feature_names: (0..cols.len()).map(|j| format!("f{j}")).collect(),
                cells: cells.clone(),
                labels: vec![Some(0); rows],
                label_name: "bug".into(),
            };
            let imputed = impute_missing(&t);
            for j in 0..cols.len() {
                let observed: Vec<f64> = cells.iter().filter_map(|r| r[j]).collect();
                if observed.is_empty() {
                    continue;
                }
                let before = observed.iter().sum::<f64>() / observed.len() as f64;
                let after = imputed.iter().map(|r| r[j]).sum::<f64>() / rows as f64;
                prop_assert!((before - after).abs() < 1e-9);
            }
        }
    }

    fn raw(names: &[&str], cells: Vec<Vec<Option<f64>>>, labels: Vec<u8>) -> RawTable {
        RawTable {
            feature_names: names.iter().map(|s| s.to_string()).collect(),
            cells,
            labels: labels.into_iter().map(Some).collect(),
            label_name: "bug".into(),
        }
    }

    #[test]
    fn imputes_column_mean() {
        let t = raw(
            &["a", "b"],
            vec![
                vec![Some(1.0), Some(0.0)],
                vec![None, Some(1.0)],
                vec![Some(3.0), Some(2.0)],
            ],
            vec![0, 1, 0],
        );
        let d = clean(&t).unwrap();
        assert_eq!(d.column(0), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn removes_duplicates_keeping_first() {
        let t = raw(
            &["a"],
            vec![
                vec![Some(1.0)],
                vec![Some(2.0)],
                vec![Some(1.0)],
                vec![Some(1.0)],
            ],
            vec![0, 1, 0, 1],
        );
        let d = clean(&t).unwrap();
        assert_eq!(d.x(), &[vec![1.0], vec![2.0], vec![1.0]]);
        assert_eq!(d.y(), &[0, 1, 1]);
    }

    #[test]
    fn drops_constant_column() {
        let t = raw(
            &["a", "five"],
            vec![vec![Some(1.0), Some(5.0)], vec![Some(2.0), Some(5.0)]],
            vec![0, 1],
        );
        let d = clean(&t).unwrap();
        assert_eq!(d.feature_names(), &["a".to_string()]);
    }

    #[test]
    fn all_constant_is_error() {
        let t = raw(&["a"], vec![vec![Some(1.0)], vec![Some(1.0)]], vec![0, 1]);
        assert!(matches!(clean(&t), Err(DataError::AllConstant)));
    }

    #[test]
    fn class_lost_to_dedup() {
        let t = raw(
            &["a"],
            vec![vec![Some(1.0)], vec![Some(2.0)], vec![Some(2.0)]],
            vec![0, 0, 0],
        );
        assert!(matches!(clean(&t), Err(DataError::MissingClass(1))));
    }

    #[test]
    fn too_few_rows() {
        let t = raw(&["a"], vec![vec![Some(1.0)]], vec![0]);
        assert!(matches!(clean(&t), Err(DataError::TooSmall { .. })));
    }

    #[test]
    fn unlabelled_rows_dropped() {
        let mut t = raw(
            &["a"],
            vec![vec![Some(1.0)], vec![Some(2.0)], vec![Some(9.0)]],
            vec![0, 1, 0],
        );
        t.labels[2] = None;
        let d = clean(&t).unwrap();
        assert_eq!(d.n_samples(), 2);
    }
}
