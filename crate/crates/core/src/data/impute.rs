use super::{DataError, RawTable};

/// Fills each missing cell with the mean of that attribute over the `k`
/// nearest rows that observe it.
///
/// Distances are Euclidean over the attributes both rows observe, scaled by
/// `n_attributes / n_shared` so rows with few shared attributes are not
/// artificially close. Donor values always come from observed cells, never
/// from earlier imputations.
pub fn knn_impute(table: &RawTable, k: usize) -> Result<RawTable, DataError> {
    if k == 0 {
        return Err(DataError::Imputation("k must be at least 1".into()));
    }
    let d = table.n_features();
    check_columns_observed(table)?;
    for (r, row) in table.cells.iter().enumerate() {
        if d > 0 && row.iter().all(Option::is_none) {
            return Err(DataError::Imputation(format!("row {r} has no observed attribute")));
        }
    }
    let mut out = table.clone();
    for (r, row) in table.cells.iter().enumerate() {
        let missing: Vec<usize> = (0..d).filter(|&j| row[j].is_none()).collect();
        if missing.is_empty() {
            continue;
        }
        let dist: Vec<Option<f64>> = table
            .cells
            .iter()
            .enumerate()
            .map(|(o, other)| if o == r { None } else { nan_euclidean(row, other) })
            .collect();
        for j in missing {
            let mut donors: Vec<(f64, usize)> = dist
                .iter()
                .enumerate()
                .filter_map(|(o, dd)| match (dd, table.cells[o][j]) {
                    (Some(dd), Some(_)) => Some((*dd, o)),
                    _ => None,
                })
                .collect();
            if donors.is_empty() {
                return Err(DataError::Imputation(format!(
                    "no row shares attributes with row {r} and observes `{}`",
                    table.feature_names[j]
                )));
            }
            donors.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            donors.truncate(k);
            let mean = donors
                .iter()
                .map(|&(_, o)| table.cells[o][j].expect("donor observes attribute"))
                .sum::<f64>()
                / donors.len() as f64;
            out.cells[r][j] = Some(mean);
        }
    }
    Ok(out)
}

fn nan_euclidean(a: &[Option<f64>], b: &[Option<f64>]) -> Option<f64> {
    let mut shared = 0usize;
    let mut sum = 0.0;
    for (x, y) in a.iter().zip(b) {
        if let (Some(x), Some(y)) = (x, y) {
            shared += 1;
            sum += (x - y) * (x - y);
        }
    }
    (shared > 0).then(|| (sum * a.len() as f64 / shared as f64).sqrt())
}

/// Replaces missing cells with the per-attribute median of observed values.
pub fn median_impute(table: &RawTable) -> Result<RawTable, DataError> {
    check_columns_observed(table)?;
    let mut out = table.clone();
    for j in 0..table.n_features() {
        let mut vals: Vec<f64> = table.cells.iter().filter_map(|r| r[j]).collect();
        if vals.len() == table.n_rows() {
            continue;
        }
        vals.sort_by(f64::total_cmp);
        let n = vals.len();
        let median = if n % 2 == 1 {
            vals[n / 2]
        } else {
            0.5 * (vals[n / 2 - 1] + vals[n / 2])
        };
        for row in &mut out.cells {
            row[j].get_or_insert(median);
        }
    }
    Ok(out)
}

fn check_columns_observed(table: &RawTable) -> Result<(), DataError> {
    for j in 0..table.n_features() {
        if table.n_rows() > 0 && table.cells.iter().all(|r| r[j].is_none()) {
            return Err(DataError::Imputation(format!(
                "attribute `{}` is missing in every row",
                table.feature_names[j]
            )));
        }
    }
    Ok(())
}
