use serde::{Deserialize, Serialize};

use super::config::Method;
use super::run::{CellResult, CellStatus, ResultTable};
use super::HarnessError;
use crate::metrics::round2;

/// Median over the successful seeds of one (dataset, method) pair; `None`
/// when no seed succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub dataset: String,
    pub method: Method,
    pub seeds_ok: usize,
    pub seeds_total: usize,
    pub acsa: Option<f64>,
    pub gm: Option<f64>,
    pub acsa_final: Option<f64>,
    pub gm_final: Option<f64>,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Groups cells by (dataset, method) in first-appearance order.
pub fn aggregate(cells: &[CellResult]) -> Vec<Aggregate> {
    let mut keys: Vec<(String, Method)> = Vec::new();
    for c in cells {
        if !keys.iter().any(|(d, m)| *d == c.dataset && *m == c.method) {
            keys.push((c.dataset.clone(), c.method));
        }
    }
    keys.into_iter()
        .map(|(dataset, method)| {
            let group: Vec<&CellResult> =
                cells.iter().filter(|c| c.dataset == dataset && c.method == method).collect();
            let ok: Vec<&CellResult> = group.iter().copied().filter(|c| c.status == CellStatus::Ok).collect();
            let pick = |f: &dyn Fn(&CellResult) -> Option<f64>| median(&ok.iter().filter_map(|c| f(c)).collect::<Vec<_>>());
            Aggregate {
                seeds_ok: ok.len(),
                seeds_total: group.len(),
                acsa: pick(&|c| c.best.as_ref().map(|r| r.acsa)),
                gm: pick(&|c| c.best.as_ref().map(|r| r.gm)),
                acsa_final: pick(&|c| c.last.as_ref().map(|r| r.acsa)),
                gm_final: pick(&|c| c.last.as_ref().map(|r| r.gm)),
                dataset,
                method,
            }
        })
        .collect()
}

pub fn to_json(table: &ResultTable) -> Result<String, HarnessError> {
    serde_json::to_string_pretty(table).map_err(|e| HarnessError::Io(e.to_string()))
}

pub fn from_json(text: &str) -> Result<ResultTable, HarnessError> {
    serde_json::from_str(text).map_err(|e| HarnessError::Format(e.to_string()))
}

fn cell_text(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{:.2}", round2(x)))
}

/// Datasets as rows, methods as ACSA/GM column pairs, medians to two
/// decimals, `NA` where no seed succeeded.
pub fn to_csv(table: &ResultTable) -> String {
    let mut datasets: Vec<&str> = Vec::new();
    let mut methods: Vec<Method> = Vec::new();
    for a in &table.aggregates {
        if !datasets.contains(&a.dataset.as_str()) {
            datasets.push(&a.dataset);
        }
        if !methods.contains(&a.method) {
            methods.push(a.method);
        }
    }
    let mut out = String::from("Dataset");
    for m in &methods {
        out.push_str(&format!(",{m} ACSA,{m} GM"));
    }
    out.push('\n');
    for d in datasets {
        out.push_str(d);
        for m in &methods {
            let a = table.aggregates.iter().find(|a| a.dataset == d && a.method == *m);
            let (acsa, gm) = a.map_or((None, None), |a| (a.acsa, a.gm));
            out.push_str(&format!(",{},{}", cell_text(acsa), cell_text(gm)));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::EvalReport;

    fn cell(dataset: &str, method: Method, seed: u64, acsa_hits: Option<u64>) -> CellResult {
        let report = acsa_hits.map(|h| EvalReport::new(&[0, 0, 0, 0, 1, 1], &[0, 0, 0, 0, 1, if h > 1 { 1 } else { 0 }], 2, Some(seed as usize)).unwrap());
        CellResult {
            dataset: dataset.into(),
            method,
            seed,
            status: if report.is_some() { CellStatus::Ok } else { CellStatus::Na },
            error: report.is_none().then(|| "not applicable".to_string()),
            train_config_hash: "h".into(),
            train_sizes: vec![2, 4],
            test_sizes: vec![2, 4],
            generated_per_epoch: vec![0, 0],
            best: report.clone(),
            last: report,
            history: Vec::new(),
        }
    }

    fn table(cells: Vec<CellResult>) -> ResultTable {
        let aggregates = aggregate(&cells);
        ResultTable { version: "v".into(), config_hash: "c".into(), selection: "best-epoch".into(), cells, aggregates }
    }

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn three_seeds_aggregate_to_the_median() {
        let t = table(vec![
            cell("Toy", Method::Do, 1, Some(2)),
            cell("Toy", Method::Do, 2, Some(1)),
            cell("Toy", Method::Do, 3, Some(2)),
        ]);
        assert_eq!(t.aggregates.len(), 1);
        assert_eq!(t.aggregates[0].acsa, Some(100.0));
        assert_eq!(t.aggregates[0].seeds_ok, 3);
    }

    #[test]
    fn single_cell_csv_has_a_header() {
        let csv = to_csv(&table(vec![cell("Toy", Method::Q, 1, Some(1))]));
        assert_eq!(csv, "Dataset,Q ACSA,Q GM\nToy,75.00,70.71\n");
    }

    #[test]
    fn na_cells_print_na_in_both_columns() {
        let csv = to_csv(&table(vec![cell("Yeast", Method::AdasynQ, 1, None)]));
        assert!(csv.ends_with("Yeast,NA,NA\n"), "{csv}");
    }

    #[test]
    fn json_round_trip() {
        let t = table(vec![cell("Toy", Method::Q, 1, Some(2)), cell("Toy", Method::AdasynQ, 1, None)]);
        assert_eq!(from_json(&to_json(&t).unwrap()).unwrap(), t);
    }
}
