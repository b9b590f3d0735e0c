//! Invariants over randomly generated inputs.

mod common;

use advos::adversarial::make_sampling_plan;
use advos::data::{
    knn_impute, median_impute, split_by_counts, stratified_split, stratified_train_counts, Dataset, MinMaxScaler,
    RawTable, SplitSpec,
};
use advos::metrics::EvalReport;
use advos::nn::{softmax_rows, Tensor};
use advos::resamplers::{resample, ResampleMethod, ResampleSpec};
use common::brute_knn;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dataset(sizes: &[usize], d: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (k, &s) in sizes.iter().enumerate() {
        for _ in 0..s {
            rows.push((0..d).map(|j| rng.gen_range(-1.0..1.0) + if j == 0 { k as f64 } else { 0.0 }).collect::<Vec<f64>>());
            y.push(k);
        }
    }
    // interleave classes so row order carries no class information
    let mut order: Vec<usize> = (0..y.len()).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let rows: Vec<Vec<f64>> = order.iter().map(|&i| rows[i].clone()).collect();
    let y: Vec<usize> = order.iter().map(|&i| y[i]).collect();
    Dataset::new(Tensor::from_rows(&rows).unwrap(), y, (0..sizes.len()).map(|k| format!("c{k}")).collect()).unwrap()
}

fn rows_of(ds: &Dataset) -> Vec<Vec<f64>> {
    ds.x().iter_rows().map(<[f64]>::to_vec).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stratified_split_partitions_each_class(
        sizes in prop::collection::vec(2usize..40, 2..5),
        frac in 0.2f64..0.9,
        seed in 0u64..1000,
    ) {
        let ds = dataset(&sizes, 2, seed);
        let (train, test) = stratified_split(&ds, &SplitSpec::stratified(frac, seed)).unwrap();
        prop_assert_eq!(train.n() + test.n(), ds.n());
        let mut all = rows_of(&train);
        all.extend(rows_of(&test));
        let mut orig = rows_of(&ds);
        let key = |a: &Vec<f64>, b: &Vec<f64>| a.partial_cmp(b).unwrap();
        all.sort_by(key);
        orig.sort_by(key);
        prop_assert_eq!(all, orig);
        let n_test = ((1.0 - frac) * ds.n() as f64 - 1e-9).ceil() as usize;
        for (k, &p) in sizes.iter().enumerate() {
            let t = train.class_sizes()[k];
            prop_assert!(t >= 1 && t < p);
            // largest remainder plus the one-row floor per side bounds the drift
            let ideal = (ds.n() - n_test) as f64 * p as f64 / ds.n() as f64;
            prop_assert!((t as f64 - ideal).abs() <= 2.0, "class {} train {} ideal {}", k, t, ideal);
        }
    }

    #[test]
    fn split_by_counts_is_exact_and_seeded(sizes in prop::collection::vec(1usize..20, 2..4), seed in 0u64..100) {
        let ds = dataset(&sizes, 1, seed);
        let counts: Vec<usize> = sizes.iter().map(|&s| s / 2).collect();
        let (a, _) = split_by_counts(&ds, &counts, seed).unwrap();
        let (b, _) = split_by_counts(&ds, &counts, seed).unwrap();
        prop_assert_eq!(a.class_sizes(), counts);
        prop_assert_eq!(a.x(), b.x());
    }

    #[test]
    fn stratified_counts_sum_to_train_size(sizes in prop::collection::vec(2usize..500, 2..8), frac in 0.1f64..0.95) {
        let c = stratified_train_counts(&sizes, frac).unwrap();
        let n: usize = sizes.iter().sum();
        let n_test = ((1.0 - frac) * n as f64 - 1e-9).ceil() as usize;
        let total: usize = c.iter().sum();
        prop_assert!((total as i64 - (n - n_test) as i64).abs() <= sizes.len() as i64);
    }

    #[test]
    fn gm_never_exceeds_acsa_and_ignores_class_relabeling(
        pairs in prop::collection::vec((0usize..4, 0usize..4), 4..80),
        perm_seed in 0u64..100,
    ) {
        let mut truth: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let pred: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        truth.extend(0..4);
        let mut pred = pred;
        pred.extend(0..4);
        let r = EvalReport::new(&truth, &pred, 4, None).unwrap();
        prop_assert!(r.gm <= r.acsa + 1e-9);
        let mut perm: Vec<usize> = (0..4).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut ChaCha8Rng::seed_from_u64(perm_seed));
        let t2: Vec<usize> = truth.iter().map(|&c| perm[c]).collect();
        let p2: Vec<usize> = pred.iter().map(|&c| perm[c]).collect();
        let r2 = EvalReport::new(&t2, &p2, 4, None).unwrap();
        prop_assert!((r.acsa - r2.acsa).abs() < 1e-9);
        prop_assert!((r.gm - r2.gm).abs() < 1e-9);
        // sample order does not matter either
        let mut idx: Vec<usize> = (0..truth.len()).collect();
        idx.reverse();
        let r3 = EvalReport::new(
            &idx.iter().map(|&i| truth[i]).collect::<Vec<_>>(),
            &idx.iter().map(|&i| pred[i]).collect::<Vec<_>>(),
            4,
            None,
        ).unwrap();
        prop_assert_eq!(r.acsa, r3.acsa);
    }

    #[test]
    fn resamplers_balance_and_keep_originals(
        sizes in prop::collection::vec(2usize..25, 2..4),
        method in prop_oneof![Just(ResampleMethod::Random), Just(ResampleMethod::Smote), Just(ResampleMethod::BorderlineSmote)],
        seed in 0u64..1000,
    ) {
        let ds = dataset(&sizes, 3, seed);
        let out = resample(&ds, &ResampleSpec { method, k: 3, seed }).unwrap();
        let p_max = *sizes.iter().max().unwrap();
        prop_assert!(out.dataset.class_sizes().iter().all(|&s| s == p_max));
        for i in 0..ds.n() {
            prop_assert_eq!(out.dataset.x().row(i), ds.x().row(i));
            prop_assert_eq!(out.dataset.y()[i], ds.y()[i]);
        }
        let x = rows_of(&ds);
        for (j, s) in out.synthetic.iter().enumerate() {
            let row = out.dataset.x().row(ds.n() + j);
            prop_assert_eq!(ds.y()[s.base], s.class);
            match s.neighbor {
                None => prop_assert_eq!(row, ds.x().row(s.base)),
                Some(nb) => {
                    prop_assert!((0.0..=1.0).contains(&s.u));
                    prop_assert_eq!(ds.y()[nb], s.class);
                    let members = &ds.class_index()[s.class];
                    let k_eff = 3.min(members.len() - 1);
                    prop_assert!(brute_knn(&x, members, s.base, k_eff).contains(&nb));
                    for (c, (a, b)) in row.iter().zip(x[s.base].iter().zip(&x[nb])) {
                        prop_assert!((c - (a + s.u * (b - a))).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn adasyn_balances_when_applicable(sizes in prop::collection::vec(6usize..25, 2..4), seed in 0u64..1000) {
        let ds = dataset(&sizes, 2, seed);
        let out = resample(&ds, &ResampleSpec { method: ResampleMethod::Adasyn, k: 5, seed }).unwrap();
        let p_max = *sizes.iter().max().unwrap();
        prop_assert!(out.dataset.class_sizes().iter().all(|&s| s == p_max));
    }

    #[test]
    fn sampling_plan_invariants(sizes in prop::collection::vec(1usize..300, 1..6), f in 0.0f64..=1.0, seed in 0u64..100) {
        let plan = make_sampling_plan(&sizes, f).unwrap();
        let p_max = *sizes.iter().max().unwrap();
        for (k, (&m, &p)) in plan.counts.iter().zip(&sizes).enumerate() {
            let exact = f * (p_max - p) as f64;
            prop_assert!(m as f64 >= exact - 1e-9 && (m as f64) < exact + 1.0, "class {}", k);
            prop_assert!(p + m <= p_max);
        }
        let s: f64 = plan.classifier_dist.iter().sum();
        let dist_ok = if plan.is_active() { (s - 1.0).abs() < 1e-12 } else { s == 0.0 };
        prop_assert!(dist_ok);
        prop_assert!((plan.generator_dist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let sched = plan.epoch_schedule(7, &mut ChaCha8Rng::seed_from_u64(seed));
        let mut seen = vec![0usize; sizes.len()];
        for b in &sched {
            for &k in b {
                seen[k] += 1;
            }
        }
        prop_assert_eq!(&seen, &plan.counts);
        let lens: Vec<usize> = sched.iter().map(Vec::len).collect();
        prop_assert!(lens.iter().max().unwrap() - lens.iter().min().unwrap() <= 1);
    }

    #[test]
    fn normalization_is_idempotent_and_bounded(sizes in prop::collection::vec(1usize..20, 1..3), seed in 0u64..1000) {
        let ds = dataset(&sizes, 4, seed);
        let s = MinMaxScaler::fit(ds.x());
        let once = s.transform(ds.x());
        prop_assert!(once.data().iter().all(|v| (0.0..=1.0).contains(v)));
        let twice = MinMaxScaler::fit(&once).transform(&once);
        for (a, b) in once.data().iter().zip(twice.data()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn imputation_fills_only_missing_cells(
        cells in prop::collection::vec(prop::collection::vec(prop::option::weighted(0.75, -5.0f64..5.0), 3), 3..20),
        k in 1usize..4,
    ) {
        let mut cells = cells;
        // every row and column needs one observed value
        for (r, row) in cells.iter_mut().enumerate() {
            row[r % 3].get_or_insert(r as f64);
        }
        for (j, row) in cells.iter_mut().take(3).enumerate() {
            row[j].get_or_insert(0.0);
        }
        let table = RawTable {
            feature_names: vec!["a".into(), "b".into(), "c".into()],
            label_name: "y".into(),
            labels: vec!["0".into(); cells.len()],
            cells,
        };
        for out in [knn_impute(&table, k).unwrap(), median_impute(&table).unwrap()] {
            prop_assert_eq!(out.missing_count(), 0);
            for (r, row) in table.cells.iter().enumerate() {
                for (j, c) in row.iter().enumerate() {
                    if let Some(v) = c {
                        prop_assert_eq!(out.cells[r][j], Some(*v));
                    }
                    let filled = out.cells[r][j].unwrap();
                    let col: Vec<f64> = table.cells.iter().filter_map(|row| row[j]).collect();
                    let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(filled >= lo - 1e-12 && filled <= hi + 1e-12);
                }
            }
        }
    }

    #[test]
    fn softmax_rows_are_distributions(rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 1..6), 1..6)) {
        let c = rows[0].len();
        let rows: Vec<Vec<f64>> = rows.into_iter().map(|mut r| { r.resize(c, 0.0); r }).collect();
        let p = softmax_rows(&Tensor::from_rows(&rows).unwrap());
        for row in p.iter_rows() {
            prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn metrics_match_brute_force_oracle() {
    let c = common::checks::metrics_check(500, 3);
    assert!(c.max_diff < 1e-10, "{c:?}");
    assert_eq!(c.gm_above_acsa, 0);
    assert_eq!(c.binary_mismatch, 0);
}

#[test]
fn smote_family_matches_brute_force_oracle() {
    let c = common::checks::smote_family_check(50, 5);
    assert!(c.synthetic > 0);
    assert_eq!((c.bad_interpolation, c.bad_neighbor, c.bad_danger_base, c.bad_adasyn_allocation), (0, 0, 0, 0), "{c:?}");
}
