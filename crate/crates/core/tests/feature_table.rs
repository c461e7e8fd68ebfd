use nalgebra::DMatrix;
use proptest::prelude::*;
use wasabi_core::region::{Aggregation, RegionEntry, RegionMap};
use wasabi_core::table::{parse_table, LoadOptions, TableSchema};
use wasabi_core::{apply_region_map, filter_by_qc, normalize_by_icv, qc_iqr_threshold, FeatureTable};

fn table(values: Vec<Vec<f64>>, names: &[&str], qc: Option<Vec<f64>>, icv: Option<Vec<f64>>) -> FeatureTable {
    let n = values.len();
    let d = names.len();
    FeatureTable::new(
        (0..n).map(|i| format!("s{i}")).collect(),
        names.iter().map(|s| s.to_string()).collect(),
        DMatrix::from_fn(n, d, |i, j| values[i][j]),
        qc,
        icv,
    )
    .unwrap()
}

fn map() -> RegionMap {
    let entry = |out: &str, ins: &[&str]| RegionEntry {
        output_name: out.into(),
        inputs: ins.iter().map(|s| s.to_string()).collect(),
        aggregation: Aggregation::Mean,
    };
    RegionMap::new(
        vec![entry("hip", &["lh_hip", "rh_hip"]), entry("stem", &["stem"]), entry("amy", &["lh_amy", "rh_amy"])],
        "icv".into(),
        "qc".into(),
    )
    .unwrap()
}

fn rows(n: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0f64..1e5, d), n)
}

proptest! {
    #[test]
    fn region_map_ignores_source_column_order(v in rows(6, 5), perm in Just((0..5).collect::<Vec<usize>>()).prop_shuffle()) {
        let names = ["lh_hip", "rh_hip", "stem", "lh_amy", "rh_amy"];
        let t = table(v, &names, None, None);
        let reordered: Vec<String> = perm.iter().map(|&j| names[j].to_string()).collect();
        let t2 = t.select_features(&reordered).unwrap();
        let a = apply_region_map(&t, &map()).unwrap();
        let b = apply_region_map(&t2, &map()).unwrap();
        prop_assert_eq!(a.feature_names(), b.feature_names());
        prop_assert_eq!(a.values(), b.values());
    }

    #[test]
    fn normalization_preserves_ratios_and_round_trips(v in rows(5, 4), icv in prop::collection::vec(1e3f64..2e6, 5)) {
        let t = table(v, &["a", "b", "c", "d"], None, Some(icv.clone()));
        let nt = normalize_by_icv(&t).unwrap();
        for i in 0..5 {
            for p in 0..4 {
                let orig = t.values()[(i, p)];
                let back = nt.values()[(i, p)] * icv[i];
                prop_assert!((back - orig).abs() <= 1e-12 * orig.abs());
                for q in 0..4 {
                    let vq = t.values()[(i, q)];
                    if vq != 0.0 && nt.values()[(i, q)] != 0.0 {
                        let r0 = orig / vq;
                        let r1 = nt.values()[(i, p)] / nt.values()[(i, q)];
                        prop_assert!((r0 - r1).abs() <= 1e-12 * r0.abs());
                    }
                }
            }
        }
    }

    #[test]
    fn qc_filter_partitions_rows(qc in prop::collection::vec(0.0f64..=1.0, 1..40), th in -0.1f64..1.1) {
        let n = qc.len();
        let t = table(vec![vec![1.0]; n], &["a"], Some(qc.clone()), None);
        let (kept, removed) = filter_by_qc(&t, th).unwrap();
        let mut all: Vec<String> = kept.subject_ids().iter().cloned().chain(removed.iter().cloned()).collect();
        all.sort();
        let mut expect: Vec<String> = t.subject_ids().to_vec();
        expect.sort();
        prop_assert_eq!(all, expect);
        prop_assert!(kept.subject_ids().iter().all(|s| !removed.contains(s)));
        prop_assert!(kept.qc().unwrap().iter().all(|&q| q >= th));
    }
}

#[test]
fn hundred_region_table_maps_to_52_columns() {
    let m = RegionMap::synthseg_52();
    let inputs = m.input_names();
    assert_eq!(inputs.len(), 100);
    let names: Vec<&str> = inputs.iter().map(String::as_str).collect();
    let t = table(vec![(0..100).map(|j| j as f64 + 1.0).collect(); 3], &names, None, None);
    let out = apply_region_map(&t, &m).unwrap();
    assert_eq!(out.n_features(), 52);
    assert_eq!(out.n_subjects(), 3);
}

#[test]
fn qc_fixture_end_to_end() {
    let csv = "subject,qc,icv,lh_hippocampus,rh_hippocampus\n\
               a,0.9,1000,2,4\nb,0.69,1000,3,3\nc,0.71,1000,1,1\nd,0.7,1000,5,5\n";
    let (t, _) = parse_table(csv, &TableSchema::infer(&["subject".into(), "qc".into(), "icv".into(), "lh_hippocampus".into(), "rh_hippocampus".into()]), LoadOptions::default()).unwrap();
    let (kept, removed) = filter_by_qc(&t, 0.7).unwrap();
    assert_eq!(removed, vec!["b".to_string()]);
    assert_eq!(kept.subject_ids(), &["a", "c", "d"]);
    assert_eq!(qc_iqr_threshold(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap(), -2.5);
}
