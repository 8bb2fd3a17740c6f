use proptest::prelude::*;
use semdiff_core::model::{load_dataset, save_dataset, CodePairRecord, Dataset, DatasetHeader, Level, ModelError};

fn record() -> impl Strategy<Value = CodePairRecord> {
    (
        "[a-z0-9:]{1,12}",
        "\\PC{0,40}",
        "\\PC{0,40}",
        any::<bool>(),
        proptest::option::of(0.0f64..=1.0),
        proptest::option::of(proptest::collection::vec(0.0f64..=1.0, 0..5)),
        proptest::collection::btree_map("[a-z]{1,8}", 0.0f64..100.0, 0..4),
    )
        .prop_map(|(id, ori, var, program, sim, reps, metrics)| {
            let mut r = CodePairRecord::new(id, "task", ori, var, if program { Level::Program } else { Level::Function });
            r.surface_sim = sim;
            r.df_score = reps.as_ref().map(|v| {
                if v.is_empty() {
                    -1.0
                } else {
                    v.iter().sum::<f64>() / v.len() as f64
                }
            });
            r.rep_scores = reps;
            r.metric_scores = metrics;
            r
        })
}

proptest! {
    #[test]
    fn save_then_load_is_identity(records in proptest::collection::vec(record(), 0..10), digest in "[0-9a-f]{0,64}") {
        let mut seen = std::collections::HashSet::new();
        let records: Vec<_> = records.into_iter().filter(|r| seen.insert(r.pair_id.clone())).collect();
        let ds = Dataset::new(DatasetHeader::with_digest(digest), records);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.jsonl");
        save_dataset(&ds, &path).unwrap();
        let first = std::fs::read(&path).unwrap();
        let back = load_dataset(&path).unwrap();
        prop_assert_eq!(&back, &ds);
        save_dataset(&back, &path).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), first);
    }
}

#[test]
fn bad_lines_are_reported_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ds.jsonl");
    let header = serde_json::to_string(&DatasetHeader::default()).unwrap();
    let good = serde_json::to_string(&CodePairRecord::new("p1", "t", "a", "b", Level::Function)).unwrap();
    let mut bad = CodePairRecord::new("p2", "t", "a", "b", Level::Function);
    bad.df_score = Some(1.5);
    let bad = serde_json::to_string(&bad).unwrap();
    std::fs::write(&path, format!("{header}\n{good}\n{bad}\n")).unwrap();
    match load_dataset(&path) {
        Err(ModelError::Schema { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    std::fs::write(&path, format!("{header}\n{good}\n{good}\n")).unwrap();
    assert!(matches!(load_dataset(&path), Err(ModelError::Schema { line: 3, .. })));
}
