use std::fs;

use mssom::csvio::{load_csv_auto, load_flight_csv, write_flight_csv};
use mssom::grid::{run_grid, synthetic_grid_data, SyntheticSpec};
use mssom::report::{emit_report, parse_report, Report};
use mssom_core::eval::SomSchedule;
use mssom_core::{
    generate_synthetic, CellOutcome, Dataset, FlightFrame, GridSpec, Metrics, PhaseLabel,
    NGAFID_FEATURES,
};
use proptest::prelude::*;

fn dataset_from(rows: Vec<(Vec<f64>, Option<u8>)>, dims: usize) -> Dataset {
    let frames = rows
        .into_iter()
        .enumerate()
        .map(|(i, (features, label))| FlightFrame {
            features,
            label: label.map(|c| PhaseLabel::from_code(c as i64).unwrap()),
            source_file: "x.csv".into(),
            row_index: i,
        })
        .collect();
    Dataset::new((0..dims).map(|i| format!("c{i}")).collect(), frames).unwrap()
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        -1e6f64..1e6,
        Just(0.0),
        Just(-0.0),
        Just(f64::MIN_POSITIVE),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_is_bit_exact(
        rows in prop::collection::vec((prop::collection::vec(finite(), 3), 0u8..6), 1..40),
    ) {
        let d = dataset_from(rows.into_iter().map(|(f, l)| (f, Some(l))).collect(), 3);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_flight_csv(&d, &p).unwrap();
        let back = load_csv_auto(&p).unwrap();
        prop_assert_eq!(back.len(), d.len());
        for (a, b) in d.frames().iter().zip(back.frames()) {
            let abits: Vec<u64> = a.features.iter().map(|v| v.to_bits()).collect();
            let bbits: Vec<u64> = b.features.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(abits, bbits);
            prop_assert_eq!(a.label, b.label);
            prop_assert_eq!(a.row_index, b.row_index);
        }
    }
}

#[test]
fn row_indices_increase_within_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.csv");
    fs::write(&p, "a,FlPhase\n1,0\nbad,0\n2,1\n\n3,2\n").unwrap();
    let d = load_flight_csv(&p, &["a"]).unwrap();
    let idx: Vec<usize> = d.frames().iter().map(|f| f.row_index).collect();
    assert!(idx.windows(2).all(|w| w[0] < w[1]), "{idx:?}");
    assert_eq!(d.dropped_rows(), 1);
}

#[test]
fn ngafid_schema_loads_synthetic_corpus() {
    let d = generate_synthetic([6981, 131, 2840, 3561, 254, 27272], 48, 6.0, 7).unwrap();
    let named = Dataset::new(
        NGAFID_FEATURES.iter().map(|s| s.to_string()).collect(),
        d.into_frames(),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("corpus.csv");
    write_flight_csv(&named, &p).unwrap();
    let back = load_flight_csv(&p, &NGAFID_FEATURES).unwrap();
    assert_eq!(back.class_histogram().0, [6981, 131, 2840, 3561, 254, 27272]);
    assert_eq!(back.dims(), 48);
}

fn small_grid() -> (GridSpec, mssom_core::GridData) {
    let spec = GridSpec {
        som_sizes: vec![4, 5],
        repeats: 2,
        som: SomSchedule {
            epochs: 4,
            ..SomSchedule::default()
        },
        ..GridSpec::label_sweep(5, 3).unwrap()
    };
    let data = synthetic_grid_data(&SyntheticSpec {
        rows: 600,
        dims: 4,
        ..SyntheticSpec::default()
    })
    .unwrap();
    (spec, data)
}

#[test]
fn report_round_trips_and_metrics_recompute() {
    let (spec, data) = small_grid();
    let results = run_grid(&spec, &data, 2).unwrap();
    assert_eq!(results.len(), 2 * 3 * 3 * 2);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.json");
    emit_report(&Report::new(Some(spec.clone()), results.clone()), &p).unwrap();
    let back = parse_report(&p).unwrap();
    let expected: Vec<_> = results
        .into_iter()
        .map(|mut r| {
            r.wall_clock = Default::default();
            r
        })
        .collect();
    assert_eq!(back.records, expected);
    assert_eq!(back.grid, Some(spec));
    for r in &back.records {
        if let CellOutcome::Completed { validation, test, .. } = &r.outcome {
            assert_eq!(Metrics::from_confusion(&validation.confusion).unwrap(), validation.metrics);
            assert_eq!(Metrics::from_confusion(&test.confusion).unwrap(), test.metrics);
        }
    }
    let table = fs::read_to_string(dir.path().join("r.json.txt")).unwrap();
    assert!(table.contains("== 5 labels per class =="));
    assert_eq!(table.matches('*').count(), 2, "{table}");
}

#[test]
fn empty_report_is_valid() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("empty.json");
    emit_report(&Report::new(None, vec![]), &p).unwrap();
    assert!(parse_report(&p).unwrap().records.is_empty());
}

#[test]
fn worker_count_does_not_change_results() {
    let (spec, data) = small_grid();
    let strip = |rs: Vec<mssom_core::ExperimentResult>| -> String {
        Report::new(None, rs).to_json().unwrap()
    };
    let one = strip(run_grid(&spec, &data, 1).unwrap());
    let many = strip(run_grid(&spec, &data, 8).unwrap());
    assert_eq!(one, many);
}

#[test]
fn twenty_label_table_has_expected_shape() {
    let mut spec = GridSpec::label_sweep(20, 1).unwrap();
    spec.repeats = 1;
    spec.som.epochs = 1;
    let data = synthetic_grid_data(&SyntheticSpec {
        rows: 1500,
        dims: 3,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let results = run_grid(&spec, &data, 4).unwrap();
    let table = mssom::report::render_table(&results);
    let block: Vec<&str> = table.lines().skip(2).take(6).collect();
    assert_eq!(block.len(), 6);
    for line in &block {
        assert_eq!(line.split_whitespace().count(), 1 + 15, "{line}");
    }
}
