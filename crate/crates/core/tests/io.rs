use std::fs;

use mixdiff_core::datasets::{detrend_normalize, load_series_csv, sample_gmm, GmmParams};
use mixdiff_core::net::{Checkpoint, NetConfig, NoiseModel};
use mixdiff_core::prior::MixturePrior;
use mixdiff_core::Error;

#[test]
fn series_csv_with_header_and_extra_fields() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("series.csv");
    fs::write(&path, "calls,date\n10,2009-07-01\n12.5,2009-07-02\n\n11,2009-07-03\n").unwrap();
    assert_eq!(load_series_csv(&path).unwrap(), vec![10.0, 12.5, 11.0]);
}

#[test]
fn bad_series_record_reports_its_index() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("series.csv");
    fs::write(&path, "1\n2\nthree\n4\n").unwrap();
    match load_series_csv(&path) {
        Err(Error::Ingest { index, .. }) => assert_eq!(index, 2),
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(load_series_csv(&dir.path().join("missing.csv")), Err(Error::Io(_))));
}

#[test]
fn detrending_a_line_plus_noise() {
    let series: Vec<f64> = (0..300).map(|i| 5.0 + 0.5 * i as f64 + if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let (train, test, trend) = detrend_normalize(&series, 200, 100).unwrap();
    let z = train.column(0);
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / z.len() as f64;
    assert!(mean.abs() < 1e-10 && (var - 1.0).abs() < 1e-10);
    let test = test.unwrap();
    assert_eq!(test.len(), 100);
    for (k, v) in test.column(0).iter().enumerate() {
        assert!((trend.inverse(200 + k, *v) - series[200 + k]).abs() < 1e-9);
    }
    assert!(detrend_normalize(&series, 200, 101).is_err());
}

#[test]
fn sample_set_csv_has_labels() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    let data = sample_gmm(&GmmParams::paper_bimodal(), 5, 0).unwrap();
    data.write_csv(&path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x0,label");
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[1].split(',').next().unwrap().parse::<f64>().unwrap(), data.point(0)[0]);
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let cfg = NetConfig { hidden: vec![16, 8], zero_init_output: false, ..NetConfig::standard(2, 3) };
    let model = NoiseModel::new(cfg, 9).unwrap();
    Checkpoint::capture(&model, "s".into(), "p".into()).save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    assert_eq!(loaded.schedule_fingerprint, "s");
    let restored = loaded.restore().unwrap();
    for (a, b) in model.tensors().iter().zip(restored.tensors()) {
        assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    assert_eq!(restored, model);
}

#[test]
fn truncated_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let model = NoiseModel::new(NetConfig { hidden: vec![4], ..NetConfig::standard(1, 1) }, 0).unwrap();
    Checkpoint::capture(&model, String::new(), String::new()).save(&path).unwrap();
    let mut json: serde_json::Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
    json["tensors"][0]["data"].as_array_mut().unwrap().pop();
    fs::write(&path, serde_json::to_vec(&json).unwrap()).unwrap();
    assert!(matches!(Checkpoint::load(&path).unwrap().restore(), Err(Error::Checkpoint(_))));
}

#[test]
fn prior_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("prior.json");
    let prior = MixturePrior::new(vec![vec![-0.9], vec![0.9]], vec![0.25, 0.75], vec![0.19, 0.2]).unwrap();
    prior.save(&path).unwrap();
    assert_eq!(MixturePrior::load(&path).unwrap(), prior);
}
