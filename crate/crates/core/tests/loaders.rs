use std::fs;
use std::path::Path;

use symbreak::data::{load_dataset, prepare, synth_dataset, synth_regression_weights, DatasetName, SynthOptions};
use symbreak::{build_network, train, DenseMatrix, Error, FixSchedule, NetMode, NetSpec, Targets, Task, TrainConfig, TrainData};

fn write(dir: &Path, rel: &str, text: &str) {
    let p = dir.join(rel);
    fs::create_dir_all(p.parent().unwrap()).unwrap();
    fs::write(p, text).unwrap();
}

#[test]
fn churn_drops_identifiers_and_encodes_categories() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("RowNumber,CustomerId,Surname,CreditScore,Geography,Gender,Age,Exited\n");
    for i in 0..30 {
        let geo = ["France", "Spain", "Germany"][i % 3];
        let gender = if i % 2 == 0 { "Male" } else { "Female" };
        csv += &format!("{i},{},Name{i},{},{geo},{gender},{},{}\n", 1000 + i, 600 + i, 20 + i, i % 2);
    }
    write(dir.path(), "churn/Churn_Modelling.csv", &csv);
    let ds = load_dataset(DatasetName::Churn, dir.path()).unwrap();
    assert_eq!(ds.feature_names, vec!["CreditScore", "Age"]);
    assert_eq!(ds.categorical.len(), 2);
    assert_eq!(ds.class_count(), Some(2));
    let p = prepare(&ds, 0).unwrap();
    assert_eq!(p.in_features(), 2 + 3 + 2);
}

#[test]
fn otto_shape() {
    let dir = tempfile::tempdir().unwrap();
    let header: Vec<String> = (1..=93).map(|i| format!("feat_{i}")).collect();
    let mut csv = format!("id,{},target\n", header.join(","));
    for r in 0..45 {
        let feats: Vec<String> = (0..93).map(|c| ((r * 7 + c) % 5).to_string()).collect();
        csv += &format!("{r},{},Class_{}\n", feats.join(","), r % 9 + 1);
    }
    write(dir.path(), "otto/train.csv", &csv);
    let ds = load_dataset(DatasetName::Otto, dir.path()).unwrap();
    assert_eq!(ds.features.cols(), 93);
    assert_eq!(ds.class_count(), Some(9));
    let Targets::Labels { labels, .. } = &ds.targets else { panic!() };
    assert_eq!(labels[0], 0);
    assert_eq!(labels[8], 8);
}

#[test]
fn adult_targets_and_missing_values() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("age,workclass,hours-per-week,income\n");
    let rows = [
        ("39", "State-gov", "40", "<=50K"),
        ("50", "?", "13", ">50K"),
        ("?", "Private", "40", "<=50K."),
        ("28", "Private", "", ">50K."),
    ];
    for (a, w, h, t) in rows.iter().cycle().take(20) {
        csv += &format!("{a}, {w}, {h}, {t}\n");
    }
    write(dir.path(), "adult/adult.csv", &csv);
    let ds = load_dataset(DatasetName::Adult, dir.path()).unwrap();
    let Targets::Labels { labels, classes } = &ds.targets else { panic!() };
    assert_eq!(*classes, 2);
    assert_eq!(&labels[..4], &[0, 1, 0, 1]);
    assert_eq!(ds.features.get(2, 0), 0.0);
    assert_eq!(ds.features.get(3, 1), 0.0);
    assert_eq!(ds.categorical[0].values[1], None);
    let p = prepare(&ds, 1).unwrap();
    assert!(p.feature_names.iter().any(|n| n == "workclass=MissingValue"));
}

#[test]
fn california_is_regression() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("MedInc,HouseAge,MedHouseVal\n");
    for i in 0..20 {
        csv += &format!("{},{},{}\n", 1.0 + i as f64 * 0.3, 10 + i, 0.5 + i as f64 * 0.1);
    }
    write(dir.path(), "california/california_housing.csv", &csv);
    let ds = load_dataset(DatasetName::California, dir.path()).unwrap();
    assert_eq!(ds.task(), Task::Regression);
    assert_eq!(ds.features.cols(), 2);
}

fn idx(magic: u32, dims: &[u32], payload: &[u8]) -> Vec<u8> {
    let mut out = magic.to_be_bytes().to_vec();
    for d in dims {
        out.extend(d.to_be_bytes());
    }
    out.extend_from_slice(payload);
    out
}

#[test]
fn mnist_idx_files() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("mnist");
    fs::create_dir_all(&m).unwrap();
    for (prefix, n) in [("train", 20u32), ("t10k", 10u32)] {
        let pixels: Vec<u8> = (0..n as usize * 784).map(|i| (i % 256) as u8).collect();
        let labels: Vec<u8> = (0..n as u8).map(|i| i % 10).collect();
        fs::write(m.join(format!("{prefix}-images-idx3-ubyte")), idx(0x0803, &[n, 28, 28], &pixels)).unwrap();
        fs::write(m.join(format!("{prefix}-labels-idx1-ubyte")), idx(0x0801, &[n], &labels)).unwrap();
    }
    let ds = load_dataset(DatasetName::Mnist, dir.path()).unwrap();
    assert_eq!(ds.features.shape(), (30, 784));
    assert_eq!(ds.class_count(), Some(10));
    assert!(ds.features.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
    assert_eq!(ds.features.get(0, 255), 1.0);
}

#[test]
fn loader_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_dataset(DatasetName::Otto, dir.path()), Err(Error::MissingFile(_))));
    write(dir.path(), "churn/Churn_Modelling.csv", "a,Exited\n1,0\n2\n");
    let e = load_dataset(DatasetName::Churn, dir.path()).unwrap_err();
    assert_eq!(e.exit_code(), 3);
    write(dir.path(), "california/housing.csv", "x,target\n1,abc\n");
    assert!(matches!(load_dataset(DatasetName::California, dir.path()), Err(Error::Data(_))));
}

#[test]
fn synthetic_data_is_deterministic() {
    let o = SynthOptions::default();
    assert_eq!(
        synth_dataset(Task::Regression, 50, 3, 4, &o).unwrap(),
        synth_dataset(Task::Regression, 50, 3, 4, &o).unwrap()
    );
    assert_ne!(
        synth_dataset(Task::Classification, 50, 3, 4, &o).unwrap(),
        synth_dataset(Task::Classification, 50, 3, 5, &o).unwrap()
    );
}

/// Normal equations solved by Gaussian elimination with partial pivoting.
fn least_squares(x: &DenseMatrix, y: &[f64]) -> Vec<f64> {
    let d = x.cols();
    let mut a = vec![vec![0.0; d + 1]; d];
    for r in 0..x.rows() {
        let row = x.row(r);
        for i in 0..d {
            for j in 0..d {
                a[i][j] += row[i] * row[j];
            }
            a[i][d] += row[i] * y[r];
        }
    }
    for col in 0..d {
        let piv = (col..d).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs())).unwrap();
        a.swap(col, piv);
        for r in 0..d {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=d {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    (0..d).map(|i| a[i][d] / a[i][i]).collect()
}

#[test]
fn regression_weights_recoverable_by_least_squares() {
    let opts = SynthOptions {
        noise: 0.01,
        ..SynthOptions::default()
    };
    let ds = synth_dataset(Task::Regression, 2000, 6, 21, &opts).unwrap();
    let Targets::Values(y) = &ds.targets else { panic!() };
    let w_hat = least_squares(&ds.features, y.as_slice());
    let w = synth_regression_weights(6, 21);
    let num: f64 = w.iter().zip(&w_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let den: f64 = w.iter().map(|a| a * a).sum::<f64>().sqrt();
    assert!(num / den < 0.1, "relative error {}", num / den);
}

#[test]
fn separated_blobs_are_learnable() {
    // centres 4σ apart: 2σ from each centre to the boundary
    let opts = SynthOptions {
        separation: 4.0,
        margin: Some(0.0),
        ..SynthOptions::default()
    };
    let ds = synth_dataset(Task::Classification, 1500, 5, 8, &opts).unwrap();
    let data = prepare(&ds, 0).unwrap();
    let spec = NetSpec::new(5, 32, 3, NetMode::Mlp);
    let net = build_network(spec, &FixSchedule::for_hidden(32), 0, 0).unwrap();
    let cfg = TrainConfig {
        max_epochs: 60,
        ..TrainConfig::default()
    };
    let td = TrainData {
        train_x: &data.train.x,
        train_y: &data.train.y,
        val_x: &data.val.x,
        val_y: &data.val.y,
    };
    let (net, _) = train(net, td, &cfg).unwrap();
    let pred = net.predict(&data.test.x).unwrap().argmax_rows();
    let Targets::Labels { labels, .. } = &data.test.y else { panic!() };
    let acc = pred.iter().zip(labels).filter(|(p, l)| p == l).count() as f64 / labels.len() as f64;
    assert!(acc > 0.95, "accuracy {acc}");
}
