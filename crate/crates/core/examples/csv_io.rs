//! Write a matrix and labels to CSV, read them back and store a fit as JSON.

use akm_bicluster::io::{read_labels, read_matrix, write_labels, write_matrix, ResultDocument};
use akm_bicluster::simgen::{generate, BlockModelSpec, Setting};
use akm_bicluster::{akm_fit_report, AkmConfig};

pub fn main() {
    let dir = std::env::temp_dir().join(format!("akm-csv-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    let data = generate(&BlockModelSpec::new(Setting::MeanAndVariance, 50, 0.5, 1.0, 4)).expect("simulate");

    write_matrix(dir.join("x.csv"), &data.x).expect("write matrix");
    write_labels(dir.join("rows.csv"), &data.row_classes).expect("write labels");
    let x = read_matrix(dir.join("x.csv")).expect("read matrix");
    assert_eq!(x, data.x, "CSV round trip is exact");
    assert_eq!(read_labels(dir.join("rows.csv")).expect("read labels"), data.row_classes);

    let cfg = AkmConfig::new(2, 1).with_restarts(5);
    let doc = ResultDocument::from_fit(&cfg, &akm_fit_report(&x, &cfg).expect("fit"));
    doc.save(dir.join("result.json")).expect("save");
    let loaded = ResultDocument::load(dir.join("result.json")).expect("load");
    let recomputed = loaded.verify_against(&x).expect("consistent");
    println!("stored loss {} / recomputed {}", loaded.loss.total, recomputed.total);
    std::fs::remove_dir_all(&dir).ok();
}
