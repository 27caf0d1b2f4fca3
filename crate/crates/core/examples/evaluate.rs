//! Score AKM and the separate k-means baseline on a variance-shift matrix.

use akm_bicluster::evaluation::{entry_misclassification_rate, sample_misclassification_rate, Alignment};
use akm_bicluster::kmeans::{separate_kmeans, KMeansConfig};
use akm_bicluster::simgen::{generate, BlockModelSpec, Setting};
use akm_bicluster::{akm_fit, AkmConfig};

pub fn main() {
    let data = generate(&BlockModelSpec::new(Setting::VarianceShift, 200, 1.0, 0.5, 1)).expect("simulate");
    let akm = akm_fit(&data.x, &AkmConfig::new(2, 5).with_restarts(20)).expect("fit");
    let (km_rows, km_cols) = separate_kmeans(&data.x, &KMeansConfig::new(2, 5), 20).expect("k-means");

    for (name, rows, cols) in [
        ("AKM", &akm.row_partition, &akm.col_partition),
        ("KM", &km_rows, &km_cols),
    ] {
        let sample = sample_misclassification_rate(rows, &data.row_classes).expect("rows");
        let entry = entry_misclassification_rate(rows, cols, &data.row_classes, &data.col_classes, Alignment::Independent)
            .expect("entries");
        println!(
            "{name:>3}: sample rate {:.3}, entry rate {:.3}",
            sample.achieved_rate, entry.rate
        );
    }
}
