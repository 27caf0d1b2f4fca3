//! Fit two biclusters to a small matrix with two planted blocks.
//!
//! The row and column splits are recovered; which row group is paired with
//! which column group is whatever fits best, and the near-zero off-block
//! entries fit as well as the blocks themselves.

use akm_bicluster::{akm_fit_report, AkmConfig, DataMatrix};

pub fn main() {
    let x = DataMatrix::from_rows(&[
        [5.0, 5.1, 0.1, 0.0, -0.1],
        [4.9, 5.0, 0.0, 0.2, 0.0],
        [5.2, 4.8, -0.1, 0.1, 0.1],
        [0.0, 0.1, 3.0, 3.1, 2.9],
        [0.1, -0.2, 2.8, 3.0, 3.2],
        [-0.1, 0.0, 3.1, 2.9, 3.0],
    ])
    .expect("rectangular");

    let cfg = AkmConfig::new(2, 42).with_restarts(20);
    let report = akm_fit_report(&x, &cfg).expect("fit");
    let best = &report.best;
    println!("row labels:    {:?}", best.row_partition.to_one_based());
    println!("column labels: {:?}", best.col_partition.to_one_based());
    for (j, c) in best.centers.centers().iter().enumerate() {
        println!("center {}: {:?}", j + 1, c);
    }
    println!(
        "risk {:.5} from restart {} ({:?})",
        best.loss.risk, best.restart_index, best.source
    );
    let failed = report.restarts.iter().filter(|r| !r.completed).count();
    println!("{} restarts, {} exhausted their retries", report.restarts.len(), failed);
}
