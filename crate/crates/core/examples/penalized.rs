//! Compare penalty weights on one set of restarts. A positive lambda
//! discourages biclusters with little signal except for one noise bicluster.

use akm_bicluster::simgen::{generate, BlockModelSpec, Setting};
use akm_bicluster::{akm_fit_lambdas, AkmConfig};

pub fn main() {
    let data = generate(&BlockModelSpec::new(Setting::MeanShift, 120, 1.0, 1.5, 3)).expect("simulate");
    let cfg = AkmConfig::new(3, 7).with_restarts(15);
    let lambdas = [0.0, 0.1, 1.0];
    let reports = akm_fit_lambdas(&data.x, &cfg, &lambdas).expect("fit");
    for (lambda, report) in lambdas.iter().zip(&reports) {
        let l = &report.best.loss;
        println!(
            "lambda {lambda:>4}: risk {:.4} penalty {:.4} total {:.4} noise bicluster {:?} sizes {:?}/{:?}",
            l.risk,
            l.penalty,
            l.total,
            l.noise_bicluster.map(|j| j + 1),
            report.best.row_partition.sizes(),
            report.best.col_partition.sizes(),
        );
    }
}
