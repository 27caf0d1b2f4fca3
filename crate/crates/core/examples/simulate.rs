//! Generate one matrix from each block-model setting and print block means
//! and standard deviations next to their generating values.

use akm_bicluster::simgen::{block_matrices, generate, BlockModelSpec, Setting};

pub fn main() {
    for setting in Setting::ALL {
        let spec = BlockModelSpec::new(setting, 300, 1.0, 0.3, 11);
        let data = generate(&spec).expect("simulate");
        let (means, sds) = block_matrices(setting, spec.b);
        println!("{setting}: {}x{}", data.x.n_rows(), data.x.n_cols());
        for u in 1..=2 {
            for v in 1..=2 {
                let vals: Vec<f64> = data
                    .row_classes
                    .iter()
                    .enumerate()
                    .filter(|&(_, &c)| c == u)
                    .flat_map(|(i, _)| {
                        let x = &data.x;
                        data.col_classes
                            .iter()
                            .enumerate()
                            .filter(move |&(_, &c)| c == v)
                            .map(move |(j, _)| x.get(i, j))
                    })
                    .collect();
                let n = vals.len() as f64;
                let mean = vals.iter().sum::<f64>() / n;
                let sd = (vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
                println!(
                    "  block ({u},{v}): mean {mean:+.3} (model {:+.3}), sd {sd:.3} (model {:.3})",
                    means[u - 1][v - 1],
                    sds[u - 1][v - 1]
                );
            }
        }
    }
}
