//! Loss against k for a matrix with three planted diagonal blocks, as a
//! plot-ready table. Losses keep falling with k; look for the bend.

use akm_bicluster::evaluation::elbow_curve;
use akm_bicluster::DataMatrix;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

pub fn main() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
    let noise = Normal::new(0.0, 0.5).expect("valid sd");
    let (n, m) = (60, 45);
    let values = (0..n * m)
        .map(|idx| {
            let (i, j) = (idx / m, idx % m);
            let signal = if i / 20 == j / 15 { 2.0 + (i / 20) as f64 } else { 0.0 };
            signal + noise.sample(&mut rng)
        })
        .collect();
    let x = DataMatrix::new(n, m, values).expect("shape");

    let curve = elbow_curve(&x, 1, 6, 10, 123).expect("valid range");
    println!("k,loss");
    for (k, loss) in curve.k_values.iter().zip(&curve.losses) {
        match loss {
            Some(l) => println!("{k},{l:.4}"),
            None => println!("{k},NA"),
        }
    }
}
