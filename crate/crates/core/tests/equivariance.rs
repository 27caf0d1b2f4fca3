use akm_bicluster::engine::run_permuted;
use akm_bicluster::simgen::{generate, BlockModelSpec, Setting};
use akm_bicluster::AkmConfig;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    v
}

fn inverse(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (i, &x) in p.iter().enumerate() {
        inv[x] = i;
    }
    inv
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Permuting the data and composing the inverse permutation into the
    /// restart order reproduces the same run, with permuted labels.
    #[test]
    fn permuted_data_gives_permuted_partitions(seed in 0u64..1000, setting in 0usize..3) {
        let lm = generate(&BlockModelSpec::new(Setting::ALL[setting], 24, 0.75, 0.8, seed)).unwrap();
        let x = &lm.x;
        let (n, m) = (x.n_rows(), x.n_cols());
        let cfg = AkmConfig::new(2, seed).with_restarts(1);
        let (pr, pc) = (shuffled(n, seed ^ 1), shuffled(m, seed ^ 2));
        let (or, oc) = (shuffled(n, seed ^ 3), shuffled(m, seed ^ 4));
        let xp = x.permuted(&pr, &pc);
        let (ipr, ipc) = (inverse(&pr), inverse(&pc));
        let or2: Vec<usize> = or.iter().map(|&i| ipr[i]).collect();
        let oc2: Vec<usize> = oc.iter().map(|&j| ipc[j]).collect();

        let a = run_permuted(x, &cfg, &or, &oc, 77);
        let b = run_permuted(&xp, &cfg, &or2, &oc2, 77);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                for (sa, sb) in [(&a.separate, &b.separate), (&a.alternating, &b.alternating)] {
                    for (q, &orig) in pr.iter().enumerate() {
                        prop_assert_eq!(sb.rows.label(q), sa.rows.label(orig));
                    }
                    for (q, &orig) in pc.iter().enumerate() {
                        prop_assert_eq!(sb.cols.label(q), sa.cols.label(orig));
                    }
                    prop_assert!((sa.risk - sb.risk).abs() <= 1e-12 * sa.risk.max(1.0));
                }
                prop_assert_eq!(a.outer_iterations, b.outer_iterations);
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "outcomes differ: {:?} vs {:?}", a.is_ok(), b.is_ok()),
        }
    }
}
