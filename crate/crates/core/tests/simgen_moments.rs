use akm_bicluster::simgen::{generate, BlockModelSpec, Setting};

fn block_values(setting: Setting, b: f64, u: usize, v: usize, seed: u64) -> Vec<f64> {
    let lm = generate(&BlockModelSpec::new(setting, 2000, 1.0, b, seed)).unwrap();
    let mut out = Vec::new();
    for (i, &ru) in lm.row_classes.iter().enumerate() {
        if ru != u {
            continue;
        }
        for (j, &cv) in lm.col_classes.iter().enumerate() {
            if cv == v {
                out.push(lm.x.get(i, j));
            }
        }
    }
    out
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

#[test]
fn mean_shift_block_mean() {
    let v = block_values(Setting::MeanShift, 0.25, 1, 2, 17);
    let (m, sd) = mean_sd(&v);
    let se = 1.0 / (v.len() as f64).sqrt();
    assert!((m - 0.225).abs() < 4.0 * se, "mean {m}, se {se}");
    assert!((sd - 1.0).abs() < 4.0 / (2.0 * v.len() as f64).sqrt(), "sd {sd}");
}

#[test]
fn variance_shift_block_sd() {
    let b = 0.3;
    let v = block_values(Setting::VarianceShift, b, 1, 1, 18);
    let (m, sd) = mean_sd(&v);
    let sd_se = (1.0 + b) / (2.0 * v.len() as f64).sqrt();
    assert!((sd - (1.0 + b)).abs() < 4.0 * sd_se, "sd {sd}");
    assert!(m.abs() < 4.0 * (1.0 + b) / (v.len() as f64).sqrt(), "mean {m}");
}

#[test]
fn mean_shift_blocks_have_unit_sd_and_variance_shift_zero_mean() {
    for (u, v) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
        let vals = block_values(Setting::MeanShift, 0.2, u, v, 5);
        let (_, sd) = mean_sd(&vals);
        assert!((sd - 1.0).abs() < 4.0 / (2.0 * vals.len() as f64).sqrt(), "block {u}{v}: sd {sd}");

        let vals = block_values(Setting::VarianceShift, 0.3, u, v, 6);
        let (m, sd) = mean_sd(&vals);
        assert!(m.abs() < 4.0 * sd / (vals.len() as f64).sqrt(), "block {u}{v}: mean {m}");
    }
}

#[test]
fn class_frequencies_match_probabilities() {
    let n = 10_000;
    let spec = BlockModelSpec::new(Setting::MeanShift, n, 0.001, 0.2, 99);
    let lm = generate(&spec).unwrap();
    let p1 = spec.p[0];
    let freq = lm.row_classes.iter().filter(|&&c| c == 1).count() as f64 / n as f64;
    let tol = 4.0 * (p1 * (1.0 - p1) / n as f64).sqrt();
    assert!((freq - p1).abs() < tol, "row frequency {freq}");

    let cols = generate(&BlockModelSpec::new(Setting::MeanShift, 10, 1000.0, 0.2, 7)).unwrap();
    let q1 = spec.q[0];
    let freq = cols.col_classes.iter().filter(|&&c| c == 1).count() as f64 / 10_000.0;
    assert!((freq - q1).abs() < 4.0 * (q1 * (1.0 - q1) / 10_000.0).sqrt(), "column frequency {freq}");
}
