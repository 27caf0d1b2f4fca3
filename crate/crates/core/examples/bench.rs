//! A miniature simulation benchmark: one cell per setting, three replicates.

use akm_bicluster::bench::{run_bench, write_table_csv, BenchPlan};

pub fn main() {
    let plan = BenchPlan {
        a_values: vec![1.0],
        b_values: vec![0.5],
        n: 80,
        replicates: 3,
        restarts: 5,
        seed: 2024,
        ..BenchPlan::desk()
    };
    let report = run_bench(&plan).expect("valid plan");
    write_table_csv(std::io::stdout().lock(), &report).expect("stdout");
}
