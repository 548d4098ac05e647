//! A reduced simulation study: both estimators with both penalties on both
//! designs, tuned on a validation set. Pass a replication count to scale up.

use sarrs::simbench::{run_benchmark, BenchOptions, MethodSpec, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reps = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(5);
    let settings: Vec<Scenario> = [Scenario::high_dim(1.0), Scenario::low_dim(0.4)]
        .into_iter()
        .map(|mut sc| {
            sc.n_vld = 1000;
            sc
        })
        .collect();
    let out = run_benchmark(&settings, &MethodSpec::comparison_set(), reps, &BenchOptions::default())?;

    let metrics = ["estimation_error", "prediction_error", "support_size", "r_hat", "gpls_invocations_selected"];
    for sc in &settings {
        println!("\n{} ({reps} replications)", sc.label());
        print!("{:<16}", "method");
        for m in metrics {
            print!("{:>20}", m.trim_end_matches("_selected"));
        }
        println!();
        for spec in MethodSpec::comparison_set() {
            print!("{:<16}", format!("{} {:?}", spec.method.label(), spec.penalty));
            for m in metrics {
                match out.row(&sc.label(), spec, m) {
                    Some(row) => print!("{:>20}", format!("{:.4} ± {:.4}", row.mean, row.sd)),
                    None => print!("{:>20}", "-"),
                }
            }
            println!();
        }
    }
    Ok(())
}
