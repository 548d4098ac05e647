//! Sparse Riesz constants of small designs by exhaustive enumeration.

use sarrs::matrix::sparse_riesz_constants;
use sarrs::simbench::{generate_scenario, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for rho in [0.0, 0.5, 0.9] {
        let sc = Scenario { n: 40, m: 1, p: 10, s: 1, r: 1, rho, sigma: 1.0, b: 1.0, n_vld: 0, seed: 1 };
        let x = generate_scenario(&sc)?.x;
        println!("rho {rho}");
        for k in [1, 2, 4, 6] {
            let (lo, hi) = sparse_riesz_constants(&x, k)?;
            println!("  k {k}: [{lo:8.3}, {hi:8.3}]  ratio {:.2}", hi / lo);
        }
    }
    Ok(())
}
