//! Compares the two initializers: the spectrum of the projected responses
//! and the spectrum of a row-sparse pilot fit.

use sarrs::init::{default_eta_low_rank, default_lambda0};
use sarrs::matrix::thin_svd;
use sarrs::simbench::{generate_scenario, Scenario};
use sarrs::{estimate_sigma, init_low_rank, init_sparse, subspace_overlap, EtaRule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for sc in [Scenario::high_dim(1.0), Scenario::low_dim(0.4)] {
        let data = generate_scenario(&sc.with_seed(11))?;
        let v = thin_svd(&data.a, sc.r)?.v;
        let sigma = estimate_sigma(&data.y)?;
        println!("{}  (sigma estimate {sigma:.3})", sc.label());

        let eta = default_eta_low_rank(sc.n, sc.m, sc.p);
        let low = init_low_rank(&data.x, &data.y, sc.sigma, eta)?;
        let head: Vec<String> = low.spectrum.iter().take(6).map(|s| format!("{s:.2}")).collect();
        println!("  low-rank: threshold {:.2}, spectrum [{}..]", low.threshold_used, head.join(", "));
        println!("            r_hat {}, overlap with truth {:.3}", low.r_hat, subspace_overlap(&v, &low.v0)?);

        let lambda0 = default_lambda0(&data.x, sc.m, sc.sigma)?;
        match init_sparse(&data.x, &data.y, sc.sigma, lambda0, EtaRule::FromSupport) {
            Ok(res) => println!(
                "  sparse:   lambda0 {lambda0:.2}, r_hat {}, overlap {:.3}",
                res.r_hat,
                subspace_overlap(&v, &res.v0)?
            ),
            Err(e) => println!("  sparse:   lambda0 {lambda0:.2}: {e}"),
        }
    }
    Ok(())
}
