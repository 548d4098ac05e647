//! Tunes `λ` and the rank jointly by five-fold cross-validation.

use sarrs::simbench::{cross_validate, generate_scenario, CvPlan, LambdaGrid, Method, Scenario, Validation};
use sarrs::{PenaltyKind, PenaltySetting, SarrsConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sc = Scenario::low_dim(0.4).with_seed(8);
    let data = generate_scenario(&sc)?;
    let plan = CvPlan {
        lambda_grid: LambdaGrid::Ceiling { count: 20, sigma: sc.sigma },
        validation: Validation::KFold(5),
        rank_candidates: Some(vec![3, 4, 5, 6, 7]),
    };
    let mut cfg = SarrsConfig::default().with_sigma(sc.sigma);
    cfg.penalty = PenaltySetting::Auto(PenaltyKind::GroupMcp);
    let out = cross_validate(&data.x, &data.y, &plan, Method::Sarrs, &cfg)?;

    for r in [3, 4, 5, 6, 7] {
        let best = out
            .table
            .iter()
            .filter(|e| e.rank == r)
            .filter_map(|e| e.error.map(|v| (v, e.lambda)))
            .min_by(|a, b| a.0.total_cmp(&b.0));
        if let Some((err, lam)) = best {
            println!("rank {r}: best cv error {err:.4} at lambda {lam:.3}");
        }
    }
    println!("selected rank {} (true {}), lambda {:.3}", out.best_rank, sc.r, out.best_lambda);
    let err = out.best_fit.a_hat.sub(&data.a)?.frobenius_norm_sq() / (sc.p * sc.m) as f64;
    println!("refit: support {}, est.error {err:.5}", out.best_fit.support.len());
    Ok(())
}
