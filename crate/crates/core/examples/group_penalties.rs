//! Row thresholding rules and full fits under each penalty family.

use sarrs::penalty::group_threshold;
use sarrs::simbench::{generate_scenario, Scenario};
use sarrs::{sarrs_fit, PenaltyKind, PenaltySpec, SarrsConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let kinds = [PenaltyKind::GroupLasso, PenaltyKind::GroupMcp, PenaltyKind::GroupScad, PenaltyKind::CappedL1];

    println!("threshold of a row with norm t (lambda 1, unit curvature)");
    print!("{:>6}", "t");
    for k in kinds {
        print!("{:>10}", format!("{k:?}"));
    }
    println!();
    for t in [0.5, 1.0, 1.5, 2.0, 3.0, 5.0] {
        print!("{t:>6.1}");
        for k in kinds {
            let out = group_threshold(&[t], 1.0, &PenaltySpec::with_default_shape(k, 1.0)?)?;
            print!("{:>10.3}", out[0]);
        }
        println!();
    }

    let sc = Scenario::low_dim(0.4).with_seed(2);
    let data = generate_scenario(&sc)?;
    println!("\nfits on {} at lambda 8", sc.label());
    for k in kinds {
        let cfg = SarrsConfig::default().with_sigma(sc.sigma).with_penalty(PenaltySpec::with_default_shape(k, 8.0)?);
        let fit = sarrs_fit(&data.x, &data.y, &cfg)?;
        let err = fit.a_hat.sub(&data.a)?.frobenius_norm_sq() / (sc.p * sc.m) as f64;
        println!("{:>10}: support {:>2}, rank {}, est.error {err:.5}", format!("{k:?}"), fit.support.len(), fit.rank_used);
    }
    Ok(())
}
