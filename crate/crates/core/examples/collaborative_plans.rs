//! Solves the coupled two-plan problem on fixed costs and shows the plans
//! moving together as the coupling weight grows.

use geocot::collab::{kl_plans, solve_collaborative, CollabConfig};
use geocot::ot::{CostMatrix, DiscreteMeasure};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> geocot::Result<()> {
    let n = 12;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let c1 = CostMatrix::new(Array2::from_shape_fn((n, n), |_| rng.gen::<f64>()))?;
    let c2 = CostMatrix::new(Array2::from_shape_fn((n, n), |_| rng.gen::<f64>()))?;
    let mu = DiscreteMeasure::uniform(n);

    println!("{:>8} {:>14} {:>10} {:>12}", "lambda", "disagreement", "sweeps", "kl");
    for lambda3 in [0.0, 0.1, 1.0, 10.0] {
        let cfg = CollabConfig {
            lambda3,
            ..CollabConfig::default()
        };
        let plans = solve_collaborative(&c1, &c2, &mu, &mu, &cfg)?;
        let kl = kl_plans(&plans.plan1, &plans.plan2)?;
        println!(
            "{lambda3:>8} {:>14.6e} {:>10} {:>12.6}",
            plans.disagreement(),
            plans.outer_iterations,
            kl
        );
    }
    Ok(())
}
