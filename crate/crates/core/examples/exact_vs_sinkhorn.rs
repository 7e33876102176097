//! Solves one small transport problem exactly and with Sinkhorn at several
//! regularization strengths, showing the entropic objective approach the
//! exact one from above.

use geocot::ot::{brute_force_oracle, solve_exact, solve_sinkhorn, transport_cost, CostMatrix, DiscreteMeasure};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> geocot::Result<()> {
    let n = 6;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cost = CostMatrix::new(Array2::from_shape_fn((n, n), |_| rng.gen::<f64>()))?;
    let mu = DiscreteMeasure::uniform(n);
    let nu = DiscreteMeasure::uniform(n);

    let exact = solve_exact(&cost, &mu, &nu)?;
    let exact_obj = transport_cost(&exact, &cost)?;
    println!("exact objective       {exact_obj:.10}");
    println!("permutation oracle    {:.10}", brute_force_oracle(&cost)?);

    for reg in [1.0, 0.1, 0.01, 0.001] {
        let sol = solve_sinkhorn(&cost, &mu, &nu, reg, 1_000_000, 1e-9)?;
        let obj = transport_cost(&sol.plan, &cost)?;
        println!(
            "sinkhorn reg={reg:<6} objective {obj:.10}  gap {:.2e}  iters {:>6}  log-domain {}",
            obj - exact_obj,
            sol.iterations,
            sol.log_domain
        );
    }
    Ok(())
}
