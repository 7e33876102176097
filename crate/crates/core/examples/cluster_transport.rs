//! Cluster-to-cluster transport: per-class exact problems assembled into a
//! block-diagonal plan, checked against transport under the hard class cost.

use geocot::ccot::ccot_distance;
use geocot::cost::{hard_class_cost, GeodesicCostParams, LabeledFeatureSet};
use geocot::ot::{solve_exact, transport_cost, DiscreteMeasure};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> geocot::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let labels: Vec<usize> = vec![0, 0, 0, 1, 1, 2, 2, 2, 2];
    let n = labels.len();
    let source = LabeledFeatureSet::new(Array2::from_shape_fn((n, 3), |_| rng.gen::<f64>()))?
        .with_hard_labels(labels.clone(), 3)?;
    let mut shuffled = labels.clone();
    shuffled.reverse();
    let target = LabeledFeatureSet::new(Array2::from_shape_fn((n, 3), |_| rng.gen::<f64>() + 0.5))?
        .with_hard_labels(shuffled, 3)?;

    let result = ccot_distance(&source, &target, 3)?;
    for (k, c) in result.cluster_costs.iter().enumerate() {
        let (ms, _) = result.partition.cluster_masses[k];
        println!("class {k}: mass {ms:.3} per-class cost {:.6}", c.unwrap_or(f64::NAN));
    }
    println!("cluster-to-cluster value {:.10}", result.value);

    let hard = hard_class_cost(&source, &target, &GeodesicCostParams::default())?;
    let plan = solve_exact(&hard, &DiscreteMeasure::uniform(n), &DiscreteMeasure::uniform(n))?;
    println!("hard-cost transport      {:.10}", transport_cost(&plan, &hard)?);

    let full = result.full_plan()?;
    println!("block plan total mass    {:.12}", full.total_mass());
    Ok(())
}
