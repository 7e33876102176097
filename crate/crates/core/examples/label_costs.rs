//! Compares the label-aware costs on two labeled point clouds: plain squared
//! Euclidean, the hard class-blocked cost, the penalized cost and the
//! label-mollified geodesic cost, together with the transport each one
//! induces.

use geocot::cost::{
    geodesic_cost, hard_class_cost, penalized_cost, squared_euclidean_cost, GeodesicCostParams,
    LabeledFeatureSet,
};
use geocot::ot::{solve_exact, CostMatrix, DiscreteMeasure};
use ndarray::array;

fn cross_class_mass(cost: &CostMatrix, ys: &[usize], yt: &[usize]) -> geocot::Result<f64> {
    let (n, m) = cost.shape();
    let plan = solve_exact(cost, &DiscreteMeasure::uniform(n), &DiscreteMeasure::uniform(m))?;
    let mut off = 0.0;
    for (i, yi) in ys.iter().enumerate() {
        for (j, yj) in yt.iter().enumerate() {
            if yi != yj {
                off += plan.entries()[[i, j]];
            }
        }
    }
    Ok(off)
}

fn main() -> geocot::Result<()> {
    let ys = vec![0, 0, 1, 1];
    let yt = vec![0, 1, 0, 1];
    let source = LabeledFeatureSet::new(array![[0.0, 0.0], [0.2, 0.1], [2.0, 0.0], [2.1, 0.2]])?
        .with_hard_labels(ys.clone(), 2)?;
    // Target shifted so that plain geometry pairs points across classes.
    let target = LabeledFeatureSet::new(array![[1.1, 0.0], [0.9, 0.1], [3.1, 0.1], [-0.9, 0.0]])?
        .with_hard_labels(yt.clone(), 2)?;
    let params = GeodesicCostParams::default();

    let costs = [
        ("squared euclidean", squared_euclidean_cost(&source, &target)?),
        ("hard class", hard_class_cost(&source, &target, &params)?),
        ("penalized", penalized_cost(&source, &target, &params)?),
        ("geodesic", geodesic_cost(&source, &target, &params)?),
    ];
    for (name, cost) in &costs {
        println!("{name:<18} cross-class mass {:.3}", cross_class_mass(cost, &ys, &yt)?);
    }
    println!("\ngeodesic cost (alpha={}, beta={}):\n{:.4}", params.alpha, params.beta, costs[3].1.entries());
    Ok(())
}
