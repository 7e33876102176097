//! Trains all three methods (source only, single plan, collaborative) on the
//! default rotated-Gaussians shift and prints per-epoch target accuracy for
//! the collaborative run.
//!
//! `cargo run --release --example adapt_synthetic -- [seed]`

use geocot::collab::{train_adaptation, train_adaptation_with, Method, TrainConfig};
use geocot::data::{gen_shift, ShiftScenario};

fn main() -> geocot::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(17);
    let scenario = ShiftScenario {
        seed,
        ..ShiftScenario::default()
    };
    let bundle = gen_shift(&scenario)?;
    let view = bundle.training_view();
    let eval = bundle.target_eval();

    let mut cfg = TrainConfig::default();
    cfg.collab.seed = seed;
    for method in [Method::SourceOnly, Method::SingleMap] {
        let out = train_adaptation(&view, eval.as_ref(), &TrainConfig { method, ..cfg.clone() })?;
        let acc = out.history.last().and_then(|m| m.target_acc).unwrap_or(f64::NAN);
        println!("{:<14} target accuracy {acc:.4}", method.name());
    }

    cfg.method = Method::Collaborative;
    train_adaptation_with(&view, eval.as_ref(), &cfg, |m| {
        println!(
            "epoch {:>3} total {:>9.5} ot {:>8.5} kl {:>8.5} target acc {:.4}",
            m.epoch,
            m.total,
            m.ot,
            m.kl,
            m.target_acc.unwrap_or(f64::NAN)
        );
    })?;
    Ok(())
}
