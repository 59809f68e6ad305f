//! Trains the 4/64/64/15 command classifier on the synthetic dataset and
//! reports held-out accuracy.
//!
//!     cargo run --release --example train_classifier -- [seed]

use std::time::Instant;

use coact::fusion::dataset::{split, synthetic_dataset};
use coact::fusion::vocab::COMMANDS;
use coact::fusion::{evaluate, train, LabeledTokens, TrainingConfig};

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let data = synthetic_dataset(3000, seed);
    let (train_set, test_set) = split(&data, 0.2, seed);
    let to_samples = |v: &[LabeledTokens]| v.iter().map(LabeledTokens::sample).collect::<Vec<_>>();

    let config = TrainingConfig { rng_seed: seed, ..Default::default() };
    let start = Instant::now();
    let (mlp, history) = train(&to_samples(&train_set), &config).expect("training failed");
    let elapsed = start.elapsed();
    let eval = evaluate(&mlp, &to_samples(&test_set)).expect("evaluation failed");

    println!(
        "{} epochs ({}), best epoch {}, best validation loss {:.4}, {:.1} s",
        history.epochs_run(),
        if history.stopped_early { "early stop" } else { "epoch limit" },
        history.best_epoch,
        history.best_val_loss,
        elapsed.as_secs_f64()
    );
    println!("held-out accuracy {:.4} on {} samples", eval.accuracy, test_set.len());
    for (k, row) in eval.confusion.iter().enumerate() {
        let total: usize = row.iter().sum();
        if total > 0 && row[k] < total {
            println!("  {:<22} {}/{} correct", COMMANDS[k].name(), row[k], total);
        }
    }
}
