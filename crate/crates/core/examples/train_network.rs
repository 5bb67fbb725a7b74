//! Fits the default-shaped network to a smooth synthetic map and checks
//! its gradient against finite differences.

use calibrom::neural::{grad_check, train, Dataset, GradCheckConfig, Mlp, MlpLayout, TrainConfig};
use calibrom::rng::Rng;

fn target(x: &[f64], outputs: usize) -> Vec<f64> {
    (0..outputs)
        .map(|k| ((k + 1) as f64 * 0.7 * x[0]).sin() * (-(k as f64) * 0.3).exp() + 0.2 * x[1] * x[0])
        .collect()
}

fn dataset(n: usize, outputs: usize, seed: u64) -> calibrom::Result<Dataset> {
    let mut rng = Rng::new(seed);
    let inputs: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)])
        .collect();
    let targets = inputs.iter().map(|x| target(x, outputs)).collect();
    Dataset::new(inputs, targets)
}

fn main() -> calibrom::Result<()> {
    let layout = MlpLayout {
        output_dim: 5,
        ..MlpLayout::default()
    };
    let net = Mlp::init(layout, 7)?;
    let train_set = dataset(100, layout.output_dim, 1)?;
    let val_set = dataset(100, layout.output_dim, 2)?;

    let gc = grad_check(
        &net,
        &dataset(4, layout.output_dim, 3)?,
        &GradCheckConfig::default(),
    )?;
    println!(
        "{} parameters; backprop vs finite differences: {:.1e} relative, {:.1e} absolute",
        layout.param_count(),
        gc.max_relative,
        gc.max_absolute
    );

    let cfg = TrainConfig {
        max_epochs: 3000,
        learning_rate: 2e-3,
        patience: 500,
        ..TrainConfig::default()
    };
    let (best, report) = train(&net, &train_set, &val_set, &cfg)?;
    println!(
        "validation MSE {:.3e} -> {:.3e} (best epoch {} of {})",
        report.initial_val_mse,
        report.best_val_mse,
        report.best_epoch,
        report.epochs_run()
    );
    let x = [0.3, -0.5];
    println!(
        "at {x:?}: net {:.4?}, exact {:.4?}",
        best.forward(&x)?,
        target(&x, layout.output_dim)
    );
    Ok(())
}
