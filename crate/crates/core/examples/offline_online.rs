//! The whole pipeline: snapshots, basis, network, bundle file, then fast
//! predictions checked against fresh full-order solves.

use std::time::Instant;

use calibrom::rom::{build_rom, evaluate, generate_split, sample_params, Split};
use calibrom::{RomBundle, RomConfig};

fn main() -> calibrom::Result<()> {
    let preset = std::env::args().nth(1).unwrap_or_else(|| "smoke".into());
    let cfg = RomConfig::preset(&preset)?;
    let fom = cfg.full_order_model()?;

    let start = Instant::now();
    let train = generate_split(&fom, &cfg, Split::Train)?;
    let validation = generate_split(&fom, &cfg, Split::Validation)?;
    let built = build_rom(&cfg, &train, &validation)?;
    println!("offline stage {:.1} s", start.elapsed().as_secs_f64());
    for w in &built.bundle.meta.warnings {
        println!("warning: {w}");
    }

    let path = std::env::temp_dir().join(format!("calibrom-{preset}.romb"));
    built.bundle.save(&path)?;
    let bundle = RomBundle::load(&path)?;
    println!("bundle {} ({} modes)", path.display(), bundle.modes());

    let report = evaluate(&bundle, &sample_params(&cfg.sampling, Split::Test), &fom)?;
    println!(
        "test: mean relative error {:.2e}, max {:.2e}, projection floor {:.2e}",
        report.mean_rel_error, report.max_rel_error, report.projection_floor
    );

    let p = bundle.predict(293.0, 269.0)?;
    let t = Instant::now();
    let fom_field = fom.solve(&calibrom::ProcessParams {
        t_ambient: 293.0,
        htc: 269.0,
        t_inlet: cfg.process.t_inlet,
    })?;
    println!(
        "predict {:.3} ms vs full-order {:.1} ms; outlet max {:.2} K (ROM) / {:.2} K",
        p.elapsed.as_secs_f64() * 1e3,
        t.elapsed().as_secs_f64() * 1e3,
        p.summary.outlet_max,
        bundle.summarize(&fom_field.values, 293.0).outlet_max
    );
    Ok(())
}
