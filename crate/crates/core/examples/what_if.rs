//! Sweeps the heat-transfer coefficient at fixed ambient temperature and
//! reports the outlet quantities an operator would look at.

use calibrom::rom::{build_rom, generate_split, Split};
use calibrom::{RomBundle, RomConfig};

fn main() -> calibrom::Result<()> {
    let bundle = match std::env::args().nth(1) {
        Some(path) => RomBundle::load(path.as_ref())?,
        None => {
            let cfg = RomConfig::preset("smoke")?;
            let fom = cfg.full_order_model()?;
            let train = generate_split(&fom, &cfg, Split::Train)?;
            let validation = generate_split(&fom, &cfg, Split::Validation)?;
            build_rom(&cfg, &train, &validation)?.bundle
        }
    };
    let t_ambient = 293.0;
    println!(
        "{:>6} {:>11} {:>11} {:>11} {:>8}",
        "htc", "large core", "small core", "surface", "spread"
    );
    for htc in (0..=6).map(|k| 200.0 + 20.0 * k as f64) {
        let p = bundle.predict(t_ambient, htc)?;
        let s = p.summary;
        println!(
            "{htc:>6.0} {:>11.2} {:>11.2} {:>11.2} {:>8.3}{}",
            s.outlet_large_core_mean,
            s.outlet_small_core_mean,
            s.outlet_surface_mean,
            s.spread_ratio,
            if p.extrapolation {
                "  (outside training box)"
            } else {
                ""
            }
        );
    }
    Ok(())
}
