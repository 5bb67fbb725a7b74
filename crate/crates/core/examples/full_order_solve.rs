//! One full-order solve at the centre of the parameter box.

use std::time::Instant;

use calibrom::fom::biot_fourier_report;
use calibrom::geometry::region_masks;
use calibrom::{ProcessParams, RomConfig};

fn main() -> calibrom::Result<()> {
    let cfg = RomConfig::preset("desk")?;
    let fom = cfg.full_order_model()?;
    let [t_ambient, htc] = cfg.sampling.mid_box();
    let p = ProcessParams {
        t_ambient,
        htc,
        t_inlet: cfg.process.t_inlet,
    };
    println!("{:?}", biot_fourier_report(&cfg.material, &p, &fom.geometry));

    let start = Instant::now();
    let sol = fom.solve(&p)?;
    println!(
        "{} cells x {} stations solved in {:.1} ms",
        fom.grid.n_interior(),
        fom.disc.stored_stations(),
        start.elapsed().as_secs_f64() * 1e3
    );

    let n = fom.grid.n_interior();
    println!(
        "{:>8} {:>10} {:>10} {:>10}",
        "z (m)", "mean (K)", "min (K)", "max (K)"
    );
    for (s, z) in fom.station_positions().iter().enumerate() {
        let st = sol.station(n, s);
        let mean = st.iter().sum::<f64>() / n as f64;
        let min = st.iter().copied().fold(f64::INFINITY, f64::min);
        let max = st.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        println!("{z:>8.3} {mean:>10.2} {min:>10.2} {max:>10.2}");
    }

    let regions = region_masks(&fom.grid, &fom.geometry)?;
    let outlet = sol.station(n, fom.disc.stored_stations() - 1);
    let mean_of = |cells: &[usize]| cells.iter().map(|&c| outlet[c]).sum::<f64>() / cells.len() as f64;
    println!(
        "outlet cores: large {:.2} K, small {:.2} K; surface {:.2} K",
        mean_of(&regions.large_cylinder_core),
        mean_of(&regions.small_cylinder_core),
        mean_of(&regions.surface_ring)
    );
    println!("max principle violation {:.1e} K", sol.max_principle_violation());
    Ok(())
}
