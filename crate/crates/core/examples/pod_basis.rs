//! Snapshots, the Gram spectrum and the projection-error curve.

use calibrom::reduction::{projection_error_spectrum, ReducedBasis, SnapshotMatrix};
use calibrom::rom::{generate_split, Split};
use calibrom::RomConfig;

fn main() -> calibrom::Result<()> {
    let preset = std::env::args().nth(1).unwrap_or_else(|| "desk".into());
    let cfg = RomConfig::preset(&preset)?;
    let fom = cfg.full_order_model()?;
    let train = generate_split(&fom, &cfg, Split::Train)?;
    let validation = generate_split(&fom, &cfg, Split::Validation)?;

    let snapshots = SnapshotMatrix::from_store(&train)?;
    let basis = ReducedBasis::build(&snapshots, cfg.rom.modes, cfg.rom.tol_rank)?;
    println!(
        "{} snapshots of length {}; kept {} modes, orthonormality defect {:.1e}",
        snapshots.ns(),
        basis.n(),
        basis.len(),
        basis.orthonormality_defect()
    );
    if let Some(t) = basis.truncation {
        println!(
            "asked for {} modes, numerical rank is {}",
            t.requested, t.retained
        );
    }

    let lead = basis.energy_spectrum[0];
    let train_err = projection_error_spectrum(&basis, &snapshots.columns, basis.len())?;
    let val_err = projection_error_spectrum(
        &basis,
        &SnapshotMatrix::from_store(&validation)?.columns,
        basis.len(),
    )?;
    println!(
        "{:>3} {:>10} {:>12} {:>12} {:>12}",
        "L", "λ/λ1", "tail", "train", "validation"
    );
    for l in 0..basis.len() {
        println!(
            "{:>3} {:>10.2e} {:>12.3e} {:>12.3e} {:>12.3e}",
            l + 1,
            basis.energy_spectrum[l] / lead,
            basis.tail_energy(l + 1),
            train_err[l],
            val_err[l]
        );
    }
    Ok(())
}
