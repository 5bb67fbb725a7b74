//! Command-line driver for the offline pipeline and the online stage.
//!
//! Every subcommand loads and validates its configuration or bundle before
//! writing anything. `--config` accepts a JSON file or `preset:<name>`.

use std::ffi::OsString;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::config::RomConfig;
use crate::fom::{biot_fourier_report, ProcessParams, SnapshotStore};
use crate::geometry::region_masks;
use crate::reduction::{projection_error_spectrum, ReducedBasis, SnapshotMatrix};
use crate::rom::{build_rom, evaluate, generate_split, sample_params, RomBundle, Split};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "calibrom",
    version,
    about = "Reduced-order temperature model for cooling extruded profiles"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Validation,
    Test,
    All,
}

impl SplitArg {
    fn splits(self) -> Vec<Split> {
        match self {
            SplitArg::Train => vec![Split::Train],
            SplitArg::Validation => vec![Split::Validation],
            SplitArg::Test => vec![Split::Test],
            SplitArg::All => Split::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the full-order model over a sampling split and write `<split>.snap` + sidecar.
    GenerateSnapshots {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        split: SplitArg,
        #[arg(long, default_value = "snapshots")]
        out_dir: PathBuf,
    },
    /// Build the reduced basis from a training store and write its energy spectrum CSV.
    BuildRb {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[arg(long, default_value = "spectrum.csv")]
        out: PathBuf,
        /// Also write the mean projection error for L = 1..=modes here.
        #[arg(long)]
        projection_csv: Option<PathBuf>,
    },
    /// Train the network on stored snapshots and write the training history CSV.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        validation: PathBuf,
        #[arg(long, default_value = "train_report.csv")]
        out: PathBuf,
        /// Also save the resulting bundle.
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
    /// Run the whole offline stage and write a bundle.
    Build {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Reuse `train.snap`/`validation.snap` from here when present, and
        /// store newly generated ones.
        #[arg(long)]
        snapshots_dir: Option<PathBuf>,
    },
    /// Compare a bundle with the full-order model on the test split.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// JSON report path; a CSV is written next to it. Defaults to `<model>.errors.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict one field and print its summary as JSON.
    Predict {
        #[arg(long, env = "CALIBROM_MODEL")]
        model: PathBuf,
        #[arg(long = "t-amb")]
        t_amb: f64,
        #[arg(long)]
        htc: f64,
        /// Stations to export, e.g. `0,20`.
        #[arg(long, value_delimiter = ',')]
        slices: Vec<usize>,
        /// Directory for `slice_<station>.csv` files (x,y,temperature).
        #[arg(long, default_value = ".")]
        slice_dir: PathBuf,
    },
    /// Serve the bundle over HTTP.
    Serve {
        #[arg(long, env = "CALIBROM_MODEL")]
        model: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Directory of static UI assets served under `/`.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
    /// Print grid and regime numbers for a configuration as JSON.
    Report {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Parses `argv` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn store_path(dir: &Path, split: Split) -> PathBuf {
    dir.join(format!("{}.snap", split.name()))
}

fn load_or_generate(config: &RomConfig, dir: Option<&Path>, split: Split) -> Result<SnapshotStore> {
    let fom = config.full_order_model()?;
    if let Some(dir) = dir {
        let path = store_path(dir, split);
        if path.exists() {
            let store = SnapshotStore::read(&path)?;
            store.check_provenance(&fom)?;
            eprintln!("calibrom: reusing {}", path.display());
            return Ok(store);
        }
    }
    eprintln!(
        "calibrom: solving {} full-order {} cases",
        config.sampling.count(split),
        split.name()
    );
    let store = generate_split(&fom, config, split)?;
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        store.write(&store_path(dir, split))?;
    }
    Ok(store)
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::GenerateSnapshots {
            config,
            split,
            out_dir,
        } => {
            let config = RomConfig::load(&config)?;
            let fom = config.full_order_model()?;
            fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            for s in split.splits() {
                let store = generate_split(&fom, &config, s)?;
                let path = store_path(&out_dir, s);
                store.write(&path)?;
                println!(
                    "{}: {} snapshots of length {}",
                    path.display(),
                    store.meta.ns,
                    store.meta.n
                );
            }
            Ok(())
        }
        Command::BuildRb {
            config,
            train,
            out,
            projection_csv,
        } => {
            let config = RomConfig::load(&config)?;
            let store = SnapshotStore::read(&train)?;
            store.check_provenance(&config.full_order_model()?)?;
            let snapshots = SnapshotMatrix::from_store(&store)?;
            let basis = ReducedBasis::build(&snapshots, config.rom.modes, config.rom.tol_rank)?;
            write_file(&out, basis.energy_csv())?;
            if let Some(path) = projection_csv {
                let errs = projection_error_spectrum(&basis, &snapshots.columns, basis.len())?;
                let mut csv = String::from("l,mean_projection_error,tail_energy\n");
                for (l, e) in errs.iter().enumerate() {
                    csv.push_str(&format!("{},{:e},{:e}\n", l + 1, e, basis.tail_energy(l + 1)));
                }
                write_file(&path, csv)?;
            }
            println!(
                "{} modes retained, orthonormality defect {:.2e}",
                basis.len(),
                basis.orthonormality_defect()
            );
            if let Some(t) = basis.truncation {
                eprintln!(
                    "warning: requested {} modes, numerical rank {}",
                    t.requested, t.retained
                );
            }
            Ok(())
        }
        Command::Train {
            config,
            train,
            validation,
            out,
            bundle,
        } => {
            let config = RomConfig::load(&config)?;
            let fom = config.full_order_model()?;
            let train = SnapshotStore::read(&train)?;
            let validation = SnapshotStore::read(&validation)?;
            train.check_provenance(&fom)?;
            validation.check_provenance(&fom)?;
            let built = build_rom(&config, &train, &validation)?;
            match &built.train_report {
                Some(r) => {
                    write_file(&out, r.to_csv())?;
                    println!(
                        "best validation MSE {:.3e} at epoch {} of {}",
                        r.best_val_mse,
                        r.best_epoch,
                        r.epochs_run()
                    );
                }
                None => eprintln!("warning: rank-0 snapshots, nothing to train"),
            }
            for w in &built.bundle.meta.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(path) = bundle {
                built.bundle.save(&path)?;
            }
            Ok(())
        }
        Command::Build {
            config,
            out,
            snapshots_dir,
        } => {
            let config = RomConfig::load(&config)?;
            let dir = snapshots_dir.as_deref();
            let train = load_or_generate(&config, dir, Split::Train)?;
            let validation = load_or_generate(&config, dir, Split::Validation)?;
            let built = build_rom(&config, &train, &validation)?;
            for w in &built.bundle.meta.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            built.bundle.save(&out)?;
            println!(
                "{}: {} modes, field length {}",
                out.display(),
                built.bundle.modes(),
                built.bundle.field_len()
            );
            Ok(())
        }
        Command::Evaluate { model, config, out } => {
            let config = RomConfig::load(&config)?;
            let bundle = RomBundle::load(&model)?;
            let fom = config.full_order_model()?;
            if fom.geometry.fingerprint() != bundle.meta.geometry_hash
                || fom.disc.fingerprint() != bundle.meta.discretization_hash
            {
                return Err(Error::Config(
                    "config and bundle describe different models".into(),
                ));
            }
            let params = sample_params(&config.sampling, Split::Test);
            let report = evaluate(&bundle, &params, &fom)?;
            let json_path = out.unwrap_or_else(|| model.with_extension("errors.json"));
            write_file(&json_path, report.to_json())?;
            write_file(&json_path.with_extension("csv"), report.to_csv())?;
            println!(
                "mean relative error {:.3e} (max {:.3e}, projection floor {:.3e}) over {} samples, {} failed",
                report.mean_rel_error,
                report.max_rel_error,
                report.projection_floor,
                report.samples.len(),
                report.n_failed
            );
            Ok(())
        }
        Command::Predict {
            model,
            t_amb,
            htc,
            slices,
            slice_dir,
        } => {
            let bundle = RomBundle::load(&model)?;
            let p = bundle.predict(t_amb, htc)?;
            if p.extrapolation {
                let b = &bundle.meta.plan;
                eprintln!(
                    "warning: ({t_amb}, {htc}) lies outside the training box t_ambient {:?}, htc {:?}",
                    b.t_ambient, b.htc
                );
            }
            for &s in &slices {
                let slice = bundle.slice(&p.field, s)?;
                let mut csv = String::from("x,y,temperature\n");
                for (c, v) in slice.values.iter().enumerate() {
                    let (x, y) = bundle.grid().center(c);
                    csv.push_str(&format!("{x:e},{y:e},{v}\n"));
                }
                write_file(&slice_dir.join(format!("slice_{s}.csv")), csv)?;
            }
            let out = json!({
                "t_ambient": t_amb,
                "htc": htc,
                "extrapolation": p.extrapolation,
                "elapsed_ms": p.elapsed.as_secs_f64() * 1e3,
                "summary": p.summary,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(())
        }
        Command::Serve { model, bind, ui_dir } => {
            let bundle = RomBundle::load(&model)?;
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| Error::io("tokio runtime", e))?;
            rt.block_on(super::http::serve(bundle, bind, ui_dir))
        }
        Command::Report { config } => {
            let config = RomConfig::load(&config)?;
            let fom = config.full_order_model()?;
            let [t, h] = config.sampling.mid_box();
            let mid = ProcessParams {
                t_ambient: t,
                htc: h,
                t_inlet: config.process.t_inlet,
            };
            let regions = region_masks(&fom.grid, &fom.geometry)?;
            let out = json!({
                "grid": fom.grid.summary(),
                "area": fom.grid.area(),
                "perimeter": fom.grid.perimeter(),
                "regions": {
                    "large_cylinder_core": regions.large_cylinder_core.len(),
                    "small_cylinder_core": regions.small_cylinder_core.len(),
                    "surface_ring": regions.surface_ring.len(),
                },
                "stations": fom.disc.stored_stations(),
                "field_length": fom.field_len(),
                "regime_at_mid_box": biot_fourier_report(&config.material, &mid, &fom.geometry),
                "warnings": mid.warnings(),
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(())
        }
    }
}
