//! Acceptance suite: one PASS/FAIL line per criterion. Runs the full
//! desk-scale offline pipeline once and reuses it across criteria.
//!
//! The run itself succeeds whenever every criterion could be evaluated; set
//! `ACCEPTANCE_STRICT=1` to also exit non-zero when any criterion fails.

use std::time::{Duration, Instant};

use calibrom::fom::{generate_store, ProcessParams};
use calibrom::linalg::ColMatrix;
use calibrom::neural::{grad_check, Dataset, GradCheckConfig, Mlp, MlpLayout};
use calibrom::reduction::{
    compute_basis, eigendecompose_spsd, gram, projection_error_spectrum, ReducedBasis, SnapshotMatrix,
};
use calibrom::rng::Rng;
use calibrom::rom::{build_rom, evaluate, generate_split, process_params, sample_params, RomBundle, Split};
use calibrom::{MaterialParams, RomConfig};

struct Outcome {
    failures: usize,
}

impl Outcome {
    fn record(&mut self, name: &str, pass: bool, detail: String, took: Duration) {
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("{tag}  {name}: {detail} [{:.1} s]", took.as_secs_f64());
        if !pass {
            self.failures += 1;
        }
    }
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn main() {
    let mut out = Outcome { failures: 0 };
    let cfg = RomConfig::preset("desk").expect("desk preset");
    let fom = cfg.full_order_model().expect("desk model");
    let n_int = fom.grid.n_interior();
    let stations = fom.disc.stored_stations();
    println!(
        "desk grid: {} x {} cells, {} interior, {} stations, field length {}",
        fom.grid.nx,
        fom.grid.ny,
        n_int,
        stations,
        fom.field_len()
    );

    // Offline pipeline, timed as a whole.
    let offline = Instant::now();
    let train = generate_split(&fom, &cfg, Split::Train).expect("training snapshots");
    let validation = generate_split(&fom, &cfg, Split::Validation).expect("validation snapshots");
    let built = build_rom(&cfg, &train, &validation).expect("L=30 bundle");
    let offline_time = offline.elapsed();
    let bundle = built.bundle;
    println!(
        "offline: {} modes, training {:?}, warnings {:?}",
        bundle.modes(),
        bundle
            .meta
            .training
            .as_ref()
            .map(|t| (t.layout.hidden_layers, t.best_epoch, t.best_val_mse)),
        bundle.meta.warnings
    );

    // POD orthonormality.
    let t = Instant::now();
    let defect = bundle.basis.orthonormality_defect();
    out.record(
        "POD orthonormality",
        defect <= 1e-10,
        format!(
            "max |UᵀU − I| = {defect:.2e} over {} modes, {} requested (tolerance 1e-10)",
            bundle.modes(),
            cfg.rom.modes
        ),
        t.elapsed(),
    );

    // Method of snapshots against a direct SVD.
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for trial in 0..100u64 {
        let mut rng = Rng::new(1000 + trial);
        let data: Vec<f64> = (0..50 * 20).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let a = ColMatrix::from_col_major(50, 20, data.clone());
        let eig = eigendecompose_spsd(&gram(&a)).expect("eigendecomposition");
        let pod = compute_basis(&a, &eig, 20, 0.0).expect("basis");
        let svd = nalgebra::DMatrix::from_column_slice(50, 20, &data).svd(false, false);
        let mut oracle: Vec<f64> = svd.singular_values.iter().copied().collect();
        oracle.sort_by(|x, y| y.total_cmp(x));
        for (s, o) in pod.singular_values.iter().zip(&oracle) {
            worst = worst.max((s * 20f64.sqrt() - o).abs() / o);
        }
    }
    out.record(
        "method of snapshots vs SVD",
        worst <= 1e-8,
        format!("max relative singular-value difference {worst:.2e} over 100 random 50x20 matrices (tolerance 1e-8)"),
        t.elapsed(),
    );

    // Exact-rank reconstruction of the training snapshots.
    let t = Instant::now();
    let snapshots = SnapshotMatrix::from_store(&train).expect("snapshot matrix");
    let full = ReducedBasis::build(&snapshots, snapshots.ns(), cfg.rom.tol_rank).expect("full basis");
    let mut recon_worst: f64 = 0.0;
    let mut recon_centered: f64 = 0.0;
    for x in snapshots.columns.columns() {
        let c = full.project(x).expect("project");
        let r = full.reconstruct(&c.raw).expect("reconstruct");
        recon_worst = recon_worst.max(rel_l2(&r, x));
        let d: Vec<f64> = x.iter().zip(&full.mean_field).map(|(a, m)| a - m).collect();
        let e: Vec<f64> = r.iter().zip(x).map(|(a, b)| a - b).collect();
        recon_centered = recon_centered.max(calibrom::linalg::norm(&e) / calibrom::linalg::norm(&d));
    }
    let first_dropped = full
        .energy_spectrum
        .get(full.len())
        .map_or(0.0, |l| l / full.energy_spectrum[0]);
    out.record(
        "exact-rank reconstruction",
        recon_worst <= 1e-9,
        format!(
            "numerical rank {} of {} snapshots at tol_rank {:e}, max relative error {recon_worst:.2e} (tolerance 1e-9); \
             relative to the centred snapshot {recon_centered:.2e}; first dropped λ/λ1 = {first_dropped:.2e}",
            full.len(),
            snapshots.ns(),
            cfg.rom.tol_rank
        ),
        t.elapsed(),
    );

    // Projection-error spectrum against the eigenvalue tail.
    let t = Instant::now();
    let spectrum = projection_error_spectrum(&full, &snapshots.columns, full.len()).expect("spectrum");
    let monotone = spectrum.windows(2).all(|w| w[1] <= w[0]);
    let mut tail_worst: f64 = 0.0;
    let mut ratios = Vec::new();
    for (i, e) in spectrum.iter().enumerate() {
        let tail = full.tail_energy(i + 1).powi(2);
        let ratio = if tail > 0.0 { e * e / tail } else { f64::INFINITY };
        tail_worst = tail_worst.max((ratio - 1.0).abs());
        ratios.push(format!("{ratio:.3}"));
    }
    out.record(
        "projection-error spectrum",
        monotone && tail_worst <= 0.1,
        format!(
            "non-increasing: {monotone}; error² / tail fraction for L = 1..{}: [{}], max deviation {tail_worst:.2e} (tolerance 0.1)",
            spectrum.len(),
            ratios.join(", ")
        ),
        t.elapsed(),
    );

    // Trivial limits of the full-order model.
    let t = Instant::now();
    let insulated = fom
        .solve(&ProcessParams {
            t_ambient: 293.0,
            htc: 0.0,
            t_inlet: cfg.process.t_inlet,
        })
        .expect("htc = 0 solve");
    let dev_insulated = insulated
        .values
        .iter()
        .fold(0.0f64, |m, v| m.max((v - cfg.process.t_inlet).abs()));
    let ambient = fom
        .solve(&ProcessParams {
            t_ambient: 293.0,
            htc: 269.0,
            t_inlet: 293.0,
        })
        .expect("t_inlet = t_ambient solve");
    let dev_ambient = ambient
        .values
        .iter()
        .fold(0.0f64, |m, v| m.max((v - 293.0).abs()));
    out.record(
        "FOM trivial limits",
        dev_insulated <= 1e-8 && dev_ambient <= 1e-8,
        format!("htc = 0: max |T − T_in| = {dev_insulated:.2e} K; T_in = T_amb: max |T − T_amb| = {dev_ambient:.2e} K (tolerance 1e-8)"),
        t.elapsed(),
    );

    // Lumped-capacitance oracle at low Biot.
    let t = Instant::now();
    let htc = 1.5;
    let perimeter = fom.grid.perimeter();
    let area = fom.grid.area();
    let rho_cp = cfg.material.rho * cfg.material.cp;
    // Extrusion speed chosen so the outlet exponent is 2.
    let u = htc * perimeter * fom.geometry.l / (rho_cp * area * 2.0);
    let slow =
        calibrom::fom::FullOrderModel::new(fom.geometry, MaterialParams { u, ..cfg.material }, fom.disc)
            .expect("lumped model");
    let lumped_param = ProcessParams {
        t_ambient: 293.0,
        htc,
        t_inlet: cfg.process.t_inlet,
    };
    let biot = htc * fom.geometry.r1 / cfg.material.k;
    let lumped = slow.solve(&lumped_param).expect("lumped solve");
    let delta = cfg.process.t_inlet - 293.0;
    let mut lumped_worst: f64 = 0.0;
    for (s, z) in slow.station_positions().iter().enumerate() {
        let st = lumped.station(n_int, s);
        let mean = st.iter().sum::<f64>() / n_int as f64;
        let oracle = 293.0 + delta * (-htc * perimeter * z / (rho_cp * u * area)).exp();
        lumped_worst = lumped_worst.max((mean - oracle).abs() / delta);
    }
    let lumped_time = t.elapsed();
    out.record(
        "FOM lumped-capacitance oracle",
        biot <= 0.05 && lumped_worst <= 0.02 && lumped_time <= Duration::from_secs(60),
        format!("Biot {biot:.3}, max |mean − lumped| / (T_in − T_amb) = {lumped_worst:.2e} over {stations} stations (tolerance 0.02)"),
        lumped_time,
    );

    // Backprop against finite differences on the full layout.
    let t = Instant::now();
    let layout = MlpLayout::default();
    let net = Mlp::init(layout, cfg.network.seed).expect("network");
    let probe_set = {
        // Scaled training parameters; targets only need the right width.
        let mut rng = Rng::new(99);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for p in train.params().iter().take(4) {
            x.push(
                bundle
                    .basis
                    .param_scaler
                    .scale(&[p.t_ambient, p.htc])
                    .expect("scale"),
            );
            y.push(
                (0..layout.output_dim)
                    .map(|_| rng.uniform_in(-1.0, 1.0))
                    .collect(),
            );
        }
        Dataset::new(x, y).expect("dataset")
    };
    let gc = grad_check(&net, &probe_set, &GradCheckConfig::default()).expect("gradient check");
    out.record(
        "gradient correctness",
        gc.max_relative <= 1e-6,
        format!(
            "2→40x10→30, {} parameters: max relative discrepancy {:.2e} (unfloored {:.2e}, max abs {:.2e}, tolerance 1e-6)",
            layout.param_count(),
            gc.max_relative,
            gc.max_relative_unfloored,
            gc.max_absolute
        ),
        t.elapsed(),
    );

    // End-to-end quality on unseen parameters, and L = 30 against L = 5.
    let t = Instant::now();
    let test_points = sample_params(&cfg.sampling, Split::Test);
    let test_store = generate_store(&fom, "test", &process_params(&test_points, cfg.process.t_inlet))
        .expect("test snapshots");
    let report = evaluate(&bundle, &test_points, &StoreOracle(&test_store, &fom)).expect("evaluate L=30");
    let mut cfg5 = cfg.clone();
    cfg5.rom.modes = 5;
    let bundle5 = build_rom(&cfg5, &train, &validation).expect("L=5 bundle").bundle;
    let report5 = evaluate(&bundle5, &test_points, &StoreOracle(&test_store, &fom)).expect("evaluate L=5");
    let threshold = (2.0 * report.projection_floor).max(1e-3);
    out.record(
        "end-to-end ROM quality",
        report.n_failed == 0
            && report.mean_rel_error <= threshold
            && report.mean_rel_error <= report5.mean_rel_error
            && offline_time <= Duration::from_secs(30 * 60),
        format!(
            "{} modes: mean test error {:.2e} (max {:.2e}, floor {:.2e}, threshold {threshold:.2e}); {} modes: mean {:.2e}; offline {:.0} s",
            report.modes,
            report.mean_rel_error,
            report.max_rel_error,
            report.projection_floor,
            report5.modes,
            report5.mean_rel_error,
            offline_time.as_secs_f64()
        ),
        t.elapsed(),
    );

    // Qualitative outlet claims at mid-box.
    let t = Instant::now();
    let q = report.rom_checks;
    let fq = report.fom_checks.expect("mid-box reference");
    let fourier = calibrom::fom::biot_fourier_report(
        &cfg.material,
        &ProcessParams {
            t_ambient: q.t_ambient,
            htc: q.htc,
            t_inlet: cfg.process.t_inlet,
        },
        &fom.geometry,
    )
    .fourier_outlet;
    out.record(
        "qualitative outlet claims",
        (0.2..=0.5).contains(&fourier) && q.passed() && fq.passed(),
        format!(
            "Fo {fourier:.3}; ROM: large core {:.2} K vs small core {:.2} K, spread ratio {:.3}; FOM: {:.2} K vs {:.2} K, spread ratio {:.3}",
            q.summary.outlet_large_core_mean,
            q.summary.outlet_small_core_mean,
            q.summary.spread_ratio,
            fq.summary.outlet_large_core_mean,
            fq.summary.outlet_small_core_mean,
            fq.summary.spread_ratio
        ),
        t.elapsed(),
    );

    // Online speed against the full-order solve.
    let t = Instant::now();
    let [tm, hm] = cfg.sampling.mid_box();
    let mid = ProcessParams {
        t_ambient: tm,
        htc: hm,
        t_inlet: cfg.process.t_inlet,
    };
    let fom_times: Vec<f64> = (0..5)
        .map(|_| {
            let s = Instant::now();
            fom.solve(&mid).expect("timing solve");
            s.elapsed().as_secs_f64()
        })
        .collect();
    for _ in 0..20 {
        bundle.predict(tm, hm).expect("warm-up");
    }
    let predict_times: Vec<f64> = test_points
        .iter()
        .cycle()
        .take(500)
        .map(|&[a, b]| {
            let s = Instant::now();
            std::hint::black_box(bundle.predict(a, b).expect("predict"));
            s.elapsed().as_secs_f64()
        })
        .collect();
    let fom_median = median(fom_times);
    let predict_median = median(predict_times);
    let ratio = predict_median / fom_median;
    out.record(
        "online speedup",
        ratio <= 1e-3 && predict_median <= 10e-3,
        format!(
            "median predict {:.3} ms, median FOM solve {:.1} ms, ratio 1/{:.0} (needs ≤ 1/1000 and ≤ 10 ms)",
            predict_median * 1e3,
            fom_median * 1e3,
            1.0 / ratio
        ),
        t.elapsed(),
    );

    // Persistence.
    let t = Instant::now();
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("desk.romb");
    bundle.save(&path).expect("save");
    let loaded = RomBundle::load(&path).expect("load");
    let mut rng = Rng::new(2024);
    let mut identical = true;
    for _ in 0..5 {
        let (a, b) = (rng.uniform_in(288.0, 298.0), rng.uniform_in(218.0, 320.0));
        let x = bundle.predict(a, b).expect("predict").field;
        let y = loaded.predict(a, b).expect("predict loaded").field;
        identical &= x.iter().zip(&y).all(|(p, q)| p.to_bits() == q.to_bits());
    }
    out.record(
        "persistence round trip",
        identical,
        format!("5 random parameters bit-identical after save/load: {identical}"),
        t.elapsed(),
    );

    println!("{} criteria failed", out.failures);
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && out.failures > 0 {
        std::process::exit(1);
    }
}

/// Serves precomputed test snapshots and solves anything else.
struct StoreOracle<'a>(
    &'a calibrom::fom::SnapshotStore,
    &'a calibrom::fom::FullOrderModel,
);

impl calibrom::rom::FomOracle for StoreOracle<'_> {
    fn solve(&self, p: &ProcessParams) -> calibrom::Result<Vec<f64>> {
        match self.0.params().iter().position(|q| q == p) {
            Some(j) => Ok(self.0.matrix.col(j).to_vec()),
            None => self.1.solve(p).map(|s| s.values),
        }
    }
}
