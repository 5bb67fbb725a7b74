use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FieldSummary, RomBundle};
use crate::fom::{FullOrderModel, ProcessParams};
use crate::linalg::{dot, norm};
use crate::Result;

/// Source of reference full-order fields.
pub trait FomOracle: Sync {
    fn solve(&self, param: &ProcessParams) -> Result<Vec<f64>>;
}

impl FomOracle for FullOrderModel {
    fn solve(&self, param: &ProcessParams) -> Result<Vec<f64>> {
        FullOrderModel::solve(self, param).map(|s| s.values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleError {
    pub t_ambient: f64,
    pub htc: f64,
    /// `‖T_rom − T_fom‖ / ‖T_fom‖`.
    pub rel_error: Option<f64>,
    /// `‖T_fom − (mean + P_L(T_fom − mean))‖ / ‖T_fom‖`, the best any
    /// coefficient vector could do with this basis.
    pub projection_error: Option<f64>,
    /// Why the sample has no error values.
    pub failure: Option<String>,
}

/// The two qualitative outlet claims, evaluated at one parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualitativeChecks {
    pub t_ambient: f64,
    pub htc: f64,
    pub summary: FieldSummary,
    /// Large-cylinder core is hotter than the small-cylinder core.
    pub larger_cylinder_hotter: bool,
    /// Surface spread ratio below 0.1.
    pub uniform_surface: bool,
}

impl QualitativeChecks {
    pub const SPREAD_THRESHOLD: f64 = 0.1;

    pub fn from_summary(t_ambient: f64, htc: f64, summary: FieldSummary) -> Self {
        QualitativeChecks {
            t_ambient,
            htc,
            summary,
            larger_cylinder_hotter: summary.outlet_large_core_mean > summary.outlet_small_core_mean,
            uniform_surface: summary.spread_ratio < Self::SPREAD_THRESHOLD,
        }
    }

    pub fn passed(&self) -> bool {
        self.larger_cylinder_hotter && self.uniform_surface
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub modes: usize,
    pub samples: Vec<SampleError>,
    pub n_failed: usize,
    pub mean_rel_error: f64,
    pub max_rel_error: f64,
    /// Mean projection error over the evaluated samples.
    pub projection_floor: f64,
    /// Checks on the ROM prediction at the centre of the parameter box.
    pub rom_checks: QualitativeChecks,
    /// The same checks on the full-order solution, when it could be computed.
    pub fom_checks: Option<QualitativeChecks>,
}

impl ErrorReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t_ambient,htc,rel_l2_error,projection_error,status\n");
        let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:e}"));
        for e in &self.samples {
            let status = e.failure.as_deref().map_or("ok".to_string(), |f| {
                format!("\"failed: {}\"", f.replace('"', "'"))
            });
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                e.t_ambient,
                e.htc,
                fmt(e.rel_error),
                fmt(e.projection_error),
                status
            ));
        }
        s
    }
}

fn sample_error(bundle: &RomBundle, oracle: &dyn FomOracle, [t_ambient, htc]: [f64; 2]) -> SampleError {
    let param = ProcessParams {
        t_ambient,
        htc,
        t_inlet: bundle.meta.t_inlet,
    };
    let run = || -> Result<(f64, f64)> {
        let truth = oracle.solve(&param)?;
        let rom = bundle.predict(t_ambient, htc)?.field;
        if truth.len() != rom.len() {
            return Err(crate::Error::dim("oracle field", rom.len(), truth.len()));
        }
        let scale = norm(&truth);
        let diff: Vec<f64> = rom.iter().zip(&truth).map(|(a, b)| a - b).collect();
        let mut r: Vec<f64> = truth
            .iter()
            .zip(&bundle.basis.mean_field)
            .map(|(a, m)| a - m)
            .collect();
        for l in 0..bundle.basis.len() {
            let u = bundle.basis.modes.col(l);
            let c = dot(u, &r);
            crate::linalg::axpy(-c, u, &mut r);
        }
        Ok((norm(&diff) / scale, norm(&r) / scale))
    };
    match run() {
        Ok((e, p)) => SampleError {
            t_ambient,
            htc,
            rel_error: Some(e),
            projection_error: Some(p),
            failure: None,
        },
        Err(err) => SampleError {
            t_ambient,
            htc,
            rel_error: None,
            projection_error: None,
            failure: Some(err.to_string()),
        },
    }
}

/// Compares the bundle with the oracle at every parameter (in parallel,
/// results in input order) and runs the qualitative checks at mid-box. A
/// failing sample is recorded and skipped, not fatal.
pub fn evaluate(bundle: &RomBundle, params: &[[f64; 2]], oracle: &dyn FomOracle) -> Result<ErrorReport> {
    let samples: Vec<SampleError> = params
        .par_iter()
        .map(|&p| sample_error(bundle, oracle, p))
        .collect();
    let ok: Vec<&SampleError> = samples.iter().filter(|s| s.failure.is_none()).collect();
    let count = ok.len().max(1) as f64;
    let mean_rel_error = ok.iter().filter_map(|s| s.rel_error).sum::<f64>() / count;
    let max_rel_error = ok.iter().filter_map(|s| s.rel_error).fold(0.0, f64::max);
    let projection_floor = ok.iter().filter_map(|s| s.projection_error).sum::<f64>() / count;

    let [t, h] = bundle.meta.plan.mid_box();
    let rom = bundle.predict(t, h)?;
    let rom_checks = QualitativeChecks::from_summary(t, h, rom.summary);
    let mid = ProcessParams {
        t_ambient: t,
        htc: h,
        t_inlet: bundle.meta.t_inlet,
    };
    let fom_checks = oracle
        .solve(&mid)
        .ok()
        .filter(|f| f.len() == bundle.field_len())
        .map(|f| QualitativeChecks::from_summary(t, h, bundle.summarize(&f, t)));

    Ok(ErrorReport {
        modes: bundle.modes(),
        n_failed: samples.len() - ok.len(),
        samples,
        mean_rel_error,
        max_rel_error,
        projection_floor,
        rom_checks,
        fom_checks,
    })
}
