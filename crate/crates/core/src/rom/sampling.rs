use serde::{Deserialize, Serialize};

use crate::fom::ProcessParams;
use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingLaw {
    /// Independent uniform draws per coordinate.
    Uniform,
    /// One draw per stratum and coordinate, strata randomly paired.
    LatinHypercube,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSeeds {
    pub train: u64,
    pub validation: u64,
    pub test: u64,
}

/// Parameter box and per-split sample counts and seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingPlan {
    /// Ambient temperature range (K).
    pub t_ambient: [f64; 2],
    /// Heat-transfer coefficient range (W/(m²·K)).
    pub htc: [f64; 2],
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub seeds: SplitSeeds,
    pub law: SamplingLaw,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan {
            t_ambient: [288.0, 298.0],
            htc: [218.0, 320.0],
            train: 100,
            validation: 100,
            test: 100,
            seeds: SplitSeeds {
                train: 42,
                validation: 43,
                test: 44,
            },
            law: SamplingLaw::Uniform,
        }
    }
}

impl SamplingPlan {
    pub fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in [("t_ambient", self.t_ambient), ("htc", self.htc)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!(
                    "sampling range {name} = [{lo}, {hi}] is invalid"
                )));
            }
        }
        if self.htc[0] < 0.0 {
            return Err(Error::Config("htc range must be non-negative".into()));
        }
        if self.train < 2 || self.validation == 0 || self.test == 0 {
            return Err(Error::Config(
                "sampling needs at least 2 training and 1 validation/test sample".into(),
            ));
        }
        let s = self.seeds;
        if s.train == s.validation || s.train == s.test || s.validation == s.test {
            return Err(Error::Config("split seeds must be distinct".into()));
        }
        Ok(())
    }

    pub fn count(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Validation => self.validation,
            Split::Test => self.test,
        }
    }

    pub fn seed(&self, split: Split) -> u64 {
        match split {
            Split::Train => self.seeds.train,
            Split::Validation => self.seeds.validation,
            Split::Test => self.seeds.test,
        }
    }

    /// `(t_ambient, htc)` at the centre of the box.
    pub fn mid_box(&self) -> [f64; 2] {
        [
            0.5 * (self.t_ambient[0] + self.t_ambient[1]),
            0.5 * (self.htc[0] + self.htc[1]),
        ]
    }

    pub fn contains(&self, t_ambient: f64, htc: f64) -> bool {
        (self.t_ambient[0]..=self.t_ambient[1]).contains(&t_ambient)
            && (self.htc[0]..=self.htc[1]).contains(&htc)
    }
}

/// Draws the `(t_ambient, htc)` pairs of one split.
///
/// Uniform law: for each sample, `t_ambient` then `htc`, each as
/// `lo + (hi − lo)·u` with `u` from [`Rng::uniform`] seeded by the split seed.
/// Latin hypercube: per coordinate a Fisher–Yates permutation of the strata
/// followed by one jitter draw per sample.
pub fn sample_params(plan: &SamplingPlan, split: Split) -> Vec<[f64; 2]> {
    let n = plan.count(split);
    let mut rng = Rng::new(plan.seed(split));
    let ranges = [plan.t_ambient, plan.htc];
    match plan.law {
        SamplingLaw::Uniform => (0..n)
            .map(|_| ranges.map(|[lo, hi]| lo + (hi - lo) * rng.uniform()))
            .collect(),
        SamplingLaw::LatinHypercube => {
            let strata: Vec<Vec<usize>> = ranges
                .iter()
                .map(|_| {
                    let mut p: Vec<usize> = (0..n).collect();
                    rng.shuffle(&mut p);
                    p
                })
                .collect();
            (0..n)
                .map(|i| {
                    let mut out = [0.0; 2];
                    for (d, [lo, hi]) in ranges.iter().enumerate() {
                        let u = (strata[d][i] as f64 + rng.uniform()) / n as f64;
                        out[d] = lo + (hi - lo) * u;
                    }
                    out
                })
                .collect()
        }
    }
}

pub fn process_params(points: &[[f64; 2]], t_inlet: f64) -> Vec<ProcessParams> {
    points
        .iter()
        .map(|&[t_ambient, htc]| ProcessParams {
            t_ambient,
            htc,
            t_inlet,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_list() {
        let plan = SamplingPlan::default();
        assert_eq!(
            sample_params(&plan, Split::Test),
            sample_params(&plan, Split::Test)
        );
        assert_ne!(
            sample_params(&plan, Split::Train),
            sample_params(&plan, Split::Test)
        );
        assert_eq!(sample_params(&plan, Split::Train).len(), 100);
    }

    #[test]
    fn draws_stay_in_box() {
        for law in [SamplingLaw::Uniform, SamplingLaw::LatinHypercube] {
            let plan = SamplingPlan {
                law,
                ..SamplingPlan::default()
            };
            for split in Split::ALL {
                for [t, h] in sample_params(&plan, split) {
                    assert!(plan.contains(t, h));
                }
            }
        }
    }

    #[test]
    fn latin_hypercube_fills_every_stratum() {
        let plan = SamplingPlan {
            law: SamplingLaw::LatinHypercube,
            train: 17,
            ..SamplingPlan::default()
        };
        let pts = sample_params(&plan, Split::Train);
        for (d, [lo, hi]) in [plan.t_ambient, plan.htc].into_iter().enumerate() {
            let mut hit = [false; 17];
            for p in &pts {
                let k = (((p[d] - lo) / (hi - lo)) * 17.0).floor() as usize;
                hit[k.min(16)] = true;
            }
            assert!(hit.iter().all(|&h| h));
        }
    }

    #[test]
    fn validation_rules() {
        let ok = SamplingPlan::default();
        ok.validate().unwrap();
        let same_seeds = SamplingPlan {
            seeds: SplitSeeds {
                train: 1,
                validation: 1,
                test: 2,
            },
            ..ok
        };
        assert!(same_seeds.validate().is_err());
        let inverted = SamplingPlan {
            htc: [320.0, 218.0],
            ..ok
        };
        assert!(inverted.validate().is_err());
        assert_eq!(ok.mid_box(), [293.0, 269.0]);
    }
}
