//! Weibull survival regression with an interval-censored covariate, plus the
//! censored-sample, Cox, diagnostic and simulation tools around it.
//!
//! The headline entry point is [`fit_censcov`]: a Weibull proportional-hazards
//! model in which one covariate may be left-, right- or interval-censored (for
//! example a biomarker below its limit of detection). Censored covariate
//! values are integrated out against a parametric covariate density.

pub mod censcov_reg;
pub mod censlik;
pub mod coxph;
pub mod diagnostics;
pub mod distributions;
pub mod error;
pub mod inference;
pub mod onesample;
pub mod optimize;
pub mod quadrature;
pub mod simulate;
pub mod twosample;
pub mod weibull_reg;

pub use censcov_reg::{fit_censcov, loglik_l2, CensCovFit, CensCovParams, CovariateNames, SurvObservation};
pub use censlik::{parse_interval2, CensStatus, CensorKind, CensoredValue};
pub use coxph::{fit_cox, CoxFit};
pub use diagnostics::{kaplan_meier, weibull_diag, KMCurve, WeibullDiag};
pub use distributions::{CovariateDensity, Family, WeibullAFT, WeibullPH, WeibullShapeScale};
pub use error::{Error, Result};
pub use inference::{Coefficient, FitOptions};
pub use onesample::{fit_censored_sample, OneSampleFit};
pub use simulate::{run_study, SimConfig, SimReport};
pub use twosample::{normal_mean_diff, MeanDiffFit};
pub use weibull_reg::{convert_weibull, fit_weibull_l1, AFTFit, ExactObservation, PHSummary};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/parametrizations.md")]
    mod parametrizations {}
    #[doc = include_str!("../../../book/src/censored-covariate.md")]
    mod censored_covariate {}
    #[doc = include_str!("../../../book/src/censored-samples.md")]
    mod censored_samples {}
    #[doc = include_str!("../../../book/src/cox-and-km.md")]
    mod cox_and_km {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
