//! Boolean functions under random restrictions: function families with
//! exact conditional means and derivatives, restriction sampling, the
//! revealing process and its controlled variant, query/sensitivity
//! measures, and biased-moment checks for low-degree multilinear forms.

pub mod bits;
pub mod error;
pub mod family;
pub mod fourier;
pub mod hyperc;
pub mod measures;
pub mod process;
pub mod restriction;
pub mod rng;
pub mod table;

pub use bits::{BitPoint, PartialPoint};
pub use error::{Error, Result};
pub use family::{BooleanFunction, FunctionSpec};
pub use fourier::FourierCoefficients;
pub use hyperc::{
    beta_tail, couple_to_discrete, discrete_beta_tail, exact_moment, hc_check, prop51_check,
    BetaTail, CouplingCheck, DiscreteBetaTail, HcCheck, MultilinearFunction, Prop51Check,
    RevealPath,
};
pub use measures::{
    bs_exact, bs_partition_estimate, dt_exact, dt_naive, kkl_diagnostic,
    monotone_restricted_influence, osss_check, sensitivity, BlockCertificate, InfluenceKind,
    KklDiagnostic, OsssCheck, PartitionEstimate, RestrictedInfluenceTail,
};
pub use process::{
    default_parameters, kl_exact_small_n, kl_ledger_audit, kl_to_mean, kl_to_mean_verify,
    run_conditioned, run_controlled, run_uniform, stopping_stats, ConditionedRun,
    DefaultParameters, KlExactReport, LedgerAudit, PiConfig, PiRun, StoppingStats, UniformRun,
};
pub use restriction::{
    restrict, sample_fixed_alive, sample_independent, scan, scan_one, tribes_survival_formula,
    Restriction, ScanMode, ScanResult,
};
pub use table::TruthTable;
