//! Moment sequences, the normalizer, criticality and extinction evidence.

pub mod criticality;
pub mod extinction;
pub mod fit;
pub mod moments;

pub use criticality::{criticality_classify, CriticalityReport, CriticalityVerdict, Verdict3};
pub use extinction::{
    extinction_conditions, q_lower_bounds, ExtinctionReport, ExtinctionVerdict, QLowerBounds,
};
pub use fit::{dyadic_horizons, power_law_fit, PowerFit};
pub use moments::{
    mean_double_sum, mean_sequence, normalizer, variance_audit, variance_printed_form,
    variance_sequence, MomentTable, NormalizerSequence,
};
