//! Frozen-coefficient approximation, polynomial extraction, and the
//! multiscale C¹ / C^{1,1} iterations with their recurrence checks and
//! regularity certificates.

mod approx;
mod calibrate;
mod certificate;
mod io;
mod probe;

pub use approx::{
    approximate, taylor_fit, trace_free_projection, Approx, Approximation, FrozenProblem, LinearApprox, QuadApprox,
};
pub use calibrate::{
    calibrate_constants, calibrated, envelope_fit, harmonic_tests, shape, Calibration, CalibrationSuite, Constants,
    Experiment, Family, SweepReport, BETA_CAP, SHAPES,
};
pub use certificate::{
    certificate, certificate_sequence, recurrence_checks, verify_recurrence, Certificate, RecurrenceCheck, Verdict,
};
pub use io::{columns, parse_trace_csv, trace_csv, worst_margin, TraceSummary, TRACE_SCHEMA_VERSION};
pub use probe::{c11_probe, c1_probe, probe, IterationConfig, IterationTrace, Mode, ScaleRecord, Smallness, Solution};
