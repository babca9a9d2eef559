//! Cooling schedules, Gibbs sampling, the `u` envelope, benchmark potentials
//! and concentration diagnostics.

mod benchmark;
mod concentration;
mod gibbs;
mod schedule;
mod ubound;

pub use benchmark::{
    benchmark_schedule, driver_melcher_constant, make_benchmark_potential, BenchmarkMode, BenchmarkPotential,
    ScheduleInputs, BENCHMARK_SCAN_POINTS, SCHEDULE_EPS_GRID,
};
pub use concentration::{
    concentration_report, ConcentrationOptions, ConcentrationReport, ConcentrationRow, ProbeTrend, MIN_SAMPLES_PER_BIN,
};
pub use gibbs::{
    effective_sample_size, gibbs_sampler, potential_floor, sublevel_mass, GibbsDiagnostics, GibbsRun, GibbsTarget,
    SublevelMass, GIBBS_CHAINS, GIBBS_THIN,
};
pub use schedule::{make_schedule, CoolingSchedule, ScheduleFlags, ScheduleOptions};
pub use ubound::{u_bound_closed_form, u_bound_integrate, UBoundTrajectory, UBoundVerdict};
