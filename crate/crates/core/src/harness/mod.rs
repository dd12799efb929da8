//! End-to-end studies and their reports.

mod fixtures;
pub mod reference;
pub mod report;
pub mod run;
pub mod signal;
pub mod studies;

pub use fixtures::{
    half_cosine_ramp, kovasznay_edges, kovasznay_grid, kovasznay_problem, polygon_fixture, sphere_fixture, square_problem,
    volume_fixtures, SquareSetup, VolumeFixture, KOVASZNAY_HI, KOVASZNAY_LO, SPHERE_VOLUME, SQUARE_BODY, SQUARE_D,
    SQUARE_U,
};
pub use report::{BenchmarkReport, ReportRow, UnsteadySummary, REPORT_CSV_HEADER};
pub use run::{file_stem, run_study, StudyFiles};
pub use signal::{convergence_rate, cost_curves, mean, rms, smooth3, strouhal, CostRow};
