//! Benchmark report rows, CSV and text summary.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::io::Write;

use crate::error::Result;
use crate::quadrature::CutMethod;

pub const REPORT_CSV_HEADER: &str =
    "case,h,method,level,e_v,e_p,area_err,c_d,c_l,st,amplitude,n_quad_points,assembly_wall_ms,solve_wall_ms,status";

/// One (case, method, level) result. Quantities that do not apply to a
/// study stay `None` and are written as empty fields.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportRow {
    /// Mesh size `n` for mesh ladders, fixture name otherwise.
    pub case: String,
    pub h: f64,
    pub method: Option<CutMethod>,
    pub e_v: Option<f64>,
    pub e_p: Option<f64>,
    /// Relative quadrature volume error.
    pub area_err: Option<f64>,
    /// Drag coefficient (time average for unsteady runs).
    pub c_d: Option<f64>,
    /// Lift coefficient (root mean square for unsteady runs).
    pub c_l: Option<f64>,
    pub st: Option<f64>,
    /// Transverse displacement amplitude of a sprung body.
    pub amplitude: Option<f64>,
    pub n_quad_points: usize,
    pub assembly_wall_ms: f64,
    pub solve_wall_ms: f64,
    /// `ok`, or a one-line failure description.
    pub status: String,
}

impl ReportRow {
    pub fn new(case: impl Into<String>, h: f64, method: CutMethod) -> Self {
        Self { case: case.into(), h, method: Some(method), status: "ok".into(), ..Default::default() }
    }

    pub fn failed(&self) -> bool {
        self.status != "ok"
    }

    pub fn level(&self) -> Option<u32> {
        match self.method {
            Some(CutMethod::Adaptive { level }) => Some(level),
            _ => None,
        }
    }

    fn sort_key(&self) -> (u8, usize, &str, i64) {
        // Numeric cases sort by value, names alphabetically after them.
        let (kind, n) = match self.case.parse::<usize>() {
            Ok(n) => (0, n),
            Err(_) => (1, 0),
        };
        (kind, n, self.case.as_str(), self.level().map_or(-1, i64::from))
    }
}

/// Summary of an unsteady run.
#[derive(Debug, Clone, PartialEq)]
pub struct UnsteadySummary {
    pub method: CutMethod,
    pub c_d_avg: f64,
    pub c_l_rms: f64,
    pub st: Option<f64>,
    pub series_path: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchmarkReport {
    pub run_id: String,
    pub config_echo: String,
    pub rows: Vec<ReportRow>,
    pub unsteady: Vec<UnsteadySummary>,
    /// Derived observations such as convergence rates.
    pub notes: Vec<String>,
}

impl BenchmarkReport {
    pub fn new(run_id: impl Into<String>, config_echo: impl Into<String>) -> Self {
        Self { run_id: run_id.into(), config_echo: config_echo.into(), ..Default::default() }
    }

    /// Inserts a row keeping the (case, level) order; ST sorts before AI.
    pub fn push(&mut self, row: ReportRow) {
        let at = self.rows.partition_point(|r| r.sort_key().cmp(&row.sort_key()) != Ordering::Greater);
        self.rows.insert(at, row);
    }

    pub fn has_failures(&self) -> bool {
        self.rows.iter().any(ReportRow::failed)
    }

    pub fn row(&self, case: &str, method: CutMethod) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.case == case && r.method == Some(method))
    }

    /// CSV with one line per row. Timing columns are written as 0 when
    /// `timings` is off so that repeated runs compare byte for byte.
    pub fn write_csv(&self, timings: bool, out: &mut impl Write) -> Result<()> {
        writeln!(out, "{REPORT_CSV_HEADER}")?;
        for r in &self.rows {
            let (asm, sol) = if timings { (r.assembly_wall_ms, r.solve_wall_ms) } else { (0.0, 0.0) };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.case,
                r.h,
                r.method.map_or("", |m| m.tag()),
                r.level().map(|l| l.to_string()).unwrap_or_default(),
                opt(r.e_v),
                opt(r.e_p),
                opt(r.area_err),
                opt(r.c_d),
                opt(r.c_l),
                opt(r.st),
                opt(r.amplitude),
                r.n_quad_points,
                asm,
                sol,
                r.status.replace([',', '\n'], ";"),
            )?;
        }
        Ok(())
    }

    /// Structured text summary: config echo, unsteady statistics and notes.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "run_id = {}", self.run_id);
        let _ = writeln!(s, "rows = {}", self.rows.len());
        let _ = writeln!(s, "failed_rows = {}", self.rows.iter().filter(|r| r.failed()).count());
        for u in &self.unsteady {
            let _ = writeln!(
                s,
                "unsteady {} {}: C_D_avg = {:.5}, C_L_rms = {:.5}, St = {}, series = {}",
                u.method.tag(),
                u.method.level(),
                u.c_d_avg,
                u.c_l_rms,
                u.st.map_or("n/a".into(), |v| format!("{v:.5}")),
                u.series_path
            );
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        let _ = writeln!(s, "\n[config]\n{}", self.config_echo.trim_end());
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}
