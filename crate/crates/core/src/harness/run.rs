//! Config-driven studies writing reports into an output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;

use super::fixtures::{kovasznay_grid, polygon_fixture, volume_fixtures, SQUARE_D, SQUARE_U};
use super::report::{BenchmarkReport, ReportRow, UnsteadySummary};
use super::signal::{convergence_rate, cost_curves, mean, rms, strouhal};
use super::studies::{
    area_error, kovasznay_cost, kovasznay_field_dump, normalized_rms_deviation, solve_kovasznay, sphere_volume_error, sprung_square,
    stats_window, steady_square, unsteady_square, unsteady_stats, SpringMount, UnsteadySettings,
};
use crate::config::{MethodKind, RunConfig, Study};
use crate::error::{Error, Result};
use crate::fsi::write_coupling_csv;
use crate::geometry::PolygonBoundary;
use crate::quadrature::CutMethod;

/// Report files of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyFiles {
    pub csv: PathBuf,
    pub summary: PathBuf,
}

/// File stem embedding study, degree, methods and levels, e.g.
/// `kovasznay_p1_st_ai2-3-4`.
pub fn file_stem(config: &RunConfig) -> String {
    let mut s = format!("{}_p{}", config.study.as_str(), config.degree);
    if config.methods.contains(&MethodKind::St) {
        s.push_str("_st");
    }
    if config.methods.contains(&MethodKind::Ai) {
        let mut levels = config.levels.clone();
        levels.sort_unstable();
        levels.dedup();
        let l: Vec<String> = levels.iter().map(u32::to_string).collect();
        s.push_str(&format!("_ai{}", l.join("-")));
    }
    s
}

fn method_stem(m: CutMethod) -> String {
    match m {
        CutMethod::Subtriangulation => "st".into(),
        CutMethod::Adaptive { level } => format!("ai{level}"),
    }
}

/// Runs the configured study, rewriting the CSV report after every row so
/// that a partial report survives a later failure. Per-row solver failures
/// are recorded in the row status; only I/O and setup errors abort.
pub fn run_study(config: &RunConfig, out_dir: &Path) -> Result<(BenchmarkReport, StudyFiles)> {
    config.validate()?;
    fs::create_dir_all(out_dir)
        .map_err(|e| Error::Config(format!("output directory {} is not writable: {e}", out_dir.display())))?;
    let stem = file_stem(config);
    let files = StudyFiles { csv: out_dir.join(format!("{stem}.csv")), summary: out_dir.join(format!("{stem}.summary.txt")) };
    let mut report = BenchmarkReport::new(stem.clone(), config.to_text());
    let mut ctx = Ctx { config, out_dir, stem: &stem, files: &files };
    match config.study {
        Study::Quadrature => ctx.quadrature(&mut report)?,
        Study::Kovasznay => ctx.kovasznay(&mut report)?,
        Study::Square => ctx.square(&mut report)?,
        Study::Fsi => ctx.fsi(&mut report)?,
    }
    ctx.flush(&report)?;
    Ok((report, files))
}

struct Ctx<'a> {
    config: &'a RunConfig,
    out_dir: &'a Path,
    stem: &'a str,
    files: &'a StudyFiles,
}

impl Ctx<'_> {
    fn flush(&mut self, report: &BenchmarkReport) -> Result<()> {
        let mut csv = BufWriter::new(File::create(&self.files.csv)?);
        report.write_csv(self.config.timings, &mut csv)?;
        csv.flush()?;
        fs::write(&self.files.summary, report.summary())?;
        Ok(())
    }

    fn push(&mut self, report: &mut BenchmarkReport, row: ReportRow) -> Result<()> {
        info!("{} {} {}: {}", row.case, row.method.map_or("-".into(), |m| m.to_string()), row.h, row.status);
        report.push(row);
        self.flush(report)
    }

    fn quadrature(&mut self, report: &mut BenchmarkReport) -> Result<()> {
        let c = self.config;
        let mut fixtures = volume_fixtures();
        if let Some(path) = &c.polygon_file {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read polygon file {}: {e}", path.display())))?;
            let boundary = PolygonBoundary::from_poly_text(&text).map_err(|e| Error::Config(e.to_string()))?;
            fixtures.push(polygon_fixture(boundary)?);
        }
        for fixture in fixtures {
            for m in c.cut_methods() {
                let mut row = ReportRow::new(fixture.name, fixture.grid.cell_size(), m);
                match area_error(&fixture, m, c.degree) {
                    Ok((err, n)) => {
                        row.area_err = Some(err);
                        row.n_quad_points = n;
                    }
                    Err(e) => row.status = format!("failed: {e}"),
                }
                self.push(report, row)?;
            }
        }
        for m in c.cut_methods().into_iter().filter(|m| matches!(m, CutMethod::Adaptive { .. })) {
            let mut row = ReportRow::new("sphere", 2.5, m);
            match sphere_volume_error(m.level(), c.degree + 1) {
                Ok((err, n)) => {
                    row.area_err = Some(err);
                    row.n_quad_points = n;
                }
                Err(e) => row.status = format!("failed: {e}"),
            }
            self.push(report, row)?;
        }
        for &n in &c.meshes {
            let h = kovasznay_grid(n, c.degree)?.cartesian().cell_size();
            let mut samples = Vec::new();
            for m in c.cut_methods() {
                let mut row = ReportRow::new(format!("kovasznay-{n}"), h, m);
                match kovasznay_cost(n, c.degree, m) {
                    Ok((points, ms)) => {
                        row.n_quad_points = points;
                        row.assembly_wall_ms = ms;
                        if let CutMethod::Adaptive { level } = m {
                            samples.push((level, points, ms));
                        }
                    }
                    Err(e) => row.status = format!("failed: {e}"),
                }
                self.push(report, row)?;
            }
            if let Ok(rows) = cost_curves(&samples) {
                let g: Vec<String> = rows
                    .iter()
                    .filter_map(|r| r.growth.map(|g| format!("g({})={g:.3}", r.level)))
                    .collect();
                report.notes.push(format!("kovasznay-{n} cut-point growth: {}", g.join(" ")));
            }
        }
        Ok(())
    }

    fn kovasznay(&mut self, report: &mut BenchmarkReport) -> Result<()> {
        let c = self.config;
        let params = c.fluid_params(1.0);
        let newton = c.newton();
        for &n in &c.meshes {
            let h = kovasznay_grid(n, c.degree)?.cartesian().cell_size();
            for m in c.cut_methods() {
                let mut row = ReportRow::new(n.to_string(), h, m);
                match solve_kovasznay(n, c.degree, m, c.fluid.re, params, &newton) {
                    Ok(s) => {
                        row.e_v = Some(s.norms.e_v);
                        row.e_p = Some(s.norms.e_p);
                        row.n_quad_points = s.n_quad_points;
                        row.assembly_wall_ms = s.assembly_ms;
                        row.solve_wall_ms = s.solve_ms;
                        if c.field_dump > 0 {
                            let path = self.out_dir.join(format!("{}_{n}_{}_field.txt", self.stem, method_stem(m)));
                            let mut out = BufWriter::new(File::create(path)?);
                            kovasznay_field_dump(n, c.degree, m, &s, c.field_dump, &mut out)?;
                            out.flush()?;
                        }
                    }
                    Err(e) => row.status = format!("failed: {e}"),
                }
                self.push(report, row)?;
            }
        }
        let mut meshes = c.meshes.clone();
        meshes.sort_unstable();
        for m in c.cut_methods() {
            for w in meshes.windows(2) {
                let (a, b) = (report.row(&w[0].to_string(), m), report.row(&w[1].to_string(), m));
                if let (Some(a), Some(b)) = (a, b) {
                    if let (Some(av), Some(bv), Some(ap), Some(bp)) = (a.e_v, b.e_v, a.e_p, b.e_p) {
                        report.notes.push(format!(
                            "{m} rate {}->{}: velocity {:.3}, pressure {:.3}",
                            w[0],
                            w[1],
                            convergence_rate(av, bv),
                            convergence_rate(ap, bp)
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn square(&mut self, report: &mut BenchmarkReport) -> Result<()> {
        let c = self.config;
        let setup = c.square_setup();
        let params = c.fluid_params(SQUARE_U * SQUARE_D);
        let newton = c.newton();
        if c.solver.steady {
            for m in c.cut_methods() {
                let mut row = ReportRow::new(format!("re{}", c.fluid.re), setup.h, m);
                match steady_square(&setup, m, params, &newton) {
                    Ok(s) => {
                        row.c_d = Some(s.c_d);
                        row.c_l = Some(s.c_l);
                        row.n_quad_points = s.n_quad_points;
                        row.assembly_wall_ms = s.assembly_ms;
                        row.solve_wall_ms = s.solve_ms;
                    }
                    Err(e) => row.status = format!("failed: {e}"),
                }
                self.push(report, row)?;
            }
            return Ok(());
        }
        let settings = self.settings();
        let mut reference: Option<Vec<f64>> = None;
        for m in c.cut_methods() {
            let mut row = ReportRow::new(format!("re{}", c.fluid.re), setup.h, m);
            let history = unsteady_square(&setup, m, params, &settings, &newton, |t, cf| {
                if (t / settings.dt).round() as usize % 100 == 0 {
                    info!("{m} t = {t:.1}: C_D = {:.4}, C_L = {:.4}", cf[0], cf[1]);
                }
            })?;
            let path = self.out_dir.join(format!("{}_{}_series.csv", self.stem, method_stem(m)));
            let mut f = BufWriter::new(File::create(&path)?);
            writeln!(f, "time,c_d,c_l")?;
            for i in 0..history.time.len() {
                writeln!(f, "{},{},{}", history.time[i], history.c_d[i], history.c_l[i])?;
            }
            f.flush()?;
            let stats = unsteady_stats(&history, settings.dt);
            row.n_quad_points = history.n_quad_points;
            row.assembly_wall_ms = history.assembly_ms;
            row.solve_wall_ms = history.solve_ms;
            if !history.time.is_empty() {
                row.c_d = Some(stats.c_d_avg);
                row.c_l = Some(stats.c_l_rms);
            }
            row.st = stats.st.as_ref().ok().copied();
            row.status = match (&history.failure, &stats.st) {
                (Some(f), _) => format!("failed: {f}"),
                (None, Err(e)) => format!("not periodic: {e}"),
                (None, Ok(_)) => "ok".into(),
            };
            report.unsteady.push(UnsteadySummary {
                method: m,
                c_d_avg: stats.c_d_avg,
                c_l_rms: stats.c_l_rms,
                st: row.st,
                series_path: path.display().to_string(),
            });
            match (&reference, m) {
                (None, CutMethod::Subtriangulation) => reference = Some(history.c_l.clone()),
                (Some(st_lift), CutMethod::Adaptive { .. }) if history.failure.is_none() => {
                    let dev = normalized_rms_deviation(&history.c_l, st_lift);
                    report.notes.push(format!("{m} lift normalized RMS deviation from ST: {dev:.4}"));
                }
                _ => {}
            }
            self.push(report, row)?;
        }
        Ok(())
    }

    fn settings(&self) -> UnsteadySettings {
        let c = self.config;
        UnsteadySettings { dt: c.solver.dt.unwrap_or(0.1), t_end: c.solver.t_end, ramp: c.square.ramp }
    }

    fn fsi(&mut self, report: &mut BenchmarkReport) -> Result<()> {
        let c = self.config;
        let setup = c.square_setup();
        let params = c.fluid_params(SQUARE_U * SQUARE_D);
        let mount = SpringMount {
            mass: c.fsi.mass,
            stiffness: c.fsi.stiffness,
            damping: c.fsi.damping,
            transverse_only: c.fsi.transverse_only,
        };
        let settings = self.settings();
        for m in c.cut_methods() {
            let mut row = ReportRow::new(format!("re{}", c.fluid.re), setup.h, m);
            let run = sprung_square(&setup, m, params, &mount, c.coupling(), &settings, &c.newton(), |r| {
                if r.step % 100 == 0 {
                    info!("{m} t = {:.1}: d_y = {:.4}", r.time, r.displacement[1]);
                }
            })?;
            let path = self.out_dir.join(format!("{}_{}_coupling.csv", self.stem, method_stem(m)));
            let mut f = BufWriter::new(File::create(&path)?);
            write_coupling_csv(&run.records, c.timings, &mut f)?;
            f.flush()?;
            if !run.records.is_empty() {
                let (cd, cl) = run.coefficients(params.rho);
                row.amplitude = Some(run.amplitude());
                row.c_d = Some(mean(stats_window(&cd)));
                row.c_l = Some(rms(stats_window(&cl)));
                let y: Vec<f64> = run.records.iter().map(|r| r.displacement[1]).collect();
                row.st = strouhal(stats_window(&y), settings.dt, SQUARE_D, SQUARE_U).ok();
                row.assembly_wall_ms = mean(&run.records.iter().map(|r| r.assemble_ms).collect::<Vec<_>>());
            }
            row.n_quad_points = run.n_quad_points;
            if let Some(f) = &run.failure {
                row.status = format!("failed: {f}");
            }
            report.notes.push(format!("{m} coupling series: {}", path.display()));
            self.push(report, row)?;
        }
        Ok(())
    }
}
