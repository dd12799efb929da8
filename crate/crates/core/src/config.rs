//! Run configuration: flat `key = value` text with sections.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowsolver::{FluidParams, NewtonOptions};
use crate::fsi::CouplingConfig;
use crate::harness::SquareSetup;
use crate::quadrature::CutMethod;

/// Deepest adaptive level accepted anywhere.
pub const MAX_LEVEL: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Study {
    Quadrature,
    Kovasznay,
    Square,
    Fsi,
}

impl Study {
    pub fn as_str(self) -> &'static str {
        match self {
            Study::Quadrature => "quadrature",
            Study::Kovasznay => "kovasznay",
            Study::Square => "square",
            Study::Fsi => "fsi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    /// Subtriangulation.
    St,
    /// Adaptive integration at every configured level.
    Ai,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluidSection {
    pub rho: f64,
    pub re: f64,
    pub gamma_n: f64,
    pub gamma_g: f64,
    pub c_i: f64,
    pub lsic: bool,
    pub tau_dt: bool,
}

impl Default for FluidSection {
    fn default() -> Self {
        let p = FluidParams::default();
        Self { rho: p.rho, re: 40.0, gamma_n: p.gamma_n, gamma_g: p.gamma_g, c_i: p.c_i, lsic: p.lsic, tau_dt: p.tau_dt }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub steady: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub t_end: f64,
    pub rtol: f64,
    pub max_iterations: usize,
    pub reuse_factorization: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let n = NewtonOptions::default();
        Self { steady: true, dt: None, t_end: 150.0, rtol: n.rtol, max_iterations: n.max_iterations, reuse_factorization: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SquareSection {
    pub h: f64,
    pub upstream: f64,
    pub downstream: f64,
    pub lateral: f64,
    pub offset: f64,
    /// Inflow ramp duration for unsteady runs.
    pub ramp: f64,
}

impl Default for SquareSection {
    fn default() -> Self {
        Self { h: 0.1, upstream: 8.0, downstream: 25.0, lateral: 8.0, offset: 1.0 / 3.0, ramp: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FsiSection {
    pub mass: f64,
    pub stiffness: f64,
    pub damping: f64,
    /// Only transverse motion when set.
    pub transverse_only: bool,
    pub beta: f64,
    pub predictor_order: usize,
}

impl Default for FsiSection {
    fn default() -> Self {
        let c = CouplingConfig::default();
        Self { mass: 10.0, stiffness: 8.0, damping: 0.0, transverse_only: true, beta: c.beta, predictor_order: c.predictor_order }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub study: Study,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodKind>,
    #[serde(default = "default_levels")]
    pub levels: Vec<u32>,
    /// Kovasznay mesh ladder (`n` of `n × n`).
    #[serde(default = "default_meshes")]
    pub meshes: Vec<usize>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub deterministic: bool,
    #[serde(default = "default_true")]
    pub timings: bool,
    /// Probe lattice resolution of the field dump; 0 disables it.
    #[serde(default)]
    pub field_dump: usize,
    /// Extra polygon (`POLY n side` file) for the quadrature study.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polygon_file: Option<PathBuf>,
    #[serde(default)]
    pub fluid: FluidSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub square: SquareSection,
    #[serde(default)]
    pub fsi: FsiSection,
}

fn default_degree() -> usize {
    1
}
fn default_methods() -> Vec<MethodKind> {
    vec![MethodKind::St, MethodKind::Ai]
}
fn default_levels() -> Vec<u32> {
    vec![2, 3, 4, 6, 8]
}
fn default_meshes() -> Vec<usize> {
    vec![31, 61, 121]
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_true() -> bool {
    true
}

impl RunConfig {
    /// Defaults for `study`.
    pub fn new(study: Study) -> Self {
        let mut c: RunConfig = toml::from_str(&format!("study = \"{}\"", study.as_str())).expect("minimal config parses");
        if study == Study::Fsi {
            c.fluid.re = 100.0;
            c.solver.steady = false;
            c.solver.dt = Some(0.1);
        }
        c
    }

    pub fn parse(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| Error::Config(one_line(e.message(), e.span(), text)))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !matches!(self.degree, 1 | 2) {
            return bad(format!("degree must be 1 or 2, got {}", self.degree));
        }
        if self.methods.is_empty() {
            return bad("methods must list at least one of \"st\", \"ai\"".into());
        }
        if let Some(l) = self.levels.iter().find(|&&l| l > MAX_LEVEL) {
            return bad(format!("level {l} exceeds the maximum of {MAX_LEVEL}"));
        }
        if self.methods.contains(&MethodKind::Ai) && self.levels.is_empty() {
            return bad("method \"ai\" needs a non-empty levels list".into());
        }
        if let Some(n) = self.meshes.iter().find(|&&n| n < 4) {
            return bad(format!("mesh size {n} too small (need at least 4)"));
        }
        let f = &self.fluid;
        if !(f.rho > 0.0 && f.re > 0.0) {
            return bad(format!("fluid.rho and fluid.re must be positive, got {} and {}", f.rho, f.re));
        }
        self.fluid_params(1.0).validate().map_err(|e| Error::Config(e.to_string()))?;
        let s = &self.solver;
        match (s.steady, s.dt) {
            (true, Some(_)) => return bad("solver.steady = true contradicts solver.dt; remove one of them".into()),
            (false, None) => return bad("solver.steady = false needs solver.dt".into()),
            (false, Some(dt)) if !(dt > 0.0 && s.t_end > dt) => {
                return bad(format!("need 0 < solver.dt < solver.t_end, got dt = {dt}, t_end = {}", s.t_end))
            }
            _ => {}
        }
        if !(s.rtol > 0.0 && s.max_iterations > 0) {
            return bad("solver.rtol and solver.max_iterations must be positive".into());
        }
        let q = &self.square;
        if !(q.h > 0.0 && q.upstream > 1.0 && q.downstream > 1.0 && q.lateral > 1.0 && (0.0..1.0).contains(&q.offset)) {
            return bad("square: need h > 0, distances > 1 and 0 <= offset < 1".into());
        }
        let fs = &self.fsi;
        if !(fs.mass > 0.0 && fs.stiffness >= 0.0 && fs.damping >= 0.0) {
            return bad("fsi: need mass > 0 and non-negative stiffness and damping".into());
        }
        self.coupling().validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.study == Study::Fsi && s.steady {
            return bad("the fsi study needs solver.steady = false and solver.dt".into());
        }
        Ok(())
    }

    /// Fluid parameters with the viscosity set by the Reynolds number for
    /// reference velocity times length `ul`.
    pub fn fluid_params(&self, ul: f64) -> FluidParams {
        let f = &self.fluid;
        FluidParams {
            rho: f.rho,
            mu: f.rho * ul / f.re,
            gamma_n: f.gamma_n,
            gamma_g: f.gamma_g,
            c_i: f.c_i,
            lsic: f.lsic,
            tau_dt: f.tau_dt,
            ..FluidParams::default()
        }
    }

    pub fn newton(&self) -> NewtonOptions {
        NewtonOptions {
            rtol: self.solver.rtol,
            max_iterations: self.solver.max_iterations,
            reuse_factorization: self.solver.reuse_factorization,
        }
    }

    pub fn coupling(&self) -> CouplingConfig {
        CouplingConfig { beta: self.fsi.beta, predictor_order: self.fsi.predictor_order }
    }

    pub fn square_setup(&self) -> SquareSetup {
        let q = &self.square;
        SquareSetup {
            h: q.h,
            degree: self.degree,
            upstream: q.upstream,
            downstream: q.downstream,
            lateral: q.lateral,
            re: self.fluid.re,
            offset: q.offset,
        }
    }

    /// Every (method, level) pair to run, ST first.
    pub fn cut_methods(&self) -> Vec<CutMethod> {
        let mut out = Vec::new();
        if self.methods.contains(&MethodKind::St) {
            out.push(CutMethod::Subtriangulation);
        }
        if self.methods.contains(&MethodKind::Ai) {
            let mut levels = self.levels.clone();
            levels.sort_unstable();
            levels.dedup();
            out.extend(levels.into_iter().map(|level| CutMethod::Adaptive { level }));
        }
        out
    }
}

fn one_line(message: &str, span: Option<std::ops::Range<usize>>, text: &str) -> String {
    let line = span.map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
    match line {
        Some(l) => format!("line {l}: {message}"),
        None => message.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_kovasznay_fills_defaults() {
        let c = RunConfig::parse("study = \"kovasznay\"").unwrap();
        assert_eq!(c, RunConfig::new(Study::Kovasznay));
        assert_eq!(c.meshes, vec![31, 61, 121]);
        assert_eq!(c.fluid.re, 40.0);
        assert!(c.solver.steady);
    }

    #[test]
    fn unknown_key_is_named() {
        for text in ["study = \"kovasznay\"\nfo = \"bar\"", "study = \"square\"\n[fluid]\nfo = 1"] {
            let msg = RunConfig::parse(text).unwrap_err().to_string();
            assert!(msg.contains("`fo`"), "{msg}");
            assert!(!msg.contains('\n'), "{msg}");
        }
    }

    #[test]
    fn contradictions_and_ranges() {
        let cases = [
            "study = \"square\"\n[solver]\nsteady = true\ndt = 0.1",
            "study = \"square\"\n[solver]\nsteady = false",
            "study = \"kovasznay\"\nlevels = [13]",
            "study = \"kovasznay\"\ndegree = 3",
            "study = \"kovasznay\"\ndegree = \"one\"",
            "study = \"nonsense\"",
            "degree = 1",
            "study = \"fsi\"",
        ];
        for text in cases {
            assert!(matches!(RunConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
        let msg = RunConfig::parse(cases[0]).unwrap_err().to_string();
        assert!(msg.contains("steady") && msg.contains("dt"), "{msg}");
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::new(Study::Fsi);
        c.levels = vec![3, 5];
        c.square.h = 0.125;
        c.fluid.lsic = true;
        let again = RunConfig::parse(&c.to_text()).unwrap();
        assert_eq!(again, c);
        let k = RunConfig::new(Study::Kovasznay);
        assert_eq!(RunConfig::parse(&k.to_text()).unwrap(), k);
    }

    #[test]
    fn methods_expand_levels() {
        let c = RunConfig::parse("study = \"kovasznay\"\nlevels = [4, 2, 4]").unwrap();
        assert_eq!(
            c.cut_methods(),
            vec![CutMethod::Subtriangulation, CutMethod::Adaptive { level: 2 }, CutMethod::Adaptive { level: 4 }]
        );
    }
}
