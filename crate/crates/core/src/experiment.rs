//! Experiment suites: configuration, per-record pipeline and CSV output.

use std::fmt::{self, Write as _};
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use crate::analysis::{energy_error, finest_slope, scaled_condition_number, scaled_condition_number_dense, DENSE_LIMIT};
use crate::assembly::{assemble_load, assemble_stiffness};
use crate::error::{Error, Result};
use crate::linalg::solve_neumann;
use crate::mesh::{CrackMesh, Mesh, Square};
use crate::problems::{CrackProblem, Problem, SmoothProblem};
use crate::pu::FlatTop;
use crate::quadrature::{quadrature_rules, Purpose, QuadratureSettings};
use crate::spaces::{ApproximationSpace, Method};

pub const CSV_HEADER: &str = "method,k,mesh,N,h,dof,EE,SCN,assembly_s,solve_s";

/// Relative residual at which the CG solve stops.
pub const SOLVER_TOLERANCE: f64 = 1e-12;

/// Number of finest mesh sizes used for the slope summaries.
pub const SLOPE_POINTS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Smooth,
    Crack,
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Smooth => "smooth",
            Suite::Crack => "crack",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MeshChoice {
    Uniform,
    Perturbed,
}

impl MeshChoice {
    pub fn tag(self) -> &'static str {
        match self {
            MeshChoice::Uniform => "uniform",
            MeshChoice::Perturbed => "perturbed",
        }
    }
}

impl FromStr for MeshChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" | "um" => Ok(MeshChoice::Uniform),
            "perturbed" | "pm" => Ok(MeshChoice::Perturbed),
            other => Err(Error::InvalidParameter(format!("unknown mesh kind '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub suite: Suite,
    pub methods: Vec<Method>,
    /// Ignored by the crack suite, which is degree 1 throughout.
    pub degrees: Vec<u32>,
    /// Ignored by the crack suite.
    pub meshes: Vec<MeshChoice>,
    /// `N` for the smooth suite, `j` with `n = 2^(j+1) + 1` for the crack suite.
    pub sizes: Vec<usize>,
    pub sigma: f64,
    pub ft_exponent: u32,
    pub radius: f64,
    pub seed: u64,
    /// Node perturbation as a fraction of `h`.
    pub perturbation: f64,
    pub quadrature: QuadratureSettings,
    pub scn: bool,
    /// Wall-clock columns; when off they are written as 0 so output is reproducible.
    pub timings: bool,
}

impl ExperimentConfig {
    pub fn smooth() -> Self {
        Self {
            suite: Suite::Smooth,
            methods: Method::SMOOTH.to_vec(),
            degrees: vec![1, 2, 3],
            meshes: vec![MeshChoice::Uniform, MeshChoice::Perturbed],
            sizes: vec![8, 16, 32, 64],
            sigma: 0.2,
            ft_exponent: 1,
            radius: 0.25,
            seed: 2024,
            perturbation: 0.1,
            quadrature: QuadratureSettings::default(),
            scn: true,
            timings: true,
        }
    }

    pub fn crack() -> Self {
        Self {
            suite: Suite::Crack,
            methods: Method::CRACK.to_vec(),
            degrees: vec![1],
            meshes: vec![MeshChoice::Uniform],
            sizes: vec![1, 2, 3, 4, 5],
            ..Self::smooth()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        for &m in &self.methods {
            let allowed = match self.suite {
                Suite::Smooth => Method::SMOOTH.contains(&m),
                Suite::Crack => Method::CRACK.contains(&m),
            };
            if !allowed {
                return bad(format!("method {m} is not part of the {} suite", self.suite));
            }
        }
        if self.suite == Suite::Smooth {
            if let Some(k) = self.degrees.iter().find(|k| !(1..=3).contains(*k)) {
                return bad(format!("degree {k} is not in 1..=3"));
            }
            if let Some(n) = self.sizes.iter().find(|n| **n == 0) {
                return bad(format!("mesh size {n} must be positive"));
            }
        } else if let Some(j) = self.sizes.iter().find(|j| **j == 0 || **j > 12) {
            return bad(format!("crack level j = {j} is not in 1..=12"));
        }
        FlatTop::new(self.sigma, self.ft_exponent)?;
        if !(self.radius > 0.0 && self.radius <= 1.0) {
            return bad(format!("radius {} is not in (0, 1]", self.radius));
        }
        if !(0.0..=0.25).contains(&self.perturbation) {
            return bad(format!("perturbation {} is not in [0, 0.25]", self.perturbation));
        }
        Ok(())
    }

    /// Record keys in output order.
    pub fn keys(&self) -> Vec<RecordKey> {
        let mut out = Vec::new();
        match self.suite {
            Suite::Smooth => {
                for &mesh in &self.meshes {
                    for &method in &self.methods {
                        for &k in &self.degrees {
                            for &n in &self.sizes {
                                out.push(RecordKey { method, k, mesh: mesh.tag(), n });
                            }
                        }
                    }
                }
            }
            Suite::Crack => {
                for &method in &self.methods {
                    for &j in &self.sizes {
                        out.push(RecordKey { method, k: 1, mesh: "crack", n: crack_divisions(j) });
                    }
                }
            }
        }
        out
    }
}

/// `n = 2^(j+1) + 1`
pub fn crack_divisions(j: usize) -> usize {
    (1usize << (j + 1)) + 1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RecordKey {
    pub method: Method,
    pub k: u32,
    pub mesh: &'static str,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRecord {
    pub method: Method,
    pub k: u32,
    pub mesh: String,
    pub n: usize,
    pub h: f64,
    pub dof: usize,
    pub ee: f64,
    pub scn: f64,
    pub assembly_seconds: f64,
    pub solve_seconds: f64,
    pub error: Option<String>,
}

impl ExperimentRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:e},{},{:e},{:e},{:.3},{:.3}",
            self.method, self.k, self.mesh, self.n, self.h, self.dof, self.ee, self.scn, self.assembly_seconds, self.solve_seconds
        )
    }
}

/// Everything a single record produces, for callers that need more than the row.
pub struct Solution {
    pub space: ApproximationSpace,
    pub coefficients: Vec<f64>,
    pub iterations: usize,
}

struct Timer {
    on: bool,
    start: Instant,
}

impl Timer {
    fn new(on: bool) -> Self {
        Self { on, start: Instant::now() }
    }

    fn lap(&mut self) -> f64 {
        let t = self.start.elapsed().as_secs_f64();
        self.start = Instant::now();
        if self.on {
            t
        } else {
            0.0
        }
    }
}

/// Runs one record. Errors are returned, not turned into rows.
pub fn run_record(config: &ExperimentConfig, key: RecordKey) -> Result<(ExperimentRecord, Solution)> {
    let mut timer = Timer::new(config.timings);
    let pu = FlatTop::new(config.sigma, config.ft_exponent)?;
    let (space, crack, problem): (ApproximationSpace, Option<CrackMesh>, Box<dyn Problem>) = match key.mesh {
        "crack" => {
            let crack = CrackMesh::new(key.n, config.radius)?;
            let space = ApproximationSpace::for_crack(key.method, &crack)?;
            (space, Some(crack), Box::new(CrackProblem::new()))
        }
        tag => {
            let mesh = if tag == MeshChoice::Perturbed.tag() {
                Mesh::perturbed(key.n, Square::unit(), config.perturbation, config.seed)?
            } else {
                Mesh::uniform(key.n, Square::unit())?
            };
            let space = ApproximationSpace::smooth(key.method, &mesh, key.k, pu)?;
            (space, None, Box::new(SmoothProblem))
        }
    };
    let q = &config.quadrature;
    let rules = quadrature_rules(&space, crack.as_ref(), Purpose::Assembly, q);
    let a = assemble_stiffness(&space, &rules)?;
    let b = assemble_load(&space, problem.as_ref(), &rules, crack.as_ref(), q)?;
    drop(rules);
    let assembly_seconds = timer.lap();
    let (x, report) = solve_neumann(&a, &b, space.constant_vector(), SOLVER_TOLERANCE)?;
    let solve_seconds = timer.lap();
    let error_rules = quadrature_rules(&space, crack.as_ref(), Purpose::Error, q);
    let ee = energy_error(&space, x.as_slice(), problem.as_ref(), &error_rules)?.relative();
    drop(error_rules);
    let scn = if config.scn {
        let null = space.constant_vector();
        match scaled_condition_number(&a, Some(null)) {
            Ok(r) => r.scn(),
            Err(e) if a.dim() <= DENSE_LIMIT => {
                log::warn!("{} k={} N={}: {e}; using the dense eigensolver", key.method, key.k, key.n);
                scaled_condition_number_dense(&a, Some(null))?.scn()
            }
            Err(e) => return Err(e),
        }
    } else {
        f64::NAN
    };
    let record = ExperimentRecord {
        method: key.method,
        k: key.k,
        mesh: key.mesh.to_string(),
        n: key.n,
        h: space.mesh().h(),
        dof: space.dof_count(),
        ee,
        scn,
        assembly_seconds,
        solve_seconds,
        error: None,
    };
    Ok((record, Solution { space, coefficients: x.as_slice().to_vec(), iterations: report.iterations }))
}

fn error_record(config: &ExperimentConfig, key: RecordKey, err: &Error) -> ExperimentRecord {
    let h = match config.suite {
        Suite::Smooth => 1.0 / key.n as f64,
        Suite::Crack => 2.0 / key.n as f64,
    };
    ExperimentRecord {
        method: key.method,
        k: key.k,
        mesh: key.mesh.to_string(),
        n: key.n,
        h,
        dof: 0,
        ee: f64::NAN,
        scn: f64::NAN,
        assembly_seconds: 0.0,
        solve_seconds: 0.0,
        error: Some(err.to_string()),
    }
}

/// Runs every record of the suite in configuration order. Failed records
/// become error rows.
pub fn run_suite(config: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    config.validate()?;
    Ok(config
        .keys()
        .into_iter()
        .map(|key| match run_record(config, key) {
            Ok((r, _)) => {
                log::info!("{} k={} {} N={}: dof={} EE={:e} SCN={:e}", r.method, r.k, r.mesh, r.n, r.dof, r.ee, r.scn);
                r
            }
            Err(e) => {
                log::error!("{} k={} {} N={}: {e}", key.method, key.k, key.mesh, key.n);
                error_record(config, key, &e)
            }
        })
        .collect())
}

/// Fitted slopes of one curve, over the finest `SLOPE_POINTS` sizes.
#[derive(Debug)]
pub struct SlopeSummary {
    pub method: Method,
    pub k: u32,
    pub mesh: String,
    pub ee: Result<f64>,
    pub scn: Result<f64>,
}

pub fn slope_summaries(records: &[ExperimentRecord]) -> Vec<SlopeSummary> {
    let mut curves: Vec<(Method, u32, String)> = Vec::new();
    for r in records {
        let c = (r.method, r.k, r.mesh.clone());
        if !curves.contains(&c) {
            curves.push(c);
        }
    }
    curves
        .into_iter()
        .map(|(method, k, mesh)| {
            let ok: Vec<&ExperimentRecord> =
                records.iter().filter(|r| r.method == method && r.k == k && r.mesh == mesh && r.error.is_none()).collect();
            let ee: Vec<(f64, f64)> = ok.iter().map(|r| (r.h, r.ee)).collect();
            let scn: Vec<(f64, f64)> = ok.iter().filter(|r| r.scn.is_finite()).map(|r| (r.h, r.scn)).collect();
            SlopeSummary { method, k, mesh, ee: finest_slope(&ee, SLOPE_POINTS), scn: finest_slope(&scn, SLOPE_POINTS) }
        })
        .collect()
}

fn slope_text(s: &Result<f64>) -> String {
    match s {
        Ok(v) => format!("{v:.4}"),
        Err(Error::DegenerateData(m)) if m == "exact" => "exact".into(),
        Err(_) => "nan".into(),
    }
}

/// CSV text: header, one row per record, then `#error,` and `#slope,` lines.
pub fn to_csv(records: &[ExperimentRecord]) -> String {
    let mut s = String::new();
    writeln!(s, "{CSV_HEADER}").unwrap();
    for r in records {
        writeln!(s, "{}", r.csv_row()).unwrap();
    }
    for r in records {
        if let Some(e) = &r.error {
            writeln!(s, "#error,{},{},{},{},{}", r.method, r.k, r.mesh, r.n, e.replace(['\n', ','], ";")).unwrap();
        }
    }
    for sl in slope_summaries(records) {
        writeln!(s, "#slope,{},{},{},EE,{},SCN,{}", sl.method, sl.k, sl.mesh, slope_text(&sl.ee), slope_text(&sl.scn)).unwrap();
    }
    s
}

pub fn write_csv<W: Write>(records: &[ExperimentRecord], mut w: W) -> Result<()> {
    w.write_all(to_csv(records).as_bytes())?;
    Ok(())
}
