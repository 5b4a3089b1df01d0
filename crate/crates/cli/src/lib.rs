//! Command-line front end: `plinv <command> <complex.json> [options]`.
//!
//! [`run_cli`] does all the work and returns the exit code with the report,
//! so the binary and the tests share one code path.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use plinv::curvature::{curvature_matrix, fd_curvature_matrix, Realization};
use plinv::forms::{
    degree_difference, invariant, sample_invariant, select_basis, Frame, InvariantOptions,
    InvariantReport, DEFAULT_TAU_RANK,
};
use plinv::geometry::{dihedral_gradient, DEFAULT_TAU_GEOM};
use plinv::io::{parse, serialize, Parsed};
use plinv::pachner::{apply_move, parse_script};
use plinv::Error;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Relative tolerance used by `oracle` to call a match.
pub const ORACLE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "plinv", version, about = "Geometric invariant of closed oriented triangulated 3-manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Relative tolerance for rank decisions.
    #[arg(long, global = true, default_value_t = DEFAULT_TAU_RANK)]
    tol_rank: f64,
    /// Relative 6V threshold below which a tetrahedron is degenerate.
    #[arg(long, global = true, default_value_t = DEFAULT_TAU_GEOM)]
    tol_geom: f64,
    /// Gauge frame: vertex classes placed at the origin, on the x axis and in
    /// the xy plane.
    #[arg(long, global = true, num_args = 3, value_names = ["A", "B", "C"])]
    frame: Option<Vec<usize>>,
    /// Seed for sampling coordinates when the file has none.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Print a JSON object instead of text.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the gluings and report the combinatorics.
    Validate { file: PathBuf },
    /// Numeric rank and principal basis of the curvature matrix.
    Rank { file: PathBuf },
    /// Asymmetry of the single-tetrahedron and global derivative matrices.
    Reciprocity { file: PathBuf },
    /// Defect angles and the curvature matrix.
    Curvature { file: PathBuf },
    /// The invariant with its diagnostics.
    Invariant {
        file: PathBuf,
        /// Explicit principal basis as comma-separated edge classes.
        #[arg(long, value_delimiter = ',')]
        basis: Option<Vec<usize>>,
    },
    /// Compare the analytic curvature matrix with finite differences.
    Oracle { file: PathBuf },
    /// Apply a move script, reporting the invariant after every move.
    Pachner {
        file: PathBuf,
        script: PathBuf,
        /// Write the final complex and coordinates here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Exit code and the text to print.
#[derive(Debug, Clone, PartialEq)]
pub struct CliOutput {
    pub code: i32,
    pub report: String,
}

enum Failure {
    Core(Error),
    Io(String),
    /// A check ran but did not pass.
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Outcome = Result<Report, Failure>;

/// Text lines and the matching JSON object.
struct Report {
    lines: Vec<String>,
    json: Value,
}

pub fn run_cli<I, S>(argv: I) -> CliOutput
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            return CliOutput { code, report: e.render().to_string() };
        }
    };
    let json = cli.common.json;
    match dispatch(&cli) {
        Ok(r) => CliOutput {
            code: EXIT_OK,
            report: if json { format!("{:#}\n", r.json) } else { r.lines.join("\n") + "\n" },
        },
        Err(f) => {
            let (code, kind, message) = match f {
                Failure::Core(e) => (
                    if e.is_validation() { EXIT_VALIDATION } else { EXIT_NUMERIC },
                    if e.is_validation() { "validation" } else { "numeric" },
                    e.to_string(),
                ),
                Failure::Io(m) => (EXIT_VALIDATION, "validation", m),
                Failure::Check(m) => (EXIT_NUMERIC, "numeric", m),
            };
            let report = if json {
                format!("{:#}\n", json!({"error": kind, "message": message}))
            } else {
                format!("error ({kind}): {message}\n")
            };
            CliOutput { code, report }
        }
    }
}

fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Validate { file } => validate(&load(file)?, &cli.common),
        Command::Rank { file } => rank(&load(file)?, &cli.common),
        Command::Reciprocity { file } => reciprocity(&load(file)?, &cli.common),
        Command::Curvature { file } => curvature(&load(file)?, &cli.common),
        Command::Invariant { file, basis } => invariant_cmd(&load(file)?, &cli.common, basis.clone()),
        Command::Oracle { file } => oracle(&load(file)?, &cli.common),
        Command::Pachner { file, script, output } => pachner(&load(file)?, script, output.as_deref(), &cli.common),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Parsed, Failure> {
    Ok(parse(&read(path)?)?)
}

fn frame(common: &Common) -> Frame {
    match common.frame.as_deref() {
        Some(&[a, b, c]) => Frame::new(a, b, c),
        _ => Frame::default(),
    }
}

fn options(common: &Common, basis: Option<Vec<usize>>) -> InvariantOptions {
    InvariantOptions { tau_rank: common.tol_rank, frame: frame(common), basis }
}

/// The file's coordinates, or a seeded random realization.
fn realize(doc: &Parsed, common: &Common) -> Result<Realization, Failure> {
    Ok(match &doc.coords {
        Some(c) => Realization::with_tolerance(doc.complex.clone(), c.clone(), common.tol_geom)?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
            Realization::random(&doc.complex, &mut rng, common.tol_geom)?
        }
    })
}

fn source(doc: &Parsed, common: &Common) -> String {
    if doc.coords.is_some() {
        "file".into()
    } else {
        format!("seed {}", common.seed)
    }
}

fn fmt_list(v: &[usize]) -> String {
    let items: Vec<String> = v.iter().map(usize::to_string).collect();
    format!("[{}]", items.join(", "))
}

fn validate(doc: &Parsed, common: &Common) -> Outcome {
    let c = &doc.complex;
    let (v, e, f, t) = c.f_vector();
    c.check_orientable()?;
    let mut lines = vec![
        "complex ok".to_string(),
        format!("f-vector (V, E, F, T) = ({v}, {e}, {f}, {t})"),
        format!("euler characteristic = {}", c.euler_characteristic()),
        "orientable = true".to_string(),
    ];
    let mut out = json!({
        "command": "validate",
        "f_vector": [v, e, f, t],
        "euler_characteristic": c.euler_characteristic(),
        "orientable": true,
        "coordinates": doc.coords.is_some(),
    });
    if doc.coords.is_some() {
        let r = realize(doc, common)?;
        let flat = r.defects()?.max_normalized();
        lines.push(format!("max defect angle = {flat:.3e}"));
        out["max_defect"] = json!(flat);
    }
    Ok(Report { lines, json: out })
}

fn rank(doc: &Parsed, common: &Common) -> Outcome {
    let r = realize(doc, common)?;
    let a = curvature_matrix(&r)?;
    let basis = select_basis(&a, &options(common, None))?;
    let lines = vec![
        format!("realization: {}", source(doc, common)),
        format!("edge classes N = {}", a.dim()),
        format!("rank L = {}", basis.rank()),
        format!("basis C = {}", fmt_list(&basis.basis)),
        format!("f = {:e}", basis.f),
        format!("largest singular value = {:e}", basis.s_max),
        format!("threshold = {:e}", basis.threshold),
    ];
    let json = json!({
        "command": "rank",
        "edges": a.dim(),
        "rank": basis.rank(),
        "basis": basis.basis,
        "f": basis.f,
        "s_max": basis.s_max,
        "threshold": basis.threshold,
        "tol_rank": common.tol_rank,
    });
    Ok(Report { lines, json })
}

fn reciprocity(doc: &Parsed, common: &Common) -> Outcome {
    let r = realize(doc, common)?;
    let mut tet_worst: f64 = 0.0;
    for t in 0..r.complex().tet_count() {
        let g = dihedral_gradient(&r.tet_lengths(t), 0.0).map_err(|_| Error::DegenerateTet { tet: t })?;
        tet_worst = tet_worst.max(g.asymmetry() / g.max_abs());
    }
    let a = curvature_matrix(&r)?;
    let scale = a.max_abs().max(a.contribution_scale);
    let global = if scale > 0.0 { a.asymmetry() / scale } else { 0.0 };
    let lines = vec![
        format!("realization: {}", source(doc, common)),
        format!("max tetrahedron asymmetry = {tet_worst:.3e}"),
        format!("max asymmetry = {global:.3e}"),
    ];
    let json = json!({
        "command": "reciprocity",
        "tetrahedron_asymmetry": tet_worst,
        "asymmetry": global,
    });
    Ok(Report { lines, json })
}

fn curvature(doc: &Parsed, common: &Common) -> Outcome {
    let r = realize(doc, common)?;
    let defects = r.defects()?;
    let a = curvature_matrix(&r)?;
    let lnorm = r.lengths().iter().map(|x| x * x).sum::<f64>().sqrt();
    let anorm = a.matrix().norm();
    let kernel = if anorm > 0.0 { a.kernel_residual(r.lengths()) / (anorm * lnorm) } else { 0.0 };
    let mut lines = vec![
        format!("realization: {}", source(doc, common)),
        format!("max defect angle = {:.3e}", defects.max_normalized()),
        format!("kernel residual |A L| / (|A| |L|) = {kernel:.3e}"),
        "lengths:".to_string(),
    ];
    for (k, l) in r.lengths().iter().enumerate() {
        lines.push(format!("  {k}: {l}"));
    }
    lines.push("curvature matrix:".to_string());
    let rows: Vec<Vec<f64>> = (0..a.dim()).map(|j| (0..a.dim()).map(|k| a.get(j, k)).collect()).collect();
    for row in &rows {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:>12.5e}")).collect();
        lines.push(format!("  {}", cells.join(" ")));
    }
    let json = json!({
        "command": "curvature",
        "lengths": r.lengths(),
        "defects": defects.normalized,
        "max_defect": defects.max_normalized(),
        "kernel_residual": kernel,
        "matrix": rows,
    });
    Ok(Report { lines, json })
}

fn invariant_report(rep: &InvariantReport, doc_source: String) -> Report {
    let lines = vec![
        format!("I = {:.9}", rep.invariant),
        format!("realization: {doc_source}"),
        format!("rank L = {} of N = {}", rep.rank, rep.edge_count),
        format!("basis C = {}", fmt_list(&rep.basis)),
        format!("f = {:e}", rep.f),
        format!("chart dimension m = {} (vertex classes {})", rep.chart_dim, rep.vertex_count),
        format!("det J = {:e}", rep.det_jacobian),
        format!("jacobian condition (s_min/s_max) = {:.3e}", rep.jacobian_condition),
        format!("c22 = {:e}", rep.c22),
        format!("c25 = {:e}", rep.c25),
        format!("frame = ({}, {}, {})", rep.frame.a, rep.frame.b, rep.frame.c),
        format!("max asymmetry = {:.3e}", rep.max_asymmetry),
        format!("tol-rank = {:e}, tol-geom = {:e}", rep.tau_rank, rep.tau_geom),
    ];
    let json = json!({
        "command": "invariant",
        "I": rep.invariant,
        "rank": rep.rank,
        "edges": rep.edge_count,
        "vertices": rep.vertex_count,
        "basis": rep.basis,
        "f": rep.f,
        "chart_dim": rep.chart_dim,
        "det_jacobian": rep.det_jacobian,
        "jacobian_condition": rep.jacobian_condition,
        "c22": rep.c22,
        "c25": rep.c25,
        "frame": [rep.frame.a, rep.frame.b, rep.frame.c],
        "max_asymmetry": rep.max_asymmetry,
        "tol_rank": rep.tau_rank,
        "tol_geom": rep.tau_geom,
        "realization": doc_source,
    });
    Report { lines, json }
}

fn invariant_cmd(doc: &Parsed, common: &Common, basis: Option<Vec<usize>>) -> Outcome {
    let opts = options(common, basis);
    let rep = match &doc.coords {
        Some(_) => invariant(&realize(doc, common)?, &opts)?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
            sample_invariant(&doc.complex, &mut rng, common.tol_geom, &opts)?.1
        }
    };
    Ok(invariant_report(&rep, source(doc, common)))
}

fn oracle(doc: &Parsed, common: &Common) -> Outcome {
    let r = realize(doc, common)?;
    let a = curvature_matrix(&r)?;
    let mean = r.lengths().iter().sum::<f64>() / r.lengths().len() as f64;
    let h = 1e-5 * mean;
    let fd = fd_curvature_matrix(r.complex(), r.signs(), r.lengths(), h)?;
    let diff = (a.matrix() - &fd).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = a.max_abs().max(fd.iter().fold(0.0f64, |m, x| m.max(x.abs()))).max(a.contribution_scale);
    let relative = if scale > 0.0 { diff / scale } else { 0.0 };
    let pass = relative <= ORACLE_TOLERANCE;
    let lines = vec![
        format!("realization: {}", source(doc, common)),
        format!("step h = {h:e}"),
        format!("max |A - A_fd| / scale = {relative:.3e}"),
        format!("oracle {}", if pass { "agrees" } else { "DISAGREES" }),
    ];
    if !pass {
        return Err(Failure::Check(format!("analytic and finite-difference matrices differ by {relative:.3e}")));
    }
    let json = json!({"command": "oracle", "step": h, "relative_error": relative, "agrees": pass});
    Ok(Report { lines, json })
}

fn pachner(doc: &Parsed, script: &Path, output: Option<&Path>, common: &Common) -> Outcome {
    let moves = parse_script(&read(script)?)?;
    let opts = options(common, None);
    let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
    let (mut r, first) = match &doc.coords {
        Some(c) => {
            let r = Realization::with_tolerance(doc.complex.clone(), c.clone(), common.tol_geom)?;
            let rep = invariant(&r, &opts)?;
            (r, rep)
        }
        None => sample_invariant(&doc.complex, &mut rng, common.tol_geom, &opts)?,
    };
    let step_line = |label: &str, r: &Realization, rep: &InvariantReport, dd: i64| {
        let (v, e, f, t) = r.complex().f_vector();
        format!("{label}: f-vector ({v}, {e}, {f}, {t}), rank {}, degree difference {dd}, I = {:.9}", rep.rank, rep.invariant)
    };
    let dd = degree_difference(&r, common.tol_rank)?;
    let mut lines = vec![step_line("start", &r, &first, dd)];
    let mut steps = vec![json!({"move": "start", "f_vector": fvec(&r), "I": first.invariant, "degree_difference": dd})];
    for m in &moves {
        let out = apply_move(&r, m, &mut rng)?;
        r = out.realization;
        let rep = invariant(&r, &opts)?;
        let dd = degree_difference(&r, common.tol_rank)?;
        lines.push(step_line(&m.to_string(), &r, &rep, dd));
        steps.push(json!({
            "move": m.to_string(),
            "f_vector": fvec(&r),
            "I": rep.invariant,
            "degree_difference": dd,
            "new_edges": out.new_edges,
            "new_vertices": out.new_vertices,
        }));
    }
    lines.push(format!("restored original complex = {}", r.complex().is_isomorphic(&doc.complex)));
    if let Some(path) = output {
        std::fs::write(path, serialize(r.complex(), Some(r.coords())))
            .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    let json = json!({
        "command": "pachner",
        "steps": steps,
        "restored": r.complex().is_isomorphic(&doc.complex),
    });
    Ok(Report { lines, json })
}

fn fvec(r: &Realization) -> [usize; 4] {
    let (v, e, f, t) = r.complex().f_vector();
    [v, e, f, t]
}
