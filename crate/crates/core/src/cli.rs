//! Command-line front end. `run` returns the exit code and the report so
//! the commands can be tested without spawning processes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::adt::adte_residual;
use crate::cdyb::cdybe_residual_both;
use crate::element::SparseElement;
use crate::error::{Error, Result};
use crate::gauge::{find_gauge, reduce_classical, GaugeOutcome};
use crate::quantizer::{
    dte_residual, j_to_k, k_to_j, semiclassical_check, solve_adte, taylor_rescale, valuation_certificate, Choices,
    RMatrix, SolveOptions,
};
use crate::schema::{parse_algebra, parse_twist, write_layered};
use crate::suite::{degree_bound, load_document, load_pair, run_all};
use crate::uea::Uea;

#[derive(Debug, Parser)]
#[command(name = "dyntwist", version, about = "Quantize classical dynamical r-matrices into dynamical twists")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Job {
    /// Document with an `algebra` block
    #[arg(long)]
    pub algebra: Option<PathBuf>,
    /// Document with an `rmatrix` block (defaults to the algebra file)
    #[arg(long)]
    pub rmatrix: Option<PathBuf>,
    /// Truncation order in hbar
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    /// Truncation degree in S(h) (defaults to the r-matrix file, then the order)
    #[arg(long)]
    pub shdeg: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub repair_depth: usize,
    /// Seed: for `quantize`, picks a seeded gauge-equivalent representative
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file for twists, gauges and bivectors
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the classical dynamical Yang-Baxter equation
    CheckRmatrix(Job),
    /// Solve for a twist order by order
    Quantize(Job),
    /// Recompute ADTE, DTE and semiclassical residuals of a twist file
    VerifyTwist {
        #[command(flatten)]
        job: Job,
        twist: PathBuf,
    },
    /// Search for a gauge transformation between two twist files
    GaugeEquiv {
        #[command(flatten)]
        job: Job,
        first: PathBuf,
        second: PathBuf,
    },
    /// Reduce the rescaled r-matrix to an invariant bivector on m
    ReduceClassical(Job),
    /// Run the acceptance suite
    PropSuite(Job),
}

/// Exit status of a command.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass = 0,
    Residual = 1,
    Input = 2,
    Solver = 3,
}

fn status_of(e: &Error) -> Status {
    match e {
        Error::Schema { .. }
        | Error::Io(_)
        | Error::Algebra(_)
        | Error::Decomposition(_)
        | Error::SpaceMismatch { .. }
        | Error::GradingMismatch { .. }
        | Error::NotInvariant(_)
        | Error::NotInImage(_) => Status::Input,
        Error::NotMaurerCartan(_) | Error::ValuationViolated(_) => Status::Residual,
        _ => Status::Solver,
    }
}

struct Report {
    text: String,
    status: Status,
}

impl Report {
    fn new(title: String) -> Self {
        Report { text: title + "\n", status: Status::Pass }
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }

    /// A named residual; nonzero fails the run.
    fn residual(&mut self, name: &str, r: &SparseElement) {
        if r.is_zero() {
            self.line(format!("{name}: 0"));
        } else {
            self.line(format!("{name}: {} nonzero terms", r.len()));
            self.status = Status::Residual;
        }
    }

    fn check(&mut self, name: &str, ok: bool) {
        self.line(format!("{name}: {}", if ok { "pass" } else { "FAIL" }));
        if !ok {
            self.status = Status::Residual;
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_out(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn algebra_path(job: &Job) -> Result<&Path> {
    job.algebra.as_deref().ok_or_else(|| Error::Io("--algebra is required".into()))
}

fn load_rmatrix(job: &Job) -> Result<(Arc<Uea>, RMatrix)> {
    let alg = read(algebra_path(job)?)?;
    match &job.rmatrix {
        Some(p) => load_pair(&alg, &read(p)?, job.order, job.shdeg),
        None => load_document(&alg, job.order, job.shdeg),
    }
}

fn load_algebra(job: &Job) -> Result<Arc<Uea>> {
    let lie = parse_algebra(&read(algebra_path(job)?)?)?;
    Ok(Arc::new(Uea::new(Arc::new(lie), degree_bound(job.order))))
}

/// K from a twist file, converting from the formal block when needed.
fn load_k(u: &Uea, path: &Path, n: usize) -> Result<SparseElement> {
    let doc = parse_twist(&read(path)?, u.lie())?;
    match (doc.k, doc.j) {
        (Some(k), _) => Ok(k.truncate(n)),
        (None, Some(j)) => j_to_k(u, &j, n),
        _ => Err(Error::Schema { line: 0, msg: format!("{} holds no twist", path.display()) }),
    }
}

fn header(u: &Uea, command: &str, n: usize) -> String {
    format!("{command}: {}, order {n}", u.lie())
}

fn check_rmatrix(job: &Job) -> Result<Report> {
    let (u, rho) = load_rmatrix(job)?;
    let mut r = Report::new(header(&u, "check-rmatrix", job.order));
    r.line(format!("S(h) truncation: {}", rho.truncation()));
    let (determined, tail) = rho.cdybe_split(&u)?;
    r.residual("CDYBE residual below the truncation degree", &determined);
    r.line(format!("terms at or above the truncation degree: {}", tail.len()));
    let (_, _, agree) = cdybe_residual_both(&u, rho.body())?;
    r.check("tensor and Maurer-Cartan forms agree", agree);
    Ok(r)
}

fn quantize(job: &Job) -> Result<Report> {
    let (u, rho) = load_rmatrix(job)?;
    let n = job.order;
    let mut r = Report::new(header(&u, "quantize", n));
    let (determined, _) = rho.cdybe_split(&u)?;
    r.residual("CDYBE residual below the truncation degree", &determined);
    let choices = job.seed.map_or(Choices::Canonical, Choices::Regauged);
    let opts = SolveOptions { order: n, repair_depth: job.repair_depth, choices };
    let t = solve_adte(&u, &rho, &opts)?;
    r.residual("ADTE residual", &adte_residual(&u, &t.k, n)?);
    r.line(format!("valuation certificate: {:?}", t.certificate));
    r.line(format!("repaired orders: {:?}", t.repaired));
    r.residual("DTE residual", &dte_residual(&u, &t.j, n)?);
    let (ok, _) = semiclassical_check(&t.j, &rho, n.saturating_sub(1))?;
    r.check("semiclassical limit", ok);
    r.check("K to J to K round trip", j_to_k(&u, &t.j, n)? == t.k);
    let doc = format!("{}\n{}", write_layered(u.lie(), "twist", &t.k, n), write_layered(u.lie(), "formal", &t.j, n));
    match &job.out {
        Some(p) => {
            write_out(p, &doc)?;
            r.line(format!("twist written to {}", p.display()));
        }
        None => r.line(doc.trim_end()),
    }
    Ok(r)
}

fn verify_twist(job: &Job, path: &Path) -> Result<Report> {
    let u = load_algebra(job)?;
    let doc = parse_twist(&read(path)?, u.lie())?;
    let n = doc.order.unwrap_or(job.order);
    let mut r = Report::new(header(&u, "verify-twist", n));
    let k = load_k(&u, path, n)?;
    r.residual("ADTE residual", &adte_residual(&u, &k, n)?);
    let j = match valuation_certificate(&k, n) {
        Ok(cert) => {
            r.line(format!("valuation certificate: {cert:?}"));
            k_to_j(&u, &k, n)?
        }
        Err(e) => {
            r.line(format!("valuation certificate: {e}"));
            r.status = Status::Residual;
            return Ok(r);
        }
    };
    r.residual("DTE residual", &dte_residual(&u, &j, n)?);
    if let Some(file_j) = doc.j {
        r.check("formal block matches K", file_j.truncate(n) == j);
    }
    if let Some(p) = &job.rmatrix {
        let (_, rho) = load_pair(&read(algebra_path(job)?)?, &read(p)?, n, job.shdeg)?;
        let (ok, _) = semiclassical_check(&j, &rho, n.saturating_sub(1))?;
        r.check("semiclassical limit", ok);
    }
    Ok(r)
}

fn gauge_equiv(job: &Job, first: &Path, second: &Path) -> Result<Report> {
    let u = load_algebra(job)?;
    let n = job.order;
    let mut r = Report::new(header(&u, "gauge-equiv", n));
    let (k1, k2) = (load_k(&u, first, n)?, load_k(&u, second, n)?);
    for (name, k) in [("first", &k1), ("second", &k2)] {
        let res = adte_residual(&u, k, n)?;
        r.residual(&format!("ADTE residual of the {name} twist"), &res);
    }
    if r.status != Status::Pass {
        return Ok(r);
    }
    match find_gauge(&u, &k1, &k2, n)? {
        GaugeOutcome::Equivalent(q) => {
            r.line("equivalent: yes");
            let doc = write_layered(u.lie(), "gauge", &q, n);
            match &job.out {
                Some(p) => {
                    write_out(p, &doc)?;
                    r.line(format!("gauge written to {}", p.display()));
                }
                None => r.line(doc.trim_end()),
            }
        }
        GaugeOutcome::NotEquivalent { order, obstruction } => {
            r.line(format!("equivalent: no, obstruction at order {order} with {} terms", obstruction.len()));
            r.status = Status::Residual;
        }
    }
    Ok(r)
}

fn reduce(job: &Job) -> Result<Report> {
    let (u, rho) = load_rmatrix(job)?;
    let n = job.order;
    let mut r = Report::new(header(&u, "reduce-classical", n));
    let alpha = taylor_rescale(&u, &rho, n)?;
    let red = reduce_classical(u.clone(), &alpha, n)?;
    let mut doc = format!("bivector\norder {n}\n");
    for layer in 1..=n {
        for (k, c) in red.pi.hbar_layer(layer).terms() {
            let names: Vec<&str> = k[0].iter().map(|&i| u.lie().name(i)).collect();
            writeln!(doc, "{} hbar^{layer} * {}", c.coeff(0), names.join("^")).unwrap();
        }
    }
    doc.push_str("end\n");
    r.line(format!("gauge steps: {}", red.gauges.iter().filter(|g| !g.is_zero()).count()));
    r.line("straightened element equals the transport of pi: pass");
    match &job.out {
        Some(p) => {
            write_out(p, &doc)?;
            r.line(format!("bivector written to {}", p.display()));
        }
        None => r.line(doc.trim_end()),
    }
    Ok(r)
}

fn prop_suite(job: &Job) -> Report {
    let seed = job.seed.unwrap_or(0);
    let mut r = Report::new(format!("prop-suite: seed {seed}"));
    for v in run_all(seed) {
        if !v.passed {
            r.status = Status::Residual;
        }
        r.line(v.to_string());
    }
    r
}

/// Execute a parsed command line.
pub fn run(cli: &Cli) -> (Status, String) {
    let result = match &cli.command {
        Command::CheckRmatrix(job) => check_rmatrix(job),
        Command::Quantize(job) => quantize(job),
        Command::VerifyTwist { job, twist } => verify_twist(job, twist),
        Command::GaugeEquiv { job, first, second } => gauge_equiv(job, first, second),
        Command::ReduceClassical(job) => reduce(job),
        Command::PropSuite(job) => Ok(prop_suite(job)),
    };
    match result {
        Ok(mut r) => {
            let verdict = if r.status == Status::Pass { "pass" } else { "FAIL" };
            r.line(format!("result: {verdict}"));
            (r.status, r.text)
        }
        Err(e) => (status_of(&e), format!("error {}: {e}\n", e.code())),
    }
}
