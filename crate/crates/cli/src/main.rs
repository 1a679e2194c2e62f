use bizoo_core::grid::{Bc, Dir, DomainFile, GridDomain, LabelRule, Shape};
use bizoo_core::harness::convergence::ALLOWED_LEVELS;
use bizoo_core::harness::expr::GRAMMAR;
use bizoo_core::harness::{
    constants_audit, edge_field, parse_expression, run_checks, run_convergence, write_field_csv, ConvergenceProblem,
    Manufactured, SolveReport,
};
use bizoo_core::laplace::solve_laplace;
use bizoo_core::linalg::SolverConfig;
use bizoo_core::operators::OperatorCatalog;
use bizoo_core::toolbox::{helmholtz_decompose, make_pair};
use bizoo_core::zoo::{classify_zoo, solve_zoo, Status};
use bizoo_core::Error;
use clap::{Parser, Subcommand};
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

/// `println!` that ignores a closed stdout, e.g. when piped into `head`.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

const EXIT_OTHER: u8 = 1;
const EXIT_COMPATIBILITY: u8 = 2;
const EXIT_FORBIDDEN: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "bizoo", version, about = "Biharmonic problems on masked 2D cell grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Domain files.
    Domain {
        #[command(subcommand)]
        command: DomainCommand,
    },
    /// Solve one zoo or Laplace problem.
    Solve {
        /// Zoo label, item numeral, common name, or laplace_<kind>.
        #[arg(long)]
        problem: String,
        /// Domain file or shortcut such as square:32.
        #[arg(long)]
        domain: String,
        /// Right-hand side in x and y.
        #[arg(long)]
        rhs: String,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the solution as CSV.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// The zoo table.
    Zoo {
        #[command(subcommand)]
        command: ZooCommand,
    },
    /// Discrete Friedrichs and Poincaré constants against d/π.
    Constants {
        #[arg(long)]
        domain: String,
    },
    /// Split an edge field into gradient, harmonic and curl parts.
    Helmholtz {
        #[arg(long)]
        domain: String,
        /// Two expressions, `fx,fy`.
        #[arg(long)]
        field: String,
    },
    /// Grid-convergence study on the unit square.
    Convergence {
        /// Defaults to the problem the manufactured solution was built for.
        #[arg(long)]
        problem: Option<String>,
        #[arg(long)]
        manufactured: String,
        #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
        levels: Vec<usize>,
        /// Print the table as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run the invariant suite.
    Check,
}

#[derive(Subcommand)]
enum DomainCommand {
    /// Write a domain file.
    Make {
        /// square, rectangle, lshape or annulus.
        #[arg(long, default_value = "square")]
        shape: String,
        /// Cells per unit length.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        width: usize,
        #[arg(long, default_value_t = 1)]
        height: usize,
        /// Sides carrying Neumann faces: left, right, bottom, top or all.
        #[arg(long, value_delimiter = ',')]
        neumann: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum ZooCommand {
    List,
}

/// Errors that end the process, with their exit code.
enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. } | Error::UnknownIdentifier { .. } => Failure::Usage(e.to_string()),
            e => Failure::Core(e),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            if code != 0 {
                eprintln!("expression grammar: {GRAMMAR}");
            }
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("expression grammar: {GRAMMAR}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Compatibility { .. } => EXIT_COMPATIBILITY,
                Error::ForbiddenComposition { .. } => EXIT_FORBIDDEN,
                _ => EXIT_OTHER,
            })
        }
    }
}

fn run(command: Command) -> Result<u8, Failure> {
    let cfg = SolverConfig::from_env();
    match command {
        Command::Domain {
            command: DomainCommand::Make { shape, n, width, height, neumann, out },
        } => {
            let shape = match shape.as_str() {
                "square" => Shape::Square,
                "rectangle" | "rect" => Shape::Rectangle { width, height },
                "lshape" | "l" => Shape::LShape,
                "annulus" => Shape::Annulus,
                other => return Err(Failure::Usage(format!("unknown shape '{other}'"))),
            };
            let mut rules = Vec::new();
            for side in &neumann {
                rules.push(match side.as_str() {
                    "all" => LabelRule::All(Bc::Neumann),
                    s => LabelRule::Side(side_dir(s)?, Bc::Neumann),
                });
            }
            let d = GridDomain::build(&shape, n, &rules)?;
            fs::write(&out, serde_json::to_string(&d.to_file()).map_err(Error::from)?).map_err(Error::from)?;
            print_domain(&d);
            Ok(0)
        }
        Command::Solve { problem, domain, rhs, out, dump } => {
            let problem = ConvergenceProblem::parse(&problem)?;
            let expr = parse_expression(&rhs)?;
            let cat = OperatorCatalog::new(load_domain(&domain)?)?;
            let d = cat.domain().clone();
            let f = expr.sample(&d);
            let start = Instant::now();
            let (report, solution) = match problem {
                ConvergenceProblem::Zoo(p) => {
                    let r = solve_zoo(p, &cat, &f, &cfg)?;
                    (SolveReport::from_zoo(&r, &d, elapsed_ms(start)), r.solution)
                }
                ConvergenceProblem::Laplace(k) => {
                    let r = solve_laplace(k, &cat, &f, &cfg)?;
                    (SolveReport::from_laplace(&r, &d, elapsed_ms(start)), r.solution)
                }
            };
            let json = report.to_json()?;
            match out {
                Some(path) => {
                    fs::write(&path, json).map_err(Error::from)?;
                    out!("{}: {} iterations, report in {}", report.problem, report.iterations, path.display());
                }
                None => out!("{json}"),
            }
            if let Some(path) = dump {
                let file = fs::File::create(&path).map_err(Error::from)?;
                write_field_csv(&d, &solution, BufWriter::new(file))?;
            }
            Ok(0)
        }
        Command::Zoo { command: ZooCommand::List } => {
            let rows = classify_zoo();
            out!(
                "{:<16} {:<5} {:<14} {:<11} {:<10} adjoint",
                "label", "item", "composition", "data", "status"
            );
            for r in &rows {
                let status = match &r.status {
                    Status::WellPosed => "well-posed",
                    Status::Forbidden(_) => "forbidden",
                };
                out!(
                    "{:<16} {:<5} {:<14} {:<11} {:<10} {}",
                    r.label,
                    r.item.unwrap_or("-"),
                    r.composition,
                    r.data_class,
                    status,
                    r.adjoint_partner
                );
            }
            let good = rows.iter().filter(|r| r.status == Status::WellPosed).count();
            out!("{} rows, {good} well-posed, {} forbidden", rows.len(), rows.len() - good);
            Ok(0)
        }
        Command::Constants { domain } => {
            let cat = OperatorCatalog::new(load_domain(&domain)?)?;
            let a = constants_audit(&cat, &cfg)?;
            out!("{}", serde_json::to_string_pretty(&a).map_err(Error::from)?);
            Ok(if a.bound_ok { 0 } else { EXIT_OTHER })
        }
        Command::Helmholtz { domain, field } => {
            let (fx, fy) = field
                .split_once(',')
                .ok_or_else(|| Failure::Usage("--field takes two expressions separated by ','".into()))?;
            let (fx, fy) = (parse_expression(fx)?, parse_expression(fy)?);
            let cat = OperatorCatalog::new(load_domain(&domain)?)?;
            let g = edge_field(&cat, |x, y| fx.eval(x, y), |x, y| fy.eval(x, y))?;
            let p0 = make_pair(cat.gradient().clone())?;
            let p1 = make_pair(cat.curl().clone())?;
            let s = helmholtz_decompose(&p0, &p1, &g, &cfg)?;
            out!("input       norm {:.6e}", g.norm());
            out!("gradient    norm {:.6e}  dim {}", s.range.norm(), s.dim_range);
            out!("harmonic    norm {:.6e}  dim {}", s.cohomology.norm(), s.dim_cohomology);
            out!("curl        norm {:.6e}  dim {}", s.corange.norm(), s.dim_corange);
            out!("reconstruction defect {:.3e}", s.reconstruction_defect());
            out!("orthogonality defect  {:.3e}", s.orthogonality_defect());
            Ok(0)
        }
        Command::Convergence { problem, manufactured, levels, json } => {
            let m = Manufactured::parse(&manufactured).map_err(|e| Failure::Usage(e.to_string()))?;
            let p = match problem {
                Some(p) => ConvergenceProblem::parse(&p)?,
                None => m.default_problem(),
            };
            if let Some(bad) = levels.iter().find(|l| !ALLOWED_LEVELS.contains(l)) {
                return Err(Failure::Usage(format!("level {bad} not in {ALLOWED_LEVELS:?}")));
            }
            let t = run_convergence(p, m, &levels, &cfg)?;
            if json {
                out!("{}", serde_json::to_string_pretty(&t).map_err(Error::from)?);
            } else {
                out!("{}", t.render().trim_end());
            }
            Ok(0)
        }
        Command::Check => {
            let outcomes = run_checks();
            for o in &outcomes {
                out!("{} {:<22} {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
            }
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            out!("{} checks, {failed} failed", outcomes.len());
            Ok(if failed == 0 { 0 } else { EXIT_OTHER })
        }
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn side_dir(s: &str) -> Result<Dir, Failure> {
    match s {
        "left" => Ok(Dir::MinusX),
        "right" => Ok(Dir::PlusX),
        "bottom" => Ok(Dir::MinusY),
        "top" => Ok(Dir::PlusY),
        other => Err(Failure::Usage(format!("unknown side '{other}' (left, right, bottom, top, all)"))),
    }
}

/// A domain file, or `square:N`, `lshape:N`, `annulus:N`, `rect:WxH:N` (all Dirichlet).
fn load_domain(arg: &str) -> Result<Arc<GridDomain>, Failure> {
    if Path::new(arg).is_file() {
        let text = fs::read_to_string(arg).map_err(Error::from)?;
        let file: DomainFile = serde_json::from_str(&text).map_err(Error::from)?;
        return Ok(Arc::new(GridDomain::from_file(&file)?));
    }
    let bad = || Failure::Usage(format!("'{arg}' is neither a file nor a shortcut like square:32 or rect:3x1:16"));
    let parts: Vec<&str> = arg.split(':').collect();
    let n = |s: &str| s.parse::<usize>().map_err(|_| bad());
    let (shape, n) = match parts.as_slice() {
        ["square", k] => (Shape::Square, n(k)?),
        ["lshape", k] => (Shape::LShape, n(k)?),
        ["annulus", k] => (Shape::Annulus, n(k)?),
        ["rect", wh, k] => {
            let (w, h) = wh.split_once('x').ok_or_else(bad)?;
            (Shape::Rectangle { width: n(w)?, height: n(h)? }, n(k)?)
        }
        _ => return Err(bad()),
    };
    Ok(Arc::new(GridDomain::build(&shape, n, &[])?))
}

fn print_domain(d: &GridDomain) {
    let ring = |k| d.ring_space(k).map(|s| s.dim()).unwrap_or(0);
    out!(
        "{} cells, h = {}, {} component(s), {} hole(s), |C1| = {}, |C2| = {}",
        d.num_cells(),
        d.h(),
        d.components(),
        d.holes(),
        ring(1),
        ring(2)
    );
    for a in d.anomalies() {
        out!("note: {a}");
    }
}
