use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use imkg::construction::{derive_imkg2, derive_imkg3_q4, PolynomialFamily, PolynomialTarget};
use imkg::hevi::{region_query, scan_grid, DEFAULT_EXTRA_Z, DEFAULT_RHO_TOLERANCE};
use imkg::integrator::{convergence_study, integrate, NewtonConfig, Reference};
use imkg::order::{check_order3_general, DEFAULT_TOLERANCE};
use imkg::problems::{build_problem, column_problem, parse_params, problem_registry, Params};
use imkg::registry::{lookup, printed_properties, registry, RegistryEntry};
use imkg::stability::{
    classify_kg, explicit_polynomial_general, imaginary_axis_limit, stability_report, stability_report_tableau,
    COEFFICIENT_TOLERANCE,
};
use imkg::tableau::DoubleTableau;
use imkg::tableau_file::{read_tableau_file, write_tableau_file};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Analysis and integration with IMKG IMEX Runge-Kutta methods.
///
/// METHOD arguments are registry names (`IMKG232a`, `232a`) or paths to
/// tableau files.
#[derive(Parser)]
#[command(name = "imkg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Registry listing and validation.
    #[command(subcommand)]
    Methods(MethodsCmd),
    /// Linear and HEVI stability analysis.
    #[command(subcommand)]
    Stability(StabilityCmd),
    /// Construct methods from free parameters.
    #[command(subcommand)]
    Derive(DeriveCmd),
    /// Integrate a model problem and write the trajectory.
    Integrate(IntegrateArgs),
    /// Error against a reference for a list of step sizes.
    Converge(ConvergeArgs),
    /// List model problems and their parameters.
    Problems,
}

#[derive(Subcommand)]
enum MethodsCmd {
    /// Registry methods with their computed flags.
    List,
    /// Order conditions and stability properties of one method.
    Check { method: String },
}

#[derive(Subcommand)]
enum StabilityCmd {
    /// Explicit stability polynomial, imaginary-axis limit and KG class.
    Poly { method: String },
    /// Spectral radius of R_H on a grid, as CSV `x,z,rho`.
    Hmap {
        method: String,
        #[arg(long)]
        xmax: f64,
        #[arg(long, default_value_t = 50.0)]
        zmax: f64,
        #[arg(long, default_value_t = 251)]
        nx: usize,
        #[arg(long, default_value_t = 501)]
        nz: usize,
        /// Additional z samples beyond zmax.
        #[arg(long, value_delimiter = ',')]
        extra_z: Vec<f64>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Containment of T_{n0} and the smallest cone slope gamma.
    Region {
        method: String,
        #[arg(long)]
        n0: f64,
        /// Defaults to n0 + 0.5.
        #[arg(long)]
        xmax: Option<f64>,
        #[arg(long, default_value_t = 50.0)]
        zmax: f64,
        #[arg(long, default_value_t = 401)]
        nx: usize,
        #[arg(long, default_value_t = 501)]
        nz: usize,
        #[arg(long, default_value_t = DEFAULT_RHO_TOLERANCE)]
        tol: f64,
    },
}

#[derive(Subcommand)]
enum DeriveCmd {
    /// Third-order q = 4 method with the KGNO4 explicit polynomial.
    Imkg3q4 {
        #[arg(long, allow_hyphen_values = true)]
        d2: f64,
        #[arg(long, allow_hyphen_values = true)]
        d3: f64,
        #[arg(long, allow_hyphen_values = true)]
        alpha2: f64,
        #[arg(long, allow_hyphen_values = true)]
        beta1: f64,
        #[arg(long, default_value = "IMKG3q4")]
        name: String,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Second-order two-register method.
    Imkg2 {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long)]
        q: usize,
        /// alpha_hat_1 .. alpha_hat_{q-2}.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        alpha_hat: Vec<f64>,
        /// delta_hat_1 .. delta_hat_{q-1}.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        delta_hat: Vec<f64>,
        #[arg(long, default_value = "IMKG2")]
        name: String,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Kgo,
    Kgno,
}

#[derive(Args)]
struct SolverArgs {
    /// Problem parameter override, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, default_value_t = 1e-6)]
    eps_r: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 20)]
    max_iters: usize,
}

impl SolverArgs {
    fn config(&self) -> NewtonConfig {
        NewtonConfig {
            epsilon: self.epsilon,
            eps_r: self.eps_r,
            eps_a: None,
            max_iters: self.max_iters,
            ..NewtonConfig::default()
        }
    }
}

#[derive(Args)]
struct IntegrateArgs {
    problem: String,
    method: String,
    #[arg(long)]
    dt: f64,
    #[arg(long)]
    tend: f64,
    #[arg(short, long)]
    output: PathBuf,
    /// Column problem only: final-state snapshot as `eta,w,phi,p,mu`.
    #[arg(long)]
    snapshot: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReferenceKind {
    Auto,
    Exact,
    #[value(name = "self")]
    SelfRef,
}

#[derive(Args)]
struct ConvergeArgs {
    problem: String,
    method: String,
    #[arg(long, value_delimiter = ',', required = true)]
    dts: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    tend: f64,
    #[arg(long, value_enum, default_value = "auto")]
    reference: ReferenceKind,
    /// Self-reference step is min(dts) / factor.
    #[arg(long, default_value_t = 256)]
    factor: usize,
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

enum Method {
    Registry(Box<RegistryEntry>),
    File(DoubleTableau),
}

impl Method {
    fn tableau(&self) -> DoubleTableau {
        match self {
            Method::Registry(e) => e.tableau(),
            Method::File(t) => t.clone(),
        }
    }
}

fn resolve(method: &str) -> Result<Method, Failure> {
    let path = Path::new(method);
    if path.is_file() {
        let t = read_tableau_file(path)
            .with_context(|| format!("reading tableau file {}", path.display()))
            .map_err(usage)?;
        return Ok(Method::File(t));
    }
    lookup(method)
        .map(|e| Method::Registry(Box::new(e)))
        .map_err(|e| usage(anyhow!("{e}; run `imkg methods list` for known names")))
}

fn params(items: &[String]) -> Result<Params, Failure> {
    parse_params(items).map_err(usage)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn yn(b: bool) -> &'static str {
    if b {
        "Y"
    } else {
        "N"
    }
}

fn methods_list(o: &mut dyn Write) -> Result<ExitCode, Failure> {
    writeln!(o, 
        "{:<9} {:>5} {:>5} {:>4} {:>3} {:>3}  {:<10} {:<6} printed",
        "name", "order", "I/A", "VI", "SD", "L", "r0", "class"
    )?;
    for e in registry() {
        let r = stability_report(&e.coefficients);
        let printed = printed_properties(e.name())
            .map(|p| format!("{} {} {}", if p.a_stable { "A" } else { "I" }, yn(p.vi), yn(p.sd)))
            .unwrap_or_default();
        let status = if e.is_clean() { "" } else { "  (as printed inconsistent)" };
        writeln!(o, 
            "{:<9} {:>5} {:>5} {:>4} {:>3} {:>3}  {:<10.7} {:<6} {printed}{status}",
            e.name(),
            e.report.order_classified,
            r.ia_flag(),
            yn(r.vi),
            yn(r.sd),
            yn(r.l_stable),
            r.explicit_imag_limit,
            r.kg_class.to_string(),
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

fn methods_check(o: &mut dyn Write, method: &str) -> Result<ExitCode, Failure> {
    match resolve(method)? {
        Method::Registry(e) => {
            writeln!(o, "{}", e.name())?;
            writeln!(o, "order {}", e.report.order_classified)?;
            writeln!(o, "{}", e.report)?;
            for r in &e.flags.repairs {
                writeln!(o, "repair: {r}")?;
            }
            if let Some(a1) = e.flags.recovered_alpha1 {
                writeln!(o, "recovered alpha_1 = {a1:.16e}")?;
            }
            writeln!(o, "{}", stability_report(&e.coefficients))?;
            if let Some(p) = printed_properties(e.name()) {
                writeln!(o, 
                    "printed  {} VI={} SD={}",
                    if p.a_stable { "A" } else { "I" },
                    yn(p.vi),
                    yn(p.sd)
                )?;
            }
            if let Some(v) = &e.flags.as_printed_inconsistent {
                writeln!(o, "as_printed_inconsistent:")?;
                for line in v {
                    writeln!(o, "  {line}")?;
                }
                return Ok(ExitCode::from(1));
            }
            Ok(ExitCode::SUCCESS)
        }
        Method::File(t) => {
            let report = check_order3_general(&t, DEFAULT_TOLERANCE);
            writeln!(o, "{}", t.name())?;
            writeln!(o, "order {}", report.order_classified)?;
            writeln!(o, "{report}")?;
            writeln!(o, "{}", stability_report_tableau(&t)?)?;
            Ok(if report.order_classified >= 1 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn stability_poly(o: &mut dyn Write, method: &str) -> Result<ExitCode, Failure> {
    let t = resolve(method)?.tableau();
    let p = explicit_polynomial_general(t.explicit_part())?;
    writeln!(o, "{}", t.name())?;
    for (k, c) in p.coefficients().iter().enumerate() {
        writeln!(o, "sigma_{k} {c:.16e}")?;
    }
    writeln!(o, "r0 {:.16e}", imaginary_axis_limit(&p, COEFFICIENT_TOLERANCE)?)?;
    writeln!(o, "class {}", classify_kg(&p))?;
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli, o: &mut dyn Write) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::Methods(MethodsCmd::List) => methods_list(o),
        Command::Methods(MethodsCmd::Check { method }) => methods_check(o, &method),
        Command::Stability(StabilityCmd::Poly { method }) => stability_poly(o, &method),
        Command::Stability(StabilityCmd::Hmap {
            method,
            xmax,
            zmax,
            nx,
            nz,
            extra_z,
            output,
        }) => {
            let t = resolve(&method)?.tableau();
            let grid = scan_grid(&t, xmax, zmax, nx, nz, &extra_z).map_err(usage)?;
            let mut out = create(&output)?;
            grid.write_csv(&mut out)?;
            out.flush()?;
            eprintln!("wrote {} samples to {}", grid.len(), output.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Stability(StabilityCmd::Region {
            method,
            n0,
            xmax,
            zmax,
            nx,
            nz,
            tol,
        }) => {
            let t = resolve(&method)?.tableau();
            let grid = scan_grid(&t, xmax.unwrap_or(n0 + 0.5), zmax, nx, nz, &DEFAULT_EXTRA_Z).map_err(usage)?;
            let q = region_query(&grid, n0, tol).map_err(usage)?;
            writeln!(o, "{}", t.name())?;
            writeln!(o, "n0 {n0}")?;
            writeln!(o, "t_contained {}", q.t_contained)?;
            writeln!(o, "explicit_axis_stable {}", q.explicit_axis_stable)?;
            match q.gamma_min {
                Some(g) => writeln!(o, "gamma_min {g:.16e}")?,
                None => writeln!(o, "gamma_min none")?,
            }
            writeln!(o, "stable_column_width {:.16e}", grid.stable_column_width(tol))?;
            writeln!(o, "max_rho {:.16e}", grid.max_rho())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Derive(DeriveCmd::Imkg3q4 {
            d2,
            d3,
            alpha2,
            beta1,
            name,
            output,
        }) => {
            let c = derive_imkg3_q4(d2, d3, alpha2, beta1)?;
            write_tableau_file(&c.expand(name), &output)?;
            writeln!(o, "{}", stability_report(&c))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Derive(DeriveCmd::Imkg2 {
            family,
            q,
            alpha_hat,
            delta_hat,
            name,
            output,
        }) => {
            let family = match family {
                Family::Kgo => PolynomialFamily::Kgo,
                Family::Kgno => PolynomialFamily::Kgno,
            };
            let target = PolynomialTarget::builtin(family, q).map_err(usage)?;
            let c = derive_imkg2(&target, &alpha_hat, &delta_hat).map_err(usage)?;
            write_tableau_file(&c.expand(name), &output)?;
            writeln!(o, "{}", stability_report(&c))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Integrate(a) => {
            let t = resolve(&a.method)?.tableau();
            let ps = params(&a.solver.set)?;
            let problem = build_problem(&a.problem, &ps).map_err(usage)?;
            let x0 = problem.initial_state();
            let traj = integrate(&t, problem.as_ref(), &x0, 0.0, a.tend, a.dt, &a.solver.config())?;
            let mut out = create(&a.output)?;
            traj.write_csv(&mut out, &problem.component_names())?;
            out.flush()?;
            let iters: usize = traj.newton_iterations.iter().sum();
            let max_iters = traj.newton_iterations.iter().max().copied().unwrap_or(0);
            writeln!(o, "steps {}", traj.newton_iterations.len())?;
            writeln!(o, "newton_iterations total {iters} max_per_step {max_iters}")?;
            if let Some(e) = traj.final_error {
                writeln!(o, "final_error {e:.16e}")?;
            }
            if let Some(path) = a.snapshot {
                if a.problem != "column" {
                    return Err(usage(anyhow!("--snapshot applies to the column problem only")));
                }
                let column = column_problem(&ps).map_err(usage)?;
                let snap = column.background().snapshot(traj.final_state())?;
                let mut out = create(&path)?;
                snap.write_csv(&mut out)?;
                out.flush()?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Converge(a) => {
            let t = resolve(&a.method)?.tableau();
            let problem = build_problem(&a.problem, &params(&a.solver.set)?).map_err(usage)?;
            if a.dts.iter().any(|h| !(*h > 0.0)) {
                return Err(usage(anyhow!("step sizes must be positive")));
            }
            let reference = match a.reference {
                ReferenceKind::Auto => Reference::Auto,
                ReferenceKind::Exact => Reference::Exact,
                ReferenceKind::SelfRef => Reference::SelfReference { factor: a.factor },
            };
            let x0 = problem.initial_state();
            let table = convergence_study(
                &t,
                problem.as_ref(),
                &x0,
                &a.dts,
                a.tend,
                &a.solver.config(),
                reference,
            )?;
            let mut out = create(&a.output)?;
            table.write_csv(&mut out)?;
            out.flush()?;
            writeln!(o, "order {:.6}", table.order)?;
            writeln!(o, "full_range_order {:.6}", table.full_range_order)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Problems => {
            for p in problem_registry() {
                writeln!(o, "{}: {}", p.name, p.description)?;
                for (k, v, meaning) in p.parameters {
                    writeln!(o, "  {k} = {v}  ({meaning})")?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.downcast_ref::<std::io::Error>()
        .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    let result = run(cli, &mut stdout).and_then(|code| {
        stdout.flush()?;
        Ok(code)
    });
    match result {
        Ok(code) => code,
        Err(Failure::Runtime(e)) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            eprintln!("usage: imkg <COMMAND>; see `imkg --help`");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
