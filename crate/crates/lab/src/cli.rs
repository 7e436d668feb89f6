//! Command-line front end. Every subcommand reads an optional TOML config,
//! applies flag overrides and writes its artifacts under the output directory.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use threefield_core::spectrum::Route;
use threefield_core::{generate, Domain, MeshFamily, SolveOptions};

use crate::config::{ExperimentConfig, Overrides};
use crate::convergence::{run_convergence, write_convergence};
use crate::eigenfunction::run_eigenfunction;
use crate::error::{LabError, LabResult};
use crate::output::{num, spectrum_csv, write_file, write_json};
use crate::pipeline::{solve_case, Case, CaseRecord};
use crate::reference::{check_reference, compute_reference, load_reference};
use crate::spread::run_spread;

#[derive(Debug, Parser)]
#[command(name = "threefield", version, about = "Spectra of the reduced three-field elasticity pencil")]
pub struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for independent jobs.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for the nonuniform mesh perturbation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RouteArg {
    Standard,
    Qz,
}

impl From<RouteArg> for Route {
    fn from(r: RouteArg) -> Route {
        match r {
            RouteArg::Standard => Route::Standard,
            RouteArg::Qz => Route::Qz,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DomainArg {
    Square,
    Lshape,
}

impl From<DomainArg> for Domain {
    fn from(d: DomainArg) -> Domain {
        match d {
            DomainArg::Square => Domain::Square,
            DomainArg::Lshape => Domain::Lshape,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CaseArgs {
    /// Mesh family, e.g. `square_right` or `lshape_left`.
    #[arg(long)]
    pub family: Option<MeshFamily>,
    /// Mesh sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Lamé λ values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
    #[arg(long)]
    pub mu: Option<f64>,
    /// Impose the stress trace and rotation mean conditions.
    #[arg(long)]
    pub constrained: bool,
    #[arg(long, value_enum)]
    pub route: Option<RouteArg>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the meshes of the study as text and VTK.
    Mesh(CaseArgs),
    /// Solve one case (first N, first λ) and write its spectrum.
    Solve(CaseArgs),
    /// First-eigenvalue convergence study against a reference file.
    Converge {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Spectra over N and λ with complex-plane plots.
    Spread(CaseArgs),
    /// Recover and export one eigenfunction per case.
    Eigenfunction {
        #[command(flatten)]
        case: CaseArgs,
        /// 1-based index in spectral order.
        #[arg(long, default_value_t = 1)]
        which: usize,
    },
    /// Compute a reference eigenvalue with the primal P2 solver and
    /// Richardson extrapolation.
    Oracle {
        #[arg(long, value_enum)]
        domain: DomainArg,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        #[arg(long, default_value_t = 1)]
        index: usize,
        #[arg(long, value_delimiter = ',', default_value = "32,64,128")]
        ns: Vec<usize>,
        /// Target file; defaults to `reference.json` in the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn overrides(cli: &Cli, case: &CaseArgs, reference: Option<PathBuf>) -> Overrides {
    Overrides {
        mesh_family: case.family,
        n_list: case.n.clone(),
        lambda_list: case.lambda.clone(),
        mu: case.mu,
        seed: cli.seed,
        constrained: case.constrained,
        route: case.route.map(Route::from),
        output: cli.out.clone(),
        reference,
    }
}

fn load_config(cli: &Cli, case: &CaseArgs, reference: Option<PathBuf>) -> LabResult<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(&overrides(cli, case, reference));
    cfg.validate()?;
    Ok(cfg)
}

fn print_leading(out: &mut impl std::io::Write, rec: &CaseRecord) {
    let _ = writeln!(
        out,
        "{} N={} lambda={:e}: {} finite, {} infinite",
        rec.family, rec.n, rec.lambda, rec.n_finite, rec.n_infinite
    );
    for (k, z) in rec.leading.iter().enumerate() {
        let _ = writeln!(out, "  gamma_{} = {} {:+}i", k + 1, z[0], z[1]);
    }
}

fn run_mesh(cfg: &ExperimentConfig) -> LabResult<()> {
    let dir = cfg.output_dir();
    for &n in &cfg.n_list {
        let mesh = generate(cfg.mesh_family, n, cfg.seed)?;
        mesh.validate()?;
        let stem = format!("mesh_{}_N{n}", cfg.mesh_family);
        let mut text = Vec::new();
        let mut vtk = Vec::new();
        mesh.write_text(&mut text).and_then(|_| mesh.write_vtk(&mut vtk)).expect("writing to memory");
        write_file(&dir.join(format!("{stem}.txt")), &String::from_utf8(text).expect("ascii"))?;
        write_file(&dir.join(format!("{stem}.vtk")), &String::from_utf8(vtk).expect("ascii"))?;
        println!("{stem}: {} vertices, {} cells, {} edges", mesh.n_vertices(), mesh.n_cells(), mesh.n_edges());
    }
    Ok(())
}

fn run_solve(cfg: &ExperimentConfig) -> LabResult<()> {
    let case = Case::from_config(cfg, cfg.n_list[0], cfg.lambda_list[0])?;
    let opts = SolveOptions { route: cfg.route, filter_ratio: cfg.filter_ratio, ..Default::default() };
    let s = solve_case(&case, &opts)?;
    let rec = CaseRecord::new(&s, cfg.n_eigs_report);
    let dir = cfg.output_dir();
    write_file(&dir.join("spectrum.csv"), &spectrum_csv(&s.spectrum))?;
    write_json(&dir.join("report.json"), &rec)?;
    print_leading(&mut std::io::stdout(), &rec);
    Ok(())
}

fn run_converge(cfg: &ExperimentConfig) -> LabResult<()> {
    let path = cfg.reference.as_ref().ok_or_else(|| {
        LabError::MissingReference(
            "a convergence study needs a reference file (`reference` in the config or --reference); \
             generate one with `threefield oracle`"
                .into(),
        )
    })?;
    let [lambda] = cfg.lambda_list[..] else {
        return Err(LabError::Usage(format!("a convergence study takes one lambda, got {:?}", cfg.lambda_list)));
    };
    let reference = load_reference(path)?;
    check_reference(&reference, cfg.domain(), cfg.mu, lambda)?;
    let (report, failure) = run_convergence(cfg, &reference)?;
    let dir = cfg.output_dir();
    write_convergence(&dir, &report)?;
    let mut out = std::io::stdout();
    let _ = writeln!(out, "reference {} ± {:e}", reference.value, reference.uncertainty);
    for r in &report.rows {
        let rate = r.rate.map(|x| format!("{x:.3}")).unwrap_or_default();
        let _ = writeln!(out, "N={:<4} gamma1={:<22} err={:<12} {rate}", r.n, r.gamma1, num(r.err));
    }
    if let Some(rate) = report.rate {
        let _ = writeln!(out, "fitted rate {rate:.3}");
    }
    match failure {
        Some((n, source)) => Err(LabError::Aborted { n, report: dir.join("report.json"), source }),
        None => Ok(()),
    }
}

fn run_spread_cmd(cfg: &ExperimentConfig) -> LabResult<()> {
    let report = run_spread(cfg, &cfg.output_dir())?;
    let mut out = std::io::stdout();
    for rec in &report.cases {
        let _ = writeln!(
            out,
            "N={} lambda={:e}: {} finite, {} non-real, {} with negative real part, max |gamma| {}",
            rec.n,
            rec.lambda,
            rec.n_finite,
            rec.n_non_real,
            rec.n_negative_real,
            num(rec.max_modulus)
        );
    }
    Ok(())
}

fn run_eigenfunction_cmd(cfg: &ExperimentConfig, which: usize) -> LabResult<()> {
    let report = run_eigenfunction(cfg, which, &cfg.output_dir())?;
    for r in &report.records {
        println!(
            "N={} lambda={:e}: gamma_{which} = {} {:+}i, rotation in [{}, {}]",
            r.n,
            r.lambda,
            r.gamma[0],
            r.gamma[1],
            num(r.rotation_min),
            num(r.rotation_max)
        );
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> LabResult<()> {
    match &cli.command {
        Command::Mesh(c) => run_mesh(&load_config(cli, c, None)?),
        Command::Solve(c) => run_solve(&load_config(cli, c, None)?),
        Command::Converge { case, reference } => run_converge(&load_config(cli, case, reference.clone())?),
        Command::Spread(c) => run_spread_cmd(&load_config(cli, c, None)?),
        Command::Eigenfunction { case, which } => run_eigenfunction_cmd(&load_config(cli, case, None)?, *which),
        Command::Oracle { domain, lambda, mu, index, ns, output } => {
            let r = compute_reference((*domain).into(), *mu, *lambda, *index, ns)?;
            let path = match output {
                Some(p) => p.clone(),
                None => cli.out.clone().unwrap_or_else(|| PathBuf::from("out")).join("reference.json"),
            };
            write_json(&path, &r)?;
            println!("gamma_{index} = {} ± {:e} (order {:.2})", r.value, r.uncertainty, r.order);
            Ok(())
        }
    }
}

/// Runs the CLI on the given arguments and returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    faer::set_global_parallelism(faer::Par::Seq);
    let mut builder = rayon::ThreadPoolBuilder::new();
    match cli.threads {
        Some(0) => return report(LabError::Usage("--threads must be at least 1".into())),
        Some(t) => builder = builder.num_threads(t),
        None => {}
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => return report(LabError::Usage(format!("cannot start worker pool: {e}"))),
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(()) => 0,
        Err(e) => report(e),
    }
}

fn report(e: LabError) -> u8 {
    let _ = writeln!(std::io::stderr(), "error: {e}");
    e.exit_code()
}
