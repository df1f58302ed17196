use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use maxwell_hp::mesh::Mesh;
use maxwell_hp::study::{self, format_k, StudyConfig, StudyError};
use maxwell_hp::verification::run_verification;

/// Curl-conforming hp-FEM for time-harmonic Maxwell with impedance boundary conditions.
#[derive(Debug, Parser)]
#[command(name = "maxwell-hp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the manufactured-solution verification suite.
    Verify,
    /// Print mesh statistics for every level of a config, or for a mesh dump file.
    MeshInfo {
        /// Study config or mesh dump.
        input: PathBuf,
        /// Write the coarsest mesh of the config in dump format.
        #[arg(long, value_name = "FILE")]
        dump: Option<PathBuf>,
    },
    /// Solve once (finest level, first k, first p) and print the error report.
    Solve {
        #[arg(required_unless_present = "config")]
        input: Option<PathBuf>,
        #[arg(long, conflicts_with = "input")]
        config: Option<PathBuf>,
    },
    /// Run the full sweep and write CSV tables and SVG plots.
    Study {
        #[arg(required_unless_present = "config")]
        input: Option<PathBuf>,
        #[arg(long, conflicts_with = "input")]
        config: Option<PathBuf>,
    },
}

/// Exit codes: usage or input problems, and failures of the numerics.
const USAGE: u8 = 1;
const NUMERICAL: u8 = 2;

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn load_config(path: &Path) -> Result<StudyConfig, ExitCode> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| fail(USAGE, format!("{}: {e}", path.display())))?;
    StudyConfig::parse(&text).map_err(|e| fail(USAGE, format!("{}: {e}", path.display())))
}

fn study_failure(e: StudyError) -> ExitCode {
    fail(if e.is_numerical() { NUMERICAL } else { USAGE }, e)
}

fn print_mesh(label: &str, m: &Mesh) {
    println!(
        "{label}: {} vertices, {} edges, {} faces, {} tets, {} boundary faces, {} interface faces, subdomains {:?}, h = {:.6}, volume = {:.6}",
        m.vertices().len(),
        m.edges().len(),
        m.faces().len(),
        m.num_tets(),
        m.boundary_faces().len(),
        m.interface_faces().len(),
        m.subdomain_tags(),
        m.max_diameter(),
        m.volume()
    );
}

fn verify() -> ExitCode {
    let lines = run_verification();
    let mut ok = true;
    for l in &lines {
        println!(
            "{} {:<48} {:.3e} (tolerance {:.0e})",
            if l.passed { "PASS" } else { "FAIL" },
            l.name,
            l.value,
            l.tolerance
        );
        ok &= l.passed;
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(NUMERICAL)
    }
}

fn mesh_info(input: &Path, dump: Option<&Path>) -> ExitCode {
    let text = match std::fs::read_to_string(input) {
        Ok(t) => t,
        Err(e) => return fail(USAGE, format!("{}: {e}", input.display())),
    };
    if let Ok(m) = Mesh::from_dump(&text) {
        print_mesh(&input.display().to_string(), &m);
        return ExitCode::SUCCESS;
    }
    let cfg = match StudyConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            return fail(
                USAGE,
                format!(
                    "{}: neither a mesh dump nor a valid config: {e}",
                    input.display()
                ),
            )
        }
    };
    for level in 0..cfg.levels() {
        let n = cfg.subdivisions(level);
        match maxwell_hp::mesh::build_structured_cube_mesh(n, cfg.inner_box) {
            Ok(m) => {
                print_mesh(&format!("level {level} (n = {n})"), &m);
                if level == 0 {
                    if let Some(path) = dump {
                        if let Err(e) = std::fs::write(path, m.to_dump()) {
                            return fail(USAGE, format!("{}: {e}", path.display()));
                        }
                    }
                }
            }
            Err(e) => return fail(USAGE, e),
        }
    }
    ExitCode::SUCCESS
}

fn solve(path: &Path) -> ExitCode {
    let cfg = match load_config(path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    match study::run_single(&cfg) {
        Ok((r, report)) => {
            println!(
                "{} k={} p={} n={} dofs={} N_k={:.4}",
                cfg.problem,
                format_k(r.k),
                r.p,
                cfg.subdivisions(r.level),
                r.dofs,
                r.n_k
            );
            println!(
                "curl-k error:    {:.6e} (relative {:.6e})",
                report.abs_curlk, report.rel_curlk
            );
            println!(
                "impedance error: {:.6e} (relative {:.6e})",
                report.abs_hxik, report.rel_hxik
            );
            for (tag, abs, norm) in &report.per_subdomain {
                println!("  subdomain {tag}: {abs:.6e} of {norm:.6e}");
            }
            match r.quasiopt {
                Some(q) => println!("quasi-optimality ratio: {q:.4}"),
                None => println!("quasi-optimality ratio: undefined (reference lies in the space)"),
            }
            println!("delta_k: {:.4e}", r.delta_k);
            ExitCode::SUCCESS
        }
        Err(e) => study_failure(e),
    }
}

fn run_study(path: &Path) -> ExitCode {
    let cfg = match load_config(path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let records = match study::run_study(&cfg) {
        Ok(r) => r,
        Err(e) => return study_failure(e),
    };
    println!(
        "{:>8} {:>2} {:>5} {:>9} {:>8} {:>12} {:>9} {:>10}",
        "k", "p", "level", "dofs", "N_k", "rel. error", "quasiopt", "delta_k"
    );
    for r in &records {
        println!(
            "{:>8} {:>2} {:>5} {:>9} {:>8.3} {:>12.4e} {:>9} {:>10.3e}",
            format_k(r.k),
            r.p,
            r.level,
            r.dofs,
            r.n_k,
            r.rel_error,
            r.quasiopt
                .map_or_else(|| "-".to_string(), |q| format!("{q:.3}")),
            r.delta_k
        );
    }
    for &k in &cfg.k {
        for &p in &cfg.p {
            let s = study::series(&records, k, p);
            if let Some(rate) = study::fitted_rate(&s, 3) {
                println!("k={} p={p}: fitted rate in h {rate:.3}", format_k(k));
            }
        }
    }
    let written = study::emit_csv(&records, &cfg.output).and_then(|mut csv| {
        csv.extend(study::emit_plots(&records, &cfg.output)?);
        Ok(csv)
    });
    match written {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(USAGE, e),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Verify => verify(),
        Command::MeshInfo { input, dump } => mesh_info(&input, dump.as_deref()),
        Command::Solve { input, config } => solve(&input.or(config).expect("clap enforces one")),
        Command::Study { input, config } => {
            run_study(&input.or(config).expect("clap enforces one"))
        }
    }
}
