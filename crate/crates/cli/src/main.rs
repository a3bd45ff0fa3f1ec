use clap::Parser;
use cvrp_qptas::io::read_instance;
use cvrp_qptas::mpaths::DpCaps;
use cvrp_qptas::run::{cap_breach_report, emit_report, execute, Mode, RunConfig};
use cvrp_qptas::{Eps, Error};
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_VALIDATION: u8 = 2;
const EXIT_CAP: u8 = 3;
const EXIT_PARSE: u8 = 4;

/// Solve a CVRP or m-paths instance file.
#[derive(Parser, Debug)]
#[command(name = "solve", version)]
struct Args {
    /// Instance file (`cvrp <n> <c> <eps>` or `mpaths <n> <m> <eps>` header).
    file: PathBuf,
    /// pipeline | mpaths-exact | mpaths-rounded | itp | bruteforce | validate
    #[arg(long, default_value = "pipeline")]
    mode: String,
    /// Overrides the instance's epsilon (1/epsilon must be an integer).
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dissection shifts tried by the m-paths DP.
    #[arg(long, default_value_t = 16)]
    shifts: usize,
    /// Anchor grid size for the pipeline.
    #[arg(long)]
    q: Option<usize>,
    /// Rounding base for mpaths-rounded.
    #[arg(long)]
    alpha: Option<f64>,
    /// DP entries kept per square.
    #[arg(long)]
    beam: Option<usize>,
    /// Nonzero boundary ports per DP square configuration.
    #[arg(long)]
    ports: Option<usize>,
    /// Enumerated guesses per ring in the pipeline.
    #[arg(long)]
    guess_cap: Option<usize>,
    /// Skip the exhaustive oracle comparison.
    #[arg(long)]
    no_oracle: bool,
    /// Solution file to check (validate mode).
    #[arg(long)]
    solution: Option<PathBuf>,
    /// Write the solution here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("solve: {msg}");
    ExitCode::from(code)
}

fn code_for(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } => EXIT_PARSE,
        Error::CapExceeded { .. } | Error::BudgetExceeded(_) => EXIT_CAP,
        _ => 1,
    }
}

fn config(a: &Args) -> Result<RunConfig, Error> {
    let mut caps = DpCaps::default();
    if let Some(b) = a.beam {
        caps.beam = b;
    }
    if let Some(p) = a.ports {
        caps.ports_per_square = p;
    }
    let mut cfg = RunConfig {
        mode: a.mode.parse::<Mode>()?,
        epsilon: a.epsilon.map(Eps::from_f64).transpose()?,
        seed: a.seed,
        q: a.q,
        alpha: a.alpha,
        shifts: a.shifts,
        caps,
        oracle: !a.no_oracle,
        ..RunConfig::default()
    };
    if let Some(g) = a.guess_cap {
        cfg.guess_cap = g;
    }
    Ok(cfg)
}

fn write(path: &PathBuf, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(EXIT_PARSE);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let cfg = match config(&args) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_PARSE, e),
    };
    let inst = match read_instance(&args.file) {
        Ok(i) => i,
        Err(e) => return fail(code_for(&e), format!("{}: {e}", args.file.display())),
    };
    let sol_text = match &args.solution {
        Some(p) => match std::fs::read_to_string(p) {
            Ok(t) => Some(t),
            Err(e) => return fail(1, format!("{}: {e}", p.display())),
        },
        None => None,
    };
    let out = match execute(&inst, &cfg, sol_text.as_deref()) {
        Ok(o) => o,
        Err(e) => {
            if e.is_cap() || matches!(e, Error::BudgetExceeded(_)) {
                if let Some(p) = &args.report {
                    let _ = write(p, &emit_report(&cap_breach_report(&cfg, &e)));
                }
            }
            return fail(code_for(&e), e);
        }
    };
    if let Some(p) = &args.report {
        if let Err(e) = write(p, &emit_report(&out.report)) {
            return fail(1, e);
        }
    }
    if let Some(p) = &args.svg {
        if let Err(e) = write(p, &out.svg) {
            return fail(1, e);
        }
    }
    if let Some(sol) = &out.solution {
        let text = format!("# cost {}\n{}", sol.cost(), sol.to_text());
        match &args.out {
            Some(p) => {
                if let Err(e) = write(p, &text) {
                    return fail(1, e);
                }
            }
            None if cfg.mode != Mode::Validate => print!("{text}"),
            None => {}
        }
    }
    let rep = &out.report;
    if !rep.valid() {
        for (rule, pass, detail) in &rep.validation {
            if !pass {
                eprintln!("solve: validation failed: {rule}: {detail}");
            }
        }
        return ExitCode::from(EXIT_VALIDATION);
    }
    for b in rep.bounds.iter().filter(|b| !b.pass) {
        eprintln!("solve: bound {} not met: {} > {}", b.name, b.lhs, b.rhs);
    }
    for c in &rep.cap_breaches {
        eprintln!("solve: cap reached: {c}");
    }
    ExitCode::SUCCESS
}
