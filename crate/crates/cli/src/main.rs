//! `sactor`: parse, check, project and compile Scribble protocols, run corpus
//! scenarios and time the monitors.
//!
//! Exit codes: 0 success, 1 usage or compile error, 2 protocol violation.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use session_actors::corpus::{
    bench_chain, bench_pingpong, run_scenario, scenario_names, RunOptions, Scenario, Variant,
    Verdict,
};
use session_actors::monitor::{to_dot, write_graph, Policy};
use session_actors::projection::print_local;
use session_actors::runtime::CompiledProtocol;
use session_actors::scribble::{
    check_wellformed, check_with_bindings, dump_global, parse_global, Bindings,
};

#[derive(Parser)]
#[command(name = "sactor", version, about = "Session-typed actor toolchain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the syntax tree of a global protocol and check it.
    Parse { file: PathBuf },
    /// Check well-formedness under the given bindings.
    Check {
        file: PathBuf,
        #[command(flatten)]
        bind: BindArgs,
    },
    /// Print the local protocol of one role.
    Project {
        file: PathBuf,
        #[arg(long)]
        role: String,
        #[command(flatten)]
        bind: BindArgs,
    },
    /// Build the monitor of one role and print or save its graph.
    Fsm {
        file: PathBuf,
        #[arg(long)]
        role: String,
        #[command(flatten)]
        bind: BindArgs,
        /// Write the graph here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Emit Graphviz DOT instead of the text graph.
        #[arg(long)]
        dot: bool,
    },
    /// Run a corpus scenario and print its trace.
    Run {
        #[arg(required_unless_present = "list")]
        scenario: Option<String>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = PolicyArg::Block)]
        policy: PolicyArg,
        /// Use worker threads instead of the deterministic scheduler.
        #[arg(long)]
        threaded: bool,
        /// List the available scenarios.
        #[arg(long)]
        list: bool,
    },
    /// Time the runtime and the monitors.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Ping-pong round trips with and without monitoring.
    Pingpong {
        #[arg(long, value_enum, default_value_t = VariantArg::Rec)]
        variant: VariantArg,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
    },
    /// Per-check latency on request-reply chains of the given lengths.
    Chain {
        #[arg(long, value_delimiter = ',', default_values_t = [100, 1_000, 10_000])]
        states: Vec<usize>,
    },
}

#[derive(Args)]
struct BindArgs {
    /// Symbol binding such as `N=3`; repeat for more symbols.
    #[arg(long = "bind", value_name = "SYM=VALUE", value_parser = parse_binding)]
    bind: Vec<(String, i64)>,
}

impl BindArgs {
    fn bindings(&self) -> Bindings {
        self.bind.iter().cloned().collect()
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Block,
    Warn,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Flat,
    Rec,
}

fn parse_binding(s: &str) -> Result<(String, i64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected SYM=VALUE, got `{s}`"))?;
    let v = v
        .trim()
        .parse()
        .map_err(|e| format!("bad value for `{k}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

/// Failure carrying the exit code to report.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn compile(file: &Path, bind: &BindArgs) -> Result<CompiledProtocol, Failure> {
    let src = read(file)?;
    log::debug!("compiling {} with {:?}", file.display(), bind.bind);
    CompiledProtocol::compile(&src, &bind.bindings())
        .map_err(|e| Failure::usage(format!("{}: {e}", file.display())))
}

fn diagnostics_failure(diags: &[session_actors::scribble::Diagnostic]) -> Failure {
    let mut msg = String::new();
    for d in diags {
        let _ = writeln!(msg, "{d}");
    }
    Failure::usage(msg.trim_end())
}

fn cmd_parse(file: &Path) -> CmdResult {
    let src = read(file)?;
    let p = parse_global(&src).map_err(|e| Failure::usage(format!("{}: {e}", file.display())))?;
    print!("{}", dump_global(&p));
    let diags = check_wellformed(&p);
    if diags.is_empty() {
        Ok(())
    } else {
        Err(diagnostics_failure(&diags))
    }
}

fn cmd_check(file: &Path, bind: &BindArgs) -> CmdResult {
    let src = read(file)?;
    let p = parse_global(&src).map_err(|e| Failure::usage(format!("{}: {e}", file.display())))?;
    let diags = check_with_bindings(&p, &bind.bindings());
    if !diags.is_empty() {
        return Err(diagnostics_failure(&diags));
    }
    println!("{}: ok ({} roles)", p.name, p.roles.len());
    Ok(())
}

fn local_role<'a, T>(
    c: &'a CompiledProtocol,
    map: &'a std::collections::BTreeMap<String, T>,
    role: &str,
) -> Result<&'a T, Failure> {
    map.get(role).ok_or_else(|| {
        Failure::usage(format!(
            "unknown role `{role}` in `{}` (roles: {})",
            c.name(),
            c.role_names().join(", ")
        ))
    })
}

fn cmd_project(file: &Path, role: &str, bind: &BindArgs) -> CmdResult {
    let c = compile(file, bind)?;
    let lp = local_role(&c, &c.locals, role)?;
    print!("{}", print_local(lp));
    Ok(())
}

fn cmd_fsm(file: &Path, role: &str, bind: &BindArgs, out: Option<&Path>, dot: bool) -> CmdResult {
    let c = compile(file, bind)?;
    let fsm = local_role(&c, &c.fsms, role)?;
    let text = if dot { to_dot(fsm) } else { write_graph(fsm) };
    match out {
        Some(path) => {
            std::fs::write(path, &text)
                .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            println!(
                "{}@{}: {} states, {} transitions -> {}",
                fsm.protocol,
                fsm.role,
                fsm.state_count(),
                fsm.transition_count(),
                path.display()
            );
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_run(name: &str, seed: u64, policy: Policy, threaded: bool) -> CmdResult {
    let sc = Scenario::load(name)
        .map_err(|e| Failure::usage(format!("{e} (available: {})", scenario_names().join(", "))))?;
    let opts = RunOptions {
        seed,
        policy,
        threaded,
    };
    log::info!("running {} with {opts:?}", sc.name);
    let o = run_scenario(&sc, opts).map_err(|e| Failure::usage(e.to_string()))?;
    for ev in &o.trace {
        println!("{ev}");
    }
    if let Some(r) = &o.result {
        println!("result {r}");
    }
    let verdict = o.verdict();
    println!("verdict {verdict}");
    match verdict {
        Verdict::Violation { .. } => Err(Failure {
            code: 2,
            message: format!("{}: protocol violation: {verdict}", sc.name),
        }),
        _ => Ok(()),
    }
}

fn cmd_bench_pingpong(variant: Variant, n: usize) -> CmdResult {
    let run = |monitored| {
        bench_pingpong(variant, monitored, n).map_err(|e| Failure::usage(e.to_string()))
    };
    let plain = run(false)?;
    let monitored = run(true)?;
    println!(
        "{:<8} {:<10} {:>10} {:>10} {:>14} {:>14} {:>9}",
        "variant", "monitored", "trips", "sessions", "median_ns", "mean_ns", "overhead"
    );
    for s in [&plain, &monitored] {
        println!(
            "{:<8} {:<10} {:>10} {:>10} {:>14.0} {:>14.0} {:>9.3}",
            format!("{:?}", s.variant).to_lowercase(),
            s.monitored,
            s.pongs,
            s.sessions,
            s.median_ns,
            s.mean_ns,
            s.median_ns / plain.median_ns
        );
    }
    Ok(())
}

fn cmd_bench_chain(states: &[usize]) -> CmdResult {
    println!(
        "{:>8} {:>10} {:>12} {:>12} {:>8}",
        "states", "fsm_states", "checks", "ns_per_check", "ratio"
    );
    let mut base = None;
    for &n in states {
        let s = bench_chain(n).map_err(|e| Failure::usage(e.to_string()))?;
        let first = *base.get_or_insert(s.check_ns);
        println!(
            "{:>8} {:>10} {:>12} {:>12.1} {:>8.3}",
            s.states,
            s.fsm_states,
            s.checks,
            s.check_ns,
            s.check_ns / first
        );
    }
    Ok(())
}

fn dispatch(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Parse { file } => cmd_parse(&file),
        Command::Check { file, bind } => cmd_check(&file, &bind),
        Command::Project { file, role, bind } => cmd_project(&file, &role, &bind),
        Command::Fsm {
            file,
            role,
            bind,
            out,
            dot,
        } => cmd_fsm(&file, &role, &bind, out.as_deref(), dot),
        Command::Run { list: true, .. } => {
            for name in scenario_names() {
                println!("{name}");
            }
            Ok(())
        }
        Command::Run {
            scenario,
            seed,
            policy,
            threaded,
            ..
        } => {
            let policy = match policy {
                PolicyArg::Block => Policy::Block,
                PolicyArg::Warn => Policy::Warn,
            };
            cmd_run(
                scenario.as_deref().unwrap_or_default(),
                seed,
                policy,
                threaded,
            )
        }
        Command::Bench(BenchCommand::Pingpong { variant, n }) => {
            let variant = match variant {
                VariantArg::Flat => Variant::Flat,
                VariantArg::Rec => Variant::Rec,
            };
            cmd_bench_pingpong(variant, n)
        }
        Command::Bench(BenchCommand::Chain { states }) => cmd_bench_chain(&states),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
