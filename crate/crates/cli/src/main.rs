use std::io::{Read, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use textmerge::sim::{run_sim, SimConfig, SimError};
use textmerge::verify::{check_epsilon, check_seq_identity, check_tp1_exhaustive, identity_holds, EnumBounds, SeqBounds};
use textmerge::xform::Rules;
use textmerge::{apply_seq, DiffSeq, Doc, SplitStrategy, Transformer};
use textmerge_net::Mode;

/// Exit statuses other than success.
#[derive(Debug, Clone, Copy)]
enum Fail {
    Violation = 1,
    Parse = 2,
    Inapplicable = 3,
    Env = 4,
}

struct Failure(Fail, anyhow::Error);

trait Tag<T> {
    fn tag(self, kind: Fail) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Tag<T> for Result<T, E> {
    fn tag(self, kind: Fail) -> Result<T, Failure> {
        self.map_err(|e| Failure(kind, e.into()))
    }
}

#[derive(Parser)]
#[command(name = "textmerge", version, about = "Merge concurrent insert/delete edits to shared text")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Midpoint,
    Leftmost,
}

impl From<Split> for SplitStrategy {
    fn from(s: Split) -> Self {
        match s {
            Split::Midpoint => SplitStrategy::Midpoint,
            Split::Leftmost => SplitStrategy::Leftmost,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleSet {
    Standard,
    /// Known-broken identical-delete rule, for negative controls.
    LiteralEqualDeletes,
}

#[derive(Clone, Copy, ValueEnum)]
enum FuzzMode {
    Exhaustive,
    Seq,
    Epsilon,
}

#[derive(Clone, Copy, ValueEnum)]
enum ServeMode {
    Push,
    Pull,
}

#[derive(Subcommand)]
enum Cmd {
    /// Apply a diff sequence to a document and print the result.
    Apply {
        /// Document file; stdin when omitted.
        #[arg(long)]
        doc: Option<PathBuf>,
        /// JSON array of diffs, or @FILE.
        #[arg(long)]
        diffs: String,
    },
    /// Transform two concurrent diff sequences against each other.
    Xform {
        /// JSON array of diffs, or @FILE.
        #[arg(long)]
        a: String,
        /// JSON array of diffs, or @FILE.
        #[arg(long)]
        b: String,
        #[arg(long, value_enum, default_value = "midpoint")]
        split: Split,
        /// Base text; when given, both sides are applied and compared.
        #[arg(long)]
        doc: Option<String>,
    },
    /// Run a verifier and print its report.
    Fuzz {
        #[arg(long, value_enum)]
        mode: FuzzMode,
        #[arg(long)]
        max_doc_len: Option<usize>,
        #[arg(long)]
        max_text_len: Option<usize>,
        #[arg(long, default_value = "ab")]
        alphabet: String,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        max_seq_len: usize,
        /// Force split-producing trials.
        #[arg(long)]
        targeted: bool,
        #[arg(long, value_enum, default_value = "standard")]
        rules: RuleSet,
    },
    /// Run the multi-client simulator.
    Simulate {
        /// JSON config file; flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        clients: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        split: Option<Split>,
        /// Run this many consecutive seeds and print a summary.
        #[arg(long, default_value_t = 1)]
        runs: u64,
    },
    /// Serve documents over WebSocket at /ws.
    Serve {
        #[arg(long, default_value = "8080")]
        port: String,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Initial document file.
        #[arg(long)]
        doc: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "pull")]
        mode: ServeMode,
    },
}

fn read_arg(v: &str) -> Result<String, Failure> {
    match v.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path)
            .with_context(|| format!("reading {path}"))
            .tag(Fail::Env),
        None => Ok(v.to_string()),
    }
}

fn parse_diffs(v: &str) -> Result<DiffSeq, Failure> {
    serde_json::from_str(&read_arg(v)?).context("parsing diffs").tag(Fail::Parse)
}

fn print(v: &impl serde::Serialize) {
    // A closed pipe downstream is not our failure.
    let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(v).expect("reports serialize"));
}

fn verdict(ok: bool, what: &str) -> Result<(), Failure> {
    if ok {
        Ok(())
    } else {
        Err(Failure(Fail::Violation, anyhow!("{what}")))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Apply { doc, diffs } => {
            let text = match doc {
                Some(p) => std::fs::read_to_string(&p)
                    .with_context(|| format!("reading {}", p.display()))
                    .tag(Fail::Env)?,
                None => {
                    let mut s = String::new();
                    std::io::stdin().read_to_string(&mut s).tag(Fail::Env)?;
                    s
                }
            };
            let diffs = parse_diffs(&diffs)?;
            let out = apply_seq(&Doc::from(text), &diffs).tag(Fail::Inapplicable)?;
            println!("{out}");
            Ok(())
        }
        Cmd::Xform { a, b, split, doc } => {
            let a = parse_diffs(&a)?;
            let b = parse_diffs(&b)?;
            if let Some(text) = &doc {
                let base = Doc::from(text.as_str());
                apply_seq(&base, &a).context("a does not apply").tag(Fail::Inapplicable)?;
                apply_seq(&base, &b).context("b does not apply").tag(Fail::Inapplicable)?;
            }
            let r = Transformer::new(split.into()).transform(&a, &b);
            print(&r);
            match doc {
                Some(text) => verdict(identity_holds(&Doc::from(text), &a, &b, &r), "the two application orders disagree"),
                None => Ok(()),
            }
        }
        Cmd::Fuzz {
            mode,
            max_doc_len,
            max_text_len,
            alphabet,
            trials,
            seed,
            max_seq_len,
            targeted,
            rules,
        } => match mode {
            FuzzMode::Exhaustive => {
                let bounds =
                    EnumBounds::new(max_doc_len.unwrap_or(6), max_text_len.unwrap_or(2), &alphabet).tag(Fail::Parse)?;
                let rules = match rules {
                    RuleSet::Standard => Rules::Standard,
                    RuleSet::LiteralEqualDeletes => Rules::LiteralEqualDeletes,
                };
                let start = Instant::now();
                let report = check_tp1_exhaustive(&bounds, rules);
                print(&json!({"elapsed_ms": start.elapsed().as_millis() as u64, "report": report}));
                verdict(report.passed(), "counterexamples found")
            }
            FuzzMode::Seq | FuzzMode::Epsilon => {
                let defaults = SeqBounds::default();
                let bounds = SeqBounds {
                    trials,
                    seed,
                    max_seq_len,
                    max_doc_len: max_doc_len.unwrap_or(defaults.max_doc_len),
                    max_text_len: max_text_len.unwrap_or(defaults.max_text_len),
                    alphabet,
                    targeted,
                    ..defaults
                };
                bounds.validate().tag(Fail::Parse)?;
                if matches!(mode, FuzzMode::Seq) {
                    let report = check_seq_identity(&bounds);
                    print(&report);
                    verdict(report.passed(), "sequence trials failed")
                } else {
                    let report = check_epsilon(&bounds);
                    print(&report);
                    verdict(report.passed(), "marker trials failed")
                }
            }
        },
        Cmd::Simulate {
            config,
            clients,
            steps,
            seed,
            split,
            runs,
        } => {
            let mut cfg: SimConfig = match config {
                Some(p) => {
                    let text = std::fs::read_to_string(&p)
                        .with_context(|| format!("reading {}", p.display()))
                        .tag(Fail::Env)?;
                    serde_json::from_str(&text).context("parsing config").tag(Fail::Parse)?
                }
                None => SimConfig::default(),
            };
            cfg.clients = clients.unwrap_or(cfg.clients);
            cfg.steps = steps.unwrap_or(cfg.steps);
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.split = split.map(Into::into).unwrap_or(cfg.split);
            cfg.validate().tag(Fail::Parse)?;
            let sim = |cfg: &SimConfig| {
                run_sim(cfg).map_err(|e| match e {
                    SimError::Config(_) => Failure(Fail::Parse, e.into()),
                    SimError::Session(_) => Failure(Fail::Violation, e.into()),
                })
            };
            if runs <= 1 {
                let report = sim(&cfg)?;
                print(&report);
                return verdict(report.converged && report.queue_invariant_violations == 0, "replicas diverged");
            }
            let start = Instant::now();
            let mut failing = vec![];
            for s in cfg.seed..cfg.seed + runs {
                let r = sim(&SimConfig { seed: s, ..cfg.clone() })?;
                if !r.converged || r.queue_invariant_violations > 0 {
                    failing.push(s);
                }
            }
            print(&json!({
                "runs": runs,
                "converged": runs - failing.len() as u64,
                "failing_seeds": failing,
                "elapsed_ms": start.elapsed().as_millis() as u64,
            }));
            verdict(failing.is_empty(), "replicas diverged")
        }
        Cmd::Serve { port, host, doc, mode } => {
            let port: u16 = port
                .parse()
                .map_err(|_| Failure(Fail::Env, anyhow!("invalid port {port:?}")))?;
            let ip: IpAddr = host.parse().map_err(|_| Failure(Fail::Env, anyhow!("invalid host {host:?}")))?;
            let text = match doc {
                Some(p) => std::fs::read_to_string(&p)
                    .with_context(|| format!("reading {}", p.display()))
                    .tag(Fail::Env)?,
                None => String::new(),
            };
            let mode = match mode {
                ServeMode::Push => Mode::Push,
                ServeMode::Pull => Mode::Pull,
            };
            let rt = tokio::runtime::Runtime::new().tag(Fail::Env)?;
            rt.block_on(async {
                let server = textmerge_net::serve(SocketAddr::new(ip, port), Doc::from(text), mode)
                    .await
                    .with_context(|| format!("binding {ip}:{port}"))
                    .tag(Fail::Env)?;
                eprintln!("serving on {}", server.url());
                tokio::signal::ctrl_c().await.tag(Fail::Env)?;
                server.shutdown().await.tag(Fail::Env)
            })
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(kind, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(kind as u8)
        }
    }
}
