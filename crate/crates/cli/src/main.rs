//! `coloc`: command-line front end of the co-location privacy service.
//!
//! Every command that touches publication state talks HTTP to a service:
//! the one given by `--server`, or a private one started on a loopback port
//! for the duration of the command.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::mpsc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use coloc_client::Client;
use coloc_core::generate::{generate, GenerateParams};
use coloc_core::model::StateDump;
use coloc_core::oracle::SemanticParams;
use coloc_core::rules::OverlapRule;
use coloc_core::scenario::{catalog, find, run_scenario};
use coloc_core::trace::{parse_trace, replay, verify_dump, write_trace, ExitStatus, ReplaySettings};
use coloc_core::{Config, EngineOptions};

#[derive(Parser)]
#[command(name = "coloc", version, about = "Co-location privacy for geo-social check-ins")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON file with any of v_max, t_max, d_max, epsilon.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Evaluate the window-overlap clause of indirect validity as literally
    /// stated (span must overlap the window) instead of requiring disjointness.
    #[arg(long = "literal-eq13", global = true)]
    literal: bool,
    /// Commit attempts before a publish is denied for contention.
    #[arg(long, global = true)]
    max_retries: Option<u32>,
    /// Seconds between sampled instants in the semantic check.
    #[arg(long, global = true, default_value_t = 60)]
    time_step: i64,
    /// Boundary sampling spacing, meters, for the semantic cross-check.
    #[arg(long, global = true, default_value_t = 1.0)]
    grid_res: f64,
    /// Cross-check the analytic envelope distances by boundary sampling.
    #[arg(long, global = true)]
    cross_check: bool,
    /// Base URL of a running service; otherwise a private one is started.
    #[arg(long, global = true)]
    server: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7878")]
        addr: SocketAddr,
    },
    /// Replay a JSON-lines trace; prints the decision log and final store.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        /// Submit consecutive publishes in concurrent pairs and check each
        /// pair against both sequential orders.
        #[arg(long)]
        concurrent: bool,
    },
    /// Write a seeded synthetic trace.
    Generate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        users: usize,
        #[arg(long, default_value_t = 200)]
        resources: usize,
        #[arg(long, default_value_t = 50)]
        prefs: usize,
        /// Side of the square area, kilometers.
        #[arg(long, default_value_t = 2.0)]
        area_km: f64,
        /// Output file; standard output if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run built-in scenarios.
    Scenario {
        /// Scenario name; all scenarios if absent.
        name: Option<String>,
        /// List names and exit.
        #[arg(long)]
        list: bool,
    },
    /// Check a state dump (or the service's state) with the oracle.
    Verify {
        /// State dump as returned by `GET /store`.
        #[arg(long)]
        store: Option<PathBuf>,
        /// Also run the adversary envelope check.
        #[arg(long)]
        semantic: bool,
    },
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    let config = match path {
        None => Config::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
    };
    if let Err(e) = config.validate() {
        bail!("invalid config: {e}");
    }
    Ok(config)
}

fn settings(common: &Common) -> Result<ReplaySettings> {
    let defaults = EngineOptions::default();
    if common.time_step < 1 {
        bail!("--time-step must be at least 1");
    }
    if common.grid_res.is_nan() || common.grid_res <= 0.0 {
        bail!("--grid-res must be positive");
    }
    Ok(ReplaySettings {
        options: EngineOptions {
            config: load_config(common.config.as_deref())?,
            overlap: if common.literal {
                OverlapRule::Overlapping
            } else {
                OverlapRule::Disjoint
            },
            max_retries: common.max_retries.unwrap_or(defaults.max_retries),
        },
        semantic: SemanticParams {
            time_step: common.time_step,
            grid_res: common.grid_res,
            cross_check: common.cross_check,
        },
        concurrent: false,
    })
}

/// Start a service on a loopback port in a background thread.
fn embedded(settings: ReplaySettings) -> Result<Client> {
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let rt = match tokio::runtime::Runtime::new() {
            Ok(rt) => rt,
            Err(e) => {
                let _ = tx.send(Err(e));
                return;
            }
        };
        rt.block_on(async move {
            match tokio::net::TcpListener::bind("127.0.0.1:0").await {
                Ok(listener) => {
                    let addr = listener.local_addr();
                    let _ = tx.send(addr);
                    if let Err(e) = coloc_server::serve(listener, settings).await {
                        tracing::error!("embedded service stopped: {e}");
                    }
                }
                Err(e) => {
                    let _ = tx.send(Err(e));
                }
            }
        });
    });
    let addr = rx.recv().context("embedded service did not start")??;
    let client = Client::new(format!("http://{addr}"))?;
    client.wait_ready(100)?;
    Ok(client)
}

/// Client for `--server`, with verification settings matched to its engine.
fn remote(url: &str, settings: &mut ReplaySettings) -> Result<Client> {
    let client = Client::new(url)?;
    client.wait_ready(20).with_context(|| format!("no service at {url}"))?;
    settings.options = client.options()?;
    Ok(client)
}

fn connect(common: &Common, settings: &mut ReplaySettings) -> Result<Client> {
    match &common.server {
        Some(url) => remote(url, settings),
        None => embedded(*settings),
    }
}

fn print_json_line(value: &impl serde::Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitStatus> {
    let mut settings = settings(&cli.common)?;
    match cli.cmd {
        Cmd::Serve { addr } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                coloc_server::serve(listener, settings).await
            })?;
            Ok(ExitStatus::Clean)
        }
        Cmd::Replay { trace, concurrent } => {
            let text = match std::fs::read_to_string(&trace) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("{}: {e}", trace.display());
                    return Ok(ExitStatus::InputError);
                }
            };
            let commands = match parse_trace(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{}: {e}", trace.display());
                    return Ok(ExitStatus::InputError);
                }
            };
            let client = connect(&cli.common, &mut settings)?;
            settings.concurrent = concurrent;
            let report = replay(&commands, &client, &settings);
            report.write_to(std::io::stdout().lock())?;
            if let Some(e) = &report.error {
                eprintln!("{e}");
            }
            Ok(report.status)
        }
        Cmd::Generate {
            seed,
            users,
            resources,
            prefs,
            area_km,
            out,
        } => {
            let params = GenerateParams {
                seed,
                n_users: users,
                n_resources: resources,
                n_prefs: prefs,
                area_km,
            };
            let text = write_trace(&generate(&params, &settings.options.config).commands);
            match out {
                Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => std::io::stdout().lock().write_all(text.as_bytes())?,
            }
            Ok(ExitStatus::Clean)
        }
        Cmd::Scenario { name, list } => {
            if list {
                for s in catalog() {
                    print_json_line(&serde_json::json!({ "name": s.name, "about": s.about }))?;
                }
                return Ok(ExitStatus::Clean);
            }
            let chosen = match name {
                None => catalog(),
                Some(n) => match find(&n) {
                    Some(s) => vec![s],
                    None => {
                        eprintln!("unknown scenario {n}; try --list");
                        return Ok(ExitStatus::InputError);
                    }
                },
            };
            let mut failed = false;
            for s in &chosen {
                // each scenario creates its own users, so it needs a fresh service
                let client = match &cli.common.server {
                    Some(url) => remote(url, &mut settings)?,
                    None => embedded(settings)?,
                };
                let report = run_scenario(s, &client, &settings);
                failed |= !report.passed;
                print_json_line(&report)?;
            }
            Ok(if failed { ExitStatus::Violations } else { ExitStatus::Clean })
        }
        Cmd::Verify { store, semantic } => {
            let violations = match store {
                Some(path) => {
                    let text =
                        std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    let dump: StateDump = match serde_json::from_str(&text) {
                        Ok(d) => d,
                        Err(e) => {
                            eprintln!("{}: {e}", path.display());
                            return Ok(ExitStatus::InputError);
                        }
                    };
                    verify_dump(&dump, &settings, semantic)
                }
                None => {
                    let Some(url) = &cli.common.server else {
                        eprintln!("verify needs --store or --server");
                        return Ok(ExitStatus::InputError);
                    };
                    remote(url, &mut settings)?.verify(semantic)?.violations
                }
            };
            print_json_line(&violations)?;
            Ok(if violations.is_empty() {
                ExitStatus::Clean
            } else {
                ExitStatus::Violations
            })
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
