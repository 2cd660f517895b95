//! `reliefchain`: runs scenarios, writes attack corpora and verifies
//! forensics records through the HTTP service. Without `--server` an
//! embedded service is started on a loopback port for the one command.
//!
//! Exit codes: 0 success, 1 usage or environment failure, 2 invalid input,
//! 3 verification failure.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use reliefchain_client::{Client, ClientError};
use reliefchain_core::api::{CorpusRequest, ErrorKind, RunRequest};
use reliefchain_core::audit::VulnClass;
use reliefchain_core::corpus::Label;
use reliefchain_core::forensics::Verdict;
use reliefchain_core::{Address, Hash32};
use serde::Serialize;

const USAGE: u8 = 1;
const INVALID: u8 = 2;
const UNVERIFIED: u8 = 3;

#[derive(Parser)]
#[command(name = "reliefchain", version, about = "Relief coordination chain simulator")]
struct Cli {
    /// Base URL of a running service; an embedded one is used otherwise.
    #[arg(long, global = true)]
    server: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and print its report as JSON.
    Run {
        scenario: PathBuf,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Persist chain, report and forensics blobs for later `verify`.
        #[arg(long)]
        run_dir: Option<PathBuf>,
    },
    /// Write attack instances and benign twins, one JSON file each.
    Corpus {
        /// A vulnerability class name or `all`.
        class: String,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check an anchored forensics record of a persisted run.
    Verify {
        hash: String,
        #[arg(long = "run")]
        run: PathBuf,
    },
    /// Serve the HTTP API in the foreground.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

struct Failure {
    code: u8,
    msg: String,
}

fn fail(code: u8, msg: impl Into<String>) -> Failure {
    Failure { code, msg: msg.into() }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        let code = match e.kind() {
            Some(ErrorKind::Parse | ErrorKind::Invalid | ErrorKind::UnknownClass | ErrorKind::RunDir) => INVALID,
            Some(ErrorKind::UnknownHash) => UNVERIFIED,
            _ => USAGE,
        };
        fail(code, e.to_string())
    }
}

#[derive(Serialize)]
struct ManifestEntry {
    file: String,
    class: VulnClass,
    label: Label,
    index: usize,
    target: Address,
}

/// The service may resolve paths from another working directory.
fn absolute(p: &Path) -> Result<String, Failure> {
    std::path::absolute(p).map(|a| a.display().to_string()).map_err(|e| fail(USAGE, format!("{}: {e}", p.display())))
}

fn write(path: &Path, body: &str) -> Result<(), Failure> {
    fs::write(path, body).map_err(|e| fail(USAGE, format!("cannot write {}: {e}", path.display())))
}

async fn execute(client: &Client, cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { scenario, out, seed, run_dir } => {
            let text = fs::read_to_string(&scenario)
                .map_err(|e| fail(USAGE, format!("cannot read {}: {e}", scenario.display())))?;
            let run_dir = run_dir.as_deref().map(absolute).transpose()?;
            let created = client.run(&RunRequest { scenario: text, seed, run_dir }).await?;
            let json = created.report.to_json();
            print!("{json}");
            if let Some(out) = out {
                write(&out, &json)?;
            }
        }
        Command::Corpus { class, count, seed, out } => {
            let resp = client.corpus(&CorpusRequest { class, count, seed }).await?;
            fs::create_dir_all(&out).map_err(|e| fail(USAGE, format!("cannot create {}: {e}", out.display())))?;
            let mut manifest = Vec::with_capacity(resp.instances.len());
            for inst in &resp.instances {
                let file = format!("{}.json", inst.file_stem());
                write(&out.join(&file), &serde_json::to_string_pretty(inst).expect("instance serializes"))?;
                manifest.push(ManifestEntry {
                    file,
                    class: inst.class,
                    label: inst.label,
                    index: inst.index,
                    target: inst.target_address(),
                });
            }
            write(&out.join("manifest.json"), &serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;
            println!("wrote {} instances to {}", manifest.len(), out.display());
        }
        Command::Verify { hash, run } => {
            let hash: Hash32 = hash.parse().map_err(|e| fail(INVALID, format!("bad forensics hash: {e}")))?;
            let resp = client.verify(&absolute(&run)?, hash).await?;
            match resp.verdict {
                Verdict::Valid => println!("Valid"),
                Verdict::Tampered(detail) => return Err(fail(UNVERIFIED, format!("Tampered: {detail}"))),
                Verdict::Unavailable => return Err(fail(UNVERIFIED, "Unavailable: off-chain record is missing")),
            }
        }
        Command::Serve { .. } => unreachable!("serve is handled before a client exists"),
    }
    Ok(())
}

async fn main_async(cli: Cli) -> Result<(), Failure> {
    if let Command::Serve { addr } = cli.command {
        let listener =
            tokio::net::TcpListener::bind(addr).await.map_err(|e| fail(USAGE, format!("cannot bind {addr}: {e}")))?;
        eprintln!("listening on {}", listener.local_addr().map_err(|e| fail(USAGE, e.to_string()))?);
        return reliefchain_service::serve(listener).await.map_err(|e| fail(USAGE, e.to_string()));
    }
    let base = match cli.server {
        Some(url) => url,
        None => {
            let addr = reliefchain_service::spawn(([127, 0, 0, 1], 0).into())
                .await
                .map_err(|e| fail(USAGE, format!("cannot start embedded service: {e}")))?;
            format!("http://{addr}")
        }
    };
    execute(&Client::new(base), cli.command).await
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
    match rt.block_on(main_async(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
