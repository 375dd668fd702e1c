use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use admissible_service::{configure_threads, router, SessionStore, DEFAULT_PORT};
use clap::Parser;

#[derive(Debug, Parser)]
#[command(name = "admissible-serve", version, about = "Serve the audit workbench HTTP JSON API")]
struct Args {
    /// Port to listen on.
    #[arg(long, default_value_t = DEFAULT_PORT)]
    port: u16,
    /// Address to bind.
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    /// Directory for datasets and job results; reloaded on restart.
    #[arg(long)]
    session_dir: Option<PathBuf>,
    /// Worker threads for jobs (defaults to all cores).
    #[arg(long, env = "ADMISSIBLE_ML_THREADS")]
    threads: Option<usize>,
}

#[tokio::main]
async fn main() -> ExitCode {
    let args = Args::parse();
    if let Err(e) = configure_threads(args.threads) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let store = match &args.session_dir {
        Some(dir) => match SessionStore::open(dir) {
            Ok(store) => store,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => SessionStore::in_memory(),
    };
    let addr = SocketAddr::new(args.host, args.port);
    let listener = match tokio::net::TcpListener::bind(addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: cannot bind {addr}: {e}");
            return ExitCode::from(2);
        }
    };
    eprintln!("listening on http://{addr}");
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    if let Err(e) = axum::serve(listener, router(store)).with_graceful_shutdown(shutdown).await {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
