use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use clap::Parser;
use loopdmd_playground::{router, AppState, ServiceConfig};

#[derive(Parser)]
#[command(name = "loopdmd-playground", version, about = "Serve the loopdmd playground")]
struct Args {
    #[arg(long, default_value_t = 3000)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Jobs allowed to run at once.
    #[arg(long, default_value_t = 4)]
    concurrency: usize,
    #[arg(long, default_value_t = 30.0)]
    timeout_seconds: f64,
    /// Pending jobs accepted before answering 429.
    #[arg(long, default_value_t = 256)]
    queue_capacity: usize,
    /// Built UI assets served under `/`.
    #[arg(long, default_value = "static")]
    static_dir: PathBuf,
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args = Args::parse();
    if !(args.timeout_seconds.is_finite() && args.timeout_seconds > 0.0) {
        return Err("--timeout-seconds must be positive".into());
    }
    let config = ServiceConfig {
        concurrency: args.concurrency.max(1),
        timeout: Duration::from_secs_f64(args.timeout_seconds),
        queue_capacity: args.queue_capacity.max(1),
        static_dir: Some(args.static_dir),
        ..ServiceConfig::default()
    };
    let addr: SocketAddr = format!("{}:{}", args.host, args.port).parse()?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{addr}");
    axum::serve(listener, router(AppState::new(config)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
