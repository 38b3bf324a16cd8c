use std::net::SocketAddr;
use std::sync::Arc;

use clap::Parser;
use steer_service::{router, ProviderArgs, SessionManager};
use tracing_subscriber::EnvFilter;

/// Serve the session API over HTTP.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    #[arg(long, default_value = "127.0.0.1:8787")]
    listen: SocketAddr,
    #[command(flatten)]
    provider: ProviderArgs,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let cli = Cli::parse();
    let manager = Arc::new(SessionManager::new(cli.provider.pipeline()?));
    let listener = tokio::net::TcpListener::bind(cli.listen).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(manager)).await?;
    Ok(())
}
