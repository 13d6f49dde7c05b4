use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use cohortlens_core::Templates;
use cohortlens_service::{http, JsonFileStorage, Service, Store, StudyKey};

#[derive(Parser, Debug)]
#[command(name = "cohortlens", version, about = "Sociometric survey service")]
struct Cli {
    #[arg(long, env = "COHORTLENS_DATA_DIR", default_value = "./data", global = true)]
    data_dir: PathBuf,
    /// Hex HMAC key; created on first use when missing.
    #[arg(long, env = "COHORTLENS_STUDY_KEY_FILE", global = true)]
    study_key_file: Option<PathBuf>,
    /// TOML report templates; the shipped English set when absent.
    #[arg(long, env = "COHORTLENS_REPORT_TEMPLATES", global = true)]
    report_templates: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
    #[arg(long, env = "COHORTLENS_PORT", default_value_t = 8080)]
    port: u16,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the HTTP API (the default).
    Serve {
        #[arg(long, env = "COHORTLENS_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "COHORTLENS_BIND", default_value = "127.0.0.1")]
        bind: String,
    },
    /// Create the first super-admin account of an empty study.
    InitAdmin {
        #[arg(long)]
        login: String,
        #[arg(long, env = "COHORTLENS_ADMIN_PASSWORD")]
        password: String,
    },
}

fn open(cli: &Cli) -> Result<Service, Box<dyn std::error::Error>> {
    let key_path = cli.study_key_file.clone().unwrap_or_else(|| cli.data_dir.join("study.key"));
    let key = StudyKey::load_or_create(&key_path)?;
    let store = Store::open(Box::new(JsonFileStorage::new(&cli.data_dir)?))?;
    let mut service = Service::new(store, key);
    if let Some(path) = &cli.report_templates {
        service = service.with_templates(Templates::from_toml(&std::fs::read_to_string(path)?)?);
    }
    Ok(service)
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    tracing_subscriber::fmt::init();
    let cli = Cli::parse();
    let service = open(&cli)?;
    match cli.command {
        Some(Command::InitAdmin { ref login, ref password }) => {
            match service.bootstrap_admin(login, password)? {
                Some(a) => println!("created super-admin {} ({})", a.login, a.id),
                None => println!("study already has accounts; nothing to do"),
            }
            Ok(())
        }
        Some(Command::Serve { port, ref bind }) => serve(service, bind, port).await,
        None => serve(service, "127.0.0.1", cli.port).await,
    }
}

async fn serve(service: Service, bind: &str, port: u16) -> Result<(), Box<dyn std::error::Error>> {
    let addr: SocketAddr = format!("{bind}:{port}").parse()?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {addr}");
    axum::serve(listener, http::router(Arc::new(service)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
