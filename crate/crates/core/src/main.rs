use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};

use mechagents::agents::{Topology, API_KEY_ENV};
use mechagents::orchestrator::{AdminMode, ConversationLimits};
use mechagents::service::{self, BackendChoice, LlmSettings, RunConfig, ServeConfig, ServiceError};

#[derive(Parser)]
#[command(name = "mechagents", version, about = "Agents that set up, solve and check 2D elasticity problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one conversation and write transcript, artifacts and summary.
    Run(RunArgs),
    /// Execute a problem document directly.
    Solve {
        spec: PathBuf,
        out_dir: PathBuf,
        /// Also run the verification checks; the exit code reflects them.
        #[arg(long)]
        check: bool,
    },
    /// Render a field file to PNG.
    Render { field: PathBuf, png: PathBuf },
    /// Serve the chat console API.
    Serve(ServeArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    backend: Option<BackendChoice>,
    /// Scenario file or bundled scenario name.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long, value_parser = parse_topology)]
    topology: Option<Topology>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_rounds: Option<usize>,
    #[arg(long, value_parser = parse_admin_mode)]
    admin_mode: Option<AdminMode>,
}

#[derive(clap::Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Directory for conversation work dirs.
    #[arg(long, default_value = "mechagents-serve")]
    root: PathBuf,
    #[arg(long, default_value = "")]
    base_url: String,
    #[arg(long, default_value = "")]
    model: String,
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
    /// Seconds an interactive admin turn waits before skipping.
    #[arg(long, default_value_t = 300.0)]
    admin_timeout: f64,
}

fn parse_topology(s: &str) -> Result<Topology, String> {
    match s {
        "two_agent" => Ok(Topology::TwoAgent),
        "group_chat" => Ok(Topology::GroupChat),
        _ => Err("expected two_agent or group_chat".into()),
    }
}

fn parse_admin_mode(s: &str) -> Result<AdminMode, String> {
    match s {
        "auto_skip" => Ok(AdminMode::AutoSkip),
        "interactive" => Ok(AdminMode::Interactive),
        _ => Err("expected auto_skip or interactive".into()),
    }
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn api_key() -> Option<String> {
    std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty())
}

fn run_config(args: RunArgs) -> Result<RunConfig, ServiceError> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig {
            backend: args.backend.ok_or_else(|| ServiceError::Config("--backend is required".into()))?,
            scenario: None,
            task: None,
            topology: None,
            out_dir: PathBuf::from("mechagents-out"),
            llm: LlmSettings::default(),
            limits: ConversationLimits::default(),
            admin_mode: AdminMode::AutoSkip,
        },
    };
    if let Some(b) = args.backend {
        config.backend = b;
    }
    config.scenario = args.scenario.or(config.scenario);
    config.task = args.task.or(config.task);
    config.topology = args.topology.or(config.topology);
    if let Some(d) = args.out_dir {
        config.out_dir = d;
    }
    if let Some(u) = args.base_url {
        config.llm.base_url = u;
    }
    if let Some(m) = args.model {
        config.llm.model = m;
    }
    if let Some(t) = args.temperature {
        config.llm.temperature = t;
    }
    if let Some(n) = args.max_rounds {
        config.limits.max_rounds = n;
    }
    if let Some(m) = args.admin_mode {
        config.admin_mode = m;
    }
    Ok(config)
}

fn dispatch(command: Command) -> Result<i32, ServiceError> {
    match command {
        Command::Run(args) => {
            let config = run_config(args)?;
            let result = service::cmd_run(&config, api_key())?;
            let s = &result.summary;
            let mut out = format!("termination: {}\nmessages: {}\n", s.termination, s.messages);
            for (k, v) in &s.final_scalars {
                out.push_str(&format!("{k}: {v:.6e}\n"));
            }
            if let Some(c) = &s.final_checks {
                out.push_str(&c.render());
            }
            out.push_str(&format!("summary: {}\n", config.out_dir.join(service::SUMMARY_FILE).display()));
            emit(&out);
            Ok(result.exit_code())
        }
        Command::Solve { spec, out_dir, check } => {
            let result = service::cmd_solve(&spec, &out_dir, check)?;
            emit(&result.text);
            Ok(result.exit_code)
        }
        Command::Render { field, png } => {
            let d = service::cmd_render(&field, &png)?;
            emit(&(serde_json::to_string_pretty(&d).expect("descriptor serializes") + "\n"));
            Ok(0)
        }
        Command::Serve(args) => {
            let config = ServeConfig {
                root: args.root,
                llm: LlmSettings { base_url: args.base_url, model: args.model, temperature: args.temperature },
                api_key: api_key(),
                limits: ConversationLimits::default(),
                admin_timeout: Duration::try_from_secs_f64(args.admin_timeout)
                    .map_err(|e| ServiceError::Config(format!("--admin-timeout: {e}")))?,
            };
            let rt = tokio::runtime::Runtime::new().map_err(|e| ServiceError::Runtime(e.to_string()))?;
            rt.block_on(async {
                let listener = service::bind(&args.host, args.port).await?;
                log::info!("listening on {}", listener.local_addr().map(|a| a.to_string()).unwrap_or_default());
                service::serve(listener, config).await
            })?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("mechagents: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
