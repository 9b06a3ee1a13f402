//! `roblab`: operator command line for the virtual robotics lab.

mod admin;
mod error;
mod render;
mod run;
mod script;

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use roblab_core::booking::BookingStore;
use roblab_core::world::HiddenWorld;
use roblab_server::config::ENV_DATA_DIR;
use roblab_server::{Server, ServerConfig, Shared};

use crate::error::{CliError, EXIT_PLUGIN};
use crate::run::RunOptions;

#[derive(Parser)]
#[command(name = "roblab", version, about = "Virtual robotics lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the protocol server until interrupted.
    Serve {
        /// Server configuration (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run a scripted session headless and write its history.
    Run {
        script: PathBuf,
        /// Ignore the wall clock.
        #[arg(long)]
        fast: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory receiving the history directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Session configuration (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Owner of the session; selects the hidden world unless seeded.
        #[arg(long, default_value = "example")]
        user: String,
    },
    /// Render a history directory or compressed map as a PGM image.
    Render {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a user's hidden world.
    Worldgen {
        #[arg(long)]
        user: String,
        /// Use this seed instead of the one derived from the name.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the rasterized world as a compressed map.
        #[arg(long)]
        map: Option<PathBuf>,
    },
    /// Manage accounts in the booking store.
    User {
        #[command(subcommand)]
        op: UserOp,
        #[arg(long, global = true)]
        booking: Option<PathBuf>,
    },
    /// Manage reserved slots in the booking store.
    Slot {
        #[command(subcommand)]
        op: SlotOp,
        #[arg(long, global = true)]
        booking: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum UserOp {
    /// Add a user; the password is read from stdin unless given.
    Add {
        name: String,
        #[arg(long)]
        password: Option<String>,
    },
    Remove {
        name: String,
    },
    List,
}

#[derive(Subcommand)]
enum SlotOp {
    /// Reserve [start, end) for a user, times in RFC 3339.
    Add { user: String, start: String, end: String },
    Cancel { user: String, start: String },
    List,
}

fn data_dir() -> PathBuf {
    std::env::var_os(ENV_DATA_DIR).map_or_else(|| PathBuf::from("data"), PathBuf::from)
}

fn booking_path(flag: Option<PathBuf>) -> PathBuf {
    flag.unwrap_or_else(|| data_dir().join("booking.txt"))
}

fn serve(config: Option<&Path>) -> Result<(), CliError> {
    let mut cfg = match config {
        Some(p) => ServerConfig::load(p).map_err(|e| CliError::usage("bad-config", e.to_string()))?,
        None => ServerConfig::default(),
    };
    cfg.apply_env(|k| std::env::var(k).ok()).map_err(|e| CliError::usage("bad-config", e.to_string()))?;
    std::fs::create_dir_all(&cfg.data_dir).map_err(|e| CliError::io(&cfg.data_dir.display().to_string(), e))?;
    let store = BookingStore::load(&cfg.booking_path).map_err(|e| CliError::new("booking", e.to_string()))?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::io("runtime", e))?;
    rt.block_on(async move {
        let server = Server::bind(Shared::new(cfg, store)).await.map_err(|e| CliError::new("bind", e.to_string()))?;
        println!("listening tcp={} ws={}", server.tcp_addr(), server.ws_addr());
        let _ = std::io::stdout().flush();
        server
            .run_until(async {
                let _ = tokio::signal::ctrl_c().await;
                log::info!("interrupted, shutting down");
            })
            .await;
        Ok(())
    })
}

fn read_password() -> Result<String, CliError> {
    let mut line = String::new();
    std::io::stdin().lock().read_line(&mut line).map_err(|e| CliError::io("stdin", e))?;
    let pw = line.trim_end_matches(['\r', '\n']).to_string();
    if pw.is_empty() {
        return Err(CliError::usage("bad-password", "empty password"));
    }
    Ok(pw)
}

fn dispatch(cmd: Command) -> Result<ExitCode, CliError> {
    match cmd {
        Command::Serve { config } => serve(config.as_deref())?,
        Command::Run { script, fast, seed, out, config, user } => {
            let report = run::run(&RunOptions { script, user, fast, seed, out, config })?;
            for w in &report.warnings {
                eprintln!("{w}");
            }
            println!("history: {}", report.history.display());
            println!("ticks: {} overruns: {}", report.ticks, report.overruns);
            if let Some(reason) = report.plugin_failure {
                eprintln!("{}", CliError { code: "plugin-policy", message: reason, exit: EXIT_PLUGIN });
                return Ok(ExitCode::from(EXIT_PLUGIN as u8));
            }
        }
        Command::Render { input, out } => {
            let image = render::render(&input)?;
            std::fs::write(&out, image).map_err(|e| CliError::io(&out.display().to_string(), e))?;
        }
        Command::Worldgen { user, seed, map } => {
            let world = match seed {
                Some(s) => HiddenWorld::from_seed(s),
                None => HiddenWorld::for_user(&user),
            };
            print!("{}", world.listing());
            if let Some(path) = map {
                std::fs::write(&path, render::truth_map(&world).to_bytes()).map_err(|e| CliError::io(&path.display().to_string(), e))?;
            }
        }
        Command::User { op, booking } => {
            let path = booking_path(booking);
            match op {
                UserOp::Add { name, password } => {
                    let pw = match password {
                        Some(p) => p,
                        None => read_password()?,
                    };
                    admin::add_user(&path, &name, &pw)?;
                }
                UserOp::Remove { name } => admin::remove_user(&path, &name)?,
                UserOp::List => admin::list_users(&path)?.iter().for_each(|u| println!("{u}")),
            }
        }
        Command::Slot { op, booking } => {
            let path = booking_path(booking);
            match op {
                SlotOp::Add { user, start, end } => println!("{}", admin::reserve(&path, &user, &start, &end)?),
                SlotOp::Cancel { user, start } => println!("{}", admin::cancel(&path, &user, &start)?),
                SlotOp::List => admin::list_slots(&path)?.iter().for_each(|s| println!("{s}")),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            eprintln!("{}", CliError::usage("usage", first));
            return ExitCode::from(2);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit as u8)
        }
    }
}
