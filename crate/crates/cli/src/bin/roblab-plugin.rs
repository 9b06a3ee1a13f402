//! Controller process speaking the plugin protocol on stdin/stdout. Runs the
//! reference sweep by default; flags turn it into a misbehaving plugin for
//! exercising the host's policies.

use std::io::{self, BufReader, BufWriter, Write};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, ValueEnum};
use roblab_core::mapping::ExampleController;
use roblab_core::plugin::wire::{read_message, write_message, Request, Response};
use roblab_core::plugin::{CellUpdate, Controller, Guest, Observation};
use roblab_core::world::OccupancyGrid;
use serde_json::json;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum HookName {
    ComputeWorld,
    Control,
}

#[derive(Parser, Debug)]
#[command(name = "roblab-plugin")]
struct Args {
    /// Always answer control with this command instead of sweeping.
    #[arg(long, value_parser = parse_pair)]
    command: Option<(f64, f64)>,
    /// Sleep this long inside `sleep_in` before answering.
    #[arg(long, default_value_t = 0)]
    sleep_ms: u64,
    #[arg(long, value_enum, default_value = "compute-world")]
    sleep_in: HookName,
    /// Fail the init hook.
    #[arg(long)]
    fail_init: bool,
    /// Answer the first compute_world with a reply that is not a response.
    #[arg(long)]
    malformed: bool,
    /// Protocol version announced in hello.
    #[arg(long)]
    version: Option<u64>,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected u1,u2")?;
    Ok((a.trim().parse().map_err(|_| "bad u1")?, b.trim().parse().map_err(|_| "bad u2")?))
}

struct Fixed {
    command: (f64, f64),
}

impl Controller for Fixed {
    fn compute_world(&mut self, _: &OccupancyGrid, _: &Observation) -> Result<Vec<CellUpdate>, String> {
        Ok(Vec::new())
    }

    fn control(&mut self, _: &OccupancyGrid, _: &Observation) -> Result<(f64, f64), String> {
        Ok(self.command)
    }
}

fn serve(args: &Args) -> io::Result<()> {
    let controller: Box<dyn Controller> = match args.command {
        Some(command) => Box::new(Fixed { command }),
        None => Box::new(ExampleController::default()),
    };
    let mut guest = Guest::new(controller);
    let mut input = BufReader::new(io::stdin().lock());
    let mut output = BufWriter::new(io::stdout().lock());
    let mut malformed = args.malformed;
    while let Some(req) = read_message::<_, Request>(&mut input)? {
        let slow = match req.hook.as_str() {
            "compute_world" => args.sleep_in == HookName::ComputeWorld,
            "control" => args.sleep_in == HookName::Control,
            _ => false,
        };
        if slow && args.sleep_ms > 0 {
            std::thread::sleep(Duration::from_millis(args.sleep_ms));
        }
        let rsp = match req.hook.as_str() {
            "hello" if args.version.is_some() => Response::ok(req.id, json!({ "version": args.version })),
            "init" if args.fail_init => Response::err(req.id, "init refused"),
            "compute_world" if malformed => {
                malformed = false;
                write_message(&mut output, &json!(["not", "a", "response"]))?;
                output.flush()?;
                continue;
            }
            _ => guest.handle(&req),
        };
        write_message(&mut output, &rsp)?;
        output.flush()?;
        if req.hook == "close" {
            break;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match serve(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: io: {e}");
            ExitCode::FAILURE
        }
    }
}
