//! Headless scripted sessions.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chrono::Utc;
use roblab_core::config::LabConfig;
use roblab_core::mapping::ExampleController;
use roblab_core::plugin::{PluginHost, EXAMPLE_USER};
use roblab_core::session::Session;
use roblab_core::SimTime;

use crate::error::CliError;
use crate::script::{self, Action, PluginRef, Step};

const PACE_STEP: SimTime = SimTime::from_millis(10);

pub struct RunOptions {
    pub script: PathBuf,
    pub user: String,
    pub fast: bool,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
}

#[derive(Debug)]
pub struct RunReport {
    pub history: PathBuf,
    pub ticks: u64,
    pub overruns: u32,
    pub warnings: Vec<String>,
    /// Launch failure or disable reason, if the plugin broke policy.
    pub plugin_failure: Option<String>,
}

pub fn load_config(path: Option<&Path>) -> Result<LabConfig, CliError> {
    match path {
        Some(p) => LabConfig::load(p).map_err(|e| CliError::usage("bad-config", e.to_string())),
        None => Ok(LabConfig::default()),
    }
}

fn launch(r: &PluginRef, config: &LabConfig, out: &Path) -> Result<PluginHost, String> {
    let result = match r {
        PluginRef::Example => PluginHost::builtin(EXAMPLE_USER, Box::new(ExampleController::default()), config.plugin.clone()),
        PluginRef::Program(p) => {
            let workdir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            PluginHost::spawn(p, workdir, Some(&out.join("controller.log")), config.plugin.clone())
        }
    };
    result.map_err(|e| e.to_string())
}

struct Runner {
    session: Session,
    fast: bool,
    wall: Instant,
}

impl Runner {
    fn advance_to(&mut self, t: SimTime) {
        if self.fast {
            if t > self.session.now() {
                let dt = t - self.session.now();
                self.session.advance(dt);
            }
            return;
        }
        while self.session.now() < t {
            let step = (t - self.session.now()).min(PACE_STEP);
            self.session.advance(step);
            let due = Duration::from_micros(self.session.now().as_micros());
            if let Some(wait) = due.checked_sub(self.wall.elapsed()) {
                std::thread::sleep(wait);
            }
        }
    }
}

pub fn run(opts: &RunOptions) -> Result<RunReport, CliError> {
    let text = std::fs::read_to_string(&opts.script).map_err(|e| CliError::io(&opts.script.display().to_string(), e))?;
    let steps: Vec<Step> = script::parse(&text).map_err(|e| CliError::usage("bad-script", e.to_string()))?;
    let mut config = load_config(opts.config.as_deref())?;
    if opts.seed.is_some() {
        config.seed = opts.seed;
    }
    std::fs::create_dir_all(&opts.out).map_err(|e| CliError::io(&opts.out.display().to_string(), e))?;
    let session = Session::new(&opts.user, config.clone()).map_err(|e| CliError::usage("bad-config", e.to_string()))?;
    let mut runner = Runner { session, fast: opts.fast, wall: Instant::now() };
    let mut warnings = Vec::new();
    let mut plugin_failure = None;
    for step in &steps {
        runner.advance_to(step.t);
        let s = &mut runner.session;
        let outcome = match &step.action {
            Action::Plugin(r) => match launch(r, &config, &opts.out) {
                Ok(host) => {
                    s.attach_plugin(host);
                    Ok(())
                }
                Err(e) => {
                    plugin_failure = Some(format!("plugin launch failed: {e}"));
                    Err(("plugin-launch", e))
                }
            },
            Action::Mode(m) => s.set_mode(*m).map_err(|e| ("mode-rejected", e.to_string())),
            Action::Command(u1, u2) => s.manual_command(*u1, *u2).map_err(|e| ("command-rejected", e.to_string())),
            Action::Backend(b) => s.set_backend(*b).map_err(|e| ("unsupported", e.to_string())),
            Action::End => Ok(()),
        };
        if let Err((code, msg)) = outcome {
            warnings.push(format!("warning: {code}: line {}: {msg}", step.line));
        }
    }
    runner.advance_to(script::duration(&steps));
    let mut session = runner.session;
    if let Some(reason) = session.plugin().and_then(|p| p.disabled_reason()) {
        plugin_failure = Some(format!("plugin disabled: {reason}"));
    }
    let overruns = session.plugin().map_or(0, |p| p.overruns());
    let history = session.finalize(&opts.out, Utc::now()).map_err(|e| CliError::io("writing history", e))?;
    Ok(RunReport { history, ticks: session.counters().ticks, overruns, warnings, plugin_failure })
}
