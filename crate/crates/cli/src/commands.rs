use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use indexmap::IndexMap;
use srtr_core::dsl::{parse_params, parse_rsm, ParamMap, TransitionFn};
use srtr_core::peval::{classify_params, make_residual};
use srtr_core::repair::{correct_all, srtr, Backend, RepairOptions};
use srtr_core::sim::{gen_scenarios, heatmap_csv, heatmap_scenarios, simulate, success_rate, Kind, Scenario};
use srtr_core::solver::{emit_smtlib, Encoding, SmtConfig};

use crate::{read_text, report_text, service, write_text, CliError, Session};

#[derive(Debug, Parser)]
#[command(name = "srtr", version, about = "Repair state machine parameters from corrected trace steps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Parse and typecheck a state machine.
    Check {
        rsm: PathBuf,
    },
    /// Simulate a state machine on one scenario.
    Run {
        #[arg(long)]
        rsm: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        /// Where to write the trace (JSON Lines).
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        max_steps: Option<u64>,
    },
    /// Print the residual of the transition function at one trace step.
    Residual {
        #[arg(long)]
        rsm: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        t: u64,
    },
    /// Repair parameters from corrections.
    Repair {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_enum, default_value_t = BackendArg::Internal)]
        backend: BackendArg,
        /// External solver for `--backend smtlib`; the script path is appended.
        #[arg(long, default_value = "z3")]
        solver_cmd: String,
        /// Where to write the repaired parameters.
        #[arg(long, default_value = "newparams.json")]
        out: PathBuf,
        /// Also write the report here; it always goes to stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write the repair problem as an SMT-LIB2 optimization script.
    EmitSmt {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Output path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Success rate over generated scenarios, with a heat-map CSV.
    Eval {
        #[arg(long, value_enum, default_value_t = KindArg::Attacker)]
        kind: KindArg,
        #[arg(long, default_value_t = 150)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// State machine; the bundled one for `--kind` when absent.
        #[arg(long)]
        rsm: Option<PathBuf>,
        /// Parameters; the bundled baseline when absent.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Use the 10×10×12 attacker heat-map grid instead of random scenarios.
        #[arg(long)]
        heatmap: bool,
        #[arg(long, default_value = "heatmap.csv")]
        csv: PathBuf,
        #[arg(long)]
        max_steps: Option<u64>,
    },
    /// Serve a session to the annotator.
    Serve {
        #[arg(long)]
        rsm: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        corrections: Option<PathBuf>,
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        host: IpAddr,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory of annotator assets served at `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    #[arg(long)]
    pub rsm: PathBuf,
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long)]
    pub corrections: PathBuf,
    /// Cost of leaving one correction unmet.
    #[arg(long, default_value_t = 1.0)]
    pub penalty: f64,
    /// Margin for strict comparisons.
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon: f64,
    /// Box on one adjustment, `name=lo,hi`; repeatable.
    #[arg(long = "bound", value_parser = parse_bound)]
    pub bounds: Vec<(String, (f64, f64))>,
    #[arg(long, value_enum, default_value_t = EncodingArg::Xor)]
    pub encoding: EncodingArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Internal,
    Smtlib,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EncodingArg {
    /// Penalty variables with an exclusive-or per correction.
    Xor,
    /// `assert-soft`; violations are minimized before adjustments.
    AssertSoft,
}

impl From<EncodingArg> for Encoding {
    fn from(e: EncodingArg) -> Self {
        match e {
            EncodingArg::Xor => Encoding::Xor,
            EncodingArg::AssertSoft => Encoding::AssertSoft,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Attacker,
    Deflector,
    Docker,
}

impl From<KindArg> for Kind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Attacker => Kind::Attacker,
            KindArg::Deflector => Kind::Deflector,
            KindArg::Docker => Kind::Docker,
        }
    }
}

fn parse_bound(s: &str) -> Result<(String, (f64, f64)), String> {
    let (name, range) = s.split_once('=').ok_or("expected name=lo,hi")?;
    let (lo, hi) = range.split_once(',').ok_or("expected name=lo,hi")?;
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
    Ok((name.trim().to_string(), (num(lo)?, num(hi)?)))
}

impl ProblemArgs {
    fn options(&self) -> RepairOptions {
        RepairOptions {
            penalty: self.penalty,
            epsilon: self.epsilon,
            bounds: self.bounds.iter().cloned().collect::<IndexMap<_, _>>(),
            ..RepairOptions::default()
        }
    }

    fn session(&self) -> Result<Session, CliError> {
        Session::load(&self.rsm, &self.params, &self.trace, Some(&self.corrections))
    }
}

fn load_rsm(path: &Path) -> Result<(String, TransitionFn), CliError> {
    let src = read_text(path)?;
    let f = parse_rsm(&src)?;
    Ok((src, f))
}

/// Runs one command; the result is the process exit code.
pub fn execute(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Cmd::Check { rsm } => {
            let (_, f) = load_rsm(&rsm)?;
            let cls = classify_params(&f);
            println!(
                "ok: {} states, {} inputs, {} vars, params repairable {:?}, unrepairable {:?}",
                f.states.len(),
                f.inputs.len(),
                f.vars.len(),
                cls.rep,
                cls.unrep
            );
            Ok(0)
        }
        Cmd::Run { rsm, params, scenario, log, max_steps } => {
            let (_, f) = load_rsm(&rsm)?;
            let params = parse_params(&read_text(&params)?, &f)?;
            let sc: Scenario = serde_json::from_str(&read_text(&scenario)?)
                .map_err(|e| CliError::new("SchemaError", format!("{}: {e}", scenario.display())))?;
            let o = simulate(&f, &params, &sc, max_steps.unwrap_or(sc.kind.default_max_steps()))?;
            if let Some(log) = log {
                write_text(&log, &o.trace.to_jsonl())?;
            }
            let summary = serde_json::json!({
                "success": o.success,
                "reason": o.reason,
                "steps": o.steps,
                "final_state": o.trace.elements().last().map(|e| e.state.clone()),
            });
            println!("{summary}");
            Ok(0)
        }
        Cmd::Residual { rsm, params, trace, t } => {
            let (_, f) = load_rsm(&rsm)?;
            let params = parse_params(&read_text(&params)?, &f)?;
            let trace = srtr_core::dsl::parse_trace(&read_text(&trace)?, &f)?;
            let tau = trace.get(t).ok_or_else(|| CliError::new("IndexError", format!("no trace element with t = {t}")))?;
            let r = make_residual(&f, tau, &params).map_err(|e| CliError::new(e.kind(), e.to_string()))?;
            println!("{r}");
            Ok(0)
        }
        Cmd::Repair { problem, backend, solver_cmd, out, report } => {
            let s = problem.session()?;
            let mut opts = problem.options();
            if backend == BackendArg::Smtlib {
                let cmd: Vec<String> = solver_cmd.split_whitespace().map(String::from).collect();
                opts.backend = Backend::External { cmd, encoding: problem.encoding.into() };
            }
            let r = srtr(&s.rsm, &s.params, &s.trace, &s.corrections, &opts)?;
            write_text(&out, &(r.params.to_json() + "\n"))?;
            let text = report_text(&r);
            if let Some(path) = report {
                write_text(&path, &text)?;
            }
            print!("{text}");
            Ok(if r.satisfied.iter().all(|x| *x) { 0 } else { 2 })
        }
        Cmd::EmitSmt { problem, out } => {
            let s = problem.session()?;
            let opts = problem.options();
            let rp = correct_all(&s.rsm, &s.params, &s.trace, &s.corrections, &opts)?;
            let cfg = SmtConfig { encoding: problem.encoding.into(), ..SmtConfig::from(&opts.solver_config()) };
            let script = emit_smtlib(&rp.problem, rp.rep(), &cfg)?;
            match out {
                Some(path) => write_text(&path, &script)?,
                None => print!("{script}"),
            }
            Ok(0)
        }
        Cmd::Eval { kind, n, seed, rsm, params, heatmap, csv, max_steps } => {
            let kind = Kind::from(kind);
            let f = match &rsm {
                Some(p) => load_rsm(p)?.1,
                None => kind.rsm(),
            };
            let params: ParamMap = match &params {
                Some(p) => parse_params(&read_text(p)?, &f)?,
                None => kind.baseline(),
            };
            let scenarios = if heatmap {
                if kind != Kind::Attacker {
                    return Err(CliError::new("InvalidConfig", "the heat-map grid is defined for the attacker only"));
                }
                heatmap_scenarios()
            } else {
                gen_scenarios(seed, n, kind)
            };
            let (rate, outcomes) = success_rate(&f, &params, &scenarios, max_steps.unwrap_or(kind.default_max_steps()))?;
            write_text(&csv, &heatmap_csv(&scenarios, &outcomes))?;
            println!("{} success rate {rate:.4} over {} scenarios", kind.name(), scenarios.len());
            Ok(0)
        }
        Cmd::Serve { rsm, params, trace, corrections, host, port, static_dir } => {
            let session = Session::load(&rsm, &params, &trace, corrections.as_deref())?;
            let addr = SocketAddr::new(host, port);
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::new("IOError", e.to_string()))?;
            rt.block_on(service::serve(session, addr, static_dir))?;
            Ok(0)
        }
    }
}
