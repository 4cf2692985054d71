//! `tm` — batch workbench for thinging-machine models.
//!
//! Exit codes: 0 success, 1 the tool ran fine but the model has
//! findings, 2 usage or input errors. Set `TM_COLOR=0` to disable ANSI
//! color in summaries. All outputs are deterministic for identical
//! arguments and input files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tm_core::behavior::BehaviorGraph;
use tm_core::model::StaticModel;
use tm_core::reconfig::{Controller, SwitchPolicy};
use tm_core::sim::{init_sim, Injection};
use tm_core::trace::{billing_total, Money, PayloadValue};
use tm_core::zeno::{build_lattice, launch};

#[derive(Parser)]
#[command(name = "tm", version, about = "Thinging-machine model workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a .tm model and report diagnostics and violations.
    Validate {
        /// Model file (.tm)
        model: PathBuf,
    },
    /// Render a .tm model as Graphviz DOT.
    Render {
        model: PathBuf,
        /// Output DOT file
        #[arg(long)]
        dot: PathBuf,
    },
    /// Run a deterministic token simulation over a model.
    Simulate {
        model: PathBuf,
        /// Behavior graph JSON; omitted means unconstrained
        #[arg(long)]
        behavior: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Injection script: JSON list of {step, stage, payload}
        #[arg(long)]
        inject: Option<PathBuf>,
        /// Trace output (JSON Lines)
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        max_steps: u64,
    },
    /// Import a BPMN subset file into a model and behavior graph.
    ImportBpmn {
        file: PathBuf,
        /// Canonical model JSON output
        #[arg(long)]
        out: PathBuf,
        /// Behavior graph JSON output
        #[arg(long)]
        behavior_out: Option<PathBuf>,
    },
    /// Run the order-case reconfiguration scenario.
    ReconfigDemo {
        #[arg(long, value_enum, default_value_t = PolicyArg::Drain)]
        policy: PolicyArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Trace output (JSON Lines, records tagged with case and config)
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run the bouncing-arrow experiment on a space lattice.
    Zeno {
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        energy: u64,
        /// Trajectory output (JSON Lines)
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Lattice DOT with the settle node highlighted
        #[arg(long)]
        dot: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Drain,
    Immediate,
}

enum Outcome {
    Clean,
    Findings,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Findings) => ExitCode::from(1),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn paint(text: &str, code: &str) -> String {
    if std::env::var("TM_COLOR").is_ok_and(|v| v == "0") {
        text.to_owned()
    } else {
        format!("\x1b[{code}m{text}\x1b[0m")
    }
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<(), String> {
    fs::write(path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

/// Parse and fully check a model file; diagnostics and violations are
/// printed and counted as findings.
fn load_model(path: &Path) -> Result<(StaticModel, usize), String> {
    let text = read(path)?;
    let (model, diagnostics) = tm_dsl::parse_model_named(&path.display().to_string(), &text);
    for diag in &diagnostics {
        println!("{diag}");
    }
    let report = model.validate();
    for violation in &report.violations {
        println!("{}: {}", path.display(), violation.message);
    }
    Ok((model, diagnostics.len() + report.violations.len()))
}

fn run(command: Command) -> Result<Outcome, String> {
    match command {
        Command::Validate { model } => {
            let (_, findings) = load_model(&model)?;
            let label = format!("{findings} violations");
            if findings == 0 {
                println!("{}: {}", model.display(), paint(&label, "32"));
                Ok(Outcome::Clean)
            } else {
                println!("{}: {}", model.display(), paint(&label, "31"));
                Ok(Outcome::Findings)
            }
        }
        Command::Render { model, dot } => {
            let (parsed, findings) = load_model(&model)?;
            if findings > 0 {
                return Ok(Outcome::Findings);
            }
            write(&dot, &tm_dsl::render_dot(&parsed))?;
            println!(
                "rendered {} thimacs to {}",
                parsed.thimac_count(),
                dot.display()
            );
            Ok(Outcome::Clean)
        }
        Command::Simulate {
            model,
            behavior,
            seed,
            inject,
            trace,
            max_steps,
        } => {
            let (parsed, findings) = load_model(&model)?;
            if findings > 0 {
                return Ok(Outcome::Findings);
            }
            let graph = match behavior {
                Some(path) => tm_dsl::behavior_from_json(&parsed, &read(&path)?)
                    .map_err(|e| format!("{}: {e}", path.display()))?,
                None => BehaviorGraph::unconstrained(),
            };
            let script: Vec<Injection> = match inject {
                Some(path) => serde_json::from_str(&read(&path)?)
                    .map_err(|e| format!("{}: {e}", path.display()))?,
                None => Vec::new(),
            };
            let mut sim = init_sim(parsed, graph, seed).map_err(|e| e.to_string())?;
            let result = sim
                .run_script(&script, max_steps)
                .map_err(|e| e.to_string())?;
            if let Some(path) = trace {
                write(&path, &result.to_jsonl())?;
            }
            let status = if result.budget_exhausted {
                paint("budget exhausted", "33")
            } else {
                paint("quiescent", "32")
            };
            println!(
                "seed {seed}: {} records over {} steps, {status}",
                result.records.len(),
                sim.step_no(),
            );
            Ok(Outcome::Clean)
        }
        Command::ImportBpmn {
            file,
            out,
            behavior_out,
        } => {
            let parsed = tm_bpmn::parse_bpmn(&read(&file)?)
                .map_err(|e| format!("{}: {e}", file.display()))?;
            for diag in &parsed.diagnostics {
                println!("{}: {}", file.display(), diag.detail);
            }
            let (model, behavior) =
                tm_bpmn::map_bpmn(&parsed.graph).map_err(|e| format!("{}: {e}", file.display()))?;
            write(&out, &tm_dsl::model_to_json(&model))?;
            if let Some(path) = behavior_out {
                write(&path, &tm_dsl::behavior_to_json(&behavior))?;
            }
            println!(
                "imported {} nodes into {} thimacs, {} events",
                parsed.graph.node_count(),
                model.thimac_count(),
                behavior.event_ids().len()
            );
            if parsed.diagnostics.is_empty() {
                Ok(Outcome::Clean)
            } else {
                Ok(Outcome::Findings)
            }
        }
        Command::ReconfigDemo {
            policy,
            seed,
            trace,
        } => {
            let policy = match policy {
                PolicyArg::Drain => SwitchPolicy::DrainOld,
                PolicyArg::Immediate => SwitchPolicy::Immediate,
            };
            reconfig_demo(policy, seed, trace.as_deref())
        }
        Command::Zeno {
            nodes,
            energy,
            trace,
            dot,
        } => {
            let lattice = build_lattice(nodes).map_err(|e| e.to_string())?;
            let result = launch(&lattice, energy).run_until_settled();
            if let Some(path) = trace {
                write(&path, &result.to_jsonl())?;
            }
            if let Some(path) = dot {
                let mut options = tm_dsl::DotOptions::default();
                if let Some(node) = lattice.node(result.settle_node) {
                    options.highlight.insert(node.clone());
                }
                write(&path, &tm_dsl::render_dot_with(lattice.model(), &options))?;
            }
            for record in &result.records {
                match record.action {
                    tm_core::Action::Settle => {}
                    action => {
                        println!(
                            "{action} node={} energy={}",
                            record.node, record.energy_after
                        )
                    }
                }
            }
            println!(
                "settle node={} residual={}",
                result.settle_node, result.residual_energy
            );
            Ok(Outcome::Clean)
        }
    }
}

/// Register both order-case configurations, start a case under E20,
/// switch mid-flight, start a second case, and drain everything.
fn reconfig_demo(
    policy: SwitchPolicy,
    seed: u64,
    trace_path: Option<&Path>,
) -> Result<Outcome, String> {
    let case = tm_bpmn::build_order_case();
    let e20 = case.e20.id.clone();
    let e21 = case.e21.id.clone();
    let mut controller = Controller::new(case.model, seed).map_err(|e| e.to_string())?;
    controller
        .register_config(case.e20)
        .map_err(|e| e.to_string())?;
    controller
        .register_config(case.e21)
        .map_err(|e| e.to_string())?;
    controller.activate(&e20).map_err(|e| e.to_string())?;

    controller
        .inject_case(&tm_bpmn::inject_stage(), tm_bpmn::accept_payload())
        .map_err(|e| e.to_string())?;
    for _ in 0..12 {
        controller.step();
    }
    let report = controller.switch(&e21, policy).map_err(|e| e.to_string())?;
    println!(
        "{}",
        serde_json::to_string(&report).expect("report serializes")
    );
    controller
        .inject_case(&tm_bpmn::inject_stage(), tm_bpmn::accept_payload())
        .map_err(|e| e.to_string())?;
    let tail = controller.sim_mut().run(10_000);
    if tail.budget_exhausted {
        return Err("demo did not quiesce".into());
    }

    let records = controller.sim().trace();
    if let Some(path) = trace_path {
        let mut out = String::new();
        for rec in records {
            out.push_str(&serde_json::to_string(rec).expect("record serializes"));
            out.push('\n');
        }
        write(path, &out)?;
    }
    let count_for = |config: &tm_core::ConfigId| {
        records
            .iter()
            .filter(|r| r.config.as_ref() == Some(config))
            .count()
    };
    let payload = tm_bpmn::accept_payload();
    let (Some(PayloadValue::MoneyList(items)), Some(PayloadValue::Money(shipping))) =
        (payload.get("item_costs"), payload.get("shipping_costs"))
    else {
        unreachable!("accept payload carries costs");
    };
    let total: Money = billing_total(items, *shipping).map_err(|e| e.to_string())?;
    println!(
        "records: {} under {e20}, {} under {e21}; billing total {total}",
        count_for(&e20),
        count_for(&e21)
    );
    let first_e21 = records.iter().position(|r| r.config.as_ref() == Some(&e21));
    let last_e20 = records
        .iter()
        .rposition(|r| r.config.as_ref() == Some(&e20));
    let interleaved = matches!((first_e21, last_e20), (Some(a), Some(b)) if a < b);
    println!(
        "coexistence: {}",
        if interleaved {
            paint("old and new configurations interleaved", "32")
        } else {
            paint("no interleaving observed", "33")
        }
    );
    Ok(Outcome::Clean)
}
