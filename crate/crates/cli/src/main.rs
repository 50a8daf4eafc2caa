//! `layercast`: analyze, optimize and simulate layered multicast scenarios.

mod output;
mod scenario;

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use layercast::optimizer::{uncoded_pareto_frontier, UncodedEvaluation};
use layercast::{
    improvement_sweep, layer_distributions, optimize_up_to, pareto_frontier, simulate, user_metric, PolicyEvaluation,
    SweepOptions,
};

use output::{number, optional, per_user, write_csv};
use scenario::Scenario;

#[derive(Debug, Parser)]
#[command(name = "layercast", version, about = "Layered multicast with expanding-window network coding")]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for CSV output; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the scenario's bound on visited policies.
    #[arg(long, global = true)]
    cap: Option<u128>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Layer distributions and metrics of the scenario's policy.
    Analyze,
    /// Best policy for the scenario's budget.
    Optimize,
    /// Pareto frontiers of the coded, single-stream and uncoded schemes.
    Pareto,
    /// Optimal metrics over the budget range, with the gain of coding
    /// across streams.
    Sweep,
    /// Monte Carlo check of the scenario's policy.
    Simulate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Optimize => "optimize",
            Command::Pareto => "pareto",
            Command::Sweep => "sweep",
            Command::Simulate => "simulate",
        }
    }
}

type Table = (Vec<String>, Vec<Vec<String>>);

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<(), Box<dyn std::error::Error>> {
    let path = cli.config.as_deref().ok_or("missing --config <path>")?;
    let mut s = Scenario::load(path)?;
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    if let Some(cap) = cli.cap {
        s.cap = cap;
    }
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global()?;
    }
    let tables: Vec<(String, Table)> = match cli.command {
        Command::Analyze => vec![("analyze".into(), analyze(&s)?)],
        Command::Optimize => vec![("optimize".into(), optimize(&s)?)],
        Command::Pareto => vec![("pareto".into(), pareto(&s)?)],
        Command::Sweep => {
            let (rows, summary) = sweep(&s)?;
            vec![("sweep".into(), rows), ("sweep-summary".into(), summary)]
        }
        Command::Simulate => vec![("simulate".into(), simulate_cmd(&s)?)],
    };
    emit(cli.out.as_deref(), &s.name, cli.command, &tables)
}

fn emit(out: Option<&Path>, name: &str, cmd: Command, tables: &[(String, Table)]) -> Result<(), Box<dyn std::error::Error>> {
    match out {
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            for (j, (_, (header, rows))) in tables.iter().enumerate() {
                if j > 0 {
                    writeln!(lock)?;
                }
                write_csv(&mut lock, header, rows)?;
            }
        }
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
            for (label, (header, rows)) in tables {
                let file = dir.join(format!("{name}-{label}.csv"));
                let f = File::create(&file).map_err(|e| format!("{}: {e}", file.display()))?;
                write_csv(f, header, rows)?;
                eprintln!("{}: wrote {}", cmd.name(), file.display());
            }
        }
    }
    Ok(())
}

fn require_policy(s: &Scenario) -> Result<&layercast::Policy, scenario::ScenarioError> {
    s.policy.as_ref().ok_or_else(|| s.error(Some("policy"), "this command needs a policy"))
}

fn analyze(s: &Scenario) -> Result<Table, Box<dyn std::error::Error>> {
    let policy = require_policy(s)?;
    let dists = layer_distributions(&s.config, policy)?;
    let header = ["kind", "user", "layer", "value"].map(String::from).to_vec();
    let mut rows = Vec::new();
    let mut etas = Vec::new();
    for (u, d) in dists.iter().enumerate() {
        for (l, p) in d.probs().iter().enumerate() {
            rows.push(vec!["probability".into(), (u + 1).to_string(), l.to_string(), number(*p)]);
        }
        etas.push(user_metric(d, s.weights.stream(u))?);
    }
    for (u, e) in etas.iter().enumerate() {
        rows.push(vec!["eta".into(), (u + 1).to_string(), String::new(), number(*e)]);
    }
    let mean = etas.iter().sum::<f64>() / etas.len() as f64;
    rows.push(vec!["mean_eta".into(), String::new(), String::new(), number(mean)]);
    Ok((header, rows))
}

fn evaluation_row(total: u32, e: &PolicyEvaluation) -> Vec<String> {
    let mut row = vec![total.to_string(), number(e.aggregate)];
    row.extend(e.per_user_eta.iter().map(|&x| number(x)));
    row.push(e.policy.to_string());
    row
}

fn optimize(s: &Scenario) -> Result<Table, Box<dyn std::error::Error>> {
    let budget = s.config.budget();
    let best = optimize_up_to(&s.config, &s.windows, &s.weights, budget, s.cap)?;
    let mut header = vec!["nt".to_string(), "mean_eta".into()];
    header.extend(per_user("eta", s.config.stream_count()));
    header.push("policy".into());
    Ok((header, vec![evaluation_row(budget, &best[budget as usize])]))
}

fn uncoded_label(e: &UncodedEvaluation) -> String {
    e.allocation
        .counts()
        .iter()
        .map(|layers| layers.iter().map(u32::to_string).collect::<Vec<_>>().join("."))
        .collect::<Vec<_>>()
        .join(";")
}

fn pareto(s: &Scenario) -> Result<Table, Box<dyn std::error::Error>> {
    let n = s.config.stream_count();
    let mut header = vec!["scheme".to_string()];
    header.extend(per_user("eta", n));
    header.extend(["mean_eta".to_string(), "policy".into()]);
    let mut rows = Vec::new();
    for (scheme, windows) in [("coded", &s.windows), ("intra", &s.intra_windows)] {
        for e in pareto_frontier(&s.config, windows, &s.weights, s.cap)? {
            let mut r = vec![scheme.to_string()];
            r.extend(e.per_user_eta.iter().map(|&x| number(x)));
            r.extend([number(e.aggregate), e.policy.to_string()]);
            rows.push(r);
        }
    }
    for e in uncoded_pareto_frontier(&s.config, &s.weights, s.cap)? {
        let mut r = vec!["uncoded".to_string()];
        r.extend(e.per_user_eta.iter().map(|&x| number(x)));
        r.extend([number(e.aggregate), uncoded_label(&e)]);
        rows.push(r);
    }
    Ok((header, rows))
}

fn sweep(s: &Scenario) -> Result<(Table, Table), Box<dyn std::error::Error>> {
    let mut opts = SweepOptions::new(s.nt_range.0..=s.nt_range.1);
    opts.cap = s.cap;
    opts.certify = s.certify;
    let report = improvement_sweep(&s.config, &s.windows, &s.intra_windows, &s.weights, &opts)?;
    let header = [
        "nt",
        "eta_coded",
        "eta_intra",
        "eta_uncoded",
        "gain_percent",
        "gain_bound_percent",
        "status",
        "policy_coded",
        "policy_intra",
        "allocation_uncoded",
    ]
    .map(String::from)
    .to_vec();
    let rows = report
        .rows
        .iter()
        .map(|r| {
            let status = match (&r.inter, r.gain) {
                (None, _) => "bounded",
                (Some(_), None) => "undefined",
                (Some(_), Some(_)) => "exact",
            };
            vec![
                r.total.to_string(),
                optional(r.inter.as_ref().map(|e| e.aggregate), ""),
                number(r.intra.aggregate),
                optional(r.uncoded.as_ref().map(|e| e.aggregate), ""),
                optional(r.gain, if r.inter.is_some() { "undefined" } else { "" }),
                optional(r.gain_bound, "undefined"),
                status.into(),
                r.inter.as_ref().map(|e| e.policy.to_string()).unwrap_or_default(),
                r.intra.policy.to_string(),
                r.uncoded.as_ref().map(uncoded_label).unwrap_or_default(),
            ]
        })
        .collect();
    let summary_header = ["max_gain_percent", "at_nt", "searched_through", "range_start", "range_end"].map(String::from).to_vec();
    let summary = vec![vec![
        optional(report.max_gain.map(|m| m.1), "undefined"),
        report.max_gain.map(|m| m.0.to_string()).unwrap_or_default(),
        report.searched_through.to_string(),
        s.nt_range.0.to_string(),
        s.nt_range.1.to_string(),
    ]];
    Ok(((header, rows), (summary_header, summary)))
}

fn simulate_cmd(s: &Scenario) -> Result<Table, Box<dyn std::error::Error>> {
    let policy = require_policy(s)?;
    let analytic = PolicyEvaluation::evaluate(&s.config, policy, &s.weights)?;
    let est = simulate(&s.config, policy, &s.weights, s.trials, s.seed, s.field_order)?;
    let header = ["user", "eta_analytic", "eta_mc", "stderr", "z_score", "trials", "seed", "field_order"]
        .map(String::from)
        .to_vec();
    let rows = (0..s.config.stream_count())
        .map(|u| {
            let diff = est.eta[u] - analytic.per_user_eta[u];
            let z = if est.stderr[u] > 0.0 { diff / est.stderr[u] } else if diff == 0.0 { 0.0 } else { f64::INFINITY.copysign(diff) };
            vec![
                (u + 1).to_string(),
                number(analytic.per_user_eta[u]),
                number(est.eta[u]),
                number(est.stderr[u]),
                number(z),
                est.trials.to_string(),
                est.seed.to_string(),
                est.field_order.to_string(),
            ]
        })
        .collect();
    Ok((header, rows))
}
