use std::path::PathBuf;

use clap::{Args, ValueEnum};
use episim_core::network::{LayerSpec, NetworkFile, NetworkSpec};
use episim_core::search::{
    evolve, CandidateSet, Combination, GenerationRecord, Objective, PipelineEvaluator,
    SearchConfig, SearchOutcome,
};

use crate::errors::{CliError, CliResult};
use crate::{load, output, XbarArgs};

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Latency,
    Energy,
}

#[derive(Args)]
pub struct SearchArgs {
    /// Network spec file (TOML)
    #[arg(long)]
    network: PathBuf,
    /// Candidate epitomes per layer (TOML)
    #[arg(long)]
    candidates: PathBuf,
    /// Hardware cost profile (TOML)
    #[arg(long)]
    profile: PathBuf,
    /// Quantity the reward inverts
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Latency)]
    objective: ObjectiveArg,
    /// Crossbar budget; over-budget combinations earn zero reward
    #[arg(long)]
    budget: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    population: usize,
    #[arg(long, default_value_t = 50)]
    iterations: usize,
    #[arg(long, default_value_t = 8)]
    parents: usize,
    /// Per-layer reset probability when mutating
    #[arg(long, default_value_t = 0.2)]
    mutation: f64,
    /// Evaluate candidates with output channel wrapping enabled
    #[arg(long)]
    wrap: bool,
    /// Where to write the chosen deployment as a network overlay
    #[arg(long, default_value = "search.overlay.toml")]
    out_overlay: PathBuf,
    /// Where to write the per-generation history CSV
    #[arg(long, default_value = "search.history.csv")]
    out_history: PathBuf,
    /// Emit structured JSON instead of tables
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    xbar: XbarArgs,
}

fn apply_combination(
    network: &NetworkSpec,
    candidates: &CandidateSet,
    combination: &Combination,
) -> NetworkSpec {
    NetworkSpec {
        name: network.name.clone(),
        layers: network
            .layers
            .iter()
            .zip(&candidates.layers)
            .zip(combination)
            .map(|((layer, cands), &choice)| LayerSpec {
                conv: layer.conv.clone(),
                epitome: cands.options[choice].clone(),
                wrap: layer.wrap,
            })
            .collect(),
    }
}

fn history_rows(history: &[GenerationRecord]) -> Vec<Vec<String>> {
    history
        .iter()
        .map(|g| {
            vec![
                g.generation.to_string(),
                g.best_reward.to_string(),
                g.best_crossbars.to_string(),
                g.best_objective.to_string(),
                g.feasible_count.to_string(),
            ]
        })
        .collect()
}

pub fn run(args: SearchArgs) -> CliResult<()> {
    let xbar = args.xbar.xbar();
    let policy = args.xbar.policy();
    let network = load::network(&args.network, &xbar)?;
    let candidates = load::candidates(&args.candidates, &network, &xbar)?;
    let profile = load::profile(&args.profile)?;

    let objective = match args.objective {
        ObjectiveArg::Latency => Objective::Latency,
        ObjectiveArg::Energy => Objective::Energy,
    };
    let config = SearchConfig {
        population_size: args.population,
        max_iterations: args.iterations,
        parent_count: args.parents,
        mutation_rate: args.mutation,
        seed: args.seed,
        objective,
        budget: args.budget,
    };
    let evaluator =
        PipelineEvaluator::new(&network, &candidates, &xbar, &policy, &profile, args.wrap)?;
    let (outcome, history) = evolve(&config, &candidates, &evaluator)?;

    output::write_csv(
        &args.out_history,
        &[
            "generation",
            "best_reward",
            "best_crossbars",
            "best_objective",
            "feasible_count",
        ],
        &history_rows(&history),
    )?;

    let best = match outcome {
        SearchOutcome::Feasible(best) => best,
        SearchOutcome::Infeasible => {
            if !args.json {
                println!("no feasible combination within budget {}", args.budget);
                println!("history: {}", args.out_history.display());
            }
            return Err(CliError::Infeasible);
        }
    };

    let overlay = apply_combination(&network, &candidates, &best.combination);
    let file = NetworkFile::from_spec(&overlay);
    let text = toml::to_string(&file)
        .map_err(|err| CliError::Config(format!("cannot serialize overlay: {err}")))?;
    output::write_atomic(&args.out_overlay, &text)?;

    if args.json {
        output::print_json(&serde_json::json!({
            "network": network.name,
            "objective": match objective { Objective::Latency => "latency", Objective::Energy => "energy" },
            "budget": args.budget,
            "best": best,
            "overlay": args.out_overlay,
            "history": args.out_history,
        }))?;
    } else {
        println!(
            "best combination after {} generations (seed {}):",
            history.len(),
            args.seed
        );
        println!(
            "  objective ({}): {}",
            match objective {
                Objective::Latency => "latency",
                Objective::Energy => "energy",
            },
            best.metrics.objective(objective)
        );
        println!(
            "  crossbars: {}   reward: {}",
            best.metrics.crossbars, best.reward
        );
        println!("overlay: {}", args.out_overlay.display());
        println!("history: {}", args.out_history.display());
    }
    Ok(())
}
