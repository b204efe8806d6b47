use std::path::PathBuf;

use clap::Args;
use episim_core::conv::conv2d_reference;
use episim_core::datapath::{analyze_layer, build_tables, execute_layer, ExecutionTrace};
use episim_core::epitome::{build_schedule, reconstruct};
use episim_core::mapping::{map_layer, LayerMapping};
use episim_core::perf::{evaluate_network, LayerPerf, PerfReport};
use episim_core::{network::NetworkSpec, synth};

use crate::errors::{CliError, CliResult};
use crate::{load, output, XbarArgs};

#[derive(Args)]
pub struct SimulateArgs {
    /// Network spec file (TOML)
    #[arg(long)]
    network: PathBuf,
    /// Hardware cost profile (TOML)
    #[arg(long)]
    profile: PathBuf,
    /// Force output channel wrapping on every layer
    #[arg(long)]
    wrap: bool,
    /// Also run value-level equivalence checks on seeded synthetic inputs
    #[arg(long)]
    functional: bool,
    /// Seed for the synthetic weights and inputs
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Write the per-layer records to a CSV file
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Dump every layer's IFAT/IFRT/OFAT entries to a CSV file
    #[arg(long)]
    dump_tables: Option<PathBuf>,
    /// Emit structured JSON instead of tables
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    xbar: XbarArgs,
}

struct LayerRun {
    trace: ExecutionTrace,
    mapping: LayerMapping,
    exact: Option<bool>,
}

/// One row per table entry: IFAT/OFAT payloads are `start:stop` pairs,
/// IFRT payloads the word-line mask as a bit string.
fn table_rows_for_dump(network: &NetworkSpec, args: &SimulateArgs) -> CliResult<Vec<Vec<String>>> {
    let xbar = args.xbar.xbar();
    let policy = args.xbar.policy();
    let mut rows = Vec::new();
    for layer in &network.layers {
        let epi = layer.deployed_epitome();
        let schedule = build_schedule(&layer.conv, &epi)?;
        let mapping = map_layer(layer, &xbar, &policy)?;
        let tables = build_tables(&schedule, &mapping, &layer.conv)?;
        let name = &layer.conv.name;
        for (round, (start, stop)) in tables.ifat.iter().enumerate() {
            rows.push(vec![
                name.clone(),
                "IFAT".into(),
                round.to_string(),
                format!("{start}:{stop}"),
            ]);
        }
        for (patch, mask) in tables.ifrt.iter().enumerate() {
            let bits: String = mask.iter().map(|&b| if b { '1' } else { '0' }).collect();
            rows.push(vec![name.clone(), "IFRT".into(), patch.to_string(), bits]);
        }
        for (patch, (start, stop)) in tables.ofat.iter().enumerate() {
            rows.push(vec![
                name.clone(),
                "OFAT".into(),
                patch.to_string(),
                format!("{start}:{stop}"),
            ]);
        }
    }
    Ok(rows)
}

fn simulate_layers(network: &NetworkSpec, args: &SimulateArgs) -> CliResult<Vec<LayerRun>> {
    let xbar = args.xbar.xbar();
    let policy = args.xbar.policy();
    let mut runs = Vec::with_capacity(network.layers.len());
    for (index, layer) in network.layers.iter().enumerate() {
        let epi = layer.deployed_epitome();
        let schedule = build_schedule(&layer.conv, &epi)?;
        let mapping = map_layer(layer, &xbar, &policy)?;
        let wrap = args.wrap || layer.wrap;
        let trace = analyze_layer(&schedule, &mapping, wrap)?;
        let exact = if args.functional {
            let weights =
                synth::weights_i64(epi.dims(), synth::layer_seed(args.seed, index), -4, 4);
            let input = synth::feature_i64(
                [layer.conv.c_in, layer.conv.input_h, layer.conv.input_w],
                synth::layer_seed(args.seed.wrapping_add(1), index),
                -4,
                4,
            );
            let tables = build_tables(&schedule, &mapping, &layer.conv)?;
            let (out, _) = execute_layer(&input, &weights, &schedule, &mapping, &tables, wrap)?;
            let want = conv2d_reference(&input, &reconstruct(&weights, &schedule)?, &layer.conv)?;
            Some(out == want)
        } else {
            None
        };
        runs.push(LayerRun {
            trace,
            mapping,
            exact,
        });
    }
    Ok(runs)
}

fn csv_rows(report: &PerfReport, runs: &[LayerRun]) -> Vec<Vec<String>> {
    report
        .per_layer
        .iter()
        .zip(runs)
        .map(|(perf, run)| {
            vec![
                perf.layer.clone(),
                perf.crossbars.to_string(),
                perf.activation_rounds.to_string(),
                perf.latency.to_string(),
                perf.energy.to_string(),
                perf.edp.to_string(),
                run.trace.xbar_reads.to_string(),
                run.trace.input_buffer_reads.to_string(),
                run.trace.output_buffer_writes.to_string(),
                run.trace.adc_conversions.to_string(),
                run.trace.dac_conversions.to_string(),
                run.trace.joint_adds.to_string(),
                run.trace.joint_concats.to_string(),
            ]
        })
        .collect()
}

fn table_rows(per_layer: &[LayerPerf], runs: &[LayerRun]) -> Vec<Vec<String>> {
    per_layer
        .iter()
        .zip(runs)
        .map(|(perf, run)| {
            vec![
                perf.layer.clone(),
                perf.crossbars.to_string(),
                perf.activation_rounds.to_string(),
                format!("{:.1}", perf.latency),
                format!("{:.1}", perf.energy),
                run.trace.output_buffer_writes.to_string(),
                match run.exact {
                    Some(true) => "exact".into(),
                    Some(false) => "MISMATCH".into(),
                    None => String::new(),
                },
            ]
        })
        .collect()
}

pub fn run(args: SimulateArgs) -> CliResult<()> {
    let xbar = args.xbar.xbar();
    let network = load::network(&args.network, &xbar)?;
    let profile = load::profile(&args.profile)?;

    let runs = simulate_layers(&network, &args)?;
    let items: Vec<_> = network
        .layers
        .iter()
        .zip(&runs)
        .map(|(layer, run)| (layer.conv.name.clone(), run.trace, run.mapping.clone()))
        .collect();
    let report = evaluate_network(&items, &profile)?;

    if let Some(path) = &args.dump_tables {
        output::write_csv(
            path,
            &["layer", "table", "entry", "payload"],
            &table_rows_for_dump(&network, &args)?,
        )?;
    }

    if let Some(path) = &args.csv {
        output::write_csv(
            path,
            &[
                "layer",
                "crossbars",
                "rounds",
                "latency",
                "energy",
                "edp",
                "xbar_reads",
                "input_buffer_reads",
                "output_buffer_writes",
                "adc_conversions",
                "dac_conversions",
                "joint_adds",
                "joint_concats",
            ],
            &csv_rows(&report, &runs),
        )?;
    }

    let exact_count = runs.iter().filter(|r| r.exact == Some(true)).count();
    let failed_count = runs.iter().filter(|r| r.exact == Some(false)).count();

    if args.json {
        output::print_json(&serde_json::json!({
            "network": network.name,
            "latency": report.latency,
            "energy": report.energy,
            "edp": report.edp,
            "latency_unit": profile.latency_unit,
            "energy_unit": profile.energy_unit,
            "layers": report.per_layer,
            "seed": args.functional.then_some(args.seed),
            "equivalence_exact": args.functional.then_some(exact_count),
            "equivalence_failed": args.functional.then_some(failed_count),
        }))?;
    } else {
        output::print_table(
            &[
                "layer",
                "crossbars",
                "rounds",
                "latency",
                "energy",
                "obuf_writes",
                "check",
            ],
            &table_rows(&report.per_layer, &runs),
        );
        println!();
        println!(
            "total latency: {} {}   total energy: {} {}   edp: {}",
            report.latency, profile.latency_unit, report.energy, profile.energy_unit, report.edp
        );
        if args.functional {
            println!(
                "equivalence: {}/{} layers exact (synthetic values from seed {})",
                exact_count,
                network.layers.len(),
                args.seed
            );
        }
    }

    if args.functional && failed_count > 0 {
        return Err(CliError::Equivalence {
            failed: failed_count,
            total: network.layers.len(),
        });
    }
    Ok(())
}
