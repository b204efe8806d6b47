use std::path::PathBuf;

use clap::Args;
use episim_core::mapping::{compression_rate, count_network, NetworkCount};
use episim_core::network::uniform_epitome_overlay;

use crate::errors::CliResult;
use crate::{load, output};
use crate::{parse_shape, XbarArgs};

#[derive(Args)]
pub struct MapArgs {
    /// Network spec file (TOML)
    #[arg(long)]
    network: PathBuf,
    /// Replace every layer that can host a full ROWSxCOLS epitome
    #[arg(long, value_parser = parse_shape)]
    epitome_uniform: Option<(usize, usize)>,
    /// Also map the epitome-free baseline and report the compression rate
    #[arg(long)]
    baseline: bool,
    /// Write the per-layer records to a CSV file
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Emit structured JSON instead of tables
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    xbar: XbarArgs,
}

fn layer_rows(count: &NetworkCount) -> Vec<Vec<String>> {
    count
        .per_layer
        .iter()
        .map(|m| {
            vec![
                m.layer.clone(),
                m.rows_needed.to_string(),
                m.cols_needed.to_string(),
                m.row_blocks.to_string(),
                m.col_blocks.to_string(),
                m.slices().to_string(),
                m.crossbars().to_string(),
                format!("{:.4}", m.utilization()),
            ]
        })
        .collect()
}

pub fn run(args: MapArgs) -> CliResult<()> {
    let xbar = args.xbar.xbar();
    let policy = args.xbar.policy();
    let mut network = load::network(&args.network, &xbar)?;
    if let Some((rows, cols)) = args.epitome_uniform {
        network = uniform_epitome_overlay(&network, rows, cols, &xbar);
    }

    let count = count_network(&network, &xbar, &policy)?;
    let baseline = if args.baseline {
        Some(count_network(&network.baseline(), &xbar, &policy)?)
    } else {
        None
    };
    let cr = match &baseline {
        Some(base) => Some(compression_rate(
            base.total_crossbars,
            count.total_crossbars,
        )?),
        None => None,
    };

    if let Some(path) = &args.csv {
        output::write_csv(
            path,
            &[
                "layer",
                "rows_needed",
                "cols_needed",
                "row_blocks",
                "col_blocks",
                "slices",
                "crossbars",
                "utilization",
            ],
            &layer_rows(&count),
        )?;
    }

    if args.json {
        return output::print_json(&serde_json::json!({
            "network": network.name,
            "layers": count.per_layer,
            "total_crossbars": count.total_crossbars,
            "utilization": count.utilization,
            "baseline_crossbars": baseline.as_ref().map(|b| b.total_crossbars),
            "compression_rate": cr,
        }));
    }

    if network.layers.is_empty() {
        println!("warning: network `{}` has no layers", network.name);
    }
    output::print_table(
        &[
            "layer",
            "rows",
            "cols",
            "row_blk",
            "col_blk",
            "slices",
            "crossbars",
            "util",
        ],
        &layer_rows(&count),
    );
    println!();
    println!(
        "total crossbars: {}   memristor utilization: {:.1}%",
        count.total_crossbars,
        100.0 * count.utilization
    );
    if let (Some(base), Some(cr)) = (&baseline, cr) {
        println!(
            "baseline crossbars: {}   compression rate: {:.2}",
            base.total_crossbars, cr
        );
    }
    Ok(())
}
