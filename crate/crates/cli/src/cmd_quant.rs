use std::path::PathBuf;

use clap::Args;
use episim_core::epitome::{build_schedule, repetition_counts};
use episim_core::mapping::map_layer;
use episim_core::quant::{
    classify_overlap, dequantize, per_crossbar_params, quant_params, quantize, QuantParams,
    RangeWeights,
};
use episim_core::synth;

use crate::errors::CliResult;
use crate::{load, output, XbarArgs};

#[derive(Args)]
pub struct QuantArgs {
    /// Network spec file (TOML)
    #[arg(long)]
    network: PathBuf,
    /// Quantization bitwidth
    #[arg(long, default_value_t = 8)]
    bits: u32,
    /// Significance weight of the overlap region
    #[arg(long, default_value_t = 0.7)]
    w1: f64,
    /// Significance weight of the other region
    #[arg(long, default_value_t = 0.3)]
    w2: f64,
    /// One scaling factor per crossbar block instead of per tensor
    #[arg(long)]
    per_crossbar: bool,
    /// Seed for the synthetic epitome weights
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Write the records to a CSV file
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Emit structured JSON instead of tables
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    xbar: XbarArgs,
}

#[derive(serde::Serialize)]
struct QuantRecord {
    layer: String,
    crossbar_id: u64,
    alpha: f64,
    beta: f64,
    scale: f64,
    zero_point: i64,
    bitwidth: u32,
    max_roundtrip_error: f64,
}

fn max_roundtrip_error(values: &[f64], params: &QuantParams<f64>) -> f64 {
    if params.degenerate() {
        return 0.0;
    }
    values
        .iter()
        .map(|&v| {
            let back = dequantize(quantize(v, params).unwrap(), params);
            (back - v.clamp(params.alpha, params.beta)).abs()
        })
        .fold(0.0, f64::max)
}

pub fn run(args: QuantArgs) -> CliResult<()> {
    let xbar = args.xbar.xbar();
    let policy = args.xbar.policy();
    let weights = RangeWeights::new(args.w1, args.w2)?;
    let network = load::network(&args.network, &xbar)?;

    let mut records: Vec<QuantRecord> = Vec::new();
    for (index, layer) in network.layers.iter().enumerate() {
        let epi = layer.deployed_epitome();
        let schedule = build_schedule(&layer.conv, &epi)?;
        let counts = repetition_counts(&schedule);
        let values = synth::weights_f64(epi.dims(), synth::layer_seed(args.seed, index), -1.0, 1.0);
        let mapping = map_layer(layer, &xbar, &policy)?;

        // element values grouped by logical block, for the error summary
        let blocks = mapping.logical_blocks() as usize;
        let mut block_values: Vec<Vec<f64>> = vec![Vec::new(); blocks];
        for o in 0..epi.c_out {
            for i in 0..epi.c_in {
                for y in 0..epi.h {
                    for x in 0..epi.w {
                        let row = (i * epi.h + y) * epi.w + x;
                        let block = mapping.block_of(row, o) as usize;
                        block_values[block].push(values.get([o, i, y, x]));
                    }
                }
            }
        }

        if args.per_crossbar {
            let map = per_crossbar_params(&mapping, &epi, &values, &counts, &weights, args.bits)?;
            for (id, params) in &map.entries {
                records.push(QuantRecord {
                    layer: layer.conv.name.clone(),
                    crossbar_id: *id,
                    alpha: params.alpha,
                    beta: params.beta,
                    scale: params.scale,
                    zero_point: params.zero_point,
                    bitwidth: params.bits,
                    max_roundtrip_error: max_roundtrip_error(&block_values[*id as usize], params),
                });
            }
        } else {
            let mask = classify_overlap(&counts);
            let params = quant_params(&values, &mask, &weights, args.bits)?;
            records.push(QuantRecord {
                layer: layer.conv.name.clone(),
                crossbar_id: 0,
                alpha: params.alpha,
                beta: params.beta,
                scale: params.scale,
                zero_point: params.zero_point,
                bitwidth: params.bits,
                max_roundtrip_error: max_roundtrip_error(values.values(), &params),
            });
        }
    }

    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                r.layer.clone(),
                r.crossbar_id.to_string(),
                r.alpha.to_string(),
                r.beta.to_string(),
                r.scale.to_string(),
                r.zero_point.to_string(),
                r.bitwidth.to_string(),
                r.max_roundtrip_error.to_string(),
            ]
        })
        .collect();

    if let Some(path) = &args.csv {
        output::write_csv(
            path,
            &[
                "layer",
                "crossbar_id",
                "alpha",
                "beta",
                "scale",
                "zero_point",
                "bitwidth",
                "max_roundtrip_error",
            ],
            &rows,
        )?;
    }

    if args.json {
        output::print_json(&serde_json::json!({
            "network": network.name,
            "seed": args.seed,
            "per_crossbar": args.per_crossbar,
            "records": records,
        }))?;
    } else {
        println!("synthetic epitome weights from seed {}", args.seed);
        output::print_table(
            &[
                "layer",
                "xbar",
                "alpha",
                "beta",
                "scale",
                "zp",
                "bits",
                "max_rt_err",
            ],
            &rows,
        );
    }
    Ok(())
}
