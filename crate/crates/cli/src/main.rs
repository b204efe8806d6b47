mod cmd_map;
mod cmd_quant;
mod cmd_search;
mod cmd_simulate;
mod errors;
mod load;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use episim_core::mapping::{MapPolicy, SignScheme, SliceMode, XbarConfig};

use errors::CliResult;

#[derive(Parser)]
#[command(
    name = "episim",
    version,
    about = "Map, simulate, quantize and search epitome-based CNN deployments on crossbar accelerators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count crossbars and utilization for a network deployment
    Map(cmd_map::MapArgs),
    /// Trace the datapath and evaluate latency/energy per layer
    Simulate(cmd_simulate::SimulateArgs),
    /// Evolutionary layer-wise epitome design under a crossbar budget
    Search(cmd_search::SearchArgs),
    /// Compute per-crossbar quantization parameters
    Quant(cmd_quant::QuantArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SliceModeArg {
    Plain,
    SignSeparate,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignArg {
    Single,
    Differential,
}

/// Crossbar and mapping-policy flags shared by every subcommand.
#[derive(Args)]
struct XbarArgs {
    /// Crossbar word-line count
    #[arg(long, default_value_t = 256)]
    xbar_rows: usize,
    /// Crossbar bit-line count
    #[arg(long, default_value_t = 256)]
    xbar_cols: usize,
    /// Bits per memristor cell (1, 2 or 4)
    #[arg(long, default_value_t = 2)]
    cell_bits: u32,
    /// Bit-slicing rule for multi-bit weights
    #[arg(long, value_enum, default_value_t = SliceModeArg::SignSeparate)]
    slice_mode: SliceModeArg,
    /// Signed-weight storage scheme
    #[arg(long, value_enum, default_value_t = SignArg::Differential)]
    sign: SignArg,
}

impl XbarArgs {
    fn xbar(&self) -> XbarConfig {
        XbarConfig {
            rows: self.xbar_rows,
            cols: self.xbar_cols,
            cell_bits: self.cell_bits,
        }
    }

    fn policy(&self) -> MapPolicy {
        MapPolicy {
            slice_mode: match self.slice_mode {
                SliceModeArg::Plain => SliceMode::Plain,
                SliceModeArg::SignSeparate => SliceMode::SignSeparate,
            },
            sign: match self.sign {
                SignArg::Single => SignScheme::Single,
                SignArg::Differential => SignScheme::Differential,
            },
        }
    }
}

/// Parses an `RxC` shape such as `1024x256`.
fn parse_shape(text: &str) -> Result<(usize, usize), String> {
    let (rows, cols) = text
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("`{text}` is not of the form ROWSxCOLS"))?;
    let rows = rows
        .trim()
        .parse()
        .map_err(|_| format!("bad row count in `{text}`"))?;
    let cols = cols
        .trim()
        .parse()
        .map_err(|_| format!("bad column count in `{text}`"))?;
    Ok((rows, cols))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Map(args) => cmd_map::run(args),
        Command::Simulate(args) => cmd_simulate::run(args),
        Command::Search(args) => cmd_search::run(args),
        Command::Quant(args) => cmd_quant::run(args),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
