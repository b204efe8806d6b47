//! Placement of layer weights onto fixed-size memristor crossbars.
//!
//! A layer's flattened `(in, h, w)` extent occupies word lines and its
//! output channels occupy bit lines, so a layer needs a grid of
//! `row_blocks x col_blocks` logical crossbar positions. Every logical
//! position is then replicated once per bit slice (multi-bit weights on
//! low-bit cells) and once per differential array when signed weights are
//! stored as conductance pairs.

use serde::{Deserialize, Serialize};

use crate::epitome::EpitomeSpec;
use crate::error::{Error, Result};
use crate::network::{LayerSpec, NetworkSpec};

/// Geometry of one memristor crossbar array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct XbarConfig {
    pub rows: usize,
    pub cols: usize,
    pub cell_bits: u32,
}

impl Default for XbarConfig {
    fn default() -> Self {
        XbarConfig {
            rows: 256,
            cols: 256,
            cell_bits: 2,
        }
    }
}

impl XbarConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rows < 1 || self.cols < 1 {
            return Err(Error::Argument("crossbar dims must be >= 1".into()));
        }
        if ![1, 2, 4].contains(&self.cell_bits) {
            return Err(Error::Argument(format!(
                "cell_bits {} not in {{1, 2, 4}}",
                self.cell_bits
            )));
        }
        Ok(())
    }
}

/// How multi-bit weights are split across low-bit cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SliceMode {
    /// `ceil(bits / cell_bits)` replicas.
    Plain,
    /// Sign bit folded into the top magnitude slice:
    /// `ceil((bits - 1) / cell_bits)` replicas.
    #[default]
    SignSeparate,
}

/// How signed weights are represented in the arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignScheme {
    /// One array per bit slice.
    Single,
    /// Positive/negative conductance pair: two arrays per bit slice.
    #[default]
    Differential,
}

impl SignScheme {
    pub fn arrays(&self) -> u32 {
        match self {
            SignScheme::Single => 1,
            SignScheme::Differential => 2,
        }
    }
}

/// Mapping policy knobs; the defaults reproduce the shipped network counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MapPolicy {
    pub slice_mode: SliceMode,
    pub sign: SignScheme,
}

/// Bit-slice count for one weight word.
pub fn slices_per_weight(weight_bits: u32, cell_bits: u32, mode: SliceMode) -> u32 {
    match mode {
        SliceMode::Plain => weight_bits.div_ceil(cell_bits),
        SliceMode::SignSeparate => (weight_bits - 1).div_ceil(cell_bits).max(1),
    }
}

/// Crossbar allocation of one layer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerMapping {
    pub layer: String,
    pub rows_needed: usize,
    pub cols_needed: usize,
    pub row_blocks: usize,
    pub col_blocks: usize,
    pub bit_slices: u32,
    pub sign_arrays: u32,
    pub xbar: XbarConfig,
    pub used_cells: u64,
    pub allocated_cells: u64,
}

impl LayerMapping {
    /// Crossbar replicas per logical block: bit slices times differential
    /// arrays. `crossbars = row_blocks * col_blocks * slices`.
    pub fn slices(&self) -> u64 {
        self.bit_slices as u64 * self.sign_arrays as u64
    }

    pub fn logical_blocks(&self) -> u64 {
        self.row_blocks as u64 * self.col_blocks as u64
    }

    pub fn crossbars(&self) -> u64 {
        self.logical_blocks() * self.slices()
    }

    pub fn crossbar_ids(&self) -> std::ops::Range<u64> {
        0..self.crossbars()
    }

    pub fn utilization(&self) -> f64 {
        if self.allocated_cells == 0 {
            return 0.0;
        }
        self.used_cells as f64 / self.allocated_cells as f64
    }

    /// Logical block holding the cell at `(row, col)` of the unrolled
    /// weight matrix, numbered row-block-major.
    pub fn block_of(&self, row: usize, col: usize) -> u64 {
        debug_assert!(row < self.rows_needed && col < self.cols_needed);
        (row / self.xbar.rows) as u64 * self.col_blocks as u64 + (col / self.xbar.cols) as u64
    }
}

fn map_dims(
    layer: &str,
    rows_needed: usize,
    cols_needed: usize,
    weight_bits: u32,
    xbar: &XbarConfig,
    policy: &MapPolicy,
) -> LayerMapping {
    let row_blocks = rows_needed.div_ceil(xbar.rows);
    let col_blocks = cols_needed.div_ceil(xbar.cols);
    let bit_slices = slices_per_weight(weight_bits, xbar.cell_bits, policy.slice_mode);
    let sign_arrays = policy.sign.arrays();
    let slices = bit_slices as u64 * sign_arrays as u64;
    let used_cells = rows_needed as u64 * cols_needed as u64 * slices;
    let allocated_cells =
        row_blocks as u64 * col_blocks as u64 * slices * (xbar.rows * xbar.cols) as u64;
    LayerMapping {
        layer: layer.to_string(),
        rows_needed,
        cols_needed,
        row_blocks,
        col_blocks,
        bit_slices,
        sign_arrays,
        xbar: *xbar,
        used_cells,
        allocated_cells,
    }
}

/// Maps one layer, using its epitome dims when it has one and the plain
/// convolution dims otherwise.
pub fn map_layer(layer: &LayerSpec, xbar: &XbarConfig, policy: &MapPolicy) -> Result<LayerMapping> {
    xbar.validate()?;
    layer.validate()?;
    let (rows, cols) = match &layer.epitome {
        Some(epi) => (epi.rows(), epi.cols()),
        None => (
            layer.conv.c_in * layer.conv.k_h * layer.conv.k_w,
            layer.conv.c_out,
        ),
    };
    Ok(map_dims(
        &layer.conv.name,
        rows,
        cols,
        layer.conv.weight_bits,
        xbar,
        policy,
    ))
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Rounds the epitome up to crossbar multiples: `c_out` to a multiple of
/// the bit-line count and `c_in * h * w` (via `c_in`) to a multiple of the
/// word-line count. Idempotent; never shrinks a dim. When `h * w` shares
/// no factor with the row count the smallest exact multiple can be much
/// larger than the input.
pub fn align_epitome(epi: &EpitomeSpec, xbar: &XbarConfig) -> Result<EpitomeSpec> {
    xbar.validate()?;
    epi.validate()?;
    let spatial = epi.h * epi.w;
    let step = xbar.rows / gcd(spatial, xbar.rows);
    let c_in = epi.c_in.div_ceil(step) * step;
    let c_out = epi.c_out.div_ceil(xbar.cols) * xbar.cols;
    Ok(EpitomeSpec {
        c_out,
        c_in,
        h: epi.h,
        w: epi.w,
        patch: epi.patch,
    })
}

/// Network-wide crossbar totals; no cross-layer packing is attempted.
#[derive(Debug, Clone, Serialize)]
pub struct NetworkCount {
    pub per_layer: Vec<LayerMapping>,
    pub total_crossbars: u64,
    pub used_cells: u64,
    pub allocated_cells: u64,
    pub utilization: f64,
}

pub fn count_network(
    network: &NetworkSpec,
    xbar: &XbarConfig,
    policy: &MapPolicy,
) -> Result<NetworkCount> {
    let mut per_layer = Vec::with_capacity(network.layers.len());
    for layer in &network.layers {
        per_layer.push(map_layer(layer, xbar, policy)?);
    }
    let total_crossbars = per_layer.iter().map(|m| m.crossbars()).sum();
    let used_cells = per_layer.iter().map(|m| m.used_cells).sum();
    let allocated_cells = per_layer.iter().map(|m| m.allocated_cells).sum();
    let utilization = if allocated_cells == 0 {
        0.0
    } else {
        used_cells as f64 / allocated_cells as f64
    };
    Ok(NetworkCount {
        per_layer,
        total_crossbars,
        used_cells,
        allocated_cells,
        utilization,
    })
}

/// Crossbar compression rate of a deployment against its baseline.
pub fn compression_rate(baseline_count: u64, epim_count: u64) -> Result<f64> {
    if baseline_count == 0 || epim_count == 0 {
        return Err(Error::Argument(
            "compression rate requires nonzero crossbar counts".into(),
        ));
    }
    Ok(baseline_count as f64 / epim_count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epitome::{ConvSpec, LayerKind, PatchDims};

    fn conv_layer(c_in: usize, c_out: usize, k: usize, bits: u32) -> LayerSpec {
        LayerSpec {
            conv: ConvSpec {
                name: "l".into(),
                kind: LayerKind::Conv,
                c_in,
                c_out,
                k_h: k,
                k_w: k,
                stride: 1,
                padding: 0,
                input_h: 8,
                input_w: 8,
                weight_bits: bits,
            },
            epitome: None,
            wrap: false,
        }
    }

    const SINGLE: MapPolicy = MapPolicy {
        slice_mode: SliceMode::Plain,
        sign: SignScheme::Single,
    };

    #[test]
    fn slice_counts() {
        assert_eq!(slices_per_weight(32, 2, SliceMode::Plain), 16);
        assert_eq!(slices_per_weight(32, 2, SliceMode::SignSeparate), 16);
        assert_eq!(slices_per_weight(2, 2, SliceMode::Plain), 1);
        assert_eq!(slices_per_weight(9, 2, SliceMode::Plain), 5);
        assert_eq!(slices_per_weight(9, 2, SliceMode::SignSeparate), 4);
        assert_eq!(slices_per_weight(3, 2, SliceMode::SignSeparate), 1);
    }

    #[test]
    fn conv_3x3_64_to_64_fp32() {
        let layer = conv_layer(64, 64, 3, 32);
        let m = map_layer(&layer, &XbarConfig::default(), &SINGLE).unwrap();
        assert_eq!(m.rows_needed, 576);
        assert_eq!(m.row_blocks, 3);
        assert_eq!(m.col_blocks, 1);
        assert_eq!(m.slices(), 16);
        assert_eq!(m.crossbars(), 48);
        assert!((m.utilization() - 0.1875).abs() < 1e-12);
    }

    #[test]
    fn perfect_fit_uses_one_crossbar() {
        let layer = conv_layer(256, 256, 1, 2);
        let m = map_layer(&layer, &XbarConfig::default(), &SINGLE).unwrap();
        assert_eq!(m.crossbars(), 1);
        assert!((m.utilization() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn differential_pairs_double_the_arrays() {
        let layer = conv_layer(256, 256, 1, 2);
        let m = map_layer(&layer, &XbarConfig::default(), &MapPolicy::default()).unwrap();
        assert_eq!(m.crossbars(), 2);
        assert!((m.utilization() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn epitome_1024x256_takes_four_row_blocks() {
        let mut layer = conv_layer(2048, 512, 1, 32);
        layer.epitome = Some(EpitomeSpec {
            c_out: 256,
            c_in: 1024,
            h: 1,
            w: 1,
            patch: PatchDims {
                h: 1,
                w: 1,
                c_in: 1024,
                c_out: 256,
            },
        });
        let m = map_layer(&layer, &XbarConfig::default(), &SINGLE).unwrap();
        assert_eq!((m.row_blocks, m.col_blocks), (4, 1));
        assert_eq!(m.crossbars(), 4 * 16);
    }

    #[test]
    fn align_rounds_up_and_is_idempotent() {
        let xbar = XbarConfig::default();
        let patch = PatchDims {
            h: 1,
            w: 1,
            c_in: 1,
            c_out: 1,
        };
        let e = EpitomeSpec {
            c_out: 250,
            c_in: 600,
            h: 1,
            w: 1,
            patch,
        };
        let a = align_epitome(&e, &xbar).unwrap();
        assert_eq!(a.c_out, 256);
        assert_eq!(a.rows(), 768);
        assert_eq!(align_epitome(&a, &xbar).unwrap(), a);

        let aligned = EpitomeSpec {
            c_out: 256,
            c_in: 1024,
            h: 1,
            w: 1,
            patch,
        };
        assert_eq!(align_epitome(&aligned, &xbar).unwrap(), aligned);
    }

    #[test]
    fn align_never_shrinks() {
        let xbar = XbarConfig {
            rows: 6,
            cols: 4,
            cell_bits: 2,
        };
        for c_in in 1..10 {
            for h in 1..4 {
                let e = EpitomeSpec {
                    c_out: 3,
                    c_in,
                    h,
                    w: 2,
                    patch: PatchDims {
                        h: 1,
                        w: 1,
                        c_in: 1,
                        c_out: 1,
                    },
                };
                let a = align_epitome(&e, &xbar).unwrap();
                assert!(a.c_in >= e.c_in && a.c_out >= e.c_out);
                assert_eq!(a.rows() % xbar.rows, 0, "rows {} for {e:?}", a.rows());
                assert_eq!(align_epitome(&a, &xbar).unwrap(), a);
            }
        }
    }

    #[test]
    fn count_is_the_sum_of_layers_and_monotone() {
        let xbar = XbarConfig::default();
        let net = NetworkSpec {
            name: "n".into(),
            layers: vec![conv_layer(64, 64, 3, 32), conv_layer(256, 256, 1, 2)],
        };
        let count = count_network(&net, &xbar, &SINGLE).unwrap();
        assert_eq!(count.total_crossbars, 48 + 1);
        assert_eq!(
            count.total_crossbars,
            count.per_layer.iter().map(|m| m.crossbars()).sum::<u64>()
        );

        // growing any dim or the bit width never shrinks the count
        let base = map_layer(&conv_layer(64, 64, 3, 8), &xbar, &SINGLE)
            .unwrap()
            .crossbars();
        for layer in [
            conv_layer(65, 64, 3, 8),
            conv_layer(64, 65, 3, 8),
            conv_layer(64, 64, 4, 8),
            conv_layer(64, 64, 3, 9),
        ] {
            assert!(map_layer(&layer, &xbar, &SINGLE).unwrap().crossbars() >= base);
        }
    }

    #[test]
    fn compression_rates_from_known_counts() {
        assert!((compression_rate(13120, 5696).unwrap() - 2.30).abs() < 0.005);
        assert!((compression_rate(13120, 428).unwrap() - 30.65).abs() < 0.01);
        assert!((compression_rate(7, 7).unwrap() - 1.0).abs() < 1e-12);
        assert!(compression_rate(13120, 0).is_err());
    }
}
