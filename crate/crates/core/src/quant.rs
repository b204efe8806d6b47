//! Fixed-point quantization parameters for epitome weights.
//!
//! The clipping range is a weighted blend of the statistics of the
//! overlap region (epitome elements sampled more than once) and the rest
//! of the tensor, and a scaling factor can be computed per crossbar block
//! instead of per tensor, matching the parallel structure of the arrays.

use num_traits::Float;
use serde::Serialize;

use crate::epitome::EpitomeSpec;
use crate::error::{Error, Result};
use crate::mapping::LayerMapping;
use crate::scalar::Scalar;
use crate::tensor::{CountTensor, WeightTensor};

/// Affine quantization parameters for one value range.
///
/// The zero point anchors `alpha` to code 0: `Z = Int(alpha / S)`, with
/// `Int` rounding half away from zero. Codes are clamped to
/// `[0, 2^bits - 1]`. A constant range (`alpha == beta`) is flagged by a
/// zero scale and represents every value as the constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantParams<F> {
    pub alpha: F,
    pub beta: F,
    pub bits: u32,
    pub scale: F,
    pub zero_point: i64,
}

impl<F: Float> QuantParams<F> {
    pub fn from_range(alpha: F, beta: F, bits: u32) -> Result<Self> {
        let scale = compute_scale(alpha, beta, bits)?;
        let zero_point = if scale.is_zero() {
            0
        } else {
            (alpha / scale).round().to_i64().ok_or_else(|| {
                Error::Argument("quantization range does not fit an integer zero point".into())
            })?
        };
        Ok(QuantParams {
            alpha,
            beta,
            bits,
            scale,
            zero_point,
        })
    }

    pub fn degenerate(&self) -> bool {
        self.scale.is_zero()
    }

    pub fn max_code(&self) -> i64 {
        (1i64 << self.bits) - 1
    }
}

/// Significance weights for the overlap/other regions. Must be
/// non-negative and sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeWeights<F> {
    pub overlap: F,
    pub others: F,
}

impl<F: Float> RangeWeights<F> {
    pub fn new(overlap: F, others: F) -> Result<Self> {
        let w = RangeWeights { overlap, others };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let tol = F::from(1e-9).unwrap();
        if self.overlap < F::zero() || self.others < F::zero() {
            return Err(Error::Argument("range weights must be non-negative".into()));
        }
        if (self.overlap + self.others - F::one()).abs() > tol {
            return Err(Error::Argument("range weights must sum to 1".into()));
        }
        Ok(())
    }
}

impl Default for RangeWeights<f64> {
    fn default() -> Self {
        RangeWeights {
            overlap: 0.7,
            others: 0.3,
        }
    }
}

/// Per-element overlap/others classification, aligned with the tensor's
/// row-major layout.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    pub dims: [usize; 4],
    pub overlap: Vec<bool>,
}

/// Marks elements sampled more than once as the overlap region. When
/// every count is equal there is no distinguished center, so everything
/// is classified as "others".
pub fn classify_overlap(counts: &CountTensor) -> RegionMask {
    let values = counts.values();
    let uniform = values.windows(2).all(|w| w[0] == w[1]);
    let overlap = if uniform {
        vec![false; values.len()]
    } else {
        values.iter().map(|&c| c > 1).collect()
    };
    RegionMask {
        dims: counts.dims(),
        overlap,
    }
}

fn region_stats<F: Float>(values: &[F], mask: &[bool], want_overlap: bool) -> Option<(F, F)> {
    let mut stats: Option<(F, F)> = None;
    for (v, &m) in values.iter().zip(mask) {
        if m != want_overlap {
            continue;
        }
        stats = Some(match stats {
            None => (*v, *v),
            Some((lo, hi)) => (lo.min(*v), hi.max(*v)),
        });
    }
    stats
}

fn weighted_range_slice<F: Float>(
    values: &[F],
    mask: &[bool],
    weights: &RangeWeights<F>,
) -> Result<(F, F)> {
    weights.validate()?;
    if values.is_empty() {
        return Err(Error::Argument(
            "cannot take the range of an empty tensor".into(),
        ));
    }
    if values.len() != mask.len() {
        return Err(Error::Dimension(format!(
            "mask length {} does not match value count {}",
            mask.len(),
            values.len()
        )));
    }
    let whole = {
        let mut lo = values[0];
        let mut hi = values[0];
        for &v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    };
    // an empty region borrows the whole-slice statistics
    let (min_o, max_o) = region_stats(values, mask, true).unwrap_or(whole);
    let (min_x, max_x) = region_stats(values, mask, false).unwrap_or(whole);
    let alpha = weights.overlap * min_o + weights.others * min_x;
    let beta = weights.overlap * max_o + weights.others * max_x;
    Ok((alpha, beta))
}

/// Clipping range as the weighted sum of the overlap region's and the
/// other region's extrema.
pub fn weighted_range<F: Float + Scalar>(
    values: &WeightTensor<F>,
    mask: &RegionMask,
    weights: &RangeWeights<F>,
) -> Result<(F, F)> {
    if mask.dims != values.dims() {
        return Err(Error::Dimension(format!(
            "mask dims {:?} do not match tensor dims {:?}",
            mask.dims,
            values.dims()
        )));
    }
    weighted_range_slice(values.values(), &mask.overlap, weights)
}

/// `S = (beta - alpha) / (2^bits - 1)`. A zero span yields the flagged
/// degenerate scale of zero.
pub fn compute_scale<F: Float>(alpha: F, beta: F, bits: u32) -> Result<F> {
    if !(2..=32).contains(&bits) {
        return Err(Error::Argument(format!("bitwidth {bits} outside [2, 32]")));
    }
    if alpha > beta {
        return Err(Error::Argument("alpha must not exceed beta".into()));
    }
    let levels = F::from((1u64 << bits) - 1).unwrap();
    Ok((beta - alpha) / levels)
}

/// Quantizes one value: `Q(r) = Int(r / S) - Z`, clamped to the code range.
pub fn quantize<F: Float>(r: F, params: &QuantParams<F>) -> Result<i64> {
    if params.degenerate() {
        return Err(Error::DegenerateScale);
    }
    let code = (r / params.scale)
        .round()
        .to_i64()
        .ok_or_else(|| Error::Argument("value does not quantize to an integer code".into()))?
        - params.zero_point;
    Ok(code.clamp(0, params.max_code()))
}

/// Inverse map: `(q + Z) * S`. A degenerate range dequantizes to its
/// constant.
pub fn dequantize<F: Float>(q: i64, params: &QuantParams<F>) -> F {
    if params.degenerate() {
        return params.alpha;
    }
    F::from(q + params.zero_point).unwrap() * params.scale
}

/// Convenience: range, scale and zero point in one step.
pub fn quant_params<F: Float + Scalar>(
    values: &WeightTensor<F>,
    mask: &RegionMask,
    weights: &RangeWeights<F>,
    bits: u32,
) -> Result<QuantParams<F>> {
    let (alpha, beta) = weighted_range(values, mask, weights)?;
    QuantParams::from_range(alpha, beta, bits)
}

/// Per-crossbar quantization parameters, keyed by logical block id.
///
/// Bit slices and differential arrays of a block store the same weights,
/// so they share the block's parameters.
#[derive(Debug, Clone, Serialize)]
pub struct CrossbarQuantMap<F> {
    pub layer: String,
    pub entries: Vec<(u64, QuantParams<F>)>,
    pub skipped: Vec<u64>,
}

/// Computes one scaling factor per crossbar block by restricting the
/// values and overlap mask to the elements placed on that block.
pub fn per_crossbar_params<F: Float + Scalar>(
    mapping: &LayerMapping,
    epi: &EpitomeSpec,
    values: &WeightTensor<F>,
    counts: &CountTensor,
    weights: &RangeWeights<F>,
    bits: u32,
) -> Result<CrossbarQuantMap<F>> {
    if values.dims() != epi.dims() || counts.dims() != epi.dims() {
        return Err(Error::Dimension(format!(
            "values {:?} / counts {:?} do not match epitome dims {:?}",
            values.dims(),
            counts.dims(),
            epi.dims()
        )));
    }
    if mapping.rows_needed != epi.rows() || mapping.cols_needed != epi.cols() {
        return Err(Error::Argument(format!(
            "mapping for layer `{}` does not reference this epitome",
            mapping.layer
        )));
    }

    let mask = classify_overlap(counts);
    let blocks = mapping.logical_blocks() as usize;
    let mut block_values: Vec<Vec<F>> = vec![Vec::new(); blocks];
    let mut block_mask: Vec<Vec<bool>> = vec![Vec::new(); blocks];
    for o in 0..epi.c_out {
        for i in 0..epi.c_in {
            for y in 0..epi.h {
                for x in 0..epi.w {
                    let row = (i * epi.h + y) * epi.w + x;
                    let block = mapping.block_of(row, o) as usize;
                    let flat = values.offset([o, i, y, x]);
                    block_values[block].push(values.values()[flat]);
                    block_mask[block].push(mask.overlap[flat]);
                }
            }
        }
    }

    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for block in 0..blocks {
        if block_values[block].is_empty() {
            skipped.push(block as u64);
            continue;
        }
        let (alpha, beta) =
            weighted_range_slice(&block_values[block], &block_mask[block], weights)?;
        entries.push((block as u64, QuantParams::from_range(alpha, beta, bits)?));
    }
    Ok(CrossbarQuantMap {
        layer: mapping.layer.clone(),
        entries,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epitome::{ConvSpec, LayerKind, PatchDims};
    use crate::mapping::{map_layer, MapPolicy, SignScheme, SliceMode, XbarConfig};
    use crate::network::LayerSpec;
    use proptest::prelude::*;

    fn counts(values: &[u64]) -> CountTensor {
        CountTensor::new([values.len(), 1, 1, 1], values.to_vec()).unwrap()
    }

    fn tensor(values: &[f64]) -> WeightTensor<f64> {
        WeightTensor::new([values.len(), 1, 1, 1], values.to_vec()).unwrap()
    }

    fn half_half() -> RangeWeights<f64> {
        RangeWeights::new(0.5, 0.5).unwrap()
    }

    #[test]
    fn classify_threshold_and_uniform_degeneracy() {
        assert!(!classify_overlap(&counts(&[1, 1, 1]))
            .overlap
            .iter()
            .any(|&b| b));
        assert_eq!(
            classify_overlap(&counts(&[1, 2, 1])).overlap,
            vec![false, true, false]
        );
        // uniform counts carry no center information
        assert!(!classify_overlap(&counts(&[2, 2, 2]))
            .overlap
            .iter()
            .any(|&b| b));
    }

    #[test]
    fn weighted_range_worked_example() {
        let values = tensor(&[-1.0, 0.5, 2.0]);
        let mask = classify_overlap(&counts(&[1, 2, 1]));
        let (alpha, beta) = weighted_range(&values, &mask, &half_half()).unwrap();
        assert!((alpha - -0.25).abs() < 1e-12);
        assert!((beta - 1.25).abs() < 1e-12);

        // degenerate weights pick the overlap region only
        let (alpha, beta) =
            weighted_range(&values, &mask, &RangeWeights::new(1.0, 0.0).unwrap()).unwrap();
        assert_eq!((alpha, beta), (0.5, 0.5));
    }

    #[test]
    fn identical_region_stats_return_plain_min_max() {
        let values = tensor(&[-1.0, 2.0, -1.0, 2.0]);
        let mask = RegionMask {
            dims: values.dims(),
            overlap: vec![true, true, false, false],
        };
        for w in [half_half(), RangeWeights::new(0.3, 0.7).unwrap()] {
            let (alpha, beta) = weighted_range(&values, &mask, &w).unwrap();
            assert!((alpha - -1.0).abs() < 1e-12);
            assert!((beta - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn scale_formula() {
        assert!((compute_scale(-1.0, 1.0, 3).unwrap() - 2.0 / 7.0).abs() < 1e-15);
        assert!((compute_scale(-0.25, 1.25, 3).unwrap() - 1.5 / 7.0).abs() < 1e-15);
        assert_eq!(compute_scale(0.5, 0.5, 3).unwrap(), 0.0);
        assert!(compute_scale(1.0, 0.0, 3).is_err());
    }

    #[test]
    fn quantize_worked_example() {
        let p = QuantParams::from_range(-1.0, 1.0, 3).unwrap();
        assert_eq!(p.zero_point, -4); // Int(-3.5) rounds away from zero
        assert_eq!(quantize(0.0, &p).unwrap(), 4);
        assert_eq!(quantize(p.alpha, &p).unwrap(), 0);
    }

    #[test]
    fn degenerate_scale_is_flagged() {
        let p = QuantParams::from_range(0.5, 0.5, 3).unwrap();
        assert!(p.degenerate());
        assert_eq!(quantize(0.5, &p), Err(Error::DegenerateScale));
        assert_eq!(dequantize(0, &p), 0.5);
    }

    #[test]
    fn round_trip_error_is_bounded_on_a_grid() {
        for bits in [3u32, 5, 7, 9] {
            let p = QuantParams::from_range(-1.0, 1.0, bits).unwrap();
            let bound = p.scale / 2.0 + 1e-9;
            for i in 0..10_000 {
                let r = -1.5 + 3.0 * i as f64 / 9_999.0;
                let back = dequantize(quantize(r, &p).unwrap(), &p);
                let err = (back - r.clamp(p.alpha, p.beta)).abs();
                assert!(err <= bound, "bits={bits} r={r} err={err} bound={bound}");
            }
        }
    }

    #[test]
    fn scale_exactness_invariant() {
        for (alpha, beta, bits) in [(-1.0, 1.0, 3u32), (-0.25, 1.25, 5), (0.0, 4.0, 9)] {
            let p = QuantParams::from_range(alpha, beta, bits).unwrap();
            let span = beta - alpha;
            let err = (p.scale * ((1u64 << bits) - 1) as f64 - span).abs();
            assert!(err <= 2.0 * f64::EPSILON * span.max(1.0));
        }
    }

    proptest! {
        #[test]
        fn quantize_is_monotone(a in -10.0f64..10.0, b in -10.0f64..10.0, bits in 2u32..10) {
            let (alpha, beta) = if a <= b { (a, b) } else { (b, a) };
            prop_assume!(beta - alpha > 1e-6);
            let p = QuantParams::from_range(alpha, beta, bits).unwrap();
            let mut last = None;
            for i in 0..200 {
                let r = alpha - 1.0 + (beta - alpha + 2.0) * i as f64 / 199.0;
                let q = quantize(r, &p).unwrap();
                if let Some(prev) = last {
                    prop_assert!(q >= prev);
                }
                last = Some(q);
            }
        }

        #[test]
        fn round_trip_bound_holds_for_random_ranges(
            a in -10.0f64..10.0,
            span in 1e-3f64..20.0,
            bits in 2u32..10,
            r in -40.0f64..40.0,
        ) {
            let p = QuantParams::from_range(a, a + span, bits).unwrap();
            let back = dequantize(quantize(r, &p).unwrap(), &p);
            let err = (back - r.clamp(p.alpha, p.beta)).abs();
            prop_assert!(err <= p.scale / 2.0 + 1e-9 * span.max(1.0));
        }
    }

    /// Layer with an 8-row, 2-column epitome split over two 4x2 crossbar
    /// blocks holding disjoint value ranges.
    fn two_block_setup() -> (LayerMapping, EpitomeSpec, WeightTensor<f64>, CountTensor) {
        let epi = EpitomeSpec {
            c_out: 2,
            c_in: 8,
            h: 1,
            w: 1,
            patch: PatchDims {
                h: 1,
                w: 1,
                c_in: 8,
                c_out: 2,
            },
        };
        let layer = LayerSpec {
            conv: ConvSpec {
                name: "q".into(),
                kind: LayerKind::Conv,
                c_in: 8,
                c_out: 2,
                k_h: 1,
                k_w: 1,
                stride: 1,
                padding: 0,
                input_h: 2,
                input_w: 2,
                weight_bits: 8,
            },
            epitome: Some(epi.clone()),
            wrap: false,
        };
        let xbar = XbarConfig {
            rows: 4,
            cols: 2,
            cell_bits: 2,
        };
        let policy = MapPolicy {
            slice_mode: SliceMode::Plain,
            sign: SignScheme::Single,
        };
        let mapping = map_layer(&layer, &xbar, &policy).unwrap();
        // rows 0..4 hold [-1, 0], rows 4..8 hold [0, 4]
        let values = WeightTensor::from_fn(epi.dims(), |[o, i, _, _]| {
            if i < 4 {
                -1.0 + (i * 2 + o) as f64 / 7.0
            } else {
                ((i - 4) * 2 + o) as f64 * 4.0 / 7.0
            }
        });
        let counts = CountTensor::new(epi.dims(), vec![1; 16]).unwrap();
        (mapping, epi, values, counts)
    }

    #[test]
    fn per_crossbar_splits_disjoint_ranges() {
        let (mapping, epi, values, counts) = two_block_setup();
        assert_eq!(mapping.logical_blocks(), 2);
        let bits = 3;
        let map =
            per_crossbar_params(&mapping, &epi, &values, &counts, &half_half(), bits).unwrap();
        assert_eq!(map.entries.len(), 2);
        assert!(map.skipped.is_empty());
        let s0 = map.entries[0].1.scale;
        let s1 = map.entries[1].1.scale;
        assert!((s0 - 1.0 / 7.0).abs() < 1e-12);
        assert!((s1 - 4.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn single_block_equals_whole_tensor_params() {
        let (_, epi, values, counts) = two_block_setup();
        let layer = LayerSpec {
            conv: ConvSpec {
                name: "q".into(),
                kind: LayerKind::Conv,
                c_in: 8,
                c_out: 2,
                k_h: 1,
                k_w: 1,
                stride: 1,
                padding: 0,
                input_h: 2,
                input_w: 2,
                weight_bits: 8,
            },
            epitome: Some(epi.clone()),
            wrap: false,
        };
        let xbar = XbarConfig {
            rows: 8,
            cols: 2,
            cell_bits: 2,
        };
        let policy = MapPolicy {
            slice_mode: SliceMode::Plain,
            sign: SignScheme::Single,
        };
        let mapping = map_layer(&layer, &xbar, &policy).unwrap();
        let map = per_crossbar_params(&mapping, &epi, &values, &counts, &half_half(), 3).unwrap();
        assert_eq!(map.entries.len(), 1);
        let whole = quant_params(&values, &classify_overlap(&counts), &half_half(), 3).unwrap();
        assert_eq!(map.entries[0].1, whole);
    }

    #[test]
    fn empty_overlap_falls_back_to_slice_stats() {
        let (mapping, epi, values, counts) = two_block_setup();
        let w1_only = RangeWeights::new(1.0, 0.0).unwrap();
        let map = per_crossbar_params(&mapping, &epi, &values, &counts, &w1_only, 3).unwrap();
        // counts are uniform, so the overlap region is empty everywhere and
        // each block falls back to its own min/max
        assert!((map.entries[0].1.alpha - -1.0).abs() < 1e-12);
        assert!((map.entries[1].1.beta - 4.0).abs() < 1e-12);
    }

    #[test]
    fn per_crossbar_error_never_exceeds_global_on_inner_slices() {
        let (mapping, epi, values, counts) = two_block_setup();
        let bits = 3;
        let mask = classify_overlap(&counts);
        let global = quant_params(&values, &mask, &half_half(), bits).unwrap();
        let per =
            per_crossbar_params(&mapping, &epi, &values, &counts, &half_half(), bits).unwrap();
        // block 0's range [-1, 0] sits strictly inside the global [-1, 4]
        let local = per.entries[0].1;
        let mut max_local: f64 = 0.0;
        let mut max_global: f64 = 0.0;
        for i in 0..4 {
            for o in 0..2 {
                let v = values.get([o, i, 0, 0]);
                max_local =
                    max_local.max((dequantize(quantize(v, &local).unwrap(), &local) - v).abs());
                max_global =
                    max_global.max((dequantize(quantize(v, &global).unwrap(), &global) - v).abs());
            }
        }
        assert!(max_local <= max_global + 1e-12);
        assert!(max_local <= local.scale / 2.0 + 1e-12);
    }
}
