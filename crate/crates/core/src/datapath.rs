//! Functional model of the modified crossbar datapath.
//!
//! Deploying an epitome means one activation round per sampled patch
//! instead of a single whole-weight activation. Three index tables drive
//! the rounds:
//!
//! * IFAT: one `[start, stop)` pair per round addressing the input-buffer
//!   slice the round consumes (flattened `(channel, y, x)` row-major);
//! * IFRT: one boolean word-line mask per patch, of crossbar-row length,
//!   true on rows carrying that patch's weights (patches spanning several
//!   row blocks project their active rows onto one in-block mask);
//! * OFAT: one `[start, stop)` output-channel segment per patch.
//!
//! After the rounds, the joint stage sums segments with identical output
//! ranges (partial sums over shared output channels) and concatenates
//! consecutive ones. With channel wrapping enabled on a schedule whose
//! output tiling is `r` identical repetitions, only the first group's
//! segments are written to the output buffer; the replicas are reused, so
//! buffer writes drop exactly by `r` while every other event count stays
//! put.

use serde::Serialize;

use crate::epitome::{detect_wrap_factor, ConvSpec, PatchSchedule, ScheduleEntry};
use crate::error::{Error, Result};
use crate::mapping::LayerMapping;
use crate::scalar::Scalar;
use crate::tensor::{FeatureMap, WeightTensor};

/// Control tables for the multi-round execution of one layer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexTables {
    pub ifat: Vec<(u64, u64)>,
    pub ifrt: Vec<Vec<bool>>,
    pub ofat: Vec<(u64, u64)>,
}

/// Event counts accumulated over one layer's execution.
///
/// Buffer events are counted per feature-map element; DAC/ADC events per
/// activated word/bit line per round; crossbar reads per activated array
/// per round. Joint additions are counted per merged output element,
/// concatenations per distinct output segment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ExecutionTrace {
    pub activation_rounds: u64,
    pub xbar_reads: u64,
    pub input_buffer_reads: u64,
    pub output_buffer_writes: u64,
    pub adc_conversions: u64,
    pub dac_conversions: u64,
    pub joint_adds: u64,
    pub joint_concats: u64,
}

fn check_consistency(
    schedule: &PatchSchedule,
    mapping: &LayerMapping,
    conv: &ConvSpec,
) -> Result<()> {
    if schedule.conv != *conv {
        return Err(Error::Argument(format!(
            "schedule built for layer `{}` but `{}` given",
            schedule.conv.name, conv.name
        )));
    }
    if mapping.rows_needed != schedule.epitome.rows()
        || mapping.cols_needed != schedule.epitome.cols()
    {
        return Err(Error::Argument(format!(
            "mapping for layer `{}` ({}, {}) does not match the schedule's epitome ({}, {})",
            mapping.layer,
            mapping.rows_needed,
            mapping.cols_needed,
            schedule.epitome.rows(),
            schedule.epitome.cols()
        )));
    }
    Ok(())
}

/// Builds IFAT, IFRT and OFAT for a schedule. One table entry per sampled
/// patch; the entry order is the schedule's round order.
pub fn build_tables(
    schedule: &PatchSchedule,
    mapping: &LayerMapping,
    conv: &ConvSpec,
) -> Result<IndexTables> {
    check_consistency(schedule, mapping, conv)?;
    let epi = &schedule.epitome;
    let input_plane = (conv.input_h * conv.input_w) as u64;
    let mut ifat = Vec::with_capacity(schedule.entries.len());
    let mut ifrt = Vec::with_capacity(schedule.entries.len());
    let mut ofat = Vec::with_capacity(schedule.entries.len());
    for entry in &schedule.entries {
        let c0 = entry.conv_origin[1] as u64;
        let c1 = c0 + entry.extent[1] as u64;
        ifat.push((c0 * input_plane, c1 * input_plane));

        let mut mask = vec![false; mapping.xbar.rows];
        for i in 0..entry.extent[1] {
            for y in 0..entry.extent[2] {
                for x in 0..entry.extent[3] {
                    let row = ((entry.epi_start[1] + i) * epi.h + entry.epi_start[2] + y) * epi.w
                        + entry.epi_start[3]
                        + x;
                    mask[row % mapping.xbar.rows] = true;
                }
            }
        }
        ifrt.push(mask);

        ofat.push((
            entry.conv_origin[0] as u64,
            (entry.conv_origin[0] + entry.extent[0]) as u64,
        ));
    }
    Ok(IndexTables { ifat, ifrt, ofat })
}

/// Distinct row blocks holding any active word line of the patch.
fn touched_row_blocks(entry: &ScheduleEntry, epi_h: usize, epi_w: usize, rows: usize) -> u64 {
    let mut blocks = std::collections::BTreeSet::new();
    for i in 0..entry.extent[1] {
        for y in 0..entry.extent[2] {
            let first = ((entry.epi_start[1] + i) * epi_h + entry.epi_start[2] + y) * epi_w
                + entry.epi_start[3];
            let last = first + entry.extent[3] - 1;
            for b in first / rows..=last / rows {
                blocks.insert(b);
            }
        }
    }
    blocks.len() as u64
}

fn touched_col_blocks(entry: &ScheduleEntry, cols: usize) -> u64 {
    let first = entry.epi_start[0] / cols;
    let last = (entry.epi_start[0] + entry.extent[0] - 1) / cols;
    (last - first + 1) as u64
}

/// Whether a round's output segment is written with wrapping active:
/// only output tiles in the first repetition group are.
fn writes_segment(entry: &ScheduleEntry, wrap_channels: Option<usize>) -> bool {
    match wrap_channels {
        Some(c) => entry.conv_origin[0] < c,
        None => true,
    }
}

fn wrap_channels(schedule: &PatchSchedule, wrap: bool) -> Option<usize> {
    if !wrap {
        return None;
    }
    let r = detect_wrap_factor(schedule);
    if r > 1 {
        Some(schedule.conv.c_out / r)
    } else {
        None
    }
}

/// Event counts for a schedule, computed without touching any values.
/// `execute_layer` reports exactly these counts.
pub fn analyze_layer(
    schedule: &PatchSchedule,
    mapping: &LayerMapping,
    wrap: bool,
) -> Result<ExecutionTrace> {
    check_consistency(schedule, mapping, &schedule.conv)?;
    let conv = &schedule.conv;
    let epi = &schedule.epitome;
    let (out_h, out_w) = conv.out_dims();
    let out_plane = (out_h * out_w) as u64;
    let input_plane = (conv.input_h * conv.input_w) as u64;
    let wrap_c = wrap_channels(schedule, wrap);

    let mut trace = ExecutionTrace::default();
    let mut segments: Vec<((u64, u64), u64)> = Vec::new();
    for entry in &schedule.entries {
        trace.activation_rounds += 1;
        trace.input_buffer_reads += entry.extent[1] as u64 * input_plane;
        trace.dac_conversions += (entry.extent[1] * entry.extent[2] * entry.extent[3]) as u64;
        trace.adc_conversions += entry.extent[0] as u64;
        trace.xbar_reads += touched_row_blocks(entry, epi.h, epi.w, mapping.xbar.rows)
            * touched_col_blocks(entry, mapping.xbar.cols)
            * mapping.slices();
        if writes_segment(entry, wrap_c) {
            trace.output_buffer_writes += entry.extent[0] as u64 * out_plane;
        }
        let range = (
            entry.conv_origin[0] as u64,
            (entry.conv_origin[0] + entry.extent[0]) as u64,
        );
        match segments.iter_mut().find(|(r, _)| *r == range) {
            Some((_, n)) => *n += 1,
            None => segments.push((range, 1)),
        }
    }
    for ((start, stop), n) in &segments {
        trace.joint_adds += (n - 1) * (stop - start) * out_plane;
        trace.joint_concats += 1;
    }
    Ok(trace)
}

/// Runs the layer round by round and reassembles the output feature map.
///
/// The output equals the reference convolution on the reconstructed
/// weight: exactly for integer scalars, within floating-point
/// re-association error otherwise. With `wrap` enabled and a replicated
/// output tiling, the replica segments are not written to the output
/// buffer (they are reused), which is the only trace difference.
pub fn execute_layer<T: Scalar>(
    input: &FeatureMap<T>,
    epitome: &WeightTensor<T>,
    schedule: &PatchSchedule,
    mapping: &LayerMapping,
    tables: &IndexTables,
    wrap: bool,
) -> Result<(FeatureMap<T>, ExecutionTrace)> {
    let conv = &schedule.conv;
    if input.dims() != [conv.c_in, conv.input_h, conv.input_w] {
        return Err(Error::Dimension(format!(
            "input dims {:?} do not match layer `{}`",
            input.dims(),
            conv.name
        )));
    }
    if epitome.dims() != schedule.epitome.dims() {
        return Err(Error::Dimension(format!(
            "epitome dims {:?} do not match the schedule ({:?})",
            epitome.dims(),
            schedule.epitome.dims()
        )));
    }
    if *tables != build_tables(schedule, mapping, conv)? {
        return Err(Error::Argument(format!(
            "index tables are stale for layer `{}`",
            conv.name
        )));
    }

    let trace = analyze_layer(schedule, mapping, wrap)?;
    let (out_h, out_w) = conv.out_dims();
    let pad = conv.padding as isize;

    let mut partials: Vec<(FeatureMap<T>, (u64, u64))> = Vec::with_capacity(schedule.entries.len());
    for (entry, ofat) in schedule.entries.iter().zip(&tables.ofat) {
        let mut segment = FeatureMap::zeros([entry.extent[0], out_h, out_w]);
        for oc in 0..entry.extent[0] {
            for oy in 0..out_h {
                for ox in 0..out_w {
                    let mut acc = T::zero();
                    for ic in 0..entry.extent[1] {
                        for ky in 0..entry.extent[2] {
                            for kx in 0..entry.extent[3] {
                                let iy =
                                    (oy * conv.stride + entry.conv_origin[2] + ky) as isize - pad;
                                let ix =
                                    (ox * conv.stride + entry.conv_origin[3] + kx) as isize - pad;
                                if iy < 0
                                    || ix < 0
                                    || iy >= conv.input_h as isize
                                    || ix >= conv.input_w as isize
                                {
                                    continue;
                                }
                                let w = epitome.get([
                                    entry.epi_start[0] + oc,
                                    entry.epi_start[1] + ic,
                                    entry.epi_start[2] + ky,
                                    entry.epi_start[3] + kx,
                                ]);
                                acc += input.get([
                                    entry.conv_origin[1] + ic,
                                    iy as usize,
                                    ix as usize,
                                ]) * w;
                            }
                        }
                    }
                    segment.set([oc, oy, ox], acc);
                }
            }
        }
        partials.push((segment, *ofat));
    }

    let output = joint_reconstruct(&partials)?;
    if output.dims()[0] != conv.c_out {
        return Err(Error::Coverage(format!(
            "segments cover {} channels but layer `{}` has {}",
            output.dims()[0],
            conv.name,
            conv.c_out
        )));
    }
    Ok((output, trace))
}

/// Joint stage: sums segments with identical output ranges and
/// concatenates consecutive ones into the full output feature map.
pub fn joint_reconstruct<T: Scalar>(
    partials: &[(FeatureMap<T>, (u64, u64))],
) -> Result<FeatureMap<T>> {
    if partials.is_empty() {
        return Err(Error::Coverage("no output segments to reconstruct".into()));
    }
    let [_, out_h, out_w] = partials[0].0.dims();

    // merge identical ranges in arrival order
    let mut merged: Vec<((u64, u64), FeatureMap<T>)> = Vec::new();
    for (segment, range) in partials {
        if range.0 >= range.1 {
            return Err(Error::Coverage(format!("empty output range {range:?}")));
        }
        let channels = (range.1 - range.0) as usize;
        if segment.dims() != [channels, out_h, out_w] {
            return Err(Error::Dimension(format!(
                "segment dims {:?} do not match its range {:?}",
                segment.dims(),
                range
            )));
        }
        match merged.iter_mut().find(|(r, _)| r == range) {
            Some((_, acc)) => {
                for c in 0..channels {
                    for y in 0..out_h {
                        for x in 0..out_w {
                            let v = acc.get([c, y, x]) + segment.get([c, y, x]);
                            acc.set([c, y, x], v);
                        }
                    }
                }
            }
            None => merged.push((*range, segment.clone())),
        }
    }

    merged.sort_by_key(|(range, _)| *range);
    let mut expected = 0u64;
    for (range, _) in &merged {
        if range.0 != expected {
            return Err(Error::Coverage(format!(
                "output segments leave a gap or overlap inconsistently at channel {expected} (next range {range:?})"
            )));
        }
        expected = range.1;
    }

    let c_out = expected as usize;
    let mut out = FeatureMap::zeros([c_out, out_h, out_w]);
    for (range, segment) in &merged {
        for c in 0..(range.1 - range.0) as usize {
            for y in 0..out_h {
                for x in 0..out_w {
                    out.set([range.0 as usize + c, y, x], segment.get([c, y, x]));
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conv::conv2d_reference;
    use crate::epitome::{build_schedule, reconstruct, EpitomeSpec, LayerKind, PatchDims};
    use crate::mapping::{map_layer, MapPolicy, SignScheme, SliceMode, XbarConfig};
    use crate::network::LayerSpec;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn conv(c_out: usize, c_in: usize, k: usize, input: usize) -> ConvSpec {
        ConvSpec {
            name: "dp".into(),
            kind: LayerKind::Conv,
            c_in,
            c_out,
            k_h: k,
            k_w: k,
            stride: 1,
            padding: 0,
            input_h: input,
            input_w: input,
            weight_bits: 8,
        }
    }

    fn policy() -> MapPolicy {
        MapPolicy {
            slice_mode: SliceMode::Plain,
            sign: SignScheme::Single,
        }
    }

    fn setup(
        c: &ConvSpec,
        e: &EpitomeSpec,
        xbar: XbarConfig,
    ) -> (PatchSchedule, LayerMapping, IndexTables) {
        let layer = LayerSpec {
            conv: c.clone(),
            epitome: Some(e.clone()),
            wrap: false,
        };
        let schedule = build_schedule(c, e).unwrap();
        let mapping = map_layer(&layer, &xbar, &policy()).unwrap();
        let tables = build_tables(&schedule, &mapping, c).unwrap();
        (schedule, mapping, tables)
    }

    fn small_xbar() -> XbarConfig {
        XbarConfig {
            rows: 4,
            cols: 4,
            cell_bits: 2,
        }
    }

    fn rand_feature(rng: &mut ChaCha8Rng, dims: [usize; 3]) -> FeatureMap<i64> {
        FeatureMap::from_fn(dims, |_| rng.random_range(-4..=4))
    }

    fn rand_weights(rng: &mut ChaCha8Rng, dims: [usize; 4]) -> WeightTensor<i64> {
        WeightTensor::from_fn(dims, |_| rng.random_range(-4..=4))
    }

    #[test]
    fn single_patch_tables_fill_the_crossbar() {
        let c = conv(4, 4, 1, 2);
        let e = EpitomeSpec::identity_for(&c);
        let (schedule, mapping, tables) = setup(&c, &e, small_xbar());
        assert_eq!(schedule.entry_count(), 1);
        assert_eq!(tables.ifat, vec![(0, 16)]);
        assert_eq!(tables.ofat, vec![(0, 4)]);
        assert_eq!(tables.ifrt.len(), 1);
        assert!(tables.ifrt[0].iter().all(|&b| b));
        assert_eq!(mapping.crossbars(), 4);
    }

    #[test]
    fn table_cardinalities_track_the_schedule() {
        // 2 output tiles x 3 input tiles = 6 patches
        let c = conv(4, 6, 1, 3);
        let e = EpitomeSpec {
            c_out: 2,
            c_in: 2,
            h: 1,
            w: 1,
            patch: PatchDims {
                h: 1,
                w: 1,
                c_in: 2,
                c_out: 2,
            },
        };
        let (schedule, mapping, tables) = setup(&c, &e, small_xbar());
        assert_eq!(schedule.entry_count(), 6);
        assert_eq!(tables.ifat.len(), 6);
        assert_eq!(tables.ifrt.len(), 6);
        assert_eq!(tables.ofat.len(), 6);
        let trace = analyze_layer(&schedule, &mapping, false).unwrap();
        assert_eq!(trace.activation_rounds, 6);
    }

    #[test]
    fn identity_case_matches_reference_in_one_round() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = conv(3, 2, 2, 4);
        let e = EpitomeSpec::identity_for(&c);
        let (schedule, mapping, tables) = setup(&c, &e, XbarConfig::default());
        let weights = rand_weights(&mut rng, e.dims());
        let input = rand_feature(&mut rng, [2, 4, 4]);
        let (out, trace) =
            execute_layer(&input, &weights, &schedule, &mapping, &tables, false).unwrap();
        assert_eq!(out, conv2d_reference(&input, &weights, &c).unwrap());
        assert_eq!(trace.activation_rounds, 1);
    }

    #[test]
    fn replication_layer_wraps_without_changing_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = conv(4, 2, 1, 4);
        let e = EpitomeSpec {
            c_out: 2,
            c_in: 2,
            h: 1,
            w: 1,
            patch: PatchDims {
                h: 1,
                w: 1,
                c_in: 2,
                c_out: 2,
            },
        };
        let (schedule, mapping, tables) = setup(&c, &e, small_xbar());
        let weights = rand_weights(&mut rng, e.dims());
        let input = rand_feature(&mut rng, [2, 4, 4]);
        let (off, t_off) =
            execute_layer(&input, &weights, &schedule, &mapping, &tables, false).unwrap();
        let (on, t_on) =
            execute_layer(&input, &weights, &schedule, &mapping, &tables, true).unwrap();
        assert_eq!(off, on);
        assert_eq!(t_off.output_buffer_writes, 2 * t_on.output_buffer_writes);
        // every other counter is untouched by wrapping
        assert_eq!(t_off.activation_rounds, t_on.activation_rounds);
        assert_eq!(t_off.xbar_reads, t_on.xbar_reads);
        assert_eq!(t_off.adc_conversions, t_on.adc_conversions);
        assert_eq!(t_off.dac_conversions, t_on.dac_conversions);
        assert_eq!(t_off.input_buffer_reads, t_on.input_buffer_reads);
        assert_eq!(t_off.joint_adds, t_on.joint_adds);
        assert_eq!(t_off.joint_concats, t_on.joint_concats);
        // reference equality and the translation invariance of the output
        let w = reconstruct(&weights, &schedule).unwrap();
        assert_eq!(off, conv2d_reference(&input, &w, &c).unwrap());
        for y in 0..4 {
            for x in 0..4 {
                for ch in 0..2 {
                    assert_eq!(on.get([ch, y, x]), on.get([ch + 2, y, x]));
                }
            }
        }
    }

    #[test]
    fn overlap_layer_matches_reference_and_does_not_wrap() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c = conv(4, 2, 1, 4);
        let e = EpitomeSpec {
            c_out: 3,
            c_in: 2,
            h: 1,
            w: 1,
            patch: PatchDims {
                h: 1,
                w: 1,
                c_in: 2,
                c_out: 2,
            },
        };
        let (schedule, mapping, tables) = setup(&c, &e, small_xbar());
        assert_eq!(detect_wrap_factor(&schedule), 1);
        let weights = rand_weights(&mut rng, e.dims());
        let input = rand_feature(&mut rng, [2, 4, 4]);
        let (out, _) =
            execute_layer(&input, &weights, &schedule, &mapping, &tables, false).unwrap();
        let w = reconstruct(&weights, &schedule).unwrap();
        assert_eq!(out, conv2d_reference(&input, &w, &c).unwrap());
        // wrap on a non-replicated layer behaves as wrap off
        let (out_wrap, t_wrap) =
            execute_layer(&input, &weights, &schedule, &mapping, &tables, true).unwrap();
        let t_off = analyze_layer(&schedule, &mapping, false).unwrap();
        assert_eq!(out_wrap, out);
        assert_eq!(t_wrap, t_off);
    }

    #[test]
    fn partial_sums_share_an_output_range() {
        // two input tiles write the same output segment: the joint stage
        // must add them
        let c = conv(2, 4, 1, 3);
        let e = EpitomeSpec {
            c_out: 2,
            c_in: 2,
            h: 1,
            w: 1,
            patch: PatchDims {
                h: 1,
                w: 1,
                c_in: 2,
                c_out: 2,
            },
        };
        let (schedule, mapping, tables) = setup(&c, &e, small_xbar());
        assert_eq!(tables.ofat, vec![(0, 2), (0, 2)]);
        let trace = analyze_layer(&schedule, &mapping, false).unwrap();
        assert_eq!(trace.joint_adds, 2 * 3 * 3);
        assert_eq!(trace.joint_concats, 1);

        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let weights = rand_weights(&mut rng, e.dims());
        let input = rand_feature(&mut rng, [4, 3, 3]);
        let (out, _) =
            execute_layer(&input, &weights, &schedule, &mapping, &tables, false).unwrap();
        let w = reconstruct(&weights, &schedule).unwrap();
        assert_eq!(out, conv2d_reference(&input, &w, &c).unwrap());
    }

    #[test]
    fn joint_rules() {
        let seg = |vals: Vec<i64>| FeatureMap::new([1, 1, 2], vals).unwrap();
        // identity
        let out = joint_reconstruct(&[(seg(vec![1, 2]), (0, 1))]).unwrap();
        assert_eq!(out.values(), &[1, 2]);
        // identical ranges are summed
        let out =
            joint_reconstruct(&[(seg(vec![1, 2]), (0, 1)), (seg(vec![10, 20]), (0, 1))]).unwrap();
        assert_eq!(out.values(), &[11, 22]);
        // sum then concatenate
        let out = joint_reconstruct(&[
            (seg(vec![1, 2]), (1, 2)),
            (seg(vec![5, 5]), (0, 1)),
            (seg(vec![3, 4]), (1, 2)),
        ])
        .unwrap();
        assert_eq!(out.values(), &[5, 5, 4, 6]);
        // gaps and straddling overlaps are rejected
        assert!(joint_reconstruct(&[(seg(vec![1, 2]), (1, 2))]).is_err());
        let two = FeatureMap::new([2, 1, 2], vec![1, 2, 3, 4]).unwrap();
        assert!(joint_reconstruct(&[(two.clone(), (0, 2)), (seg(vec![1, 1]), (1, 2))]).is_err());
    }

    #[test]
    fn stale_tables_are_rejected() {
        let c = conv(4, 2, 1, 4);
        let e = EpitomeSpec {
            c_out: 2,
            c_in: 2,
            h: 1,
            w: 1,
            patch: PatchDims {
                h: 1,
                w: 1,
                c_in: 2,
                c_out: 2,
            },
        };
        let (schedule, mapping, mut tables) = setup(&c, &e, small_xbar());
        tables.ofat[0] = (0, 1);
        let input = FeatureMap::<i64>::zeros([2, 4, 4]);
        let weights = WeightTensor::<i64>::zeros(e.dims());
        assert!(execute_layer(&input, &weights, &schedule, &mapping, &tables, false).is_err());
    }

    #[test]
    fn multi_row_block_patches_touch_all_their_arrays() {
        // identity epitome with 8 rows on a 4-row crossbar: one round,
        // two row blocks
        let c = conv(2, 8, 1, 2);
        let e = EpitomeSpec::identity_for(&c);
        let (schedule, mapping, _) = setup(&c, &e, small_xbar());
        assert_eq!(mapping.row_blocks, 2);
        let trace = analyze_layer(&schedule, &mapping, false).unwrap();
        assert_eq!(trace.activation_rounds, 1);
        assert_eq!(trace.xbar_reads, 2 * mapping.slices());
    }

    #[test]
    fn trace_counters_are_monotone_in_schedule_size() {
        // same layer, finer patches: strictly more entries
        let c = conv(4, 4, 1, 3);
        let coarse = EpitomeSpec::identity_for(&c);
        let mut fine = coarse.clone();
        fine.patch = PatchDims {
            h: 1,
            w: 1,
            c_in: 2,
            c_out: 2,
        };
        let (s1, m1, _) = setup(&c, &coarse, small_xbar());
        let (s2, m2, _) = setup(&c, &fine, small_xbar());
        assert!(s2.entry_count() > s1.entry_count());
        let t1 = analyze_layer(&s1, &m1, false).unwrap();
        let t2 = analyze_layer(&s2, &m2, false).unwrap();
        assert!(t2.activation_rounds >= t1.activation_rounds);
        assert!(t2.output_buffer_writes >= t1.output_buffer_writes);
        assert!(t2.adc_conversions >= t1.adc_conversions);
        assert!(t2.dac_conversions >= t1.dac_conversions);
    }

    #[test]
    fn analytic_trace_equals_executed_trace_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..40 {
            let c_in = rng.random_range(1..=6);
            let c_out = rng.random_range(1..=6);
            let k = rng.random_range(1..=3);
            let input = rng.random_range(k..=6);
            let c = conv(c_out, c_in, k, input);
            let e = EpitomeSpec {
                c_out: rng.random_range(1..=c_out),
                c_in: rng.random_range(1..=c_in),
                h: rng.random_range(1..=k),
                w: rng.random_range(1..=k),
                patch: PatchDims {
                    h: 1,
                    w: 1,
                    c_in: 1,
                    c_out: 1,
                },
            };
            let mut e = e;
            e.patch = PatchDims {
                h: rng.random_range(1..=e.h),
                w: rng.random_range(1..=e.w),
                c_in: rng.random_range(1..=e.c_in),
                c_out: rng.random_range(1..=e.c_out),
            };
            let (schedule, mapping, tables) = setup(&c, &e, small_xbar());
            for wrap in [false, true] {
                let weights = rand_weights(&mut rng, e.dims());
                let input = rand_feature(&mut rng, [c.c_in, c.input_h, c.input_w]);
                let (_, executed) =
                    execute_layer(&input, &weights, &schedule, &mapping, &tables, wrap).unwrap();
                let analytic = analyze_layer(&schedule, &mapping, wrap).unwrap();
                assert_eq!(executed, analytic);
            }
        }
    }

    #[test]
    fn float_execution_stays_within_relative_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let c = conv(4, 6, 3, 6);
        let e = EpitomeSpec {
            c_out: 3,
            c_in: 3,
            h: 3,
            w: 3,
            patch: PatchDims {
                h: 3,
                w: 3,
                c_in: 2,
                c_out: 2,
            },
        };
        let (schedule, mapping, tables) = setup(&c, &e, small_xbar());
        let weights = WeightTensor::from_fn(e.dims(), |_| rng.random_range(-1.0f64..1.0));
        let input = FeatureMap::from_fn([6, 6, 6], |_| rng.random_range(-1.0f64..1.0));
        let (out, _) =
            execute_layer(&input, &weights, &schedule, &mapping, &tables, false).unwrap();
        let w = reconstruct(&weights, &schedule).unwrap();
        let want = conv2d_reference(&input, &w, &c).unwrap();
        for (a, b) in out.values().iter().zip(want.values()) {
            let rel = (a - b).abs() / b.abs().max(1.0);
            assert!(rel <= 1e-5, "{a} vs {b}");
        }
    }
}
