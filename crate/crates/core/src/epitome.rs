//! Epitome tensors and the deterministic patch sampler.
//!
//! An epitome is a compact 4-D parameter tensor from which a full
//! convolution weight is rebuilt by repeatedly sampling sub-tensors
//! ("patches") and concatenating them over a tiling of the convolution
//! weight. The sampler is fixed, not learned: along each dimension the
//! patch start indices are spread evenly across the epitome, which yields
//! overlapping patches (and therefore element reuse) whenever the tiles
//! need more extent than the epitome provides.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{CountTensor, WeightTensor};

/// Kind of a weighted layer. Fully-connected layers are modeled as 1x1
/// convolutions on a 1x1 input, which makes the crossbar arithmetic
/// identical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    Fc,
}

/// Shape of one convolution (or fully-connected) layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub name: String,
    pub kind: LayerKind,
    pub c_in: usize,
    pub c_out: usize,
    pub k_h: usize,
    pub k_w: usize,
    pub stride: usize,
    pub padding: usize,
    pub input_h: usize,
    pub input_w: usize,
    /// Weight word length in bits; full-precision weights count as 32-bit
    /// fixed words.
    pub weight_bits: u32,
}

impl ConvSpec {
    pub fn validate(&self) -> Result<()> {
        if self.c_in < 1 || self.c_out < 1 || self.k_h < 1 || self.k_w < 1 || self.stride < 1 {
            return Err(Error::Argument(format!(
                "layer `{}`: channel, kernel and stride values must be >= 1",
                self.name
            )));
        }
        if self.input_h < 1 || self.input_w < 1 {
            return Err(Error::Argument(format!(
                "layer `{}`: input dims must be >= 1",
                self.name
            )));
        }
        if !(2..=32).contains(&self.weight_bits) {
            return Err(Error::Argument(format!(
                "layer `{}`: weight_bits {} outside [2, 32]",
                self.name, self.weight_bits
            )));
        }
        if self.kind == LayerKind::Fc
            && (self.k_h != 1
                || self.k_w != 1
                || self.input_h != 1
                || self.input_w != 1
                || self.stride != 1
                || self.padding != 0)
        {
            return Err(Error::Argument(format!(
                "layer `{}`: fc layers must be 1x1 kernels on 1x1 input with stride 1, padding 0",
                self.name
            )));
        }
        if self.input_h + 2 * self.padding < self.k_h || self.input_w + 2 * self.padding < self.k_w
        {
            return Err(Error::Argument(format!(
                "layer `{}`: kernel does not fit the padded input",
                self.name
            )));
        }
        Ok(())
    }

    /// Weight tensor dims in `(out, in, h, w)` order.
    pub fn weight_dims(&self) -> [usize; 4] {
        [self.c_out, self.c_in, self.k_h, self.k_w]
    }

    pub fn weight_count(&self) -> u64 {
        self.weight_dims().iter().map(|&d| d as u64).product()
    }

    /// Output feature-map spatial dims for the configured stride/padding.
    pub fn out_dims(&self) -> (usize, usize) {
        let oh = (self.input_h + 2 * self.padding - self.k_h) / self.stride + 1;
        let ow = (self.input_w + 2 * self.padding - self.k_w) / self.stride + 1;
        (oh, ow)
    }
}

/// Extents of one sampled patch, in the same roles as the epitome dims:
/// `c_out`/`c_in` are channel extents, `h`/`w` spatial extents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchDims {
    pub h: usize,
    pub w: usize,
    pub c_in: usize,
    pub c_out: usize,
}

impl PatchDims {
    /// Patch extents in `(out, in, h, w)` order.
    pub fn extents(&self) -> [usize; 4] {
        [self.c_out, self.c_in, self.h, self.w]
    }

    pub fn validate(&self) -> Result<()> {
        if self.extents().iter().any(|&d| d < 1) {
            return Err(Error::Argument("patch dims must all be >= 1".into()));
        }
        Ok(())
    }
}

/// Shape of a compact epitome tensor plus its sampling patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpitomeSpec {
    pub c_out: usize,
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub patch: PatchDims,
}

impl EpitomeSpec {
    /// Epitome dims in `(out, in, h, w)` order.
    pub fn dims(&self) -> [usize; 4] {
        [self.c_out, self.c_in, self.h, self.w]
    }

    /// Word lines needed when mapped: flattened `(in, h, w)` extent.
    pub fn rows(&self) -> usize {
        self.c_in * self.h * self.w
    }

    /// Bit lines needed when mapped: the output-channel extent.
    pub fn cols(&self) -> usize {
        self.c_out
    }

    pub fn element_count(&self) -> u64 {
        self.dims().iter().map(|&d| d as u64).product()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims().iter().any(|&d| d < 1) {
            return Err(Error::Argument("epitome dims must all be >= 1".into()));
        }
        self.patch.validate()?;
        for (d, (p, e)) in self.patch.extents().iter().zip(self.dims()).enumerate() {
            if p > &e {
                return Err(Error::Dimension(format!(
                    "patch extent {p} exceeds epitome dim {e} along dim {d}"
                )));
            }
        }
        Ok(())
    }

    /// Checks the pairing invariants against the convolution the epitome
    /// stands in for.
    pub fn validate_for(&self, conv: &ConvSpec) -> Result<()> {
        self.validate()?;
        if self.c_out > conv.c_out {
            return Err(Error::Dimension(format!(
                "epitome c_out {} exceeds conv c_out {} for layer `{}`",
                self.c_out, conv.c_out, conv.name
            )));
        }
        if self.rows() > conv.c_in * conv.k_h * conv.k_w {
            return Err(Error::Dimension(format!(
                "epitome holds {} rows but conv `{}` only has {}",
                self.rows(),
                conv.name,
                conv.c_in * conv.k_h * conv.k_w
            )));
        }
        for (d, (p, c)) in self
            .patch
            .extents()
            .iter()
            .zip(conv.weight_dims())
            .enumerate()
        {
            if p > &c {
                return Err(Error::Dimension(format!(
                    "patch extent {p} exceeds conv dim {c} along dim {d} for layer `{}`",
                    conv.name
                )));
            }
        }
        Ok(())
    }

    /// The trivial epitome equal to the convolution weight itself, sampled
    /// as a single full patch. Baseline layers use this so the whole
    /// pipeline has one code path.
    pub fn identity_for(conv: &ConvSpec) -> Self {
        EpitomeSpec {
            c_out: conv.c_out,
            c_in: conv.c_in,
            h: conv.k_h,
            w: conv.k_w,
            patch: PatchDims {
                h: conv.k_h,
                w: conv.k_w,
                c_in: conv.c_in,
                c_out: conv.c_out,
            },
        }
    }
}

/// One sampling step: where the patch is read from in the epitome and
/// where the resulting tile lands in the convolution weight. `extent` is
/// the patch extent clamped to the remaining tile size, so edge tiles of a
/// non-divisible convolution sample a smaller region anchored at the same
/// start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleEntry {
    pub epi_start: [usize; 4],
    pub conv_origin: [usize; 4],
    pub extent: [usize; 4],
}

/// Deterministic sampling schedule tiling one convolution weight.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSchedule {
    pub conv: ConvSpec,
    pub epitome: EpitomeSpec,
    /// Tile counts per dim, `(out, in, h, w)` order.
    pub tiles: [usize; 4],
    /// Per-dim epitome start offsets, indexed by tile number.
    pub axis_starts: [Vec<usize>; 4],
    /// Per-dim tile extents, indexed by tile number.
    pub axis_extents: [Vec<usize>; 4],
    /// Entries in lexicographic tile order with `c_out` outermost.
    pub entries: Vec<ScheduleEntry>,
}

impl PatchSchedule {
    pub fn entry_count(&self) -> usize {
        self.entries.len()
    }
}

fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

/// Rounds `num / den` to the nearest integer, halves away from zero.
/// Operands are non-negative so this matches `f64::round` exactly while
/// staying in integer arithmetic.
fn round_div(num: usize, den: usize) -> usize {
    (2 * num + den) / (2 * den)
}

/// Evenly spread start offsets for `n` tiles over an extent of `epi - patch`.
fn axis_layout(conv_d: usize, patch_d: usize, epi_d: usize) -> (Vec<usize>, Vec<usize>) {
    let n = ceil_div(conv_d, patch_d);
    let mut starts = Vec::with_capacity(n);
    let mut extents = Vec::with_capacity(n);
    for j in 0..n {
        let start = if n == 1 || epi_d == patch_d {
            0
        } else {
            round_div(j * (epi_d - patch_d), n - 1)
        };
        starts.push(start);
        extents.push(patch_d.min(conv_d - j * patch_d));
    }
    (starts, extents)
}

/// Builds the deterministic patch schedule covering `conv` from `epi`.
///
/// Along each dim with `n` tiles the epitome starts are
/// `round(j * (epi - patch) / (n - 1))`, collapsing to zero when a single
/// tile suffices or the patch spans the whole epitome dim. Tiles partition
/// the convolution weight exactly; the last tile along a non-divisible dim
/// is clamped.
pub fn build_schedule(conv: &ConvSpec, epi: &EpitomeSpec) -> Result<PatchSchedule> {
    conv.validate()?;
    epi.validate_for(conv)?;

    let conv_dims = conv.weight_dims();
    let patch = epi.patch.extents();
    let epi_dims = epi.dims();

    let mut axis_starts: [Vec<usize>; 4] = Default::default();
    let mut axis_extents: [Vec<usize>; 4] = Default::default();
    let mut tiles = [0usize; 4];
    for d in 0..4 {
        let (starts, extents) = axis_layout(conv_dims[d], patch[d], epi_dims[d]);
        tiles[d] = starts.len();
        axis_starts[d] = starts;
        axis_extents[d] = extents;
    }

    let mut entries = Vec::with_capacity(tiles.iter().product());
    for t0 in 0..tiles[0] {
        for t1 in 0..tiles[1] {
            for t2 in 0..tiles[2] {
                for t3 in 0..tiles[3] {
                    let t = [t0, t1, t2, t3];
                    let mut epi_start = [0usize; 4];
                    let mut conv_origin = [0usize; 4];
                    let mut extent = [0usize; 4];
                    for d in 0..4 {
                        epi_start[d] = axis_starts[d][t[d]];
                        conv_origin[d] = t[d] * patch[d];
                        extent[d] = axis_extents[d][t[d]];
                    }
                    entries.push(ScheduleEntry {
                        epi_start,
                        conv_origin,
                        extent,
                    });
                }
            }
        }
    }

    Ok(PatchSchedule {
        conv: conv.clone(),
        epitome: epi.clone(),
        tiles,
        axis_starts,
        axis_extents,
        entries,
    })
}

/// Reads the contiguous sub-tensor at `start` with the patch extents.
pub fn sample_patch<T: Scalar>(
    epitome: &WeightTensor<T>,
    start: [usize; 4],
    patch: &PatchDims,
) -> Result<WeightTensor<T>> {
    patch.validate()?;
    epitome.sub_tensor(start, patch.extents())
}

/// Rebuilds the virtual convolution weight from the epitome values and a
/// schedule. Each schedule entry copies its (possibly clamped) patch into
/// the tile at its convolution origin.
pub fn reconstruct<T: Scalar>(
    epitome: &WeightTensor<T>,
    schedule: &PatchSchedule,
) -> Result<WeightTensor<T>> {
    if epitome.dims() != schedule.epitome.dims() {
        return Err(Error::Dimension(format!(
            "epitome dims {:?} do not match schedule dims {:?}",
            epitome.dims(),
            schedule.epitome.dims()
        )));
    }
    let mut out = WeightTensor::zeros(schedule.conv.weight_dims());
    for entry in &schedule.entries {
        let block = epitome.sub_tensor(entry.epi_start, entry.extent)?;
        out.write_block(entry.conv_origin, &block)?;
    }
    Ok(out)
}

/// Counts, per epitome element, how many schedule entries sample it.
/// The counts sum to the convolution weight element count.
pub fn repetition_counts(schedule: &PatchSchedule) -> CountTensor {
    let mut counts = CountTensor::zeros(schedule.epitome.dims());
    for entry in &schedule.entries {
        for o in 0..entry.extent[0] {
            for i in 0..entry.extent[1] {
                for y in 0..entry.extent[2] {
                    for x in 0..entry.extent[3] {
                        let idx = [
                            entry.epi_start[0] + o,
                            entry.epi_start[1] + i,
                            entry.epi_start[2] + y,
                            entry.epi_start[3] + x,
                        ];
                        let v = counts.get(idx);
                        counts.set(idx, v + 1);
                    }
                }
            }
        }
    }
    counts
}

/// Largest `r` such that the output-channel tiling is `r` identical
/// repetitions of the same epitome starts and extents, i.e. the
/// reconstructed weight satisfies `W[x] = W[x + c_out/r]`. Returns 1 when
/// the tiling never repeats.
pub fn detect_wrap_factor(schedule: &PatchSchedule) -> usize {
    let n = schedule.tiles[0];
    let starts = &schedule.axis_starts[0];
    let extents = &schedule.axis_extents[0];
    for r in (1..=n).rev() {
        if !n.is_multiple_of(r) {
            continue;
        }
        let m = n / r;
        let repeats = (0..n).all(|j| starts[j] == starts[j % m] && extents[j] == extents[j % m]);
        if repeats {
            return r;
        }
    }
    1
}
