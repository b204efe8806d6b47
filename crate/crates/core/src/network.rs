//! Network model and the on-disk network spec schema.
//!
//! The file format is a small versioned TOML schema with one record per
//! weighted layer; the in-memory [`NetworkSpec`] has every default
//! resolved (in particular the sampling patch, which defaults to one
//! kernel-sized, crossbar-column-wide patch).

use serde::{Deserialize, Serialize};

use crate::epitome::{ConvSpec, EpitomeSpec, LayerKind, PatchDims};
use crate::error::{Error, Result};
use crate::mapping::XbarConfig;

pub const NETWORK_SCHEMA_VERSION: u32 = 1;

/// One layer plus its optional epitome replacement.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub conv: ConvSpec,
    pub epitome: Option<EpitomeSpec>,
    /// Reuse replicated output channels instead of writing them again.
    pub wrap: bool,
}

impl LayerSpec {
    pub fn validate(&self) -> Result<()> {
        self.conv.validate()?;
        if let Some(epi) = &self.epitome {
            epi.validate_for(&self.conv)?;
        }
        Ok(())
    }

    /// The epitome actually deployed: the layer's own, or the trivial
    /// whole-weight epitome for baseline layers.
    pub fn deployed_epitome(&self) -> EpitomeSpec {
        self.epitome
            .clone()
            .unwrap_or_else(|| EpitomeSpec::identity_for(&self.conv))
    }
}

/// An ordered list of layers.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub name: String,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        for layer in &self.layers {
            layer.validate()?;
        }
        Ok(())
    }

    /// Strips every epitome, leaving the plain convolution deployment.
    pub fn baseline(&self) -> NetworkSpec {
        NetworkSpec {
            name: self.name.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerSpec {
                    conv: l.conv.clone(),
                    epitome: None,
                    wrap: l.wrap,
                })
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// file schema

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkFile {
    pub schema: u32,
    pub name: String,
    #[serde(default)]
    pub layers: Vec<LayerRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerRecord {
    pub name: String,
    pub kind: LayerKind,
    pub c_in: usize,
    pub c_out: usize,
    pub k_h: usize,
    pub k_w: usize,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub padding: usize,
    pub input_h: usize,
    pub input_w: usize,
    pub weight_bits: u32,
    #[serde(default)]
    pub wrap: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epitome: Option<EpitomeRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpitomeRecord {
    pub c_out: usize,
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patch: Option<PatchRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatchRecord {
    pub h: usize,
    pub w: usize,
    pub c_in: usize,
    pub c_out: usize,
}

fn one() -> usize {
    1
}

/// Default patch for an epitome that does not spell one out: kernel-sized
/// spatially, full shared input channels, and one crossbar's worth of
/// output channels, so one patch matches one crossbar activation.
pub fn default_patch(conv: &ConvSpec, c_out: usize, c_in: usize, xbar: &XbarConfig) -> PatchDims {
    PatchDims {
        h: conv.k_h,
        w: conv.k_w,
        c_in: c_in.min(conv.c_in),
        c_out: c_out.min(xbar.cols).min(conv.c_out),
    }
}

fn resolve_epitome(
    conv: &ConvSpec,
    record: &EpitomeRecord,
    xbar: &XbarConfig,
) -> Result<EpitomeSpec> {
    let patch = match &record.patch {
        Some(p) => PatchDims {
            h: p.h,
            w: p.w,
            c_in: p.c_in,
            c_out: p.c_out,
        },
        None => default_patch(conv, record.c_out, record.c_in, xbar),
    };
    let epi = EpitomeSpec {
        c_out: record.c_out,
        c_in: record.c_in,
        h: record.h,
        w: record.w,
        patch,
    };
    epi.validate_for(conv)?;
    Ok(epi)
}

impl NetworkFile {
    /// Resolves the raw records into a validated [`NetworkSpec`].
    pub fn resolve(&self, xbar: &XbarConfig) -> Result<NetworkSpec> {
        if self.schema != NETWORK_SCHEMA_VERSION {
            return Err(Error::Argument(format!(
                "unsupported network schema version {} (expected {NETWORK_SCHEMA_VERSION})",
                self.schema
            )));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        for record in &self.layers {
            let conv = ConvSpec {
                name: record.name.clone(),
                kind: record.kind,
                c_in: record.c_in,
                c_out: record.c_out,
                k_h: record.k_h,
                k_w: record.k_w,
                stride: record.stride,
                padding: record.padding,
                input_h: record.input_h,
                input_w: record.input_w,
                weight_bits: record.weight_bits,
            };
            conv.validate()?;
            let epitome = record
                .epitome
                .as_ref()
                .map(|e| resolve_epitome(&conv, e, xbar))
                .transpose()?;
            layers.push(LayerSpec {
                conv,
                epitome,
                wrap: record.wrap,
            });
        }
        Ok(NetworkSpec {
            name: self.name.clone(),
            layers,
        })
    }

    /// Serializes a resolved network back into the file schema, spelling
    /// the patch out so the emitted file re-ingests identically.
    pub fn from_spec(spec: &NetworkSpec) -> NetworkFile {
        NetworkFile {
            schema: NETWORK_SCHEMA_VERSION,
            name: spec.name.clone(),
            layers: spec
                .layers
                .iter()
                .map(|l| LayerRecord {
                    name: l.conv.name.clone(),
                    kind: l.conv.kind,
                    c_in: l.conv.c_in,
                    c_out: l.conv.c_out,
                    k_h: l.conv.k_h,
                    k_w: l.conv.k_w,
                    stride: l.conv.stride,
                    padding: l.conv.padding,
                    input_h: l.conv.input_h,
                    input_w: l.conv.input_w,
                    weight_bits: l.conv.weight_bits,
                    wrap: l.wrap,
                    epitome: l.epitome.as_ref().map(|e| EpitomeRecord {
                        c_out: e.c_out,
                        c_in: e.c_in,
                        h: e.h,
                        w: e.w,
                        patch: Some(PatchRecord {
                            h: e.patch.h,
                            w: e.patch.w,
                            c_in: e.patch.c_in,
                            c_out: e.patch.c_out,
                        }),
                    }),
                })
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// uniform epitome overlay

/// Concrete epitome for a `rows x cols` target on one layer, or `None`
/// when the layer is too small to host it.
///
/// The spatial dims are the smallest square `s >= k` whose area divides
/// the row target, which keeps the row count exact and leaves room for
/// overlapping spatial sampling; if no such square exists within `k + 4`
/// the kernel extent is kept and the shared-channel count floored.
pub fn uniform_epitome(
    conv: &ConvSpec,
    rows: usize,
    cols: usize,
    xbar: &XbarConfig,
) -> Option<EpitomeSpec> {
    let conv_rows = conv.c_in * conv.k_h * conv.k_w;
    if conv_rows < rows || conv.c_out < cols {
        return None;
    }
    let (h, w, c_in) = if conv.k_h == conv.k_w {
        match (conv.k_h..=conv.k_h + 4).find(|s| rows.is_multiple_of(s * s) && rows / (s * s) >= 1) {
            Some(s) => (s, s, rows / (s * s)),
            None => (conv.k_h, conv.k_w, rows / (conv.k_h * conv.k_w)),
        }
    } else {
        (conv.k_h, conv.k_w, rows / (conv.k_h * conv.k_w))
    };
    if c_in == 0 || c_in > conv.c_in {
        return None;
    }
    let epi = EpitomeSpec {
        c_out: cols,
        c_in,
        h,
        w,
        patch: default_patch(conv, cols, c_in, xbar),
    };
    epi.validate_for(conv).ok()?;
    Some(epi)
}

/// Replaces every layer that can host a full `rows x cols` epitome with
/// one; smaller layers keep their convolution.
pub fn uniform_epitome_overlay(
    network: &NetworkSpec,
    rows: usize,
    cols: usize,
    xbar: &XbarConfig,
) -> NetworkSpec {
    NetworkSpec {
        name: network.name.clone(),
        layers: network
            .layers
            .iter()
            .map(|l| LayerSpec {
                conv: l.conv.clone(),
                epitome: uniform_epitome(&l.conv, rows, cols, xbar),
                wrap: l.wrap,
            })
            .collect(),
    }
}
