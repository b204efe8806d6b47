//! Lookup-table cost model turning execution traces into latency, energy
//! and EDP figures.
//!
//! Every hardware behavior has one `(latency, energy)` unit cost. Energy
//! is the sum of event counts times unit energies. Rounds are uniform
//! within a layer and pipeline stages run in parallel inside a round, so
//! the layer latency collapses to the bottleneck stage total:
//! `max over components of (unit latency * event count)`. Layers are
//! evaluated serially and totals add up.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::datapath::ExecutionTrace;
use crate::error::{Error, Result};
use crate::mapping::LayerMapping;

/// Hardware behaviors the trace accounts for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    XbarRead,
    Dac,
    Adc,
    InputBufferRead,
    OutputBufferWrite,
    JointAdd,
    JointConcat,
    TableLookup,
}

impl Component {
    pub const ALL: [Component; 8] = [
        Component::XbarRead,
        Component::Dac,
        Component::Adc,
        Component::InputBufferRead,
        Component::OutputBufferWrite,
        Component::JointAdd,
        Component::JointConcat,
        Component::TableLookup,
    ];

    pub fn key(&self) -> &'static str {
        match self {
            Component::XbarRead => "xbar_read",
            Component::Dac => "dac",
            Component::Adc => "adc",
            Component::InputBufferRead => "input_buffer_read",
            Component::OutputBufferWrite => "output_buffer_write",
            Component::JointAdd => "joint_add",
            Component::JointConcat => "joint_concat",
            Component::TableLookup => "table_lookup",
        }
    }

    fn events(&self, trace: &ExecutionTrace) -> u64 {
        match self {
            Component::XbarRead => trace.xbar_reads,
            Component::Dac => trace.dac_conversions,
            Component::Adc => trace.adc_conversions,
            Component::InputBufferRead => trace.input_buffer_reads,
            Component::OutputBufferWrite => trace.output_buffer_writes,
            Component::JointAdd => trace.joint_adds,
            Component::JointConcat => trace.joint_concats,
            // the index tables are consulted once per activation round
            Component::TableLookup => trace.activation_rounds,
        }
    }
}

/// Unit cost of one event of one component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitCost {
    pub latency: f64,
    pub energy: f64,
}

/// Per-component cost lookup table with declared units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareProfile {
    pub latency_unit: String,
    pub energy_unit: String,
    pub components: BTreeMap<String, UnitCost>,
}

impl HardwareProfile {
    pub fn cost(&self, component: Component) -> Result<UnitCost> {
        self.components
            .get(component.key())
            .copied()
            .ok_or_else(|| Error::Configuration {
                component: component.key().to_string(),
            })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, cost) in &self.components {
            if !(cost.latency >= 0.0 && cost.energy >= 0.0)
                || !cost.latency.is_finite()
                || !cost.energy.is_finite()
            {
                return Err(Error::Argument(format!(
                    "profile entry `{name}` must have finite non-negative costs"
                )));
            }
        }
        Ok(())
    }

    /// Synthetic placeholder costs. The values are round dyadic numbers
    /// with no relation to any measured device; use a calibrated profile
    /// for absolute numbers.
    pub fn synthetic_default() -> Self {
        let mut components = BTreeMap::new();
        let mut put = |c: Component, latency: f64, energy: f64| {
            components.insert(c.key().to_string(), UnitCost { latency, energy });
        };
        put(Component::XbarRead, 16.0, 8.0);
        put(Component::Dac, 2.0, 0.5);
        put(Component::Adc, 8.0, 2.0);
        put(Component::InputBufferRead, 0.5, 0.125);
        put(Component::OutputBufferWrite, 0.5, 0.25);
        put(Component::JointAdd, 0.25, 0.0625);
        put(Component::JointConcat, 0.25, 0.03125);
        put(Component::TableLookup, 0.0, 0.0);
        HardwareProfile {
            latency_unit: "ns".into(),
            energy_unit: "pJ".into(),
            components,
        }
    }
}

pub const PROFILE_SCHEMA_VERSION: u32 = 1;

/// On-disk profile schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileFile {
    pub schema: u32,
    pub units: ProfileUnits,
    pub components: BTreeMap<String, UnitCost>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileUnits {
    pub latency: String,
    pub energy: String,
}

impl ProfileFile {
    pub fn resolve(&self) -> Result<HardwareProfile> {
        if self.schema != PROFILE_SCHEMA_VERSION {
            return Err(Error::Argument(format!(
                "unsupported profile schema version {} (expected {PROFILE_SCHEMA_VERSION})",
                self.schema
            )));
        }
        let profile = HardwareProfile {
            latency_unit: self.units.latency.clone(),
            energy_unit: self.units.energy.clone(),
            components: self.components.clone(),
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn from_profile(profile: &HardwareProfile) -> Self {
        ProfileFile {
            schema: PROFILE_SCHEMA_VERSION,
            units: ProfileUnits {
                latency: profile.latency_unit.clone(),
                energy: profile.energy_unit.clone(),
            },
            components: profile.components.clone(),
        }
    }
}

/// Cost of one component within one layer.
#[derive(Debug, Clone, Serialize)]
pub struct ComponentCost {
    pub component: Component,
    pub events: u64,
    pub latency: f64,
    pub energy: f64,
}

/// Evaluated cost of one layer.
#[derive(Debug, Clone, Serialize)]
pub struct LayerPerf {
    pub layer: String,
    pub crossbars: u64,
    pub activation_rounds: u64,
    pub latency: f64,
    pub energy: f64,
    pub edp: f64,
    pub breakdown: Vec<ComponentCost>,
}

/// Aggregated network cost; totals are the per-layer sums and
/// `edp = latency * energy`.
#[derive(Debug, Clone, Serialize)]
pub struct PerfReport {
    pub latency: f64,
    pub energy: f64,
    pub edp: f64,
    pub per_layer: Vec<LayerPerf>,
}

pub fn evaluate_layer(
    layer: &str,
    trace: &ExecutionTrace,
    mapping: &LayerMapping,
    profile: &HardwareProfile,
) -> Result<LayerPerf> {
    profile.validate()?;
    let mut breakdown = Vec::with_capacity(Component::ALL.len());
    let mut latency: f64 = 0.0;
    let mut energy = 0.0;
    for component in Component::ALL {
        let cost = profile.cost(component)?;
        let events = component.events(trace);
        let stage_latency = cost.latency * events as f64;
        let stage_energy = cost.energy * events as f64;
        latency = latency.max(stage_latency);
        energy += stage_energy;
        breakdown.push(ComponentCost {
            component,
            events,
            latency: stage_latency,
            energy: stage_energy,
        });
    }
    Ok(LayerPerf {
        layer: layer.to_string(),
        crossbars: mapping.crossbars(),
        activation_rounds: trace.activation_rounds,
        latency,
        energy,
        edp: latency * energy,
        breakdown,
    })
}

pub fn evaluate_network(
    layers: &[(String, ExecutionTrace, LayerMapping)],
    profile: &HardwareProfile,
) -> Result<PerfReport> {
    let mut per_layer = Vec::with_capacity(layers.len());
    for (name, trace, mapping) in layers {
        per_layer.push(evaluate_layer(name, trace, mapping, profile)?);
    }
    let latency: f64 = per_layer.iter().map(|l| l.latency).sum();
    let energy: f64 = per_layer.iter().map(|l| l.energy).sum();
    Ok(PerfReport {
        latency,
        energy,
        edp: latency * energy,
        per_layer,
    })
}
