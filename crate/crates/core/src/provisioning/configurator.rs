//! Turns an application's task parameters into a validated manifest for one
//! node. "Compiling" a task means validating it against the node and
//! producing the canonical manifest text.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use crate::model::{
    convert_unit, manifest::valid_endpoint, Capability, Comparator, TaskManifest, ThresholdRule,
    Unit,
};
use crate::registry::SensorDescription;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigureError {
    #[error("invalid task parameters: {0}")]
    InvalidParams(String),
    #[error("node {node:?} has no {capability} sensor")]
    UnsupportedCapability {
        node: String,
        capability: Capability,
    },
    #[error("sampling interval {requested} ms outside {min}..={max} ms")]
    IntervalOutOfRange { requested: u64, min: u64, max: u64 },
    #[error("unit {0} cannot be produced by this sensor")]
    UnitUnsupported(Unit),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskParams {
    pub capability: Capability,
    pub sampling_interval_ms: u64,
    pub unit: Unit,
    pub endpoint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparator: Option<Comparator>,
}

impl TaskParams {
    /// Checks that hold regardless of the node.
    pub fn validate(&self) -> Result<(), ConfigureError> {
        let invalid = |m: &str| Err(ConfigureError::InvalidParams(m.to_string()));
        if self.sampling_interval_ms == 0 {
            return invalid("sampling_interval_ms must be positive");
        }
        if self.unit.family() != self.capability {
            return invalid("unit does not measure the requested capability");
        }
        if !valid_endpoint(&self.endpoint) {
            return invalid("endpoint must be host:port");
        }
        match (self.threshold, self.comparator) {
            (Some(t), Some(_)) if !t.is_finite() => invalid("threshold must be finite"),
            (Some(_), Some(_)) | (None, None) => Ok(()),
            _ => invalid("threshold and comparator go together"),
        }
    }
}

/// Validates `params` against `node` and emits the manifest. When the node
/// cannot produce the desired unit but can produce another unit of the same
/// family, the manifest carries the node-native unit (threshold converted
/// to it) and the data path converts readings back.
pub fn configure(
    params: &TaskParams,
    node: &SensorDescription,
    vs_id: Uuid,
) -> Result<TaskManifest, ConfigureError> {
    params.validate()?;
    let decl = node.capability(params.capability).ok_or_else(|| {
        ConfigureError::UnsupportedCapability {
            node: node.node_id.clone(),
            capability: params.capability,
        }
    })?;
    let range = decl.sampling_interval_ms;
    if !range.contains(params.sampling_interval_ms) {
        return Err(ConfigureError::IntervalOutOfRange {
            requested: params.sampling_interval_ms,
            min: range.min,
            max: range.max,
        });
    }
    let unit = if decl.units.contains(&params.unit) {
        params.unit
    } else {
        decl.native_unit()
    };
    let rule = match (params.threshold, params.comparator) {
        (Some(t), Some(comparator)) => {
            let threshold = convert_unit(t, params.unit, unit)
                .map_err(|_| ConfigureError::UnitUnsupported(params.unit))?;
            Some(ThresholdRule {
                comparator,
                // canonical text must not distinguish -0 from 0
                threshold: threshold + 0.0,
            })
        }
        _ => None,
    };
    Ok(TaskManifest {
        vs_id,
        platform: node.platform,
        capability: params.capability,
        sampling_interval_ms: params.sampling_interval_ms,
        unit,
        endpoint: params.endpoint.clone(),
        rule,
    })
}
