//! Case files: a TOML document with `meta`, `buses`, `ac_lines`,
//! `dc_lines`, `disturbances` and `analysis` sections. Unknown keys are
//! rejected. Powers are per unit on `meta.base_mva`, times in seconds.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::buslib::{make_bus, BusId, BusKind, BusParams};
use crate::closedloop::SimulationOptions;
use crate::error::{Error, Result};
use crate::network::{AcLine, Bus, DcLine, Disturbance, NetworkCase};
use crate::stability::FrequencyGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyUnit {
    /// Frequency deviations in rad/s; angles are their plain integral.
    #[default]
    RadS,
    /// Frequency deviations in per unit of `base_frequency`.
    PerUnit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub name: String,
    #[serde(default = "default_base_mva")]
    pub base_mva: f64,
    #[serde(default = "default_base_frequency")]
    pub base_frequency: f64,
    #[serde(default)]
    pub frequency_unit: FrequencyUnit,
    /// Free-form provenance of the data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

fn default_base_mva() -> f64 {
    100.0
}

fn default_base_frequency() -> f64 {
    50.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusEntry {
    pub id: BusId,
    pub kind: BusKind,
    #[serde(default)]
    pub p_load: f64,
    #[serde(default)]
    pub params: BusParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcLineEntry {
    pub from: BusId,
    pub to: BusId,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcLineEntry {
    pub from: BusId,
    pub to: BusId,
    pub g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceEntry {
    pub bus: BusId,
    pub magnitude: f64,
    #[serde(default)]
    pub time: f64,
}

/// Grid and integration settings; every field has a default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Analysis {
    pub delta: f64,
    pub grid_min: f64,
    pub grid_max: f64,
    pub points: usize,
    pub dt: f64,
    pub t_end: f64,
}

impl Default for Analysis {
    fn default() -> Self {
        let sim = SimulationOptions::default();
        Analysis {
            delta: FrequencyGrid::DEFAULT_DELTA,
            grid_min: FrequencyGrid::DEFAULT_MIN,
            grid_max: FrequencyGrid::DEFAULT_MAX,
            points: FrequencyGrid::DEFAULT_POINTS,
            dt: sim.dt,
            t_end: sim.t_end,
        }
    }
}

impl Analysis {
    pub fn grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::log_spaced(self.grid_min, self.grid_max, self.points, self.delta)
    }

    pub fn simulation(&self) -> SimulationOptions {
        SimulationOptions {
            t_end: self.t_end,
            dt: self.dt,
            record_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub meta: Meta,
    #[serde(default)]
    pub analysis: Analysis,
    pub buses: Vec<BusEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ac_lines: Vec<AcLineEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dc_lines: Vec<DcLineEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub disturbances: Vec<DisturbanceEntry>,
}

impl CaseFile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: CaseFile = toml::from_str(text).map_err(|e| Error::Case(e.to_string().trim_end().to_string()))?;
        if file.buses.is_empty() {
            return Err(Error::Case("the buses section is empty".into()));
        }
        Ok(file)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Case(e.to_string()))
    }

    /// Build every bus model and validate the network.
    pub fn build(&self) -> Result<NetworkCase> {
        let buses = self
            .buses
            .iter()
            .map(|b| {
                Ok(Bus {
                    model: make_bus(b.id, b.kind, &b.params)?,
                    p_load: b.p_load,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let case = NetworkCase::new(
            self.meta.name.clone(),
            buses,
            self.ac_lines.iter().map(|l| AcLine { from: l.from, to: l.to, b: l.b }).collect(),
            self.dc_lines.iter().map(|l| DcLine { from: l.from, to: l.to, g: l.g }).collect(),
            self.disturbances
                .iter()
                .map(|d| Disturbance {
                    bus: d.bus,
                    magnitude: d.magnitude,
                    time: d.time,
                })
                .collect(),
        )?;
        Ok(match self.meta.frequency_unit {
            FrequencyUnit::RadS => case,
            FrequencyUnit::PerUnit => case.with_per_unit_frequency(self.meta.base_frequency),
        })
    }

    /// Case file describing `case`. Frequency units are inferred from
    /// the case's angle rate.
    pub fn from_network(case: &NetworkCase, base_mva: f64, analysis: Analysis) -> Self {
        let per_unit = (case.angle_rate - 1.0).abs() > 1e-12;
        let meta = Meta {
            name: case.name.clone(),
            base_mva,
            base_frequency: if per_unit { case.hz_per_unit } else { default_base_frequency() },
            frequency_unit: if per_unit { FrequencyUnit::PerUnit } else { FrequencyUnit::RadS },
            source: None,
        };
        CaseFile {
            meta,
            analysis,
            buses: case
                .buses
                .iter()
                .map(|b| BusEntry {
                    id: b.id(),
                    kind: b.model.kind(),
                    p_load: b.p_load,
                    params: b.model.params().clone(),
                })
                .collect(),
            ac_lines: case
                .ac_lines
                .iter()
                .map(|l| AcLineEntry { from: l.from, to: l.to, b: l.b })
                .collect(),
            dc_lines: case
                .dc_lines
                .iter()
                .map(|l| DcLineEntry { from: l.from, to: l.to, g: l.g })
                .collect(),
            disturbances: case
                .disturbances
                .iter()
                .map(|d| DisturbanceEntry {
                    bus: d.bus,
                    magnitude: d.magnitude,
                    time: d.time,
                })
                .collect(),
        }
    }
}

/// A parsed case with its built network and the hash of its source text.
#[derive(Debug, Clone)]
pub struct Case {
    pub file: CaseFile,
    pub network: NetworkCase,
    pub sha256: String,
}

impl Case {
    pub fn parse(text: &str) -> Result<Self> {
        let file = CaseFile::from_toml_str(text)?;
        let network = file.build()?;
        Ok(Case {
            file,
            network,
            sha256: sha256_hex(text.as_bytes()),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Case(format!("cannot read {}: {e}", path.display())))?;
        Case::parse(&text).map_err(|e| match e {
            Error::Case(msg) => Error::Case(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
