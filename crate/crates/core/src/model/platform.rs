use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Sensor platform family. `Spotsim` nodes are capable and directly reachable;
/// `Motesim` nodes are constrained and only reachable through a GTO parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Platform {
    Spotsim,
    Motesim,
}

impl Platform {
    pub fn as_str(self) -> &'static str {
        match self {
            Platform::Spotsim => "spotsim",
            Platform::Motesim => "motesim",
        }
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Platform {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "spotsim" => Ok(Platform::Spotsim),
            "motesim" => Ok(Platform::Motesim),
            _ => Err(format!("unknown platform {s:?}")),
        }
    }
}
