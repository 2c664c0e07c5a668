use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Hyperreduction variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Basic EQP: separate velocity and energy rules, inverse-mass test
    /// functions.
    Beqp,
    /// Conservative EQP: one shared rule, mass-orthonormal bases with the
    /// energy unity in span.
    Ceqp,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::Beqp, Mode::Ceqp];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Beqp => "beqp",
            Mode::Ceqp => "ceqp",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "beqp" => Ok(Mode::Beqp),
            "ceqp" => Ok(Mode::Ceqp),
            other => Err(Error::Config(format!(
                "unknown mode `{other}` (expected beqp or ceqp)"
            ))),
        }
    }
}
