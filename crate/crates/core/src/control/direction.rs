use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Movement direction; the discriminant is the classifier's logit index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Flex = 0,
    Extend = 1,
    Rest = 2,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::Flex, Direction::Extend, Direction::Rest];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn sign(self) -> f64 {
        match self {
            Direction::Flex => 1.0,
            Direction::Extend => -1.0,
            Direction::Rest => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Flex => "flex",
            Direction::Extend => "extend",
            Direction::Rest => "rest",
        }
    }

    /// Direction encoded in a trial label such as `flex-high`.
    pub fn from_label(label: &str) -> Option<Self> {
        label.split(['-', '_', '/']).next().and_then(|p| p.parse().ok())
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "flex" => Ok(Direction::Flex),
            "extend" => Ok(Direction::Extend),
            "rest" => Ok(Direction::Rest),
            _ => Err(Error::InvalidArgument(format!("unknown direction {s:?}"))),
        }
    }
}
