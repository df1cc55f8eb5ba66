//! The discrete motion-primitive action set.

use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const SPEEDS: [f64; 4] = [0.0, 0.67, 1.33, 2.0];
pub const TURN_RATES: [f64; 3] = [-FRAC_PI_4, 0.0, FRAC_PI_4];
pub const N_ACTIONS: usize = SPEEDS.len() * TURN_RATES.len();

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionPrimitive {
    /// m/s
    pub linear_speed: f64,
    /// rad/s
    pub turn_rate: f64,
}

impl ActionPrimitive {
    /// Speed-major, turn-minor enumeration.
    pub fn from_index(i: usize) -> Result<Self> {
        if i >= N_ACTIONS {
            return Err(Error::InvalidArgument(format!(
                "action index {i} outside [0, {N_ACTIONS})"
            )));
        }
        Ok(Self {
            linear_speed: SPEEDS[i / TURN_RATES.len()],
            turn_rate: TURN_RATES[i % TURN_RATES.len()],
        })
    }

    /// Inverse of [`ActionPrimitive::from_index`]; `None` for values outside the set.
    pub fn index(&self) -> Option<usize> {
        let s = SPEEDS.iter().position(|&v| v == self.linear_speed)?;
        let t = TURN_RATES.iter().position(|&w| w == self.turn_rate)?;
        Some(s * TURN_RATES.len() + t)
    }
}
