//! Signal generation: modulation, device and channel effects, bounded
//! noise, and the paired provider/adversary views of each transmission.

mod channel;
mod csv_io;
mod dataset;
mod modulation;
mod population;

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use channel::{propagate, snr_to_received_power, transmit_paired};
pub use csv_io::{csv_header, read_samples, samples_from_csv, samples_to_csv, write_samples};
pub use dataset::{generate_scenario_data, sample_transmissions, DataBundle, DatasetCounts};
pub use modulation::{modulate, random_bits};
pub use population::{ChannelDrift, Period, Population, PopulationSpec, UserLinks, UserRole};

/// Symbols per sample; each contributes one phase and one power feature.
pub const SYMBOLS: usize = 16;
/// Features per sample: phases then powers.
pub const FEATURES: usize = 2 * SYMBOLS;

/// Wrap an angle into `[0, 2π)`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Round to the 9-decimal grid used by the CSV format, so that in-memory
/// samples and exported ones are the same numbers.
pub(crate) fn quantize(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modulation {
    Bpsk,
    Qpsk,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
        }
    }
}

/// Receiving end of a link, and the view a sample was observed from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Receiver {
    Provider,
    Adversary,
}

impl Receiver {
    pub fn as_str(self) -> &'static str {
        match self {
            Receiver::Provider => "provider",
            Receiver::Adversary => "adversary",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub id: u32,
    pub phase_shift_rad: f64,
    pub transmit_power: f64,
    pub modulation: Modulation,
    pub authorized: bool,
}

impl DeviceProfile {
    pub fn new(
        id: u32,
        phase_shift_rad: f64,
        transmit_power: f64,
        modulation: Modulation,
        authorized: bool,
    ) -> Result<Self> {
        if !(transmit_power > 0.0 && transmit_power.is_finite()) {
            return Err(Error::input(format!("transmit power must be positive, got {transmit_power}")));
        }
        if !phase_shift_rad.is_finite() {
            return Err(Error::input("non-finite device phase"));
        }
        Ok(DeviceProfile {
            id,
            phase_shift_rad: wrap_phase(phase_shift_rad),
            transmit_power,
            modulation,
            authorized,
        })
    }

    /// Ground-truth class: 1 for authorized users.
    pub fn class_label(&self) -> u8 {
        u8::from(self.authorized)
    }
}

/// Static channel from one transmitter to one receiver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelLink {
    pub tx_id: u32,
    pub rx: Receiver,
    pub gain: f64,
    pub phase_offset_rad: f64,
}

impl ChannelLink {
    pub fn new(tx_id: u32, rx: Receiver, gain: f64, phase_offset_rad: f64) -> Result<Self> {
        if !(gain >= 0.0 && gain.is_finite()) {
            return Err(Error::input(format!("channel gain must be non-negative, got {gain}")));
        }
        if !phase_offset_rad.is_finite() {
            return Err(Error::input("non-finite channel phase"));
        }
        Ok(ChannelLink {
            tx_id,
            rx,
            gain,
            phase_offset_rad: wrap_phase(phase_offset_rad),
        })
    }
}

/// Uniform additive noise bounds per feature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub phase_bound_rad: f64,
    pub power_bound: f64,
    pub noise_floor: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            phase_bound_rad: 0.1,
            power_bound: 1.0,
            noise_floor: 1.0,
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel {
            phase_bound_rad: 0.0,
            power_bound: 0.0,
            noise_floor: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.phase_bound_rad >= 0.0
            && self.power_bound >= 0.0
            && self.noise_floor > 0.0
            && self.phase_bound_rad.is_finite()
            && self.power_bound.is_finite()
            && self.noise_floor.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid noise model {self:?}")))
        }
    }
}

/// One received observation of a 16-symbol transmission.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalSample {
    pub phases: [f64; SYMBOLS],
    pub powers: [f64; SYMBOLS],
    pub class_label: u8,
    pub tx_id: u32,
    pub member: bool,
    pub view: Receiver,
}

impl SignalSample {
    /// Raw features: 16 phases followed by 16 powers.
    pub fn features(&self) -> [f64; FEATURES] {
        let mut out = [0.0; FEATURES];
        out[..SYMBOLS].copy_from_slice(&self.phases);
        out[SYMBOLS..].copy_from_slice(&self.powers);
        out
    }
}

/// The provider's and the adversary's view of the same transmission.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedObservation {
    pub provider_view: SignalSample,
    pub adversary_view: SignalSample,
}
