use rand::Rng;

use crate::error::{Error, Result};

use super::modulation::modulate;
use super::{
    quantize, wrap_phase, ChannelLink, DeviceProfile, NoiseModel, PairedObservation, Receiver,
    SignalSample, SYMBOLS,
};

/// Received power `g·p` that yields `snr_db` over `noise_floor`.
pub fn snr_to_received_power(snr_db: f64, noise_floor: f64) -> Result<f64> {
    if !(noise_floor > 0.0 && noise_floor.is_finite()) {
        return Err(Error::input(format!("noise floor must be positive, got {noise_floor}")));
    }
    if !snr_db.is_finite() {
        return Err(Error::input("non-finite SNR"));
    }
    Ok(noise_floor * 10f64.powf(snr_db / 10.0))
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, bound: f64) -> f64 {
    if bound == 0.0 {
        0.0
    } else {
        rng.random_range(-bound..=bound)
    }
}

/// Pass one frame of base phases through a device and a channel.
///
/// Phase k is `wrap(base_k + φ_device + φ_link + n_φ)`, power k is
/// `max(0, g·p + n_p)`, with noise uniform within the model's bounds.
/// The returned sample is not marked as a member.
pub fn propagate<R: Rng + ?Sized>(
    base_phases: &[f64],
    device: &DeviceProfile,
    link: &ChannelLink,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<SignalSample> {
    if link.tx_id != device.id {
        return Err(Error::input(format!(
            "link from transmitter {} used for device {}",
            link.tx_id, device.id
        )));
    }
    if base_phases.len() != SYMBOLS {
        return Err(Error::input(format!(
            "expected {SYMBOLS} symbols, got {}",
            base_phases.len()
        )));
    }
    let offset = device.phase_shift_rad + link.phase_offset_rad;
    let received = link.gain * device.transmit_power;
    let mut phases = [0.0; SYMBOLS];
    let mut powers = [0.0; SYMBOLS];
    for k in 0..SYMBOLS {
        let phi = wrap_phase(base_phases[k] + offset + uniform(rng, noise.phase_bound_rad));
        phases[k] = wrap_phase(quantize(phi));
        powers[k] = quantize((received + uniform(rng, noise.power_bound)).max(0.0));
    }
    Ok(SignalSample {
        phases,
        powers,
        class_label: device.class_label(),
        tx_id: device.id,
        member: false,
        view: link.rx,
    })
}

/// One transmission observed by both receivers with independent noise.
pub fn transmit_paired<R: Rng + ?Sized>(
    device: &DeviceProfile,
    provider_link: &ChannelLink,
    adversary_link: &ChannelLink,
    bits: &[u8],
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<PairedObservation> {
    if provider_link.tx_id != device.id || adversary_link.tx_id != device.id {
        return Err(Error::input("paired links must both originate at the device"));
    }
    if provider_link.rx != Receiver::Provider || adversary_link.rx != Receiver::Adversary {
        return Err(Error::input("paired links must end at the provider and the adversary"));
    }
    let base = modulate(bits, device.modulation)?;
    Ok(PairedObservation {
        provider_view: propagate(&base, device, provider_link, noise, rng)?,
        adversary_view: propagate(&base, device, adversary_link, noise, rng)?,
    })
}
