use super::{ServoError, ServoSpec};

/// Linear map of `[0, angle_range]` onto `[min_pulse, max_pulse]` (µs).
pub fn angle_to_pulse(angle: f64, spec: &ServoSpec) -> Result<f64, ServoError> {
    if !(0.0..=spec.angle_range).contains(&angle) {
        return Err(ServoError::AngleOutOfRange {
            angle,
            range: spec.angle_range,
        });
    }
    Ok(spec.min_pulse + (angle / spec.angle_range) * (spec.max_pulse - spec.min_pulse))
}

/// Inverse of [`angle_to_pulse`].
pub fn pulse_to_angle(pulse: f64, spec: &ServoSpec) -> Result<f64, ServoError> {
    if !(spec.min_pulse..=spec.max_pulse).contains(&pulse) {
        return Err(ServoError::PulseOutOfRange {
            channel: spec.channel,
            pulse,
            min: spec.min_pulse,
            max: spec.max_pulse,
        });
    }
    Ok((pulse - spec.min_pulse) / (spec.max_pulse - spec.min_pulse) * spec.angle_range)
}

/// Fraction of one PWM period the line is held high.
pub fn pulse_to_duty(pulse: f64, frequency_hz: f64) -> Result<f64, ServoError> {
    let period = 1e6 / frequency_hz;
    if !(0.0..=period).contains(&pulse) {
        return Err(ServoError::PulseExceedsPeriod { pulse, period });
    }
    Ok(pulse / period)
}
