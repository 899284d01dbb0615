use super::TrainError;

/// Number of ramp steps for a schedule of `total_steps`.
pub fn warmup_steps(total_steps: u64, warmup_fraction: f64) -> u64 {
    libm::floor(total_steps as f64 * warmup_fraction) as u64
}

/// Linear ramp from 0 to `base_lr` over the warmup steps, then linear decay
/// to 0 at `total_steps`.
pub fn lr_at(step: u64, total_steps: u64, base_lr: f64, warmup_fraction: f64) -> Result<f64, TrainError> {
    if total_steps == 0 {
        return Err(TrainError::Contract("lr schedule over zero steps".into()));
    }
    if step > total_steps {
        return Err(TrainError::Contract(alloc::format!("step {step} past the end of a {total_steps}-step schedule")));
    }
    if !(0.0..1.0).contains(&warmup_fraction) {
        return Err(TrainError::Config(alloc::format!("warmup fraction {warmup_fraction} outside [0, 1)")));
    }
    let warm = warmup_steps(total_steps, warmup_fraction);
    Ok(if step < warm {
        base_lr * step as f64 / warm as f64
    } else {
        base_lr * (total_steps - step) as f64 / (total_steps - warm) as f64
    })
}
