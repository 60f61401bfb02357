//! Probability that a single molecule released at time zero is found inside
//! a passive spherical observer at time `t` under free 3D diffusion.

use std::f64::consts::PI;

use libm::erf;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum ChannelError {
    #[error("elapsed time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("source at the observer center (d = 0); use hit_prob_sphere_center")]
    ZeroDistance,
    #[error("invalid channel parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
}

/// Result of the point-observer approximation. `clamped` is set when the raw
/// value exceeded one, which happens when the observer is too close to the
/// source for the uniform-concentration approximation to hold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitProbability {
    pub value: f64,
    pub clamped: bool,
}

fn check_positive(name: &'static str, value: f64) -> Result<(), ChannelError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ChannelError::InvalidParameter { name, value })
    }
}

fn check_time(t: f64) -> Result<(), ChannelError> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(ChannelError::NonPositiveTime(t))
    }
}

/// Uniform-concentration approximation: the observer volume times the free
/// diffusion Green's function evaluated at the observer center. SI units.
pub fn hit_prob_point_source(t: f64, d: f64, diffusion: f64, volume: f64) -> Result<HitProbability, ChannelError> {
    check_time(t)?;
    check_positive("diffusion", diffusion)?;
    check_positive("volume", volume)?;
    if !(d.is_finite() && d >= 0.0) {
        return Err(ChannelError::InvalidParameter { name: "distance", value: d });
    }
    let four_dt = 4.0 * diffusion * t;
    let raw = volume / (PI * four_dt).powf(1.5) * (-d * d / four_dt).exp();
    Ok(if raw > 1.0 {
        HitProbability { value: 1.0, clamped: true }
    } else {
        HitProbability { value: raw, clamped: false }
    })
}

/// Exact probability for a spherical observer of radius `r` whose center is
/// at distance `d > 0` from the release point. SI units.
pub fn hit_prob_sphere(t: f64, d: f64, diffusion: f64, r: f64) -> Result<f64, ChannelError> {
    check_time(t)?;
    check_positive("diffusion", diffusion)?;
    check_positive("radius", r)?;
    if d == 0.0 {
        return Err(ChannelError::ZeroDistance);
    }
    check_positive("distance", d)?;

    let four_dt = 4.0 * diffusion * t;
    if (r + d) * (r + d) <= four_dt {
        return Ok(ball_moment_series(r / four_dt.sqrt(), d / four_dt.sqrt()).clamp(0.0, 1.0));
    }
    let sqrt_dt = (diffusion * t).sqrt();
    let scale = 2.0 * sqrt_dt;
    let erf_part = 0.5 * (erf((r + d) / scale) + erf((r - d) / scale));
    let gauss_part = sqrt_dt / (d * PI.sqrt())
        * ((-(r - d) * (r - d) / four_dt).exp() - (-(r + d) * (r + d) / four_dt).exp());
    Ok((erf_part - gauss_part).clamp(0.0, 1.0))
}

/// `d -> 0` limit of [`hit_prob_sphere`]: the molecule starts at the observer
/// center.
pub fn hit_prob_sphere_center(t: f64, diffusion: f64, r: f64) -> Result<f64, ChannelError> {
    check_time(t)?;
    check_positive("diffusion", diffusion)?;
    check_positive("radius", r)?;
    let dt = diffusion * t;
    if r * r <= 4.0 * dt {
        return Ok(ball_moment_series(r / (4.0 * dt).sqrt(), 0.0).clamp(0.0, 1.0));
    }
    let p = erf(r / (2.0 * dt.sqrt())) - r / (PI * dt).sqrt() * (-r * r / (4.0 * dt)).exp();
    Ok(p.clamp(0.0, 1.0))
}

/// Same probability as the erf expression, computed as the Taylor series of
/// the Gaussian kernel integrated over the ball. `r` and `d` are scaled by
/// `sqrt(4 D t)`. The erf form cancels catastrophically once the kernel is
/// much wider than `r + d`; this series converges quickly there.
fn ball_moment_series(r: f64, d: f64) -> f64 {
    // (4 pi D t)^{-3/2} sum_n (-1)^n / n! * integral_ball |x - x0|^{2n} dx,
    // in units where 4 D t = 1.
    let mut total = 0.0;
    let mut inv_fact = 1.0;
    for n in 0..200usize {
        if n > 0 {
            inv_fact /= n as f64;
        }
        let term = ball_moment(n, r, d) * inv_fact;
        let signed = if n % 2 == 0 { term } else { -term };
        total += signed;
        if n > 2 && term < 1e-18 * total.abs() {
            break;
        }
    }
    total / PI.powf(1.5)
}

/// Integral of `|x - x0|^{2n}` over the ball of radius `r` centred at
/// distance `d` from `x0`. Every term is non-negative.
fn ball_moment(n: usize, r: f64, d: f64) -> f64 {
    let top = 2 * n + 2;
    let mut binom = 1.0;
    let mut sum = 0.0;
    for i in 1..=top {
        binom *= (top + 1 - i) as f64 / i as f64;
        if i % 2 == 1 {
            sum += binom * d.powi((top - 1 - i) as i32) * r.powi(i as i32 + 2) / (i + 2) as f64;
        }
    }
    2.0 * PI / (n + 1) as f64 * sum
}
