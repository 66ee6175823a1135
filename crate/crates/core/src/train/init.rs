//! Parameter initialization schemes.
//!
//! The workhorse is the scaled-fan scheme `std = gain * 3 / sqrt(fan_in +
//! fan_out)` used by the link-prediction models, next to classical Glorot
//! uniform (node classification, gain sqrt(2) for ReLU), Kaiming normal
//! (learned node embeddings) and the standard normal (DistMult relation
//! vectors).

use crate::error::{Result, RgcnError};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Which distribution an initializer draws from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitKind {
    GlorotUniform { gain: f64 },
    Kaiming { gain: f64 },
    SchlichtkrullNormal { gain: f64 },
    SchlichtkrullUniform { gain: f64 },
    StandardNormal,
}

impl InitKind {
    pub fn parse(name: &str, gain: f64) -> Result<InitKind> {
        match name {
            "glorot-uniform" => Ok(InitKind::GlorotUniform { gain }),
            "kaiming" => Ok(InitKind::Kaiming { gain }),
            "schlichtkrull-normal" => Ok(InitKind::SchlichtkrullNormal { gain }),
            "schlichtkrull-uniform" => Ok(InitKind::SchlichtkrullUniform { gain }),
            "standard-normal" => Ok(InitKind::StandardNormal),
            other => Err(RgcnError::Config(format!("unknown initializer '{other}'"))),
        }
    }
}

fn check_fans(fan_in: usize, fan_out: usize) -> Result<()> {
    if fan_in == 0 || fan_out == 0 {
        return Err(RgcnError::Argument(format!(
            "initializer fans must be positive, got ({fan_in}, {fan_out})"
        )));
    }
    Ok(())
}

/// `gain * 3 / sqrt(fan_in + fan_out)`.
pub fn scaled_fan_std(fan_in: usize, fan_out: usize, gain: f64) -> Result<f64> {
    check_fans(fan_in, fan_out)?;
    Ok(gain * 3.0 / ((fan_in + fan_out) as f64).sqrt())
}

/// Draws `len` values with the scaled-fan std; the `uniform` kind uses
/// `U(-a, a)` with `a = std * sqrt(3)` so the sample std matches the
/// normal kind.
pub fn schlichtkrull_init(
    len: usize,
    fan_in: usize,
    fan_out: usize,
    gain: f64,
    uniform: bool,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    let std = scaled_fan_std(fan_in, fan_out, gain)?;
    if uniform {
        let a = std * 3.0_f64.sqrt();
        Ok((0..len).map(|_| rng.random_range(-a..a)).collect())
    } else {
        Ok((0..len)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z * std
            })
            .collect())
    }
}

/// Classical Glorot uniform with bound `gain * sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(
    len: usize,
    fan_in: usize,
    fan_out: usize,
    gain: f64,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    check_fans(fan_in, fan_out)?;
    let bound = gain * (6.0 / (fan_in + fan_out) as f64).sqrt();
    Ok((0..len).map(|_| rng.random_range(-bound..bound)).collect())
}

/// Kaiming (He) normal over fan-in: `std = gain * sqrt(2 / fan_in)`.
pub fn kaiming_normal(
    len: usize,
    fan_in: usize,
    gain: f64,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    check_fans(fan_in, 1)?;
    let std = gain * (2.0 / fan_in as f64).sqrt();
    Ok((0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * std
        })
        .collect())
}

pub fn standard_normal(len: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// Dispatches on [`InitKind`] with explicit fans.
pub fn init_values(
    kind: InitKind,
    len: usize,
    fan_in: usize,
    fan_out: usize,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    match kind {
        InitKind::GlorotUniform { gain } => glorot_uniform(len, fan_in, fan_out, gain, rng),
        InitKind::Kaiming { gain } => kaiming_normal(len, fan_in, gain, rng),
        InitKind::SchlichtkrullNormal { gain } => {
            schlichtkrull_init(len, fan_in, fan_out, gain, false, rng)
        }
        InitKind::SchlichtkrullUniform { gain } => {
            schlichtkrull_init(len, fan_in, fan_out, gain, true, rng)
        }
        InitKind::StandardNormal => Ok(standard_normal(len, rng)),
    }
}
