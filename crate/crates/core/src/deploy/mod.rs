//! Destroy operators driven by a trained policy.

use std::collections::BTreeSet;

use rand::seq::index::sample_weighted;
use rand::Rng;

use crate::destroy::{vehicle_columns, vehicles_for_degree};
use crate::features::featurize_values;
use crate::lns::{DestroyOperator, LnsContext, LnsRng};
use crate::nn::{policy_forward, NnError, PolicyParams};
use crate::solution::VehicleKey;

/// Give up on drawing a non-empty Bernoulli subset after this many tries.
pub const MAX_RESAMPLE: usize = 100;

/// Draws `count` of `pool` without replacement, each draw proportional to
/// `exp(p / temperature)` among the remaining items.
fn softmax_sample(p: &[f64], pool: &[usize], count: usize, temperature: f64, rng: &mut LnsRng) -> Vec<usize> {
    let count = count.min(pool.len());
    if count == pool.len() {
        return pool.to_vec();
    }
    // shift by the max so large logits cannot overflow
    let top = pool.iter().map(|&i| p[i] / temperature).fold(f64::NEG_INFINITY, f64::max);
    let picked = sample_weighted(rng, pool.len(), |i| ((p[pool[i]] / temperature) - top).exp(), count)
        .expect("softmax weights are positive and finite");
    picked.into_iter().map(|i| pool[i]).collect()
}

/// Fixed-size draw: `vehicles_for_degree(degree)` vehicles by softmax over
/// the probabilities themselves.
pub fn il_sample(p: &[f64], vehicles: &[VehicleKey], degree: f64, rng: &mut LnsRng) -> BTreeSet<VehicleKey> {
    il_sample_tempered(p, vehicles, degree, 1.0, rng)
}

pub fn il_sample_tempered(
    p: &[f64],
    vehicles: &[VehicleKey],
    degree: f64,
    temperature: f64,
    rng: &mut LnsRng,
) -> BTreeSet<VehicleKey> {
    let pool: Vec<usize> = (0..vehicles.len()).collect();
    let count = vehicles_for_degree(vehicles.len(), degree);
    softmax_sample(p, &pool, count, temperature, rng).into_iter().map(|i| vehicles[i]).collect()
}

/// Each vehicle independently with its own probability. An empty draw is
/// retried up to [`MAX_RESAMPLE`] times, then the most likely vehicle alone
/// is returned.
pub fn il_sample_a(p: &[f64], vehicles: &[VehicleKey], rng: &mut LnsRng) -> BTreeSet<VehicleKey> {
    for _ in 0..MAX_RESAMPLE {
        let picked: BTreeSet<VehicleKey> = vehicles
            .iter()
            .zip(p)
            .filter(|&(_, &q)| rng.random_bool(q.clamp(0.0, 1.0)))
            .map(|(&k, _)| k)
            .collect();
        if !picked.is_empty() {
            return picked;
        }
    }
    let best = (0..vehicles.len()).fold(None, |best: Option<usize>, i| match best {
        Some(b) if p[b] >= p[i] => Some(b),
        _ => Some(i),
    });
    best.map(|i| vehicles[i]).into_iter().collect()
}

/// [`il_sample`] over the vehicles not in `previous`. The pool size caps the
/// count; an empty pool falls back to every vehicle.
pub fn il_sample_d(
    p: &[f64],
    vehicles: &[VehicleKey],
    degree: f64,
    previous: &BTreeSet<VehicleKey>,
    temperature: f64,
    rng: &mut LnsRng,
) -> BTreeSet<VehicleKey> {
    let mut pool: Vec<usize> = (0..vehicles.len()).filter(|&i| !previous.contains(&vehicles[i])).collect();
    if pool.is_empty() {
        pool = (0..vehicles.len()).collect();
    }
    let count = vehicles_for_degree(vehicles.len(), degree);
    softmax_sample(p, &pool, count, temperature, rng).into_iter().map(|i| vehicles[i]).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Deployment {
    Sample,
    SampleA,
    SampleD,
}

impl Deployment {
    pub fn name(self) -> &'static str {
        match self {
            Deployment::Sample => "IL-sample",
            Deployment::SampleA => "IL-sampleA",
            Deployment::SampleD => "IL-sampleD",
        }
    }
}

/// A trained policy as a destroy operator.
#[derive(Clone, Debug)]
pub struct PolicyDestroy {
    params: PolicyParams,
    pub deployment: Deployment,
    pub temperature: f64,
    previous: BTreeSet<VehicleKey>,
}

impl PolicyDestroy {
    pub fn new(params: PolicyParams, deployment: Deployment) -> Result<Self, NnError> {
        let expected = [crate::features::CONSTRAINT_DIM, crate::features::VARIABLE_DIM, crate::features::VEHICLE_DIM];
        if params.raw_dims() != expected {
            return Err(NnError::Incompatible { expected, found: params.raw_dims() });
        }
        Ok(Self { params, deployment, temperature: 1.0, previous: BTreeSet::new() })
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn params(&self) -> &PolicyParams {
        &self.params
    }

    /// Vehicle probabilities for the context's state.
    pub fn probabilities(&self, ctx: &LnsContext<'_>) -> (Vec<VehicleKey>, Vec<f64>) {
        let state = featurize_values(ctx.instance, ctx.model, ctx.current, ctx.current_values, ctx.incumbent_values);
        let p = policy_forward(&self.params, &state).expect("raw dims checked at construction");
        (state.vehicles, p)
    }

    pub fn select_vehicles(&mut self, ctx: &LnsContext<'_>, degree: f64, rng: &mut LnsRng) -> BTreeSet<VehicleKey> {
        let (vehicles, p) = self.probabilities(ctx);
        let picked = match self.deployment {
            Deployment::Sample => il_sample_tempered(&p, &vehicles, degree, self.temperature, rng),
            Deployment::SampleA => il_sample_a(&p, &vehicles, rng),
            Deployment::SampleD => il_sample_d(&p, &vehicles, degree, &self.previous, self.temperature, rng),
        };
        self.previous = picked.clone();
        picked
    }
}

impl DestroyOperator for PolicyDestroy {
    fn select(&mut self, ctx: &LnsContext<'_>, degree: f64, rng: &mut LnsRng) -> BTreeSet<usize> {
        let keys = self.select_vehicles(ctx, degree, rng);
        vehicle_columns(&ctx.model.vars, keys)
    }

    fn name(&self) -> &str {
        self.deployment.name()
    }
}
