//! Lossy, delayed link simulation.
//!
//! Every directed edge of the topology gets its own channel with a transit
//! buffer (fixed integer delay in control ticks), Bernoulli packet drop with
//! hold-last-sample semantics, and additive Gaussian noise applied when the
//! sample is emitted, so delay and drop act on the noisy measurement.
//!
//! Randomness comes from one master generator: each link owns the substream
//! indexed `receiver * n + sender`, and every tick consumes exactly m normal
//! draws plus one uniform draw per link whether or not noise or drops are
//! enabled. Trajectories therefore stay aligned across parameter changes and
//! are bitwise reproducible for a fixed seed.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::{cast, Scalar};

use super::scenario::Scenario;

struct Channel<T> {
    /// Robot whose state travels over this link.
    from: usize,
    /// Listening robot.
    to: usize,
    weight: T,
    drop_probability: f64,
    noise_std: T,
    rng: ChaCha8Rng,
    /// Samples in flight, oldest first; holds exactly `delay` entries
    /// between ticks.
    in_transit: VecDeque<Vec<T>>,
    /// Most recent successfully delivered sample.
    delivered: Vec<T>,
}

/// All channels of one simulation run plus the per-robot neighbor estimates
/// they produce.
pub(crate) struct Network<T> {
    channels: Vec<Channel<T>>,
    /// `estimates[i]` lists `(weight, latest estimate of x_j)` for every
    /// robot j that robot i listens to.
    estimates: Vec<Vec<(T, Vec<T>)>>,
    m: usize,
}

impl<T: Scalar> Network<T> {
    /// Builds one channel per directed edge. Transit buffers and the
    /// hold-last state start from the sender's initial position: early
    /// deliveries fall back to the initial configuration, which receivers
    /// are assumed to know.
    pub(crate) fn new(scenario: &Scenario<T>) -> Self {
        let n = scenario.n();
        let m = scenario.m();
        let master = ChaCha8Rng::seed_from_u64(scenario.seed);
        let mut channels = Vec::new();
        for to in 0..n {
            for from in 0..n {
                let weight = scenario.topology.adjacency()[(to, from)];
                if weight <= T::zero() {
                    continue;
                }
                let delay = scenario.network.delay_periods.get(to, from) as usize;
                let drop_probability = scenario
                    .network
                    .drop_probability
                    .get(to, from)
                    .to_f64()
                    .unwrap_or(0.0);
                let mut rng = master.clone();
                rng.set_stream((to * n + from) as u64);
                let x0_from = scenario.x0[from].clone();
                channels.push(Channel {
                    from,
                    to,
                    weight,
                    drop_probability,
                    noise_std: scenario.network.sensor_noise_std,
                    rng,
                    in_transit: VecDeque::from(vec![x0_from.clone(); delay]),
                    delivered: x0_from,
                });
            }
        }
        Self {
            channels,
            estimates: vec![Vec::new(); n],
            m,
        }
    }

    /// Runs one control tick: every link emits the sender's current state
    /// (noised), moves its buffer forward and resolves its drop draw. Links
    /// are visited in a fixed order, so draw consumption is deterministic.
    /// Returns the refreshed estimate lists indexed by listening robot.
    pub(crate) fn tick(&mut self, x: &[T]) -> &[Vec<(T, Vec<T>)>] {
        let m = self.m;
        for channel in &mut self.channels {
            let sender = &x[channel.from * m..(channel.from + 1) * m];
            let emitted: Vec<T> = sender
                .iter()
                .map(|&v| {
                    let z: f64 = StandardNormal.sample(&mut channel.rng);
                    v + channel.noise_std * cast::<T>(z)
                })
                .collect();
            channel.in_transit.push_back(emitted);
            let arriving = channel
                .in_transit
                .pop_front()
                .expect("buffer holds at least the sample just pushed");
            let dropped = channel.rng.random::<f64>() < channel.drop_probability;
            if !dropped {
                channel.delivered = arriving;
            }
        }
        for list in &mut self.estimates {
            list.clear();
        }
        for channel in &self.channels {
            self.estimates[channel.to].push((channel.weight, channel.delivered.clone()));
        }
        &self.estimates
    }
}
