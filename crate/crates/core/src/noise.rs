//! Wiener increments, Poisson jump events and the small-jump compensator.
//!
//! Randomness is counter based: a path's key is derived from
//! `(seed, path_index)` and each step reads its own ChaCha stream, so every
//! draw is a pure function of `(seed, path_index, step_index)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScnsError};
use crate::grid::VectorField;

/// One atom `(‖z‖, λ)` of the jump intensity measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub z: f64,
    pub rate: f64,
}

/// Finite atomic intensity measure split at `‖z‖ = 1`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JumpSpec {
    small: Vec<Atom>,
    large: Vec<Atom>,
}

impl JumpSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(small: Vec<Atom>, large: Vec<Atom>) -> Result<Self> {
        for a in small.iter().chain(&large) {
            if !(a.rate > 0.0 && a.rate.is_finite()) {
                return Err(ScnsError::ConfigInvalid(format!("jump rate must be positive and finite, got {}", a.rate)));
            }
        }
        if let Some(a) = small.iter().find(|a| !(a.z > 0.0 && a.z < 1.0)) {
            return Err(ScnsError::MarkOutOfRegion { z: a.z, region: "small (0<z<1)" });
        }
        if let Some(a) = large.iter().find(|a| !(a.z >= 1.0 && a.z.is_finite())) {
            return Err(ScnsError::MarkOutOfRegion { z: a.z, region: "large (z>=1)" });
        }
        Ok(Self { small, large })
    }

    pub fn small(&self) -> &[Atom] {
        &self.small
    }

    pub fn large(&self) -> &[Atom] {
        &self.large
    }

    pub fn is_empty(&self) -> bool {
        self.small.is_empty() && self.large.is_empty()
    }

    /// `Σ λ_k z_k` over the small atoms.
    pub fn small_drift_rate(&self) -> f64 {
        self.small.iter().map(|a| a.rate * a.z).sum()
    }

    /// `μ(Z∖Z₀)`.
    pub fn large_rate(&self) -> f64 {
        self.large.iter().map(|a| a.rate).sum()
    }
}

/// `−(Σ λ_k z_k) u`.
pub fn small_jump_compensator(spec: &JumpSpec, u: &VectorField) -> VectorField {
    u.scaled(-spec.small_drift_rate())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum JumpClass {
    Small,
    Large,
}

/// A jump at absolute time `time` with mark norm `z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub z: f64,
}

/// Everything random consumed by one step on `[t0, t0 + dt)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseDraw {
    pub step: u64,
    pub t0: f64,
    pub dt: f64,
    pub dw: Vec<f64>,
    pub small: Vec<JumpEvent>,
    pub large: Vec<JumpEvent>,
}

impl NoiseDraw {
    /// A draw with no randomness at all.
    pub fn quiet(step: u64, t0: f64, dt: f64, modes: usize) -> Self {
        Self {
            step,
            t0,
            dt,
            dw: vec![0.0; modes],
            small: Vec::new(),
            large: Vec::new(),
        }
    }

    /// Small and large events merged in time order.
    pub fn events(&self) -> Vec<(JumpClass, JumpEvent)> {
        let mut all: Vec<(JumpClass, JumpEvent)> = self
            .small
            .iter()
            .map(|e| (JumpClass::Small, *e))
            .chain(self.large.iter().map(|e| (JumpClass::Large, *e)))
            .collect();
        all.sort_by(|a, b| a.1.time.total_cmp(&b.1.time));
        all
    }
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-path random stream; `counter` is the next step index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    path: u64,
    counter: u64,
    key: [u8; 32],
}

impl RngStream {
    pub fn new(seed: u64, path: u64) -> Self {
        let mut state = seed ^ path.wrapping_mul(0xD1B5_4A32_D192_ED03);
        let mut key = [0u8; 32];
        // mix the path twice so (seed, path) and (path, seed) do not collide
        let _ = splitmix(&mut state);
        state ^= path.rotate_left(17);
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix(&mut state).to_le_bytes());
        }
        Self {
            seed,
            path,
            counter: 0,
            key,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> u64 {
        self.path
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Generator for an arbitrary step; does not touch the counter.
    pub fn for_step(&self, step: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(step);
        rng
    }

    /// Generator for the current step, advancing the counter.
    pub fn next_step(&mut self) -> (u64, ChaCha8Rng) {
        let step = self.counter;
        self.counter += 1;
        (step, self.for_step(step))
    }
}

/// `K` independent `N(0, dt)` increments.
pub fn sample_wiener<R: Rng>(k: usize, dt: f64, rng: &mut R) -> Vec<f64> {
    let sd = dt.sqrt();
    (0..k)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * sd
        })
        .collect()
}

fn sample_atoms<R: Rng>(atoms: &[Atom], t0: f64, dt: f64, rng: &mut R) -> Vec<JumpEvent> {
    let mut events = Vec::new();
    for a in atoms {
        let mean = a.rate * dt;
        let count = if mean > 0.0 {
            Poisson::new(mean).expect("positive finite mean").sample(rng) as usize
        } else {
            0
        };
        for _ in 0..count {
            let u: f64 = rng.random();
            events.push(JumpEvent { time: t0 + u * dt, z: a.z });
        }
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    events
}

/// Poisson counts per atom with uniform event times in `[t0, t0 + dt)`.
pub fn sample_jumps<R: Rng>(t0: f64, dt: f64, spec: &JumpSpec, rng: &mut R) -> (Vec<JumpEvent>, Vec<JumpEvent>) {
    let small = sample_atoms(&spec.small, t0, dt, rng);
    let large = sample_atoms(&spec.large, t0, dt, rng);
    (small, large)
}

/// Produces the draw for each step in a fixed order: Wiener increments,
/// then small atoms, then large atoms.
#[derive(Clone, Debug)]
pub struct NoiseSampler {
    modes: usize,
    jumps: JumpSpec,
    enabled: bool,
}

impl NoiseSampler {
    pub fn new(modes: usize, jumps: JumpSpec, enabled: bool) -> Self {
        Self { modes, jumps, enabled }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn draw(&self, stream: &RngStream, step: u64, t0: f64, dt: f64) -> NoiseDraw {
        if !self.enabled {
            return NoiseDraw::quiet(step, t0, dt, self.modes);
        }
        let mut rng = stream.for_step(step);
        let dw = sample_wiener(self.modes, dt, &mut rng);
        let (small, large) = sample_jumps(t0, dt, &self.jumps, &mut rng);
        NoiseDraw {
            step,
            t0,
            dt,
            dw,
            small,
            large,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BoundarySpec, Grid};

    #[test]
    fn compensator_examples() {
        let g = Grid::build(2, &[1.0, 1.0], &[4, 4], BoundarySpec::periodic()).unwrap();
        let u = VectorField::from_fn(&g, |x| [x[0], 1.0, 0.0]);
        assert_eq!(small_jump_compensator(&JumpSpec::none(), &u).max_abs(), 0.0);
        let one = JumpSpec::new(vec![Atom { z: 0.5, rate: 2.0 }], vec![]).unwrap();
        assert_eq!(small_jump_compensator(&one, &u), u.scaled(-1.0));
        let two = JumpSpec::new(vec![Atom { z: 0.25, rate: 4.0 }, Atom { z: 0.5, rate: 2.0 }], vec![]).unwrap();
        assert_eq!(small_jump_compensator(&two, &u), u.scaled(-2.0));
    }

    #[test]
    fn marks_are_partitioned() {
        assert!(matches!(
            JumpSpec::new(vec![Atom { z: 1.5, rate: 1.0 }], vec![]),
            Err(ScnsError::MarkOutOfRegion { .. })
        ));
        assert!(matches!(
            JumpSpec::new(vec![], vec![Atom { z: 0.5, rate: 1.0 }]),
            Err(ScnsError::MarkOutOfRegion { .. })
        ));
    }

    #[test]
    fn draws_are_reproducible() {
        let spec = JumpSpec::new(vec![Atom { z: 0.3, rate: 50.0 }], vec![Atom { z: 2.0, rate: 20.0 }]).unwrap();
        let sampler = NoiseSampler::new(8, spec, true);
        let a = sampler.draw(&RngStream::new(7, 3), 11, 0.5, 0.1);
        let b = sampler.draw(&RngStream::new(7, 3), 11, 0.5, 0.1);
        let c = sampler.draw(&RngStream::new(7, 4), 11, 0.5, 0.1);
        assert_eq!(a, b);
        assert_ne!(a.dw, c.dw);
        assert!(a.events().windows(2).all(|w| w[0].1.time <= w[1].1.time));
        assert!(a.events().iter().all(|e| e.1.time >= 0.5 && e.1.time < 0.6));
    }

    #[test]
    fn no_atoms_no_events() {
        let sampler = NoiseSampler::new(2, JumpSpec::none(), true);
        let s = RngStream::new(1, 0);
        for step in 0..50 {
            let d = sampler.draw(&s, step, 0.0, 1.0);
            assert!(d.small.is_empty() && d.large.is_empty());
        }
    }
}
