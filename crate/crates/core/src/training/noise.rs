use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Independent `N(0, σ²)` draws for both action components.
pub fn exploration_noise<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> [f64; 2] {
    let a: f64 = StandardNormal.sample(rng);
    let b: f64 = StandardNormal.sample(rng);
    [sigma * a, sigma * b]
}

/// Per-episode geometric decay with a floor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSchedule {
    pub sigma: f64,
    pub decay: f64,
    pub floor: f64,
}

impl NoiseSchedule {
    pub fn new(sigma0: f64, decay: f64, floor: f64) -> Self {
        NoiseSchedule { sigma: sigma0, decay, floor }
    }

    pub fn end_episode(&mut self) {
        self.sigma = (self.sigma * self.decay).max(self.floor);
    }
}
