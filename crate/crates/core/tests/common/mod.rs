#![allow(dead_code)]

use muband::geometry::Band;
use muband::grid::{Grid, Profile};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Coefficients of `exp(a·sin(b·t + c) + d·t)`.
#[derive(Debug, Clone, Copy)]
pub struct SmoothWarp {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl SmoothWarp {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        Self {
            a: rng.gen_range(-0.3..0.3),
            b: rng.gen_range(0.5..2.0),
            c: rng.gen_range(0.0..std::f64::consts::TAU),
            d: rng.gen_range(-0.5..0.5),
        }
    }

    /// `[f, f', f'']`
    pub fn jet(&self, t: f64) -> [f64; 3] {
        let s = self.b * t + self.c;
        let p = self.a * s.sin() + self.d * t;
        let dp = self.a * self.b * s.cos() + self.d;
        let ddp = -self.a * self.b * self.b * s.sin();
        let f = p.exp();
        [f, dp * f, (ddp + dp * dp) * f]
    }

    pub fn profile(&self, grid: Grid) -> Profile {
        let w = *self;
        Profile::from_closed_form(grid, move |t| w.jet(t)).unwrap()
    }
}

/// Random smooth band: doubly warped when `n == 3 && doubly`, else single warp.
pub fn random_band(rng: &mut ChaCha8Rng, grid: Grid, n: usize, doubly: bool) -> Band {
    if n == 3 && doubly {
        let (p, q) = (SmoothWarp::random(rng), SmoothWarp::random(rng));
        Band::doubly_warped_unit(p.profile(grid), q.profile(grid)).unwrap()
    } else {
        Band::single_warp_unit(n, SmoothWarp::random(rng).profile(grid)).unwrap()
    }
}
