//! Monte Carlo simulation of the reserve under a barrier strategy.
//!
//! Euler–Maruyama with coefficients frozen at the left end of each step.
//! After an increment the path is first checked for ruin (`R <= 0`), then
//! projected back onto the barrier, the overshoot being paid as a dividend
//! discounted at the step's left end. Path `i` draws from a xoshiro256++
//! generator seeded once and advanced by `i` jumps of `2^128` draws, so every
//! path owns a disjoint substream and estimates do not depend on how many
//! worker threads run them.

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use crate::closed_form::ClosedForm;
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// Paths whose streams are prepared before a parallel batch runs.
const STREAM_CHUNK: usize = 4096;

/// Nodes of the interior-retention lookup table.
const TABLE_NODES: usize = 4096;

/// Which control the simulated company uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimMode {
    /// Optimal retention `U*(R)`.
    Optimal,
    /// `U*(R)` with the noise switched off. Diagnostic.
    ZeroVolatility,
    /// A fixed retention level in `[l, 1]`. Diagnostic.
    ConstantRetention(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub x0: f64,
    pub b: f64,
    pub horizon: f64,
    /// Euler step.
    pub h: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub mode: SimMode,
}

impl SimConfig {
    pub fn new(x0: f64, b: f64, horizon: f64, h: f64, n_paths: usize, seed: u64) -> Result<Self> {
        let cfg = SimConfig {
            x0,
            b,
            horizon,
            h,
            n_paths,
            seed,
            mode: SimMode::Optimal,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_mode(mut self, mode: SimMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, value, reason| Err(Error::InvalidInput { name, value, reason });
        if !(self.b > 0.0 && self.b.is_finite()) {
            return bad("b", self.b, "barrier must be positive");
        }
        if !(self.x0 >= 0.0 && self.x0.is_finite()) {
            return bad("x0", self.x0, "initial reserve must be nonnegative");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("T", self.horizon, "horizon must be positive");
        }
        if !(self.h > 0.0 && self.h <= self.horizon / 100.0) {
            return bad("h", self.h, "step must lie in (0, T/100]");
        }
        if self.n_paths == 0 {
            return bad("n_paths", 0.0, "need at least one path");
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        (self.horizon / self.h).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathResult {
    pub ruined: bool,
    /// Ruin time, linearly interpolated inside the crossing step.
    pub tau: Option<f64>,
    /// Realised `int_0^{tau ^ T} e^{-cs} dL_s`.
    pub discounted_dividends: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub ruin_prob: f64,
    pub ruin_se: f64,
    pub value: f64,
    pub value_se: f64,
    pub n_paths: usize,
    pub h: f64,
    /// `e^{-cT} g(b, b)`: bound on the discounted value left after the
    /// horizon, when the barrier admits the closed form (`b >= x2`).
    pub truncation_bound: Option<f64>,
}

/// Piecewise cubic Hermite table of `eta` on `[x1, x2]` with exact slopes.
#[derive(Debug, Clone)]
struct RetentionTable {
    x1: f64,
    x2: f64,
    l: f64,
    inv_dx: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl RetentionTable {
    fn new(model: &ClosedForm) -> Self {
        let c = model.coeffs();
        let (x1, x2) = (c.x1, c.x2);
        let n = TABLE_NODES;
        let dx = (x2 - x1) / (n - 1) as f64;
        let mut values = Vec::with_capacity(n);
        let mut slopes = Vec::with_capacity(n);
        for i in 0..n {
            let u = if i == 0 {
                model.params().l()
            } else if i + 1 == n {
                1.0
            } else {
                model.eta_unchecked(x1 + i as f64 * dx)
            };
            values.push(u);
            slopes.push(model.eta_slope(u) * dx);
        }
        RetentionTable {
            x1,
            x2,
            l: model.params().l(),
            inv_dx: if dx > 0.0 { 1.0 / dx } else { 0.0 },
            values,
            slopes,
        }
    }

    #[inline]
    fn get(&self, x: f64) -> f64 {
        if x <= self.x1 {
            return self.l;
        }
        if x >= self.x2 {
            return 1.0;
        }
        let s = (x - self.x1) * self.inv_dx;
        let i = (s as usize).min(self.values.len() - 2);
        let t = s - i as f64;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i], self.slopes[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1
    }
}

/// Path simulator bound to one parameter set.
#[derive(Debug, Clone)]
pub struct Simulator {
    model: ClosedForm,
    table: RetentionTable,
}

impl Simulator {
    pub fn new(model: ClosedForm) -> Self {
        let table = RetentionTable::new(&model);
        Simulator { model, table }
    }

    pub fn model(&self) -> &ClosedForm {
        &self.model
    }

    /// Tabulated `U*(x)`; agrees with [`ClosedForm::retention`] to about 1e-12.
    #[inline]
    pub fn retention(&self, x: f64) -> f64 {
        self.table.get(x)
    }

    /// The random stream of path `index` under `seed`: the seeded generator
    /// advanced by `index` jumps of `2^128` draws. Costs `O(index)`.
    pub fn path_rng(seed: u64, index: u64) -> Xoshiro256PlusPlus {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        for _ in 0..index {
            rng.jump();
        }
        rng
    }

    pub fn simulate_path<R: Rng + ?Sized>(&self, cfg: &SimConfig, rng: &mut R) -> PathResult {
        self.simulate_path_observed(cfg, rng, |_, _| {})
    }

    /// As [`Simulator::simulate_path`], calling `observe(t, R_t)` after every step.
    pub fn simulate_path_observed<R: Rng + ?Sized, O: FnMut(f64, f64)>(
        &self,
        cfg: &SimConfig,
        rng: &mut R,
        mut observe: O,
    ) -> PathResult {
        let p = self.model.params();
        let h = cfg.h;
        let b = cfg.b;
        // a reserve above the barrier is paid out at time 0
        let lump = (cfg.x0 - b).max(0.0);
        let mut r = cfg.x0.min(b);
        if r <= 0.0 {
            return PathResult {
                ruined: true,
                tau: Some(0.0),
                discounted_dividends: 0.0,
            };
        }
        let sigma = match cfg.mode {
            SimMode::ZeroVolatility => 0.0,
            _ => p.sigma(),
        };
        let sqrt_h = h.sqrt();
        let decay = (-p.c() * h).exp();
        let mut discount = 1.0;
        let mut dividends = lump;
        let steps = cfg.steps();
        for k in 0..steps {
            let u = match cfg.mode {
                SimMode::ConstantRetention(u) => u,
                _ => self.table.get(r),
            };
            let z: f64 = if sigma > 0.0 {
                StandardNormal.sample(rng)
            } else {
                0.0
            };
            let next = r + p.drift(u) * h + sigma * u * sqrt_h * z;
            if next <= 0.0 {
                let tau = (k as f64 + r / (r - next)) * h;
                observe(tau, 0.0);
                return PathResult {
                    ruined: true,
                    tau: Some(tau),
                    discounted_dividends: dividends,
                };
            }
            if next > b {
                dividends += discount * (next - b);
                r = b;
            } else {
                r = next;
            }
            discount *= decay;
            observe((k + 1) as f64 * h, r);
        }
        PathResult {
            ruined: false,
            tau: None,
            discounted_dividends: dividends,
        }
    }

    /// Runs `cfg.n_paths` paths and averages.
    pub fn estimate(&self, cfg: &SimConfig) -> Result<McEstimate> {
        cfg.validate()?;
        if let SimMode::ConstantRetention(u) = cfg.mode {
            let l = self.model.params().l();
            if !(u >= l && u <= 1.0) {
                return Err(Error::InvalidInput {
                    name: "retention",
                    value: u,
                    reason: "constant retention must lie in [l, 1]",
                });
            }
        }
        // streams are handed out sequentially, chunk by chunk, so path i
        // always gets path_rng(seed, i) whatever the thread count
        let mut cursor = Xoshiro256PlusPlus::seed_from_u64(cfg.seed);
        let mut results: Vec<PathResult> = Vec::with_capacity(cfg.n_paths);
        let mut remaining = cfg.n_paths;
        while remaining > 0 {
            let len = remaining.min(STREAM_CHUNK);
            let rngs: Vec<Xoshiro256PlusPlus> = (0..len)
                .map(|_| {
                    let rng = cursor.clone();
                    cursor.jump();
                    rng
                })
                .collect();
            results.par_extend(
                rngs.into_par_iter()
                    .with_min_len(64)
                    .map(|mut rng| self.simulate_path(cfg, &mut rng)),
            );
            remaining -= len;
        }

        let n = results.len() as f64;
        let mut ruined = CompensatedSum::default();
        let mut value = CompensatedSum::default();
        for r in &results {
            ruined.add(if r.ruined { 1.0 } else { 0.0 });
            value.add(r.discounted_dividends);
        }
        let ruin_prob = ruined.value() / n;
        let mean = value.value() / n;
        let mut ss_ruin = CompensatedSum::default();
        let mut ss_value = CompensatedSum::default();
        for r in &results {
            let d = if r.ruined { 1.0 } else { 0.0 } - ruin_prob;
            ss_ruin.add(d * d);
            let d = r.discounted_dividends - mean;
            ss_value.add(d * d);
        }
        let se = |ss: f64| {
            if results.len() > 1 {
                (ss / (n - 1.0)).sqrt() / n.sqrt()
            } else {
                0.0
            }
        };
        let truncation_bound = self.model.value_coeffs(cfg.b).ok().map(|vc| {
            (-self.model.params().c() * cfg.horizon).exp() * vc.value(cfg.b)
        });
        Ok(McEstimate {
            ruin_prob,
            ruin_se: se(ss_ruin.value()),
            value: mean,
            value_se: se(ss_value.value()),
            n_paths: cfg.n_paths,
            h: cfg.h,
            truncation_bound,
        })
    }
}
