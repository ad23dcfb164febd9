//! Finite-difference ruin probabilities under the barrier strategy.
//!
//! The survival probability `phi(t, y)` of the reserve reflected at `b` and
//! absorbed at zero solves
//!
//! ```text
//! phi_t = 0.5 sigma^2 U*(y)^2 phi_yy + (mu U*(y) - a U*(y)^2 - delta) phi_y
//! phi(0, y) = 1 (y > 0),   phi(t, 0) = 0,   phi_y(t, b) = 0
//! ```
//!
//! The solver marches the ruin probability `psi = 1 - phi` directly so that
//! small ruin probabilities keep their relative precision. Time stepping is
//! Crank–Nicolson with a Rannacher start (the first two steps are each taken
//! as two implicit Euler half steps) to damp the incompatible corner at the
//! origin. Advection is central; the reflecting end uses the second-order
//! one-sided difference `3 psi_N - 4 psi_{N-1} + psi_{N-2} = 0`.

use crate::closed_form::ClosedForm;
use crate::error::{Error, Result};
use crate::numeric::solve_tridiagonal;

/// At most this many time slices are kept in a [`SurvivalSolution`]
/// (plus the initial and final ones).
pub const MAX_STORED_SLICES: usize = 256;
const RANNACHER_STEPS: usize = 2;
const RANGE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeGrid {
    ny: usize,
    nt: usize,
    b: f64,
    horizon: f64,
}

impl PdeGrid {
    pub fn new(ny: usize, nt: usize, b: f64, horizon: f64) -> Result<Self> {
        if ny < 64 || nt < 64 {
            return Err(Error::InvalidGrid(format!(
                "need ny >= 64 and nt >= 64, got ny = {ny}, nt = {nt}"
            )));
        }
        if !(b > 0.0 && b.is_finite()) || !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "need b > 0 and T > 0, got b = {b}, T = {horizon}"
            )));
        }
        Ok(PdeGrid {
            ny,
            nt,
            b,
            horizon,
        })
    }

    /// Grid with `ny` cells and a time step close to the space step.
    pub fn matched(ny: usize, b: f64, horizon: f64) -> Result<Self> {
        let nt = ((horizon * ny as f64 / b).ceil() as usize).max(64);
        Self::new(ny, nt, b, horizon)
    }

    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn dy(&self) -> f64 {
        self.b / self.ny as f64
    }
    pub fn dt(&self) -> f64 {
        self.horizon / self.nt as f64
    }
}

/// Grid and root-finding controls for the constrained-barrier search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeSettings {
    /// Spatial cells on `[0, b]`.
    pub ny: usize,
    /// Time steps; `None` picks `dt` close to `dy`.
    pub nt: Option<usize>,
    /// Largest barrier the doubling search may try; `None` means `1024 b0`.
    pub b_max: Option<f64>,
    /// Target accuracy of the ruin probability at the root.
    pub psi_tol: f64,
}

impl Default for PdeSettings {
    fn default() -> Self {
        PdeSettings {
            ny: 800,
            nt: None,
            b_max: None,
            psi_tol: 1e-4,
        }
    }
}

impl PdeSettings {
    pub fn grid(&self, b: f64, horizon: f64) -> Result<PdeGrid> {
        match self.nt {
            Some(nt) => PdeGrid::new(self.ny, nt, b, horizon),
            None => PdeGrid::matched(self.ny, b, horizon),
        }
    }
}

/// Ruin probability surface on `[0, T] x [0, b]`, kept at a subset of time levels.
#[derive(Debug, Clone)]
pub struct SurvivalSolution {
    grid: PdeGrid,
    model: ClosedForm,
    times: Vec<f64>,
    /// Row-major, one row of `ny + 1` ruin probabilities per stored time.
    psi: Vec<f64>,
}

impl SurvivalSolution {
    pub fn grid(&self) -> &PdeGrid {
        &self.grid
    }

    pub fn model(&self) -> &ClosedForm {
        &self.model
    }

    /// Stored time levels, increasing, first `0` and last `T`.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let dy = self.grid.dy();
        (0..=self.grid.ny).map(move |i| i as f64 * dy)
    }

    /// Ruin probabilities at stored time level `k`.
    pub fn psi_slice(&self, k: usize) -> &[f64] {
        let n = self.grid.ny + 1;
        &self.psi[k * n..(k + 1) * n]
    }

    /// Survival probability `phi` at stored level `k`, node `i`.
    pub fn phi(&self, k: usize, i: usize) -> f64 {
        1.0 - self.psi_slice(k)[i]
    }

    pub fn terminal_slice(&self) -> &[f64] {
        self.psi_slice(self.times.len() - 1)
    }

    /// `psi(T, x) = 1 - phi(T, x)`, linear in `x` between nodes. `horizon`
    /// must be one of the stored time levels.
    pub fn ruin_probability(&self, x: f64, horizon: f64) -> Result<f64> {
        let b = self.grid.b;
        if !(x >= 0.0 && x <= b) {
            return Err(Error::OutOfRange {
                what: "initial reserve",
                x,
                lo: 0.0,
                hi: b,
            });
        }
        let tol = 1e-9 * self.grid.horizon.max(1.0);
        let k = self
            .times
            .iter()
            .position(|&t| (t - horizon).abs() <= tol)
            .ok_or(Error::OutOfRange {
                what: "horizon (not a stored time level)",
                x: horizon,
                lo: 0.0,
                hi: self.grid.horizon,
            })?;
        Ok(interpolate(self.psi_slice(k), self.grid.dy(), x))
    }
}

fn interpolate(slice: &[f64], dy: f64, x: f64) -> f64 {
    let n = slice.len() - 1;
    let s = x / dy;
    let i = (s.floor() as usize).min(n - 1);
    let w = (s - i as f64).clamp(0.0, 1.0);
    (1.0 - w) * slice[i] + w * slice[i + 1]
}

/// Discrete generator at interior nodes: `lo psi_{i-1} + di psi_i + up psi_{i+1}`.
struct Operator {
    lo: Vec<f64>,
    di: Vec<f64>,
    up: Vec<f64>,
}

impl Operator {
    fn new(model: &ClosedForm, grid: &PdeGrid) -> Result<Self> {
        let p = model.params();
        let ny = grid.ny;
        let dy = grid.dy();
        let mut op = Operator {
            lo: vec![0.0; ny + 1],
            di: vec![0.0; ny + 1],
            up: vec![0.0; ny + 1],
        };
        for i in 1..=ny {
            let y = i as f64 * dy;
            let u = model.retention(y);
            let diff = 0.5 * p.sigma2() * u * u;
            let drift = p.drift(u);
            let peclet = drift.abs() * dy / diff;
            if peclet > 2.0 {
                return Err(Error::GridTooCoarse { peclet, y });
            }
            let d = diff / (dy * dy);
            let m = drift / (2.0 * dy);
            op.lo[i] = d - m;
            op.di[i] = -2.0 * d;
            op.up[i] = d + m;
        }
        Ok(op)
    }
}

/// Implicit side `I - theta k L` on unknowns `1..ny-1`, with the Dirichlet and
/// one-sided Neumann ends folded in.
struct ImplicitSystem {
    theta_k: f64,
    explicit_k: f64,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl ImplicitSystem {
    fn new(op: &Operator, ny: usize, theta: f64, k: f64) -> Self {
        let n = ny - 1;
        let tk = theta * k;
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for j in 0..n {
            let i = j + 1;
            lower[j] = -tk * op.lo[i];
            diag[j] = 1.0 - tk * op.di[i];
            upper[j] = -tk * op.up[i];
        }
        // psi_N = (4 psi_{N-1} - psi_{N-2}) / 3
        let last = n - 1;
        let u = upper[last];
        diag[last] += 4.0 * u / 3.0;
        lower[last] -= u / 3.0;
        upper[last] = 0.0;
        ImplicitSystem {
            theta_k: tk,
            explicit_k: (1.0 - theta) * k,
            lower,
            diag,
            upper,
        }
    }

    fn step(&self, op: &Operator, psi: &mut [f64], rhs: &mut [f64], scratch: &mut [f64]) {
        let ny = psi.len() - 1;
        for j in 0..ny - 1 {
            let i = j + 1;
            let mut r = psi[i];
            if self.explicit_k != 0.0 {
                r += self.explicit_k
                    * (op.lo[i] * psi[i - 1] + op.di[i] * psi[i] + op.up[i] * psi[i + 1]);
            }
            rhs[j] = r;
        }
        // Dirichlet psi_0 = 1 at the new level
        rhs[0] += self.theta_k * op.lo[1];
        solve_tridiagonal(&self.lower, &self.diag, &self.upper, rhs, scratch);
        psi[0] = 1.0;
        psi[1..ny].copy_from_slice(rhs);
        psi[ny] = (4.0 * psi[ny - 1] - psi[ny - 2]) / 3.0;
    }
}

/// Solves for the ruin probability surface under the barrier `grid.b()`.
pub fn solve_survival(model: &ClosedForm, grid: PdeGrid) -> Result<SurvivalSolution> {
    let x2 = model.coeffs().x2;
    if !(grid.b >= x2) {
        return Err(Error::OutOfRange {
            what: "barrier (policy needs b >= x2)",
            x: grid.b,
            lo: x2,
            hi: f64::INFINITY,
        });
    }
    let ny = grid.ny;
    let nt = grid.nt;
    let dt = grid.dt();
    let op = Operator::new(model, &grid)?;
    let half_euler = ImplicitSystem::new(&op, ny, 1.0, 0.5 * dt);
    let crank = ImplicitSystem::new(&op, ny, 0.5, dt);

    let stride = nt.div_ceil(MAX_STORED_SLICES).max(1);
    let mut times = Vec::with_capacity(nt / stride + 2);
    let mut stored = Vec::with_capacity((nt / stride + 2) * (ny + 1));

    let mut psi = vec![0.0; ny + 1];
    psi[0] = 1.0;
    times.push(0.0);
    stored.extend_from_slice(&psi);

    let mut rhs = vec![0.0; ny - 1];
    let mut scratch = vec![0.0; ny - 1];
    for n in 1..=nt {
        if n <= RANNACHER_STEPS {
            half_euler.step(&op, &mut psi, &mut rhs, &mut scratch);
            half_euler.step(&op, &mut psi, &mut rhs, &mut scratch);
        } else {
            crank.step(&op, &mut psi, &mut rhs, &mut scratch);
        }
        let t = n as f64 * dt;
        if let Some((i, &v)) = psi
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v >= -RANGE_SLACK && v <= 1.0 + RANGE_SLACK))
        {
            return Err(Error::Unstable {
                value: v,
                t,
                y: i as f64 * grid.dy(),
            });
        }
        if n % stride == 0 || n == nt {
            times.push(if n == nt { grid.horizon } else { t });
            stored.extend_from_slice(&psi);
        }
    }

    Ok(SurvivalSolution {
        grid,
        model: *model,
        times,
        psi: stored,
    })
}

/// Ruin probability by `horizon` starting from the barrier itself.
pub fn ruin_at_barrier(model: &ClosedForm, b: f64, horizon: f64, settings: &PdeSettings) -> Result<f64> {
    let sol = solve_survival(model, settings.grid(b, horizon)?)?;
    Ok(*sol.terminal_slice().last().expect("non-empty slice"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// The unconstrained optimum already meets the risk level.
    Unconstrained,
    /// The barrier was raised until the risk level is met with equality.
    Constrained,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Unconstrained => "unconstrained",
            Regime::Constrained => "constrained",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstrainedBarrier {
    pub regime: Regime,
    pub b0: f64,
    /// Ruin probability by `T` starting from and reflected at `b0`.
    pub psi_b0: f64,
    pub b_star: f64,
    /// Ruin probability by `T` starting from and reflected at `b_star`.
    pub psi_b_star: f64,
    /// Number of PDE solves.
    pub solves: usize,
    /// Set when bisection met a non-monotone bracket and fell back to a scan.
    pub monotone_fallback: bool,
}

/// Smallest barrier `b >= b0` whose ruin probability by `horizon`, started
/// at `b`, does not exceed `epsilon`.
pub fn constrained_barrier(
    epsilon: f64,
    horizon: f64,
    model: &ClosedForm,
    settings: &PdeSettings,
) -> Result<ConstrainedBarrier> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidInput {
            name: "epsilon",
            value: epsilon,
            reason: "risk level must lie in (0, 1)",
        });
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidInput {
            name: "T",
            value: horizon,
            reason: "must be positive",
        });
    }
    let b0 = model.unconstrained_barrier()?;
    let mut solves = 0;
    let mut psi_at = |b: f64| -> Result<f64> {
        solves += 1;
        ruin_at_barrier(model, b, horizon, settings)
    };
    let psi_b0 = psi_at(b0)?;
    if psi_b0 <= epsilon {
        return Ok(ConstrainedBarrier {
            regime: Regime::Unconstrained,
            b0,
            psi_b0,
            b_star: b0,
            psi_b_star: psi_b0,
            solves: 1,
            monotone_fallback: false,
        });
    }

    let b_max = settings.b_max.unwrap_or(1024.0 * b0);
    let (mut lo, mut psi_lo) = (b0, psi_b0);
    let (mut hi, mut psi_hi);
    loop {
        let next = (2.0 * lo).min(b_max);
        let psi = psi_at(next)?;
        if psi <= epsilon {
            hi = next;
            psi_hi = psi;
            break;
        }
        if next >= b_max {
            return Err(Error::NoBracket {
                b_max,
                psi,
                target: epsilon,
            });
        }
        lo = next;
        psi_lo = psi;
    }

    let tol = settings.psi_tol;
    let width_tol = 1e-6 * b0;
    let mut best = (hi, psi_hi);
    let mut fallback = false;
    if (psi_hi - epsilon).abs() > tol {
        let mut converged = false;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let psi = psi_at(mid)?;
            if (psi - epsilon).abs() < (best.1 - epsilon).abs() {
                best = (mid, psi);
            }
            if (psi - epsilon).abs() <= tol {
                converged = true;
                break;
            }
            if !fallback && (psi > psi_lo + 1e-12 || psi < psi_hi - 1e-12) {
                fallback = true;
                let (a, pa, z, pz) = envelope_bracket(&mut psi_at, lo, hi, epsilon)?;
                lo = a;
                psi_lo = pa;
                hi = z;
                psi_hi = pz;
                continue;
            }
            if psi > epsilon {
                lo = mid;
                psi_lo = psi;
            } else {
                hi = mid;
                psi_hi = psi;
            }
            if hi - lo <= width_tol {
                break;
            }
        }
        if !converged {
            return Err(Error::ToleranceNotMet {
                best: best.0,
                residual: best.1 - epsilon,
                iterations: solves,
            });
        }
    }
    Ok(ConstrainedBarrier {
        regime: Regime::Constrained,
        b0,
        psi_b0,
        b_star: best.0,
        psi_b_star: best.1,
        solves,
        monotone_fallback: fallback,
    })
}

/// Scans `[lo, hi]`, forms the running minimum of the ruin probabilities and
/// returns the first sub-interval where that envelope drops to `epsilon`.
fn envelope_bracket<F: FnMut(f64) -> Result<f64>>(
    psi_at: &mut F,
    lo: f64,
    hi: f64,
    epsilon: f64,
) -> Result<(f64, f64, f64, f64)> {
    const POINTS: usize = 33;
    let mut prev = (lo, f64::INFINITY);
    let mut envelope = f64::INFINITY;
    for k in 0..POINTS {
        let b = lo + (hi - lo) * k as f64 / (POINTS - 1) as f64;
        envelope = envelope.min(psi_at(b)?);
        if envelope <= epsilon {
            return Ok((prev.0, prev.1, b, envelope));
        }
        prev = (b, envelope);
    }
    Ok((lo, prev.1, hi, envelope))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskCapital {
    /// Smallest initial reserve with ruin probability at most `epsilon`.
    pub x: f64,
    /// Ruin probability at `x`.
    pub psi: f64,
}

/// Initial reserve whose ruin probability by `horizon` under barrier
/// `b_star` equals `epsilon`.
pub fn risk_capital(
    epsilon: f64,
    b_star: f64,
    horizon: f64,
    model: &ClosedForm,
    settings: &PdeSettings,
) -> Result<RiskCapital> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidInput {
            name: "epsilon",
            value: epsilon,
            reason: "risk level must lie in (0, 1)",
        });
    }
    let sol = solve_survival(model, settings.grid(b_star, horizon)?)?;
    let slice = sol.terminal_slice();
    let dy = sol.grid().dy();
    let at_b = *slice.last().expect("non-empty");
    if epsilon < at_b - settings.psi_tol || epsilon >= slice[0] {
        return Err(Error::Unsolvable {
            epsilon,
            b: b_star,
            psi_lo: at_b,
            psi_hi: slice[0],
        });
    }
    if epsilon <= at_b {
        return Ok(RiskCapital { x: b_star, psi: at_b });
    }
    let i = slice
        .iter()
        .position(|&v| v <= epsilon)
        .expect("last node is below epsilon");
    let (y0, y1) = ((i - 1) as f64 * dy, i as f64 * dy);
    let root = crate::numeric::bisect(
        |y| interpolate(slice, dy, y) - epsilon,
        y0,
        y1,
        1e-12 * b_star,
        200,
    )
    .expect("crossing lies in this cell");
    Ok(RiskCapital {
        x: root.x,
        psi: interpolate(slice, dy, root.x),
    })
}
