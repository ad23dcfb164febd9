use std::path::PathBuf;

use divreins_core::ruin_pde::solve_survival;
use divreins_core::{
    ruin_lower_bound, solve_policy, value_ratio, ClosedForm, ModelParams, PdeSettings, PolicySolution, Regime,
    SimConfig, Simulator,
};

use crate::config::KeyValues;
use crate::output::{linspace, Table};
use crate::{Cli, CliError, Command, GlobalOpts};

pub const DEFAULT_EPSILON: f64 = 0.05;
pub const DEFAULT_HORIZON: f64 = 500.0;
pub const DEFAULT_SIM_HORIZON: f64 = 200.0;
pub const DEFAULT_PATHS: usize = 10_000;
pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_X_GRID: usize = 20;
pub const DEFAULT_SWEEP_POINTS: usize = 20;
/// Barrier of the value-function figures.
pub const FIGURE_BARRIER: f64 = 100.0;
/// Penalty `a` of the preferred-level figure.
pub const FIG3_PENALTY: f64 = 0.5;

/// Everything a subcommand needs, resolved from file, flags and defaults.
#[derive(Debug, Clone)]
pub struct Context {
    pub params: ModelParams,
    /// Whether any model key was supplied; otherwise figure defaults apply.
    pub user_params: bool,
    pub group: &'static str,
    pub epsilon: f64,
    pub horizon: Option<f64>,
    pub pde: PdeSettings,
    pub paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub x_grid: usize,
    pub barrier: Option<f64>,
    pub x0: Option<f64>,
}

fn count(kv: &KeyValues, key: &str, flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match kv.get(key) {
        None => Ok(None),
        Some(v) if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => Ok(Some(v as usize)),
        Some(v) => Err(CliError::Config(format!("`{key}` must be a nonnegative integer, got {v}"))),
    }
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("`{name}` must be positive, got {v}")))
    }
}

impl Context {
    pub fn from_opts(opts: &GlobalOpts) -> Result<Self, CliError> {
        let mut kv = match &opts.config {
            Some(path) => KeyValues::load(path)?,
            None => KeyValues::default(),
        };
        for pair in &opts.params {
            kv.insert_pair(pair)?;
        }
        let params = kv.params()?;
        let user_params = kv.has_params();
        let group = if user_params { kv.group()?.name() } else { "baseline" };

        let epsilon = opts.epsilon.or(kv.get("epsilon")).unwrap_or(DEFAULT_EPSILON);
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(CliError::Config(format!("`epsilon` must lie in (0, 1), got {epsilon}")));
        }
        let horizon = opts.horizon.or(kv.get("horizon")).map(|t| positive("horizon", t)).transpose()?;
        let ny = count(&kv, "grid_ny", opts.grid_ny)?.unwrap_or(PdeSettings::default().ny);
        let nt = count(&kv, "grid_nt", opts.grid_nt)?;
        if ny < 64 || nt.is_some_and(|n| n < 64) {
            return Err(CliError::Config("PDE grids need at least 64 nodes per axis".into()));
        }
        let b_max = opts.b_max.or(kv.get("b_max")).map(|b| positive("b_max", b)).transpose()?;
        let psi_tol = positive(
            "psi_tol",
            opts.psi_tol.or(kv.get("psi_tol")).unwrap_or(PdeSettings::default().psi_tol),
        )?;
        let paths = count(&kv, "paths", opts.paths)?.unwrap_or(DEFAULT_PATHS);
        if paths == 0 {
            return Err(CliError::Config("`paths` must be at least 1".into()));
        }
        let dt = positive("dt", opts.dt.or(kv.get("dt")).unwrap_or(DEFAULT_DT))?;
        let seed = match (opts.seed, kv.get("seed")) {
            (Some(s), _) => s,
            (None, Some(v)) if v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(53) => v as u64,
            (None, Some(v)) => return Err(CliError::Config(format!("`seed` must be an integer below 2^53, got {v}"))),
            (None, None) => DEFAULT_SEED,
        };
        let x_grid = count(&kv, "x_grid", opts.x_grid)?.unwrap_or(DEFAULT_X_GRID);
        if x_grid < 2 {
            return Err(CliError::Config("`x_grid` must be at least 2".into()));
        }
        let barrier = opts.barrier.or(kv.get("barrier"));
        if let Some(b) = barrier {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(CliError::Config(format!("`barrier` must be nonnegative, got {b}")));
            }
        }
        let x0 = opts.x0.or(kv.get("x0"));
        if let Some(x) = x0 {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(CliError::Config(format!("`x0` must be nonnegative, got {x}")));
            }
        }
        Ok(Context {
            params,
            user_params,
            group,
            epsilon,
            horizon,
            pde: PdeSettings { ny, nt, b_max, psi_tol },
            paths,
            dt,
            seed,
            out: opts.out.clone().unwrap_or_else(|| PathBuf::from(".")),
            x_grid,
            barrier,
            x0,
        })
    }

    fn model(&self) -> Result<ClosedForm, CliError> {
        ClosedForm::new(self.params).map_err(|e| CliError::numeric("coefficients", e))
    }

    fn unconstrained_barrier(&self, model: &ClosedForm) -> Result<f64, CliError> {
        model
            .unconstrained_barrier()
            .map_err(|e| CliError::numeric("unconstrained barrier", e))
    }

    /// The `#` line heading every CSV file.
    pub fn provenance(&self, command: &str, effective: &[(&str, f64)]) -> String {
        let opt = |v: Option<f64>| v.map_or("auto".to_string(), |v| v.to_string());
        let mut s = format!(
            "divreins {} {command} group={} {} epsilon={} grid_ny={} grid_nt={} b_max={} psi_tol={} paths={} dt={} seed={} x_grid={}",
            env!("CARGO_PKG_VERSION"),
            self.group,
            self.params,
            self.epsilon,
            self.pde.ny,
            self.pde.nt.map_or("auto".to_string(), |n| n.to_string()),
            opt(self.pde.b_max),
            self.pde.psi_tol,
            self.paths,
            self.dt,
            self.seed,
            self.x_grid,
        );
        for (k, v) in effective {
            s.push_str(&format!(" {k}={v}"));
        }
        s
    }
}

/// Result of one subcommand: the table written and a short summary.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub table: Table,
    pub summary: String,
    pub provenance: String,
}

/// Runs a parsed command line and writes its CSV into the output directory.
pub fn run(cli: &Cli) -> Result<(Outcome, PathBuf), CliError> {
    let ctx = Context::from_opts(&cli.opts)?;
    let outcome = match &cli.command {
        Command::Solve => solve(&ctx)?.1,
        Command::Sweep {
            figure,
            sweep_points,
            fig3_covary_mu,
        } => sweep(&ctx, *figure, sweep_points.unwrap_or(DEFAULT_SWEEP_POINTS), *fig3_covary_mu)?,
        Command::Ruin => ruin(&ctx)?,
        Command::Value => value(&ctx)?,
        Command::Simulate => simulate(&ctx)?,
        Command::LowerBound => lower_bound(&ctx)?,
    };
    let path = outcome.table.write(&ctx.out, &outcome.provenance)?;
    Ok((outcome, path))
}

pub fn solve(ctx: &Context) -> Result<(PolicySolution, Outcome), CliError> {
    let horizon = ctx.horizon.unwrap_or(DEFAULT_HORIZON);
    let sol = solve_policy(ctx.params, ctx.epsilon, horizon, &ctx.pde).map_err(|e| CliError::numeric("solve", e))?;
    let mut table = Table::new("policy_solution", vec!["x", "value", "retention", "value_ratio"]);
    let summary = format!(
        "regime={} b0={:.12e} b_star={:.12e} risk_capital={:.12e} solvency={:.12e}",
        sol.regime.as_str(),
        sol.b0,
        sol.b_star,
        sol.risk_capital,
        sol.solvency
    );
    table.notes.push(summary.clone());
    for x in linspace(0.0, sol.b_star, ctx.x_grid + 1).into_iter().skip(1) {
        let ratio = value_ratio(x, &sol).map_err(|e| CliError::numeric("value ratio", e))?;
        table.push(vec![x, sol.value_at(x), sol.retention_at(x), ratio]);
    }
    let provenance = ctx.provenance("solve", &[("horizon", horizon)]);
    Ok((
        sol,
        Outcome {
            table,
            summary,
            provenance,
        },
    ))
}

fn with(p: &ModelParams, mu: f64, a: f64, delta: f64, sigma2: f64) -> Result<ModelParams, CliError> {
    ModelParams::with_sigma2(mu, a, delta, sigma2, p.l(), p.c()).map_err(|e| CliError::Config(e.to_string()))
}

/// Figure sweeps. Figures 1 and 5 vary the risk level, figures 2-4 tabulate
/// the value function at a fixed barrier against `mu`, `p` and `sigma^2`.
pub fn sweep(ctx: &Context, figure: u8, points: usize, covary_mu: bool) -> Result<Outcome, CliError> {
    if points < 2 {
        return Err(CliError::Config("`sweep-points` must be at least 2".into()));
    }
    let horizon = ctx.horizon.unwrap_or(DEFAULT_HORIZON);
    let p = ctx.params;
    let xs = |b: f64| linspace(0.0, b, ctx.x_grid + 1);
    let stage = |what: String| move |e| CliError::numeric(&what, e);
    let mut effective = vec![("horizon", horizon), ("sweep_points", points as f64)];
    let table = match figure {
        1 | 5 => {
            let mut t = if figure == 1 {
                Table::new("fig1", vec!["epsilon", "b_star", "b0", "constrained", "solvency"])
            } else {
                Table::new("fig5", vec!["epsilon", "risk_capital", "b_star", "constrained"])
            };
            for eps in linspace(0.05, 0.5, points) {
                let sol = solve_policy(p, eps, horizon, &ctx.pde).map_err(stage(format!("fig{figure} at epsilon={eps}")))?;
                let constrained = if sol.regime == Regime::Constrained { 1.0 } else { 0.0 };
                t.push(if figure == 1 {
                    vec![eps, sol.b_star, sol.b0, constrained, sol.solvency]
                } else {
                    vec![eps, sol.risk_capital, sol.b_star, constrained]
                });
            }
            t
        }
        2 | 3 | 4 => {
            let b = ctx.barrier.unwrap_or(FIGURE_BARRIER);
            effective.push(("barrier", b));
            let (name, axis, grid): (_, _, Vec<f64>) = match figure {
                2 => ("fig2", "mu", linspace(1.0, 4.0, points)),
                3 => ("fig3", "p", linspace(0.05, 0.95, points)),
                _ => ("fig4", "sigma2", linspace(10.0, 100.0, points)),
            };
            let mut t = Table::new(name, vec![axis, "mu", "delta", "sigma2", "x", "g", "dg"]);
            let a3 = if ctx.user_params { p.a() } else { FIG3_PENALTY };
            if figure == 3 {
                effective.push(("a", a3));
                effective.push(("covary_mu", if covary_mu { 1.0 } else { 0.0 }));
            }
            for v in grid {
                let q = match figure {
                    2 => with(&p, v, p.a(), p.delta(), p.sigma2())?,
                    3 => {
                        let mu = if covary_mu { p.mu() + 2.0 * a3 * v } else { p.mu() };
                        with(&p, mu, a3, a3 * v * v, p.sigma2())?
                    }
                    _ => with(&p, p.mu(), p.a(), p.delta(), v)?,
                };
                let label = format!("{name} at {axis}={v}");
                let vc = ClosedForm::new(q)
                    .and_then(|m| m.value_coeffs(b))
                    .map_err(stage(label))?;
                for x in xs(b) {
                    let (g, dg, _) = vc.evaluate(x);
                    t.push(vec![v, q.mu(), q.delta(), q.sigma2(), x, g, dg]);
                }
            }
            t
        }
        _ => return Err(CliError::Config(format!("no figure {figure}; choose 1-5"))),
    };
    let summary = format!("fig{figure}: {} rows", table.rows.len());
    Ok(Outcome {
        provenance: ctx.provenance(&format!("sweep {figure}"), &effective),
        table,
        summary,
    })
}

pub fn ruin(ctx: &Context) -> Result<Outcome, CliError> {
    let model = ctx.model()?;
    let horizon = ctx.horizon.unwrap_or(DEFAULT_HORIZON);
    let b = match ctx.barrier {
        Some(b) => b,
        None => ctx.unconstrained_barrier(&model)?,
    };
    let grid = ctx.pde.grid(b, horizon).map_err(|e| CliError::numeric("ruin grid", e))?;
    let sol = solve_survival(&model, grid).map_err(|e| CliError::numeric("ruin", e))?;
    let times = sol.times();
    let mut levels: Vec<usize> = (1..=4)
        .map(|k| {
            let target = horizon * k as f64 / 4.0;
            (0..times.len())
                .min_by(|&i, &j| (times[i] - target).abs().total_cmp(&(times[j] - target).abs()))
                .expect("at least one stored level")
        })
        .collect();
    levels.dedup();
    let xs = match ctx.x0 {
        Some(x) => vec![x],
        None => linspace(0.0, b, ctx.x_grid + 1),
    };
    let mut table = Table::new("ruin", vec!["t", "x", "psi"]);
    for k in levels {
        for &x in &xs {
            let psi = sol
                .ruin_probability(x, times[k])
                .map_err(|e| CliError::numeric("ruin lookup", e))?;
            table.push(vec![times[k], x, psi]);
        }
    }
    let last = table.rows.last().map_or(f64::NAN, |r| r[2]);
    Ok(Outcome {
        summary: format!("psi(T={horizon}, x={}) = {last:.12e} at barrier {b:.12e}", xs[xs.len() - 1]),
        provenance: ctx.provenance("ruin", &[("horizon", horizon), ("barrier", b)]),
        table,
    })
}

pub fn value(ctx: &Context) -> Result<Outcome, CliError> {
    let model = ctx.model()?;
    let b = match ctx.barrier {
        Some(b) => b,
        None => ctx.unconstrained_barrier(&model)?,
    };
    let vc = model.value_coeffs(b).map_err(|e| CliError::numeric("value function", e))?;
    let mut table = Table::new("value", vec!["x", "g", "dg", "d2g", "retention", "hjb_residual"]);
    for x in linspace(0.0, b, ctx.x_grid + 1) {
        let (g, g1, g2) = vc.evaluate(x);
        let r = vc.hjb_residual(x);
        table.push(vec![x, g, g1, g2, r.retention, r.residual]);
    }
    Ok(Outcome {
        summary: format!("g(b, b) = {:.12e} at barrier {b:.12e}", vc.value(b)),
        provenance: ctx.provenance("value", &[("barrier", b)]),
        table,
    })
}

pub fn simulate(ctx: &Context) -> Result<Outcome, CliError> {
    let model = ctx.model()?;
    let horizon = ctx.horizon.unwrap_or(DEFAULT_SIM_HORIZON);
    let b = match ctx.barrier {
        Some(b) => b,
        None => ctx.unconstrained_barrier(&model)?,
    };
    let x0 = ctx.x0.unwrap_or(b);
    let cfg = SimConfig::new(x0, b, horizon, ctx.dt, ctx.paths, ctx.seed).map_err(|e| CliError::Config(e.to_string()))?;
    let est = Simulator::new(model)
        .estimate(&cfg)
        .map_err(|e| CliError::numeric("simulate", e))?;
    let closed = model.value_coeffs(b).map(|vc| vc.value(x0)).unwrap_or(f64::NAN);
    let mut table = Table::new(
        "simulate",
        vec![
            "x0",
            "b",
            "horizon",
            "h",
            "n_paths",
            "ruin_prob",
            "ruin_se",
            "value",
            "value_se",
            "truncation_bound",
            "closed_form_value",
        ],
    );
    table.push(vec![
        x0,
        b,
        horizon,
        est.h,
        est.n_paths as f64,
        est.ruin_prob,
        est.ruin_se,
        est.value,
        est.value_se,
        est.truncation_bound.unwrap_or(f64::NAN),
        closed,
    ]);
    Ok(Outcome {
        summary: format!(
            "ruin = {:.6} +/- {:.6}, dividends = {:.6} +/- {:.6} (closed form {:.6})",
            est.ruin_prob, est.ruin_se, est.value, est.value_se, closed
        ),
        provenance: ctx.provenance("simulate", &[("horizon", horizon), ("barrier", b), ("x0", x0)]),
        table,
    })
}

pub fn lower_bound(ctx: &Context) -> Result<Outcome, CliError> {
    let horizon = ctx.horizon.unwrap_or(DEFAULT_HORIZON);
    let b = match ctx.barrier {
        Some(b) => b,
        None => {
            let model = ctx.model()?;
            ctx.unconstrained_barrier(&model)?
        }
    };
    let eps0 = ruin_lower_bound(b, horizon, &ctx.params).map_err(|e| CliError::numeric("lower bound", e))?;
    let mut table = Table::new("lower_bound", vec!["b", "horizon", "eps0"]);
    table.push(vec![b, horizon, eps0]);
    Ok(Outcome {
        summary: format!("eps0(b={b:.12e}, T={horizon}) = {eps0:.12e}"),
        provenance: ctx.provenance("lower-bound", &[("horizon", horizon), ("barrier", b)]),
        table,
    })
}
