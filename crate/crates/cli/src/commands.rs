use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use gatecrit::criterion::{critical_gain_for, gc_asymptotic, gc_gaussian_asymptotic};
use gatecrit::disorder::OutputBias;
use gatecrit::lyapunov::{find_crossing, lyapunov_sweep, BenettinOptions, CrossingMode, CrossingOptions};
use gatecrit::observables::{default_tail_window, q_inf_sweep, QOptions};
use gatecrit::reservoir::{mackey_glass, rc_heatmap, rc_ratio_sweep, reference_gc, MackeyGlassConfig, RcConfig, RC_COLUMNS};
use gatecrit::rng::derive_seed;
use gatecrit::spectrum::{build_jacobian, eigenvalues, radius_vs_gain_sweep, PowerOptions};
use gatecrit::stats;
use gatecrit::sweep::{Cell, SweepResult};
use gatecrit::{realize, ArchKind, ArchitectureSpec, BiasScheme, Exec, NetworkConfig};

use crate::config::{parse_grid, ConfigFile, Resolver};
use crate::output::{destination, write_results, Format};
use crate::{BenettinArgs, Cli, Command, CrossingArgs, NetArgs, JOBS_ENV};

/// Keys that may appear under `common.` in a config file.
const COMMON_KEYS: &[&str] = &[
    "seed", "out", "format", "jobs", "arch", "n", "bias", "sb", "sc", "tmax", "so", "replicas", "t",
    "transient", "eps", "batches", "h0", "gains", "mode", "tol_g", "g_lo", "g_hi", "crossing",
    "interior", "max_expand", "ridge", "input_scale", "train", "test", "washout", "mg_washout",
    "history", "seeds", "ratios",
];

struct Ctx<'a> {
    r: Resolver<'a>,
    exec: Exec,
    seed: u64,
    name: &'static str,
}

impl Ctx<'_> {
    fn table(&self, columns: &[&str]) -> SweepResult {
        let mut t = SweepResult::new(self.name, columns);
        t.set_meta("gatecrit_version", env!("CARGO_PKG_VERSION"));
        t
    }

    fn grid(&self, key: &str, flag: Option<String>, default: &str) -> Result<Vec<f64>> {
        let s = self.r.get(key, flag, default.to_string())?;
        parse_grid(&s).with_context(|| format!("--{}", key.replace('_', "-")))
    }
}

fn name_of(cmd: &Command) -> &'static str {
    match cmd {
        Command::Gc { .. } => "gc",
        Command::Qinf { .. } => "qinf",
        Command::Lyapunov { .. } => "lyapunov",
        Command::Phase { .. } => "phase",
        Command::Spectrum { .. } => "spectrum",
        Command::Reservoir { .. } => "reservoir",
        Command::MackeyGlass { .. } => "mackey-glass",
    }
}

fn configure_exec(jobs: Option<usize>) -> Result<Exec> {
    match jobs {
        Some(0) => bail!("--jobs must be >= 1"),
        Some(1) => Ok(Exec::Sequential),
        Some(j) => {
            #[cfg(feature = "parallel")]
            rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build_global()
                .map_err(|e| anyhow!("cannot start {j} worker threads: {e}"))?;
            #[cfg(not(feature = "parallel"))]
            log::warn!("built without the parallel feature; ignoring --jobs {j}");
            Ok(Exec::Parallel)
        }
        None => Ok(Exec::Parallel),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.global.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let name = name_of(&cli.command);
    let r = Resolver::new(&file, name);
    let env_jobs = match std::env::var(JOBS_ENV) {
        Ok(v) if !v.trim().is_empty() => {
            Some(v.trim().parse::<usize>().map_err(|e| anyhow!("{JOBS_ENV}={v}: {e}"))?)
        }
        _ => None,
    };
    let jobs = r.opt("jobs", cli.global.jobs.or(env_jobs))?;
    let exec = configure_exec(jobs)?;
    let seed = r.get("seed", cli.global.seed, 0u64)?;
    let out: Option<PathBuf> = r.opt::<String>("out", cli.global.out.as_ref().map(|p| p.display().to_string()))?.map(PathBuf::from);
    let inferred = match out.as_ref().and_then(|p| p.extension()) {
        Some(e) if e == "json" => Format::Json,
        _ => Format::Csv,
    };
    let format = r.opt("format", cli.global.format)?.unwrap_or(inferred);
    let ctx = Ctx { r, exec, seed, name };

    let table = match cli.command {
        Command::Gc { net, mode, replicas } => gc(&ctx, net, mode, replicas, out.is_some() || destination(None, name, format).is_some())?,
        Command::Qinf { net, gains, t, replicas, tail_window, h0 } => qinf(&ctx, net, gains, t, replicas, tail_window, h0)?,
        Command::Lyapunov { net, benettin, crossing, mode, gains, replicas } => {
            lyapunov(&ctx, net, benettin, crossing, mode, gains, replicas)?
        }
        Command::Phase { net, benettin, crossing, mode, replicas } => phase(&ctx, net, benettin, crossing, mode, replicas)?,
        Command::Spectrum { net, gains, replicas, tol, max_iters, restarts, eigenvalues } => {
            spectrum(&ctx, net, gains, replicas, tol, max_iters, restarts, eigenvalues)?
        }
        Command::Reservoir {
            net,
            mode,
            ratios,
            seeds,
            train,
            test,
            washout,
            mg_washout,
            ridge,
            input_scale,
            history,
        } => {
            let rc = RcArgs { mode, ratios, seeds, train, test, washout, mg_washout, ridge, input_scale, history };
            reservoir(&ctx, net, rc)?
        }
        Command::MackeyGlass { length, washout, history, beta, gamma, exponent, tau } => {
            mg(&ctx, length, washout, history, beta, gamma, exponent, tau)?
        }
    };
    ctx.r.finish(COMMON_KEYS)?;
    let (mut table, deferred) = table;
    if let Some(mut t) = table.take() {
        for (k, v) in ctx.r.resolved() {
            if k != "jobs" && k != "out" && k != "format" {
                t.set_meta(&k, v);
            }
        }
        write_results(&t, format, destination(out.as_deref(), name, format).as_deref())?;
    }
    match deferred {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// A result table (if any) and an error to report after it was written.
type Outcome = (Option<SweepResult>, Option<anyhow::Error>);

struct Net {
    arch: ArchitectureSpec,
    n: usize,
    bias: String,
    s_c: f64,
    t_max: f64,
    s_o: f64,
}

impl Net {
    fn scheme(&self, s_b: f64) -> Result<BiasScheme> {
        let base = match self.bias.as_str() {
            "zero" => {
                if s_b != 0.0 {
                    bail!("--bias zero conflicts with --sb {s_b}");
                }
                BiasScheme::zero()
            }
            "gaussian" => BiasScheme::gaussian(s_b),
            "chrono" => {
                let output = if self.s_o == 0.0 { OutputBias::Zero } else { OutputBias::Gaussian { sd: self.s_o } };
                BiasScheme::chrono(self.t_max, output)
            }
            other => bail!("unknown bias scheme '{other}' (expected zero, gaussian or chrono)"),
        };
        let scheme = base.with_candidate_sd(self.s_c);
        scheme.validate(&self.arch)?;
        Ok(scheme)
    }

    fn config(&self, s_b: f64, seed: u64) -> Result<NetworkConfig> {
        let cfg = NetworkConfig::new(self.arch, self.n, self.scheme(s_b)?, seed);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Resolve network flags; returns the s_b list (a single value unless `sb_default` is a list).
fn resolve_net(ctx: &Ctx, net: NetArgs, default_n: usize, sb_default: &str) -> Result<(Net, Vec<f64>)> {
    let r = &ctx.r;
    let arch_name: String = r.get("arch", net.arch, "lstm".into())?;
    let kind: ArchKind = arch_name.parse()?;
    let n = r.get("n", net.n, default_n)?;
    let sbs = ctx.grid("sb", net.sb, sb_default)?;
    if sbs.is_empty() {
        bail!("--sb must not be empty");
    }
    if sbs.iter().any(|s| !(*s >= 0.0)) {
        bail!("--sb values must be >= 0");
    }
    let bias = match r.opt("bias", net.bias)? {
        Some(b) => b,
        None if sbs.iter().any(|&s| s > 0.0) => "gaussian".to_string(),
        None => "zero".to_string(),
    };
    r.record("bias", &bias);
    let s_c = r.get("sc", net.sc, 0.0)?;
    let (t_max, s_o) = if bias == "chrono" {
        (r.get("tmax", net.tmax, 1000.0)?, r.get("so", net.so, 0.0)?)
    } else {
        (r.opt("tmax", net.tmax)?.unwrap_or(1000.0), r.opt("so", net.so)?.unwrap_or(0.0))
    };
    Ok((Net { arch: ArchitectureSpec::new(kind), n, bias, s_c, t_max, s_o }, sbs))
}

fn single_sb(sbs: &[f64]) -> Result<f64> {
    match sbs {
        [s] => Ok(*s),
        _ => bail!("--sb takes a single value for this subcommand"),
    }
}

fn resolve_benettin(ctx: &Ctx, b: BenettinArgs) -> Result<(BenettinOptions, f64)> {
    let d = BenettinOptions::default();
    let opts = BenettinOptions {
        t: ctx.r.get("t", b.t, d.t)?,
        transient: ctx.r.get("transient", b.transient, d.transient)?,
        eps: ctx.r.get("eps", b.eps, d.eps)?,
        batches: ctx.r.get("batches", b.batches, d.batches)?,
    };
    opts.validate()?;
    Ok((opts, ctx.r.get("h0", b.h0, 1.0)?))
}

fn resolve_crossing(
    ctx: &Ctx,
    c: CrossingArgs,
    bracket: (f64, f64),
    replicas: usize,
    benettin: BenettinOptions,
    h0: f64,
) -> Result<CrossingOptions> {
    let mut o = CrossingOptions::new(ctx.r.get("g_lo", c.g_lo, bracket.0)?, ctx.r.get("g_hi", c.g_hi, bracket.1)?, replicas);
    o.tol_g = ctx.r.get("tol_g", c.tol_g, o.tol_g)?;
    o.interior = ctx.r.get("interior", c.interior, o.interior)?;
    o.max_expand = ctx.r.get("max_expand", c.max_expand, o.max_expand)?;
    o.mode = match ctx.r.get("crossing", c.crossing, "per-replica".to_string())?.as_str() {
        "per-replica" => CrossingMode::PerReplica,
        "shared-bracket" => CrossingMode::SharedBracket,
        other => bail!("unknown crossing mode '{other}' (expected per-replica or shared-bracket)"),
    };
    o.benettin = benettin;
    o.h0 = h0;
    o.exec = ctx.exec;
    Ok(o)
}

fn gc(ctx: &Ctx, net: NetArgs, mode: Option<String>, replicas: Option<usize>, tabulate: bool) -> Result<Outcome> {
    let (net, sbs) = resolve_net(ctx, net, 1000, "0")?;
    let s_b = single_sb(&sbs)?;
    let scheme = net.scheme(s_b)?;
    let mode = ctx.r.get("mode", mode, "asymptotic".to_string())?;
    let (value, ci, n, reps) = match mode.as_str() {
        "asymptotic" => (gc_asymptotic(&net.arch, &scheme)?.g_c, 0.0, 0, 0),
        "finite" => {
            let reps = ctx.r.get("replicas", replicas, 1usize)?;
            if reps == 0 {
                bail!("--replicas must be >= 1");
            }
            let base = net.config(s_b, ctx.seed)?;
            let vals = ctx.exec.try_map(reps, |r| critical_gain_for(&base.replica(r)).map(|p| p.g_c))?;
            let s = stats::summarize(&vals);
            (s.mean, if reps > 1 { s.ci95 } else { 0.0 }, net.n, reps)
        }
        other => bail!("unknown gc mode '{other}' (expected asymptotic or finite)"),
    };
    println!("g_c = {value}");
    if reps > 1 {
        println!("ci95 = {ci}");
    }
    if !tabulate {
        return Ok((None, None));
    }
    let mut t = ctx.table(&["arch", "bias", "s_b", "mode", "N", "replicas", "g_c", "ci95"]);
    t.push(vec![
        net.arch.kind.to_string().into(),
        net.bias.clone().into(),
        s_b.into(),
        mode.into(),
        n.into(),
        reps.into(),
        value.into(),
        ci.into(),
    ])?;
    Ok((Some(t), None))
}

fn qinf(
    ctx: &Ctx,
    net: NetArgs,
    gains: Option<String>,
    t: Option<usize>,
    replicas: Option<usize>,
    tail_window: Option<usize>,
    h0: Option<f64>,
) -> Result<Outcome> {
    let (net, sbs) = resolve_net(ctx, net, 500, "0")?;
    let s_b = single_sb(&sbs)?;
    let gains = ctx.grid("gains", gains, "0.5:4:0.5")?;
    let t = ctx.r.get("t", t, 2000usize)?;
    let mut opts = QOptions::new(t, ctx.r.get("replicas", replicas, 10usize)?);
    opts.tail_window = ctx.r.get("tail_window", tail_window, default_tail_window(t))?;
    opts.h0 = ctx.r.get("h0", h0, 1.0)?;
    opts.exec = ctx.exec;
    let cfg = net.config(s_b, ctx.seed)?;
    let est = q_inf_sweep(&cfg, &gains, &opts)?;
    let mut table = ctx.table(&["g", "s_b", "s_c", "N", "T", "replicas", "mean_q_inf", "ci95"]);
    for e in est {
        table.push(vec![
            e.g.into(),
            e.s_b.into(),
            e.s_c.into(),
            e.n.into(),
            e.t.into(),
            e.replicas.into(),
            e.mean_q_inf.into(),
            e.ci95_halfwidth.into(),
        ])?;
    }
    Ok((Some(table), None))
}

fn lyapunov(
    ctx: &Ctx,
    net: NetArgs,
    benettin: BenettinArgs,
    crossing: CrossingArgs,
    mode: Option<String>,
    gains: Option<String>,
    replicas: Option<usize>,
) -> Result<Outcome> {
    let (net, sbs) = resolve_net(ctx, net, 1000, "0")?;
    let s_b = single_sb(&sbs)?;
    let (bopts, h0) = resolve_benettin(ctx, benettin)?;
    let replicas = ctx.r.get("replicas", replicas, 10usize)?;
    let cfg = net.config(s_b, ctx.seed)?;
    let mode = ctx.r.get("mode", mode, "grid".to_string())?;
    match mode.as_str() {
        "grid" => {
            let gains = ctx.grid("gains", gains, "1:3:0.25")?;
            let est = lyapunov_sweep(&cfg, &gains, replicas, h0, &bopts, ctx.exec)?;
            let mut t = ctx.table(&["s_b", "g", "lambda_max", "stderr", "N", "T", "eps", "seed"]);
            for e in est {
                t.push(vec![
                    s_b.into(),
                    e.g.into(),
                    e.lambda_max.into(),
                    e.stderr.into(),
                    net.n.into(),
                    bopts.t.into(),
                    bopts.eps.into(),
                    ctx.seed.into(),
                ])?;
            }
            Ok((Some(t), None))
        }
        "bisect" => {
            let opts = resolve_crossing(ctx, crossing, (1.0, 3.0), replicas, bopts, h0)?;
            let c = find_crossing(&cfg, &opts)?;
            let mut t = ctx.table(&["s_b", "g_star", "ci95", "g_lo", "g_hi", "N", "T", "eps", "seed", "replicas"]);
            t.push(vec![
                s_b.into(),
                c.g_star.into(),
                c.ci95_halfwidth.into(),
                c.bracket.0.into(),
                c.bracket.1.into(),
                net.n.into(),
                bopts.t.into(),
                bopts.eps.into(),
                ctx.seed.into(),
                c.replicas.into(),
            ])?;
            Ok((Some(t), None))
        }
        other => bail!("unknown lyapunov mode '{other}' (expected grid or bisect)"),
    }
}

fn phase(
    ctx: &Ctx,
    net: NetArgs,
    benettin: BenettinArgs,
    crossing: CrossingArgs,
    mode: Option<String>,
    replicas: Option<usize>,
) -> Result<Outcome> {
    let (net, sbs) = resolve_net(ctx, net, 1000, "0,1,2,3")?;
    if net.bias == "chrono" {
        bail!("phase sweeps gaussian gate biases; use gc for chrono");
    }
    let (bopts, h0) = resolve_benettin(ctx, benettin)?;
    let replicas = ctx.r.get("replicas", replicas, 10usize)?;
    let mode = ctx.r.get("mode", mode, "both".to_string())?;
    let (predicted, empirical) = match mode.as_str() {
        "predicted" => (true, false),
        "empirical" => (false, true),
        "both" => (true, true),
        other => bail!("unknown phase mode '{other}' (expected predicted, empirical or both)"),
    };
    let mut t = ctx.table(&["s_b", "g_c_asymptotic", "g_c_finite", "g_c_finite_ci", "g_star", "g_star_ci", "N", "replicas"]);
    let mut failures = Vec::new();
    for &s_b in &sbs {
        let net_s = Net { bias: if s_b == 0.0 { "zero".into() } else { "gaussian".into() }, ..clone_net(&net) };
        let cfg = net_s.config(s_b, ctx.seed)?;
        let asym = gc_gaussian_asymptotic(&net.arch, s_b)?.g_c;
        let (fin, fin_ci) = if predicted {
            let vals = ctx.exec.try_map(replicas, |r| critical_gain_for(&cfg.replica(r)).map(|p| p.g_c))?;
            let s = stats::summarize(&vals);
            (s.mean, s.ci95)
        } else {
            (f64::NAN, f64::NAN)
        };
        let (g_star, g_ci) = if empirical {
            let opts = resolve_crossing(ctx, crossing.clone(), (0.5 * asym, 1.5 * asym), replicas, bopts, h0)?;
            match find_crossing(&cfg, &opts) {
                Ok(c) => (c.g_star, c.ci95_halfwidth),
                Err(e) => {
                    log::info!("s_b = {s_b}: {e}");
                    failures.push(format!("s_b = {s_b}: {e}"));
                    (f64::NAN, f64::NAN)
                }
            }
        } else {
            (f64::NAN, f64::NAN)
        };
        let (a, f, fc) = if predicted { (asym, fin, fin_ci) } else { (f64::NAN, f64::NAN, f64::NAN) };
        t.push(vec![
            s_b.into(),
            a.into(),
            f.into(),
            fc.into(),
            g_star.into(),
            g_ci.into(),
            net.n.into(),
            replicas.into(),
        ])?;
    }
    let err = if failures.is_empty() {
        None
    } else {
        Some(anyhow!("crossing search failed for {}", failures.join("; ")))
    };
    Ok((Some(t), err))
}

fn clone_net(n: &Net) -> Net {
    Net { arch: n.arch, n: n.n, bias: n.bias.clone(), s_c: n.s_c, t_max: n.t_max, s_o: n.s_o }
}

#[allow(clippy::too_many_arguments)]
fn spectrum(
    ctx: &Ctx,
    net: NetArgs,
    gains: Option<String>,
    replicas: Option<usize>,
    tol: Option<f64>,
    max_iters: Option<usize>,
    restarts: Option<usize>,
    dump: bool,
) -> Result<Outcome> {
    let (net, sbs) = resolve_net(ctx, net, 1000, "0")?;
    let s_b = single_sb(&sbs)?;
    let cfg = net.config(s_b, ctx.seed)?;
    let gains = ctx.grid("gains", gains, "0:3:0.25")?;
    let d = PowerOptions::default();
    let opts = PowerOptions {
        tol: ctx.r.get("tol", tol, d.tol)?,
        max_iters: ctx.r.get("max_iters", max_iters, d.max_iters)?,
        restarts: ctx.r.get("restarts", restarts, d.restarts)?,
        seed: 0,
    };
    if dump {
        let [g] = gains[..] else {
            bail!("--eigenvalues needs exactly one gain");
        };
        let real = realize(&cfg.replica(0))?;
        let ev = eigenvalues(&build_jacobian(&real, g)?.j)?;
        let mut t = ctx.table(&["re", "im"]);
        t.set_meta("g", g);
        for (re, im) in ev {
            t.push(vec![re.into(), im.into()])?;
        }
        return Ok((Some(t), None));
    }
    let replicas = ctx.r.get("replicas", replicas, 5usize)?;
    let rows = if gains.is_empty() {
        Vec::new()
    } else {
        radius_vs_gain_sweep(&cfg, &gains, replicas, &opts, ctx.exec)?
    };
    let mut t = ctx.table(&["g", "radius_mean", "radius_ci", "N", "replicas"]);
    for row in rows {
        if !row.all_converged {
            log::info!("g = {}: power iteration did not settle in every replica; growth-rate estimate used", row.g);
        }
        t.push(vec![row.g.into(), row.radius_mean.into(), row.radius_ci.into(), row.n.into(), row.replicas.into()])?;
    }
    Ok((Some(t), None))
}

pub struct RcArgs {
    mode: Option<String>,
    ratios: Option<String>,
    seeds: Option<usize>,
    train: Option<usize>,
    test: Option<usize>,
    washout: Option<usize>,
    mg_washout: Option<usize>,
    ridge: Option<f64>,
    input_scale: Option<f64>,
    history: Option<f64>,
}

fn reservoir(ctx: &Ctx, net: NetArgs, a: RcArgs) -> Result<Outcome> {
    let mode = ctx.r.get("mode", a.mode, "sweep".to_string())?;
    let sb_default = if mode == "heatmap" { "0,0.5,1,1.5,2" } else { "0" };
    let (net, sbs) = resolve_net(ctx, net, 500, sb_default)?;
    if net.bias == "chrono" || net.s_c != 0.0 {
        bail!("reservoir runs use zero or gaussian gate biases with s_c = 0");
    }
    let mut cfg = RcConfig::new(net.arch, net.n);
    cfg.train = ctx.r.get("train", a.train, cfg.train)?;
    cfg.test = ctx.r.get("test", a.test, cfg.test)?;
    cfg.washout = ctx.r.get("washout", a.washout, cfg.washout)?;
    cfg.mg.washout = ctx.r.get("mg_washout", a.mg_washout, cfg.mg.washout)?;
    cfg.ridge_lambda = ctx.r.get("ridge", a.ridge, cfg.ridge_lambda)?;
    cfg.input_scale = ctx.r.get("input_scale", a.input_scale, cfg.input_scale)?;
    cfg.mg.history_init = ctx.r.get("history", a.history, cfg.mg.history_init)?;
    cfg.validate()?;
    let ratios = ctx.grid("ratios", a.ratios, "0.5,0.75,0.9,1,1.1,1.25,1.5,2")?;
    let nseeds = ctx.r.get("seeds", a.seeds, 5usize)?;
    if nseeds == 0 {
        bail!("--seeds must be >= 1");
    }
    let seeds: Vec<u64> = (0..nseeds as u64).map(|i| derive_seed(ctx.seed, i)).collect();
    match mode.as_str() {
        "sweep" => {
            let s_b = single_sb(&sbs)?;
            let gc = reference_gc(net.arch, s_b)?;
            let runs = rc_ratio_sweep(&cfg, s_b, &ratios, &seeds, ctx.exec)?;
            let mut t = ctx.table(&RC_COLUMNS);
            t.set_meta("g_c", gc);
            for r in runs {
                t.push(vec![
                    r.s_b.into(),
                    r.g.into(),
                    (r.g / gc).into(),
                    r.n.into(),
                    r.seed.into(),
                    r.train_mse.into(),
                    r.test_mse.into(),
                ])?;
            }
            Ok((Some(t), None))
        }
        "heatmap" => {
            let mut t = rc_heatmap(&cfg, &sbs, &ratios, &seeds, ctx.exec)?;
            let mut base = ctx.table(&t.columns.iter().map(|c| c.as_str()).collect::<Vec<_>>());
            base.rows = std::mem::take(&mut t.rows);
            for (k, v) in t.meta {
                base.set_meta(&k, v);
            }
            Ok((Some(base), None))
        }
        other => bail!("unknown reservoir mode '{other}' (expected sweep or heatmap)"),
    }
}

#[allow(clippy::too_many_arguments)]
fn mg(
    ctx: &Ctx,
    length: Option<usize>,
    washout: Option<usize>,
    history: Option<f64>,
    beta: Option<f64>,
    gamma: Option<f64>,
    exponent: Option<i32>,
    tau: Option<usize>,
) -> Result<Outcome> {
    let d = MackeyGlassConfig::default();
    let cfg = MackeyGlassConfig {
        beta: ctx.r.get("beta", beta, d.beta)?,
        gamma: ctx.r.get("gamma", gamma, d.gamma)?,
        exponent: ctx.r.get("exponent", exponent, d.exponent)?,
        tau: ctx.r.get("tau", tau, d.tau)?,
        history_init: ctx.r.get("history", history, d.history_init)?,
        length: ctx.r.get("length", length, d.length)?,
        washout: ctx.r.get("washout", washout, d.washout)?,
    };
    let u = mackey_glass(&cfg)?;
    let mut t = ctx.table(&["t", "u"]);
    for (i, v) in u.into_iter().enumerate() {
        t.push(vec![Cell::Int((cfg.washout + i) as u64), v.into()])?;
    }
    Ok((Some(t), None))
}
