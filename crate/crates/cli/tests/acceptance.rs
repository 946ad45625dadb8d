//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `cargo test -p gatecrit-cli --test acceptance` runs all twelve; pass
//! criterion numbers after `--` to run a subset. A criterion that cannot be
//! evaluated at all (a configuration or numerical error) makes the target exit
//! nonzero; a measured value outside its band prints FAIL and does not.

use std::collections::BTreeMap;
use std::process::Command;
use std::time::Instant;

use gatecrit::criterion::{
    appendix_a_moment, boundary_sum, critical_gain, gc_gaussian_asymptotic, monotonicity_check, sample_triple,
    sigma_sq_mean,
};
use gatecrit::disorder::OutputBias;
use gatecrit::dynamics::step;
use gatecrit::lyapunov::{
    benettin_lambda_max, benettin_map, find_crossing, perturbation_direction, BenettinOptions, CrossingEstimate,
    CrossingOptions,
};
use gatecrit::observables::{estimate_q_inf, QOptions};
use gatecrit::reservoir::{rc_heatmap, rc_ratio_sweep, RcConfig};
use gatecrit::rng::derive_seed;
use gatecrit::spectrum::{radius_vs_gain_sweep, PowerOptions};
use gatecrit::{realize, ArchitectureSpec, BiasScheme, Exec, HiddenState, NetworkConfig, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Verdict = Result<(bool, String)>;

const RATIOS: [f64; 8] = [0.5, 0.75, 0.9, 1.0, 1.1, 1.25, 1.5, 2.0];

/// Crossings shared between criteria 2 and 3, keyed by (arch, s_b).
#[derive(Default)]
struct Cache {
    crossings: BTreeMap<(String, u64), std::result::Result<CrossingEstimate, String>>,
}

impl Cache {
    fn crossing(&mut self, arch: ArchitectureSpec, s_b: f64) -> Result<std::result::Result<CrossingEstimate, String>> {
        let key = (arch.kind.to_string(), s_b.to_bits());
        if let Some(c) = self.crossings.get(&key) {
            return Ok(c.clone());
        }
        let pred = gc_gaussian_asymptotic(&arch, s_b)?.g_c;
        let scheme = if s_b == 0.0 { BiasScheme::zero() } else { BiasScheme::gaussian(s_b) };
        let cfg = NetworkConfig::new(arch, 1000, scheme, 2024);
        let mut opts = CrossingOptions::new(0.75 * pred, 1.25 * pred, 10);
        opts.interior = 2;
        opts.benettin = BenettinOptions { t: 3000, ..Default::default() };
        opts.exec = Exec::Parallel;
        let c = match find_crossing(&cfg, &opts) {
            Ok(c) => Ok(c),
            Err(e @ gatecrit::Error::Bracket { .. }) => Err(e.to_string()),
            Err(e) => return Err(e),
        };
        self.crossings.insert(key, c.clone());
        Ok(c)
    }
}

fn c1() -> Verdict {
    let mut ok = true;
    let mut seen = Vec::new();
    for (arch, want) in [("lstm", "g_c = 2"), ("gru", "g_c = 2"), ("rnn", "g_c = 1")] {
        let o = Command::new(env!("CARGO_BIN_EXE_gatecrit"))
            .args(["gc", "--arch", arch, "--bias", "zero"])
            .output()
            .expect("binary runs");
        let got = String::from_utf8_lossy(&o.stdout).trim().to_string();
        ok &= o.status.success() && got == want;
        seen.push(format!("{arch}: '{got}'"));
    }
    Ok((ok, seen.join(", ")))
}

fn c2(cache: &mut Cache) -> Verdict {
    let mut ok = true;
    let mut detail = Vec::new();
    for arch in [ArchitectureSpec::lstm(), ArchitectureSpec::gru()] {
        match cache.crossing(arch, 0.0)? {
            Ok(c) => {
                let pass = (1.9..=2.1).contains(&c.g_star) && (c.g_star - 2.0).abs() <= c.ci95_halfwidth;
                ok &= pass;
                detail.push(format!("{}: g* = {:.4} +/- {:.4}", arch.kind, c.g_star, c.ci95_halfwidth));
            }
            Err(e) => {
                ok = false;
                detail.push(format!("{}: {e}", arch.kind));
            }
        }
    }
    Ok((ok, detail.join("; ")))
}

fn c3(cache: &mut Cache) -> Verdict {
    let mut ok = true;
    let mut detail = Vec::new();
    for arch in [ArchitectureSpec::lstm(), ArchitectureSpec::gru()] {
        for s_b in [0.0, 1.0, 2.0, 3.0] {
            let pred = gc_gaussian_asymptotic(&arch, s_b)?.g_c;
            match cache.crossing(arch, s_b)? {
                Ok(c) => {
                    let pass = (c.g_star - pred).abs() <= c.ci95_halfwidth;
                    ok &= pass;
                    detail.push(format!(
                        "{} s_b={s_b}: g* = {:.4} +/- {:.4} vs {:.4}{}",
                        arch.kind,
                        c.g_star,
                        c.ci95_halfwidth,
                        pred,
                        if pass { "" } else { " (outside)" }
                    ));
                }
                Err(e) => {
                    ok = false;
                    detail.push(format!("{} s_b={s_b}: predicted {pred:.4}, {e}", arch.kind));
                }
            }
        }
    }
    Ok((ok, detail.join("; ")))
}

fn c4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(1..300);
        let s_b = rng.gen_range(0.0..4.0);
        let cfg = NetworkConfig::new(ArchitectureSpec::gru(), n, BiasScheme::gaussian(s_b), rng.gen());
        let t = sample_triple(&cfg)?;
        let got = critical_gain(&t)?.g_c;
        let want = (t.r().iter().map(|r| r * r).sum::<f64>() / n as f64).powf(-0.5);
        worst = worst.max((got - want).abs() / want);
    }
    Ok((worst <= 1e-12, format!("max relative deviation {worst:.2e} over 100 triples")))
}

fn c5() -> Verdict {
    let mut ok = true;
    let mut spread = 0.0f64;
    for seed in 0..20u64 {
        for s_o in [0.5, 1.0, 2.0] {
            let g: Vec<f64> = [10.0, 100.0, 1000.0]
                .iter()
                .map(|&t_max| {
                    let scheme = BiasScheme::chrono(t_max, OutputBias::Gaussian { sd: s_o });
                    critical_gain(&sample_triple(&NetworkConfig::new(ArchitectureSpec::lstm(), 200, scheme, seed))?)
                        .map(|p| p.g_c)
                })
                .collect::<Result<_>>()?;
            ok &= g[0].to_bits() == g[1].to_bits() && g[1].to_bits() == g[2].to_bits();
            spread = spread.max(g.iter().cloned().fold(f64::MIN, f64::max) - g.iter().cloned().fold(f64::MAX, f64::min));
        }
        for t_max in [10.0, 100.0, 1000.0] {
            let scheme = BiasScheme::chrono(t_max, OutputBias::Zero);
            let g = critical_gain(&sample_triple(&NetworkConfig::new(ArchitectureSpec::lstm(), 200, scheme, seed))?)?.g_c;
            ok &= g == 2.0;
        }
    }
    Ok((ok, format!("max spread across T_max {spread:e}; b_o = 0 gives exactly 2: {ok}")))
}

fn c6() -> Verdict {
    let cfg = NetworkConfig::new(ArchitectureSpec::lstm(), 2000, BiasScheme::zero(), 6);
    let rows = radius_vs_gain_sweep(&cfg, &[2.0], 5, &PowerOptions::default(), Exec::Parallel)?;
    let radii = &rows[0].per_replica;
    let ok = radii.iter().all(|r| (0.95..=1.05).contains(r));
    let list: Vec<String> = radii.iter().map(|r| format!("{r:.4}")).collect();
    Ok((ok, format!("radii [{}], all converged: {}", list.join(", "), rows[0].all_converged)))
}

fn c7() -> Verdict {
    let cfg = NetworkConfig::new(ArchitectureSpec::lstm(), 500, BiasScheme::zero(), 7);
    let mut opts = QOptions::new(2000, 10);
    opts.exec = Exec::Parallel;
    let lo = estimate_q_inf(&cfg, 1.0, &opts)?.mean_q_inf;
    let hi = estimate_q_inf(&cfg, 3.0, &opts)?.mean_q_inf;
    Ok((lo < 1e-6 && hi > 0.01, format!("q(g=1) = {lo:.3e}, q(g=3) = {hi:.4}")))
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn c8() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let draws = 10_000_000;
    let mut ok = true;
    let mut detail = Vec::new();
    for s_b in [0.5, 1.0, 2.0] {
        let mut acc = 0.0;
        for _ in 0..draws {
            let z: f64 = rng.sample(StandardNormal);
            acc += sigmoid(s_b * z).powi(2);
        }
        let mc = acc / draws as f64;
        let q = sigma_sq_mean(s_b)?;
        let rel = (q - mc).abs() / mc;
        ok &= rel <= 1e-3;
        detail.push(format!("s_b={s_b}: rel {rel:.1e}"));
    }
    let mut acc = 0.0;
    for _ in 0..draws {
        let z: f64 = rng.sample(StandardNormal);
        acc += (1.0 - sigmoid(z)).powi(-2);
    }
    let mc = acc / draws as f64;
    let m = appendix_a_moment(1.0);
    let rel = (m - mc).abs() / mc;
    ok &= rel <= 0.01;
    detail.push(format!("moment(1) = {m:.5} vs {mc:.5} (rel {rel:.1e})"));
    Ok((ok, detail.join(", ")))
}

fn c9() -> Verdict {
    let grid: Vec<f64> = (0..20).map(|k| 5.0 * k as f64 / 19.0).collect();
    let mono = monotonicity_check(&grid)?;
    let gc = grid
        .iter()
        .map(|&s| gc_gaussian_asymptotic(&ArchitectureSpec::gru(), s).map(|p| p.g_c))
        .collect::<Result<Vec<_>>>()?;
    let dec = gc.windows(2).all(|w| w[1] < w[0]);
    Ok((
        mono.increasing && dec,
        format!("sigma_sq_mean margin {:.3e}; GRU g_c from {:.4} to {:.4}, decreasing: {dec}", mono.margin, gc[0], gc[19]),
    ))
}

fn rc_seeds(n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| derive_seed(10, i)).collect()
}

fn c10() -> Verdict {
    let cfg = RcConfig::new(ArchitectureSpec::lstm(), 500);
    let runs = rc_ratio_sweep(&cfg, 0.0, &RATIOS, &rc_seeds(5), Exec::Parallel)?;
    let gc = gc_gaussian_asymptotic(&ArchitectureSpec::lstm(), 0.0)?.g_c;
    let mean = |ratio: f64, f: fn(&gatecrit::reservoir::RcRunResult) -> f64| {
        let v: Vec<f64> = runs.iter().filter(|r| (r.g / gc - ratio).abs() < 1e-9).map(f).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let test: Vec<f64> = RATIOS.iter().map(|&r| mean(r, |x| x.test_mse)).collect();
    let best = RATIOS[test.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0];
    let (tr_lo, tr_hi) = (mean(0.5, |x| x.train_mse), mean(2.0, |x| x.train_mse));
    let argmin_ok = (0.9..=1.3).contains(&best);
    let train_ok = tr_hi < tr_lo;
    Ok((
        argmin_ok && train_ok,
        format!(
            "test-MSE argmin at g/g_c = {best} ({}); train MSE {tr_hi:.2e} at 2.0 vs {tr_lo:.2e} at 0.5 ({})",
            if argmin_ok { "in band" } else { "outside band" },
            if train_ok { "lower" } else { "not lower" }
        ),
    ))
}

fn c11() -> Verdict {
    let cfg = RcConfig::new(ArchitectureSpec::lstm(), 500);
    let sbs = [0.0, 1.0, 2.0];
    let map = rc_heatmap(&cfg, &sbs, &RATIOS, &rc_seeds(5), Exec::Parallel)?;
    let s = map.column("s_b").unwrap();
    let ratio = map.column("g_over_gc").unwrap();
    let acc = map.column("normalized_accuracy").unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for &sb in &sbs {
        let best = (0..s.len())
            .filter(|&i| s[i] == sb)
            .max_by(|&a, &b| acc[a].total_cmp(&acc[b]))
            .map(|i| ratio[i])
            .unwrap();
        let pass = (0.9..=1.3).contains(&best);
        ok &= pass;
        detail.push(format!("s_b={sb}: argmax {best}{}", if pass { "" } else { " (outside)" }));
    }
    Ok((ok, detail.join(", ")))
}

fn c12() -> Verdict {
    let mut detail = Vec::new();
    let mut ok = true;

    // Linear maps: the exponent is ln c exactly. The reference sits at the
    // origin so an expanding map cannot swamp the separation in rounding.
    let short = BenettinOptions { t: 600, transient: 100, ..Default::default() };
    let mut lin = 0.0f64;
    for c in [0.3, 0.9, 1.1, 2.0] {
        let dir = perturbation_direction(3, 8);
        let est = benettin_map(|x| x.iter_mut().for_each(|v| *v *= c), &[0.0; 8], &dir, &short)?;
        lin = lin.max((est.lambda_max - f64::ln(c)).abs());
    }
    // Zero gain contracts the LSTM by exactly 1/2 per step.
    let real = realize(&NetworkConfig::new(ArchitectureSpec::lstm(), 100, BiasScheme::zero(), 12))?;
    let z = benettin_lambda_max(&real, 0.0, &HiddenState::constant(100, 1.0), &short)?;
    lin = lin.max((z.lambda_max - 0.5f64.ln()).abs());
    ok &= lin < 1e-6;
    detail.push(format!("linear oracle err {lin:.1e}"));

    // Separation-size robustness.
    let real = realize(&NetworkConfig::new(ArchitectureSpec::lstm(), 200, BiasScheme::zero(), 21))?;
    let h0 = HiddenState::constant(200, 1.0);
    let mut eps_ok = true;
    for g in [1.5, 2.5] {
        let est = [1e-9, 1e-7, 1e-5]
            .iter()
            .map(|&eps| benettin_lambda_max(&real, g, &h0, &BenettinOptions { eps, ..Default::default() }))
            .collect::<Result<Vec<_>>>()?;
        for a in &est {
            for b in &est {
                let tol = (3.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt()).max(1e-6);
                eps_ok &= (a.lambda_max - b.lambda_max).abs() <= tol;
            }
        }
    }
    ok &= eps_ok;
    detail.push(format!("eps robustness {eps_ok}"));

    // The origin is a fixed point when candidate biases vanish.
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut fixed = true;
    for _ in 0..1000 {
        let arch = [ArchitectureSpec::rnn(), ArchitectureSpec::lstm(), ArchitectureSpec::gru()][rng.gen_range(0..3)];
        let s_b = rng.gen_range(0.0..3.0);
        let scheme = match (arch.kind, rng.gen_range(0..3)) {
            (gatecrit::ArchKind::Rnn, _) | (_, 0) => BiasScheme::zero(),
            (gatecrit::ArchKind::Lstm, 2) => BiasScheme::chrono(rng.gen_range(3.0..1000.0), OutputBias::Gaussian { sd: s_b }),
            _ => BiasScheme::gaussian(s_b),
        };
        let n = rng.gen_range(1..40);
        let real = realize(&NetworkConfig::new(arch, n, scheme, rng.gen()))?;
        let next = step(&real, rng.gen_range(0.0..5.0), &HiddenState::zeros(n), None)?;
        fixed &= next.h.iter().all(|&v| v == 0.0);
    }
    ok &= fixed;
    detail.push(format!("step(0) = 0 on 1000 configs {fixed}"));

    // z = 1 maximizes the boundary sum on the unit circle.
    let mut maximal = true;
    for k in 0..100u64 {
        let arch = [ArchitectureSpec::rnn(), ArchitectureSpec::lstm(), ArchitectureSpec::gru()][(k % 3) as usize];
        let t = sample_triple(&NetworkConfig::new(arch, 50, BiasScheme::gaussian(rng.gen_range(0.0..3.0)), k))?;
        let g = rng.gen_range(0.1..3.0);
        let at_one = boundary_sum(&t, g, Complex64::new(1.0, 0.0))?;
        for _ in 0..100 {
            let th = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            maximal &= at_one >= boundary_sum(&t, g, Complex64::from_polar(1.0, th))? * (1.0 - 1e-12);
        }
    }
    ok &= maximal;
    detail.push(format!("z = 1 maximal on 10^4 samples {maximal}"));
    Ok((ok, detail.join(", ")))
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |k: usize| selected.is_empty() || selected.contains(&k);
    let mut cache = Cache::default();
    let mut errors = 0;
    let mut failed = 0;
    let names = [
        "zero-bias closed form",
        "empirical crossing, zero bias",
        "gaussian phase diagram",
        "GRU collapse identity",
        "chrono invariance",
        "spectral touching",
        "order parameter",
        "quadrature vs Monte Carlo",
        "monotonicity",
        "reservoir optimum",
        "heatmap ridge",
        "oracles and invariants",
    ];
    for (i, name) in names.iter().enumerate() {
        let k = i + 1;
        if !want(k) {
            continue;
        }
        let start = Instant::now();
        let v = match k {
            1 => c1(),
            2 => c2(&mut cache),
            3 => c3(&mut cache),
            4 => c4(),
            5 => c5(),
            6 => c6(),
            7 => c7(),
            8 => c8(),
            9 => c9(),
            10 => c10(),
            11 => c11(),
            _ => c12(),
        };
        let secs = start.elapsed().as_secs_f64();
        match v {
            Ok((true, d)) => println!("PASS {k:>2} {name}: {d} [{secs:.1}s]"),
            Ok((false, d)) => {
                failed += 1;
                println!("FAIL {k:>2} {name}: {d} [{secs:.1}s]");
            }
            Err(e) => {
                errors += 1;
                println!("FAIL {k:>2} {name}: not evaluated: {e} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {failed} criteria outside their bands, {errors} not evaluated");
    if errors > 0 {
        std::process::exit(1);
    }
}
