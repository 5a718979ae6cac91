//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any failed.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use bktirt::bkt::{fit_baum_welch, forward_filter, simulate_panel, FitOptions};
use bktirt::bridge::{classic_limit, equilibrium_p_correct};
use bktirt::experiment::{compare_to_irf, run_equilibrium_experiment, BinnedCurve, SimConfig};
use bktirt::irt::{fit_irf_cd, irf_4pl, irf_4pl_slope, irf_slope_max, logistic};
use bktirt::ising::{boltzmann_exact, Dynamics, IsingNetwork, ScanOrder};
use bktirt::markov::{
    build_matrices, marginal_at, sample_trajectory, stationary_closed_form, stationary_power_iteration, PowerStatus,
    POWER_MAX_ITERS, POWER_TOL,
};
use bktirt::rng::Stream;
use bktirt::{BktParams, Constraints, Irf4pl};
use common::{all_pairs_network, brute_force_loglik, sampler_gof, Fuzz};

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        ok,
        detail: detail.into(),
    }
}

fn bridge_identity() -> Outcome {
    let mut fuzz = Fuzz::new("accept.bridge");
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let p = fuzz.ergodic_params();
        let lambda = stationary_closed_form(&p).unwrap();
        let (_, b) = build_matrices(&p);
        let mixed = lambda.lambda0 * b.get(0, 1) + lambda.lambda1 * b.get(1, 1);
        let irt = equilibrium_p_correct(p.p_learn, p.p_forget, p.p_slip, p.p_guess);
        worst = worst.max((mixed - irt).abs());
    }
    outcome(
        worst <= 1e-12,
        format!("max |difference| {worst:.3e} over 10^4 draws (tol 1e-12)"),
    )
}

fn stationary_oracle() -> Outcome {
    let mut fuzz = Fuzz::new("accept.stationary");
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut n = 0;
    while n < 10_000 {
        let p = BktParams::new(0.5, fuzz.prob(), fuzz.prob(), 0.1, 0.1);
        if (1.0 - p.p_learn - p.p_forget).abs() >= 1.0 || p.p_learn + p.p_forget == 0.0 {
            continue;
        }
        n += 1;
        let closed = stationary_closed_form(&p).unwrap();
        let (a, _) = build_matrices(&p);
        let oracle = stationary_power_iteration(&a, POWER_TOL, POWER_MAX_ITERS);
        if oracle.status != PowerStatus::Converged {
            failures += 1;
            continue;
        }
        worst = worst
            .max((closed.lambda0 - oracle.dist[0]).abs())
            .max((closed.lambda1 - oracle.dist[1]).abs());
    }
    outcome(
        worst <= 1e-10 && failures == 0,
        format!("max |difference| {worst:.3e} over 10^4 draws, {failures} oracle failures (tol 1e-10)"),
    )
}

fn geometric_convergence() -> Outcome {
    let mut fuzz = Fuzz::new("accept.geometric");
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let p = BktParams::new(fuzz.prob(), fuzz.prob(), fuzz.prob(), 0.1, 0.1);
        if p.p_learn + p.p_forget == 0.0 {
            continue;
        }
        let lambda1 = p.p_learn / (p.p_learn + p.p_forget);
        let rate = (1.0 - p.p_learn - p.p_forget).abs();
        for t in 0..=200u64 {
            let lhs = (marginal_at(&p, t) - lambda1).abs();
            let rhs = rate.powi(t as i32) * (p.p_init - lambda1).abs();
            worst = worst.max((lhs - rhs).abs());
        }
    }
    outcome(
        worst <= 1e-10,
        format!("max |difference| {worst:.3e} over 1000 draws x 201 steps (tol 1e-10)"),
    )
}

fn desk_experiment(curves: &[BinnedCurve], config: &SimConfig) -> Outcome {
    let item = config.equilibrium_item();
    let devs: Vec<f64> = curves
        .iter()
        .map(|c| {
            compare_to_irf(c, &item, 200)
                .map(|x| x.max_abs_dev)
                .unwrap_or(f64::INFINITY)
        })
        .collect();
    let at_50 = curves
        .iter()
        .zip(&devs)
        .find(|(c, _)| c.iterations == 50)
        .map(|(_, d)| *d)
        .unwrap_or(f64::INFINITY);
    let decreasing = devs.windows(2).all(|w| w[1] < w[0]);
    let listed: Vec<String> = curves
        .iter()
        .zip(&devs)
        .map(|(c, d)| format!("T={}: {d:.4}", c.iterations))
        .collect();
    outcome(
        at_50 <= 0.05 && decreasing,
        format!(
            "max deviation {} (tol 0.05 at T=50, strictly decreasing)",
            listed.join(", ")
        ),
    )
}

fn asymptote_fit(curves: &[BinnedCurve]) -> Outcome {
    let Some(curve) = curves.iter().find(|c| c.iterations == 50) else {
        return outcome(false, "no T=50 curve");
    };
    match fit_irf_cd(&curve.points(), 1.0) {
        Ok(fit) => outcome(
            (0.05..=0.15).contains(&fit.c) && (0.85..=0.95).contains(&fit.d),
            format!("c = {:.4} in [0.05, 0.15], d = {:.4} in [0.85, 0.95]", fit.c, fit.d),
        ),
        Err(e) => outcome(false, format!("fit failed: {e}")),
    }
}

fn classic_tail() -> Outcome {
    let p = BktParams::new(0.0, 0.2, 0.0, 0.1, 0.25);
    let traj = sample_trajectory(&p, 100_000, &mut Stream::new(7, "accept.classic", [0; 4])).unwrap();
    let tail = &traj.emitted[1000..];
    let freq = tail.iter().map(|&x| f64::from(x)).sum::<f64>() / tail.len() as f64;
    let target = classic_limit(&p).unwrap();
    let sigma = (target * (1.0 - target) / tail.len() as f64).sqrt();
    let z = (freq - target) / sigma;
    outcome(
        z.abs() <= 3.0,
        format!("tail frequency {freq:.5} vs 1 - p_slip = {target} ({z:+.2} sigma, bound 3)"),
    )
}

fn em_properties() -> Outcome {
    let mut fuzz = Fuzz::new("accept.em");
    let sets = [
        Constraints::NONE,
        Constraints::classic(),
        Constraints::identified(),
        Constraints::both(),
    ];
    let mut worst_drop = 0.0f64;
    for k in 0..100 {
        let cons = sets[k % 4];
        let truth = BktParams::new(
            fuzz.prob(),
            fuzz.uniform(0.02, 0.6),
            if cons.classic { 0.0 } else { fuzz.uniform(0.0, 0.3) },
            fuzz.uniform(0.0, 0.45),
            fuzz.uniform(0.0, 0.45),
        );
        let panel = simulate_panel(
            &truth,
            40 + fuzz.index(60) as u32,
            5 + fuzz.index(15) as u32,
            0,
            k as u64,
        )
        .unwrap();
        let init = BktParams::new(
            fuzz.prob(),
            fuzz.prob(),
            if cons.classic { 0.0 } else { fuzz.prob() },
            fuzz.uniform(0.0, 0.49),
            fuzz.uniform(0.0, 0.49),
        );
        let report = fit_baum_welch(&panel, 0, &init, cons, FitOptions::default()).unwrap();
        for w in report.loglik_trace.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
        }
    }
    let truth = BktParams::new(0.2, 0.3, 0.0, 0.1, 0.2);
    let init = BktParams::new(0.4, 0.2, 0.0, 0.25, 0.25);
    let mut worst_err = 0.0f64;
    for seed in 0..10 {
        let panel = simulate_panel(&truth, 500, 20, 0, 1000 + seed).unwrap();
        let fit = fit_baum_welch(&panel, 0, &init, Constraints::both(), FitOptions::default())
            .unwrap()
            .params;
        let err = [
            fit.p_init - truth.p_init,
            fit.p_learn - truth.p_learn,
            fit.p_forget - truth.p_forget,
            fit.p_slip - truth.p_slip,
            fit.p_guess - truth.p_guess,
        ]
        .iter()
        .fold(0.0f64, |m, e| m.max(e.abs()));
        worst_err = worst_err.max(err);
    }
    outcome(
        worst_drop <= 1e-9 && worst_err <= 0.05,
        format!(
            "largest log-likelihood drop {worst_drop:.2e} over 100 fits (slack 1e-9); \
             largest recovery error {worst_err:.4} over 10 datasets (tol 0.05)"
        ),
    )
}

fn filter_vs_enumeration() -> Outcome {
    let mut fuzz = Fuzz::new("accept.filter");
    let mut worst = 0.0f64;
    let mut checked = 0;
    for _ in 0..40 {
        let p = BktParams::new(
            fuzz.uniform(0.01, 0.99),
            fuzz.uniform(0.01, 0.99),
            fuzz.uniform(0.01, 0.99),
            fuzz.uniform(0.01, 0.99),
            fuzz.uniform(0.01, 0.99),
        );
        for t_len in 1..=8 {
            for bits in 0..1usize << t_len {
                let x: Vec<u8> = (0..t_len).map(|t| ((bits >> t) & 1) as u8).collect();
                let fwd = forward_filter(&p, &x).unwrap().log_likelihood;
                worst = worst.max((fwd - brute_force_loglik(&p, &x)).abs());
                checked += 1;
            }
        }
    }
    outcome(
        worst <= 1e-10,
        format!("max |difference| {worst:.3e} over {checked} sequences (tol 1e-10)"),
    )
}

fn irf_suite() -> Outcome {
    let mut fuzz = Fuzz::new("accept.irf");
    let (mut asym, mut sym, mut mid, mut slope, mut grad) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let c = fuzz.uniform(0.0, 0.45);
        let d = fuzz.uniform(0.55, 1.0);
        let item = Irf4pl::new(fuzz.uniform(0.2, 3.0), fuzz.uniform(-3.0, 3.0), c, d).unwrap();
        asym = asym
            .max((irf_4pl(item.b - 60.0 / item.a, &item) - c).abs())
            .max((irf_4pl(item.b + 60.0 / item.a, &item) - d).abs());
        let x = fuzz.uniform(0.0, 4.0);
        sym = sym.max(((irf_4pl(item.b + x, &item) - c) - (d - irf_4pl(item.b - x, &item))).abs());
        mid = mid.max((irf_4pl(item.b, &item) - (c + d) / 2.0).abs());
        slope = slope
            .max((irf_4pl_slope(item.b, &item) - item.a * (d - c) / 4.0).abs())
            .max((irf_slope_max(&item) - item.a * (d - c) / 4.0).abs());
        let theta = fuzz.uniform(-6.0, 6.0);
        let h = 1e-5;
        let fd = (irf_4pl(theta + h, &item) - irf_4pl(theta - h, &item)) / (2.0 * h);
        grad = grad.max((fd - irf_4pl_slope(theta, &item)).abs());
    }
    let ok = asym <= 1e-12 && sym <= 1e-12 && mid <= 1e-15 && slope <= 1e-15 && grad <= 1e-6;
    outcome(
        ok,
        format!(
            "asymptote {asym:.1e}, symmetry {sym:.1e}, midpoint {mid:.1e}, slope {slope:.1e}, \
             finite difference {grad:.1e} (tol 1e-6) over 10^3 items"
        ),
    )
}

fn ising_oracle() -> Outcome {
    let mut fuzz = Fuzz::new("accept.ising");
    let mut lines = Vec::new();
    let mut ok = true;
    for n in 2..=4 {
        let net = all_pairs_network(&mut fuzz, n, 1.5);
        let exact = boltzmann_exact(&net).unwrap();
        for (d, dynamics) in [Dynamics::Glauber, Dynamics::Metropolis].into_iter().enumerate() {
            let rng = Stream::new(99, "accept.ising.chain", [n as u64, d as u64, 0, 0]);
            let gof = sampler_gof(&net, &exact, dynamics, ScanOrder::Fixed, rng, 1000, 1000, 0.001);
            ok &= gof.passes();
            lines.push(format!("n={n} {dynamics:?} {:.1}/{:.1}", gof.statistic, gof.critical));
        }
    }
    for (d, dynamics) in [Dynamics::Glauber, Dynamics::Metropolis].into_iter().enumerate() {
        for (k, h) in [0.0, 0.8].into_iter().enumerate() {
            let net = IsingNetwork::without_noise(vec![vec![0.0]], vec![h]).unwrap();
            let rng = Stream::new(99, "accept.ising.single", [d as u64, k as u64, 0, 0]);
            let exact = [1.0 - logistic(h), logistic(h)];
            let gof = sampler_gof(&net, &exact, dynamics, ScanOrder::Fixed, rng, 1000, 1000, 0.001);
            let dev = (gof.freq[1] - logistic(h)).abs();
            let within = dev <= 3.0 * gof.std_err[1];
            ok &= within;
            lines.push(format!(
                "single {dynamics:?} h={h}: |dev| {dev:.1e} vs 3se {:.1e}",
                3.0 * gof.std_err[1]
            ));
        }
    }
    outcome(
        ok,
        format!(
            "chi-square stat/critical at alpha 0.001, 10^6 sweeps: {}",
            lines.join("; ")
        ),
    )
}

fn main() -> ExitCode {
    let mut passed: Vec<bool> = Vec::new();
    let mut run = |id: u32, name: &'static str, budget: Duration, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let out = f();
        let elapsed = start.elapsed();
        let ok = out.ok && elapsed <= budget;
        println!(
            "{} criterion {id:>2} {name}: {} [{:.2} s, budget {} s]",
            if ok { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
        passed.push(ok);
    };
    let secs = Duration::from_secs;

    run(1, "bridge identity", secs(1), &mut bridge_identity);
    run(2, "stationary distribution", secs(5), &mut stationary_oracle);
    run(3, "geometric convergence", secs(1), &mut geometric_convergence);

    let config = SimConfig::desk(42);
    let mut curves = Vec::new();
    run(
        4,
        "desk-scale population simulation",
        secs(60),
        &mut || match run_equilibrium_experiment(&config) {
            Ok(c) => {
                curves = c;
                desk_experiment(&curves, &config)
            }
            Err(e) => outcome(false, format!("simulation failed: {e}")),
        },
    );
    run(5, "asymptote recovery", secs(1), &mut || asymptote_fit(&curves));
    run(6, "no-forgetting limit", secs(1), &mut classic_tail);
    run(7, "EM monotonicity and recovery", secs(120), &mut em_properties);
    run(8, "forward filter vs enumeration", secs(10), &mut filter_vs_enumeration);
    run(9, "IRF suite", secs(1), &mut irf_suite);
    run(10, "Ising sampler vs exact law", secs(30), &mut ising_oracle);

    let failed = passed.iter().filter(|ok| !**ok).count();
    println!("{} of {} criteria passed", passed.len() - failed, passed.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
