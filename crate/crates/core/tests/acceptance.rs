//! End-to-end acceptance run: one PASS/FAIL line per criterion.

mod common;

use std::time::{Duration, Instant};

use hotrack::cli::scenario_file::load_scenario;
use hotrack::graph::Topology;
use hotrack::models::LeaderInput;
use hotrack::observers::GainSet;
use hotrack::sim::{error_metrics, integrate, rk4_step, Mode, Scenario, TraceLog};
use hotrack::stability::{
    check_theorem2, eigenvalues, hurwitz, leader_observer_matrix, leader_observer_polynomial, lyapunov_residual,
    lyapunov_solve, self_observer_matrix, spectra_match, tracking_matrix, RealPolynomial, Verdict, HURWITZ_MARGIN,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{expm, masking_violations, random_hurwitz, random_polynomial, random_state, random_topology, routh_hurwitz};

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: String) -> Outcome {
    Outcome { ok, detail }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    o.detail = format!("{}; {:.2} s", o.detail, took.as_secs_f64());
    if let Some(limit) = limit {
        if took > limit {
            o.ok = false;
            o.detail = format!("{} exceeds {} s", o.detail, limit.as_secs_f64());
        }
    }
    o
}

fn benchmark_gains(n: usize) -> GainSet {
    GainSet::uniform(3, n, 3.0, 5.0, 4.0)
}

fn integrator_order() -> Outcome {
    let error = |dt: f64| {
        let steps = (1.0 / dt).round() as usize;
        let mut y = DVector::from_element(1, 1.0);
        for k in 0..steps {
            y = rk4_step(|_, y: &DVector<f64>| Ok::<_, ()>(-y), k as f64 * dt, &y, dt).unwrap();
        }
        (y[0] - (-1f64).exp()).abs()
    };
    let (coarse, fine) = (error(0.01), error(0.005));
    let ratio = coarse / fine;
    outcome(coarse < 1e-9 && ratio >= 14.0, format!("error {coarse:.2e}, halving ratio {ratio:.1}"))
}

fn linear_chain_scenario() -> Scenario {
    let mut s = Scenario::new(Mode::Linear, 3, Topology::chain(2).unwrap(), benchmark_gains(2));
    s.horizon = 5.0;
    s
}

/// Largest deviation of `signal(k)` from `exp(F t_k) signal(0)` over the log.
fn flow_deviation(log: &TraceLog, f: &DMatrix<f64>, signal: impl Fn(usize) -> Vec<f64>) -> f64 {
    let e0 = DVector::from_vec(signal(0));
    (0..log.records.len())
        .map(|k| {
            let predicted = expm(&(f * log.records[k].t)) * &e0;
            (DVector::from_vec(signal(k)) - predicted).amax()
        })
        .fold(0.0, f64::max)
}

fn tracking_flow(logs: &mut Vec<TraceLog>) -> Outcome {
    let s = linear_chain_scenario().with_exact_estimates().unwrap();
    let log = integrate(&s).unwrap();
    let f3 = tracking_matrix(&s.gains.k, &s.topology.matrices().coupling);
    let dev = flow_deviation(&log, &f3, |k| log.errors_at(k).e);
    logs.push(log);
    outcome(dev < 1e-6, format!("sup deviation {dev:.2e}"))
}

fn self_observer_flow(logs: &mut Vec<TraceLog>) -> Outcome {
    let mut s = linear_chain_scenario();
    s.leader_input = LeaderInput::sinusoid(1.0, 0.2 * std::f64::consts::PI, 0.0);
    let log = integrate(&s).unwrap();
    let f2 = self_observer_matrix(&s.gains.r, 2);
    let dev = flow_deviation(&log, &f2, |k| log.errors_at(k).e_x);
    logs.push(log);
    outcome(dev < 1e-6, format!("sup deviation {dev:.2e}"))
}

fn spectrum_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = String::from("none");
    let mut failures = 0;
    for _ in 0..50 {
        let l = rng.gen_range(3..=5);
        let n = rng.gen_range(1..=6);
        let t = random_topology(&mut rng, n);
        let gm = t.matrices();
        let c0: Vec<f64> = (0..l).map(|_| rng.gen_range(0.5..6.0)).collect();
        let eig = eigenvalues(&leader_observer_matrix(&c0, &gm.coupling));
        let roots: Vec<_> = gm
            .eigenvalues
            .iter()
            .flat_map(|&lambda| leader_observer_polynomial(&c0, lambda).roots().unwrap())
            .collect();
        if !spectra_match(&eig, &roots, 1e-6) || eig.len() != roots.len() {
            failures += 1;
            worst = format!("l={l} N={n} c0={c0:?}");
        }
    }
    outcome(failures == 0, format!("{failures}/50 mismatches (last: {worst})"))
}

fn hurwitz_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut disagreements = 0;
    let mut stable = 0;
    for _ in 0..500 {
        let (coefficients, truth) = random_polynomial(&mut rng, 8);
        let routh = routh_hurwitz(&coefficients);
        let verdict = hurwitz(&RealPolynomial::new(coefficients).unwrap(), HURWITZ_MARGIN).unwrap().stable;
        stable += usize::from(truth);
        disagreements += usize::from(verdict != routh || routh != truth);
    }
    outcome(disagreements == 0, format!("{disagreements}/500 disagreements, {stable} Hurwitz draws"))
}

fn lyapunov_quality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..50 {
        let n = rng.gen_range(1..=20);
        let f = random_hurwitz(&mut rng, n);
        match lyapunov_solve(&f, 1.0) {
            Ok(q) => {
                let rel = lyapunov_residual(&f, &q, 1.0) / q.norm();
                let pd = SymmetricEigen::new(q.clone()).eigenvalues.min() > 0.0;
                worst = worst.max(rel);
                failures += usize::from(!(rel < 1e-8 && pd));
            }
            Err(_) => failures += 1,
        }
    }
    outcome(failures == 0, format!("{failures}/50 failures, worst relative residual {worst:.2e}"))
}

fn five_follower_reproduction(logs: &mut Vec<TraceLog>) -> Outcome {
    let s = load_scenario(&common::scenario_path("five_followers_nonlinear.toml")).unwrap();
    let log = match integrate(&s) {
        Ok(log) => log,
        Err(e) => return outcome(false, format!("integration failed: {e}")),
    };
    let m = error_metrics(&log).unwrap();
    let horizon = s.horizon;
    let mut ok = true;
    let mut parts = Vec::new();
    for sig in &m.signals {
        let late = sig.sup_between(&m.times, 0.75 * horizon, horizon);
        let before = sig.sup_between(&m.times, 0.5 * horizon, 0.75 * horizon);
        let converged = sig.final_value < 1e-2;
        let no_growth = late <= before.max(1e-2);
        ok &= converged && no_growth;
        parts.push(format!("{} final {:.2e} late sup {:.2e}", sig.name, sig.final_value, late));
    }
    logs.push(log);
    outcome(ok, parts.join(", "))
}

fn gain_monotonicity(logs: &[TraceLog]) -> Outcome {
    let worst = logs
        .iter()
        .flat_map(|log| log.records.windows(2))
        .flat_map(|w| {
            let (a, b) = (&w[0].state.input.d, &w[1].state.input.d);
            (0..a.len()).map(move |i| b[i] - a[i])
        })
        .fold(f64::INFINITY, f64::min);
    outcome(worst >= -1e-9, format!("{} runs, smallest step change {worst:.2e}", logs.len()))
}

fn communication_footprint() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut leaks = Vec::new();
    let mut audits = 0;
    for mode in [Mode::Linear, Mode::Nonlinear] {
        for _ in 0..5 {
            let n = rng.gen_range(3..=6);
            let l = rng.gen_range(3..=5);
            let mut s = Scenario::new(mode, l, random_topology(&mut rng, n), GainSet::uniform(l, n, 2.0, 3.0, 4.0));
            s.leader_input = LeaderInput::sinusoid(1.0, 0.7, 0.2);
            if mode == Mode::Nonlinear {
                s.nonlinearity = hotrack::models::Nonlinearity::cosine_sum(l);
            }
            let st = random_state(&mut rng, &s);
            leaks.extend(masking_violations(&s, &st, 0.9));
            audits += 1;
        }
    }
    let detail = if leaks.is_empty() { "no leaks".to_string() } else { leaks.join("; ") };
    outcome(leaks.is_empty(), format!("{audits} audits, {} leaks ({detail})", leaks.len()))
}

fn linear_limit_checker() -> Outcome {
    let s = load_scenario(&common::scenario_path("linear_limit.toml")).unwrap();
    let report = check_theorem2(&s);
    let all_pass = report.clauses.iter().all(|c| c.verdict == Verdict::Pass);
    let mut bad = s.clone();
    bad.gains.k = vec![100.0, 1.0, 1.0];
    let failing: Vec<String> = check_theorem2(&bad).failing().iter().map(|c| c.to_string()).collect();
    let exact = failing == ["tracking_polynomial"];
    outcome(
        all_pass && exact,
        format!("linear limit all pass: {all_pass}; k=(100,1,1) fails {failing:?}"),
    )
}

fn main() {
    let mut logs = Vec::new();
    let secs = |s: u64| Some(Duration::from_secs(s));
    let results = [
        ("integrator order", timed(secs(1), integrator_order)),
        ("linear tracking flow", timed(secs(5), || tracking_flow(&mut logs))),
        ("self-observer decoupling", timed(secs(5), || self_observer_flow(&mut logs))),
        ("spectrum consistency", timed(secs(10), spectrum_consistency)),
        ("Hurwitz oracle agreement", timed(secs(5), hurwitz_agreement)),
        ("Lyapunov residual", timed(secs(10), lyapunov_quality)),
        ("five-follower reproduction", timed(secs(60), || five_follower_reproduction(&mut logs))),
        ("adaptive gain monotonicity", timed(None, || gain_monotonicity(&logs))),
        ("communication footprint", timed(None, communication_footprint)),
        ("linear-limit certificate", timed(None, linear_limit_checker)),
    ];
    let mut failed = 0;
    for (k, (name, o)) in results.iter().enumerate() {
        println!("{} criterion {}: {name}: {}", if o.ok { "PASS" } else { "FAIL" }, k + 1, o.detail);
        failed += usize::from(!o.ok);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
