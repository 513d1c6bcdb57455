//! Oracles computed without the library's own solvers, plus random generators.
#![allow(dead_code)]

use hotrack::graph::Topology;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Routh array verdict for a monic polynomial given highest degree first.
/// Any zero or negative entry in the first column counts as unstable.
pub fn routh_hurwitz(coefficients: &[f64]) -> bool {
    let n = coefficients.len() - 1;
    if n == 0 {
        return true;
    }
    let width = n / 2 + 1;
    let row = |start: usize| -> Vec<f64> {
        (0..width).map(|j| coefficients.get(start + 2 * j).copied().unwrap_or(0.0)).collect()
    };
    let mut prev = row(0);
    let mut cur = row(1);
    if prev[0] <= 0.0 || cur[0] <= 0.0 {
        return false;
    }
    for _ in 2..=n {
        let mut next = vec![0.0; width];
        for j in 0..width - 1 {
            next[j] = (cur[0] * prev[j + 1] - prev[0] * cur[j + 1]) / cur[0];
        }
        if next[0] <= 0.0 {
            return false;
        }
        prev = cur;
        cur = next;
    }
    true
}

/// Solves `FᵀQ + QF = -ηI` through the `n² × n²` Kronecker system.
pub fn kronecker_lyapunov(f: &DMatrix<f64>, eta: f64) -> DMatrix<f64> {
    let n = f.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let ft = f.transpose();
    let system = id.kronecker(&ft) + ft.kronecker(&id);
    let rhs = DVector::from_iterator(n * n, (&id * -eta).iter().copied());
    let q = system.lu().solve(&rhs).expect("nonsingular Kronecker system");
    DMatrix::from_column_slice(n, n, q.as_slice())
}

/// `exp(A)` by scaling and squaring a truncated Taylor series.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.abs().row_sum().max();
    let squarings = if norm > 0.25 { (norm / 0.25).log2().ceil() as u32 } else { 0 };
    let scaled = a / 2f64.powi(squarings as i32);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=20 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Coefficients, highest degree first, of `Π (s - root)` for a conjugate-closed root set.
pub fn poly_from_roots(real: &[f64], complex: &[(f64, f64)]) -> Vec<f64> {
    let mut p = vec![1.0];
    let mul = |p: &[f64], q: &[f64]| {
        let mut out = vec![0.0; p.len() + q.len() - 1];
        for (i, a) in p.iter().enumerate() {
            for (j, b) in q.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        out
    };
    for &r in real {
        p = mul(&p, &[1.0, -r]);
    }
    for &(re, im) in complex {
        p = mul(&p, &[1.0, -2.0 * re, re * re + im * im]);
    }
    p
}

/// Real part with `|re| > 1e-6`, either sign.
pub fn off_axis_real<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let re: f64 = rng.gen_range(-3.0..3.0);
        if re.abs() > 1e-6 {
            return re;
        }
    }
}

/// Random monic polynomial of degree `1..=max_degree` with roots off the imaginary axis.
/// Returns the coefficients and whether every root is in the open left half plane.
pub fn random_polynomial<R: Rng>(rng: &mut R, max_degree: usize) -> (Vec<f64>, bool) {
    let degree = rng.gen_range(1..=max_degree);
    let stable_bias = rng.gen_bool(0.5);
    let mut real = Vec::new();
    let mut complex = Vec::new();
    let mut left = 0;
    while real.len() + 2 * complex.len() < degree {
        let mut re = off_axis_real(rng);
        if stable_bias {
            re = -re.abs();
        }
        left += usize::from(re < 0.0);
        if degree - real.len() - 2 * complex.len() >= 2 && rng.gen_bool(0.5) {
            complex.push((re, rng.gen_range(0.1..3.0)));
        } else {
            real.push(re);
        }
    }
    let stable = left == real.len() + complex.len();
    (poly_from_roots(&real, &complex), stable)
}

/// Connected undirected graph on `n` followers with a random nonempty leader set.
pub fn random_topology<R: Rng>(rng: &mut R, n: usize) -> Topology {
    let mut edges = Vec::new();
    for j in 2..=n {
        let parent = rng.gen_range(1..j);
        edges.push((parent, j, rng.gen_range(0.5..2.0)));
    }
    for i in 1..=n {
        for j in i + 1..=n {
            if !edges.iter().any(|&(a, b, _)| (a, b) == (i, j) || (a, b) == (j, i)) && rng.gen_bool(0.3) {
                edges.push((i, j, rng.gen_range(0.5..2.0)));
            }
        }
    }
    let mut links = Vec::new();
    for i in 1..=n {
        if rng.gen_bool(0.4) {
            links.push((i, rng.gen_range(0.5..2.0)));
        }
    }
    if links.is_empty() {
        links.push((rng.gen_range(1..=n), rng.gen_range(0.5..2.0)));
    }
    Topology::new(n, &edges, &links).expect("valid random topology")
}

/// Hurwitz matrix `S D S⁻¹` with a random left-half-plane real block spectrum `D`.
pub fn random_hurwitz<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(n, n);
    let mut i = 0;
    while i < n {
        let re = -rng.gen_range(0.05..5.0);
        if i + 1 < n && rng.gen_bool(0.5) {
            let im = rng.gen_range(0.1..5.0);
            d[(i, i)] = re;
            d[(i + 1, i + 1)] = re;
            d[(i, i + 1)] = im;
            d[(i + 1, i)] = -im;
            i += 2;
        } else {
            d[(i, i)] = re;
            i += 1;
        }
    }
    let s = DMatrix::from_fn(n, n, |r, c| if r == c { 2.0 } else { 0.0 } + rng.gen_range(-0.5..0.5));
    let inv = s.clone().try_inverse().expect("diagonally dominated");
    s * d * inv
}

pub fn scenario_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

use hotrack::sim::{closed_loop_derivative, Mode, Scenario, SystemState};

/// Everything follower `i` integrates, flattened.
pub fn follower_derivative(ds: &SystemState, i: usize) -> Vec<f64> {
    let mut v: Vec<f64> = ds.agents.row(i + 1).iter().copied().collect();
    v.push(ds.input.u_hat[i]);
    v.push(ds.input.d[i]);
    if let Some(first) = &ds.leader.first {
        v.push(first[i]);
    }
    v.extend(ds.leader.z.row(i).iter());
    v.extend(ds.own.z.row(i).iter());
    v
}

type Edit = Box<dyn Fn(&mut SystemState)>;

/// Perturbations of follower `j` that a neighbour must not be able to observe,
/// or every datum of `j` when `neighbour` is false.
fn hidden_data(s: &Scenario, j: usize, neighbour: bool, delta: f64) -> Vec<(String, Edit)> {
    let l = s.order;
    let mut out: Vec<(String, Edit)> = Vec::new();
    let from = if neighbour { 1 } else { 0 };
    for m in from..l {
        out.push((format!("x_{}_{}", j + 1, m + 1), Box::new(move |st| st.agents[(j + 1, m)] += delta)));
    }
    if !neighbour {
        out.push((format!("uhat_{}", j + 1), Box::new(move |st| st.input.u_hat[j] += delta)));
    }
    out.push((format!("d_{}", j + 1), Box::new(move |st| st.input.d[j] += delta)));
    if s.mode == Mode::Nonlinear && !neighbour {
        out.push((format!("xhat0_{}_1", j + 1), Box::new(move |st| st.leader.first.as_mut().unwrap()[j] += delta)));
    }
    // z_{0,j,2} feeds x̂_{0,j,2}, which neighbours may read.
    for m in from..l - 1 {
        out.push((format!("z0_{}_{}", j + 1, m + 2), Box::new(move |st| st.leader.z[(j, m)] += delta)));
    }
    for m in 0..l - 1 {
        out.push((format!("z_{}_{}", j + 1, m + 2), Box::new(move |st| st.own.z[(j, m)] += delta)));
    }
    out
}

/// Lists every datum whose perturbation leaks into a follower that should not see it.
pub fn masking_violations(s: &Scenario, state: &SystemState, t: f64) -> Vec<String> {
    let n = s.n_followers();
    let base = closed_loop_derivative(state, t, s).expect("finite derivative");
    let mut leaks = Vec::new();
    let mut check = |label: &str, edit: &dyn Fn(&mut SystemState), who: &[usize], tol: f64| {
        let mut st = state.clone();
        edit(&mut st);
        let ds = closed_loop_derivative(&st, t, s).expect("finite derivative");
        for &i in who {
            let (a, b) = (follower_derivative(&ds, i), follower_derivative(&base, i));
            if a.iter().zip(&b).any(|(x, y)| (x - y).abs() > tol * (1.0 + y.abs())) {
                leaks.push(format!("{label} reaches follower {}", i + 1));
            }
        }
    };
    for j in 0..n {
        for i in (0..n).filter(|&i| i != j) {
            let neighbour = s.topology.is_neighbor(i, j);
            for (label, edit) in hidden_data(s, j, neighbour, 0.37) {
                check(&label, edit.as_ref(), &[i], 0.0);
            }
        }
    }
    let everyone: Vec<usize> = (0..n).collect();
    for m in 1..s.order {
        check(&format!("x_0_{}", m + 1), &move |st: &mut SystemState| st.agents[(0, m)] += 0.37, &everyone, 0.0);
    }
    // Informed followers pass x_0_1 on inside x̂_{0,j,2}; hold that fixed so
    // only a direct path to an uninformed follower would show up.
    let uninformed: Vec<usize> = (0..n).filter(|&i| s.topology.leader_weight(i) == 0.0).collect();
    let c02 = s.gains.c0[1];
    let topology = s.topology.clone();
    let shift_leader = move |st: &mut SystemState| {
        st.agents[(0, 0)] += 0.37;
        for j in 0..n {
            st.leader.z[(j, 0)] -= topology.leader_weight(j) * c02 * 0.37;
        }
    };
    check("x_0_1", &shift_leader, &uninformed, 1e-12);
    leaks
}

/// A state with every entry drawn from `[-2, 2]` and positive adaptive gains.
pub fn random_state<R: Rng>(rng: &mut R, s: &Scenario) -> SystemState {
    let mut st = s.initial_state();
    st.agents.iter_mut().for_each(|v| *v = rng.gen_range(-2.0..2.0));
    st.input.u_hat.iter_mut().for_each(|v| *v = rng.gen_range(-2.0..2.0));
    st.input.d.iter_mut().for_each(|v| *v = rng.gen_range(0.1..2.0));
    if let Some(first) = st.leader.first.as_mut() {
        first.iter_mut().for_each(|v| *v = rng.gen_range(-2.0..2.0));
    }
    st.leader.z.iter_mut().for_each(|v| *v = rng.gen_range(-2.0..2.0));
    st.own.z.iter_mut().for_each(|v| *v = rng.gen_range(-2.0..2.0));
    st
}
