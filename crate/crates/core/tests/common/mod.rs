//! Independent reference computations and parameter fixtures shared by the
//! integration tests. Nothing here calls the crate's numerics.
#![allow(dead_code)]

use nash_sir_core::{LcConvention, ModelParams};
use rand::Rng;

pub fn params(beta: f64, alpha: f64, a0: f64, a1: f64, a2: f64) -> ModelParams {
    ModelParams {
        beta,
        sigma: 0.2,
        gamma: 0.1,
        alpha,
        delta_init: 0.01,
        vaccine_time: 30.0,
        a0,
        a1,
        a2,
        lc_rate_convention: LcConvention::default(),
    }
}

/// Transmission at 1.5 times the carriage exit rate; distancing is active.
pub fn mild() -> ModelParams {
    params(0.45, 0.8, 10.0, 0.5, 0.5)
}

/// Fast transmission and costly sickness; three equilibria coexist.
pub fn severe() -> ModelParams {
    params(2.0, 1.0, 60.0, 0.5, 0.5)
}

/// Social activity is nearly worthless, so distancing costs little.
pub fn distancing_cheap() -> ModelParams {
    params(1.0, 0.8, 10.0, 0.5, 0.05)
}

pub fn no_transmission() -> ModelParams {
    params(0.0, 0.8, 10.0, 0.5, 0.5)
}

/// The shipped multiplicity example (`configs/multiplicity.toml`).
pub fn multiplicity() -> ModelParams {
    ModelParams {
        beta: 0.85,
        sigma: 0.125,
        gamma: 0.18,
        alpha: 0.62,
        delta_init: 0.02,
        vaccine_time: 22.5,
        a0: 18.0,
        a1: 0.44,
        a2: 0.67,
        lc_rate_convention: LcConvention::default(),
    }
}

/// Uniform draw on the 5-simplex.
pub fn simplex_point<R: Rng>(rng: &mut R) -> [f64; 5] {
    let e: [f64; 5] = core::array::from_fn(|_| -rng.gen_range(1e-12f64..1.0).ln());
    let sum: f64 = e.iter().sum();
    e.map(|v| v / sum)
}

/// Forward SIR-with-carriage right-hand side under common distancing `d`.
pub fn sir_rhs(y: &[f64; 5], d: f64, p: &ModelParams) -> [f64; 5] {
    let [s, c, i, _, _] = *y;
    let open = 1.0 - p.alpha * d;
    let new = p.beta * open * open * s * c;
    [-new, new - (p.sigma + p.gamma) * c, p.sigma * c - p.gamma * i, p.gamma * c, p.gamma * i]
}

/// Kutta's 3/8-rule fourth-order method with `n` uniform steps on `[0, t]`.
/// Returns every sample.
pub fn three_eighths<F: Fn(f64, &[f64; 5]) -> [f64; 5]>(f: F, y0: [f64; 5], t: f64, n: usize) -> Vec<[f64; 5]> {
    let h = t / n as f64;
    let mut out = Vec::with_capacity(n + 1);
    let mut y = y0;
    out.push(y);
    let add = |y: &[f64; 5], terms: &[(f64, &[f64; 5])]| -> [f64; 5] {
        core::array::from_fn(|j| y[j] + terms.iter().map(|(w, k)| w * k[j]).sum::<f64>())
    };
    for step in 0..n {
        let t0 = step as f64 * h;
        let k1 = f(t0, &y);
        let k2 = f(t0 + h / 3.0, &add(&y, &[(h / 3.0, &k1)]));
        let k3 = f(t0 + 2.0 * h / 3.0, &add(&y, &[(-h / 3.0, &k1), (h, &k2)]));
        let k4 = f(t0 + h, &add(&y, &[(h, &k1), (-h, &k2), (h, &k3)]));
        y = add(&y, &[(h / 8.0, &k1), (3.0 * h / 8.0, &k2), (3.0 * h / 8.0, &k3), (h / 8.0, &k4)]);
        out.push(y);
    }
    out
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn quad<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64, m: f64, fm: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        rec(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1) + rec(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, m, fm, whole, tol, 48)
}

/// Continuation losses `(L_S, L_C, L_I)` at the vaccine time by quadrature
/// over the transmission-free future. Well agents lose `a₂ I` (nobody
/// distances, availability `1 − I`); sick agents lose everything.
pub fn post_vaccine_losses(c: f64, i: f64, p: &ModelParams) -> [f64; 3] {
    let (sg, g) = (p.sigma, p.gamma);
    let k = sg + g;
    let full = p.a0 + p.a1 + p.a2;
    // Population sickness: I' = σC − γI with C = c e^{−ks}.
    let sick = move |s: f64| (-g * s).exp() * i + c * sg / (k - g) * ((-g * s).exp() - (-k * s).exp());
    // Individual carrier: probability of being sick at s.
    let p_sick_from_c = move |s: f64| sg / (k - g) * ((-g * s).exp() - (-k * s).exp());
    let end = 60.0 / g.min(k);
    let tol = 1e-11;
    let l_s = quad(&|s| p.a2 * sick(s), 0.0, end, tol);
    let l_i = quad(&|s| { let q = (-g * s).exp(); q * full + (1.0 - q) * p.a2 * sick(s) }, 0.0, end, tol);
    let l_c = quad(&|s| { let q = p_sick_from_c(s); q * full + (1.0 - q) * p.a2 * sick(s) }, 0.0, end, tol);
    [l_s, l_c, l_i]
}

/// Largest mass error and largest monotonicity violation (S rising, R_C or
/// R_I falling) along a forward-ordered sequence of states.
pub fn physical_violations(states: &[[f64; 5]]) -> (f64, f64) {
    let mass = states.iter().map(|y| (y.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
    let mono = states
        .windows(2)
        .map(|w| (w[1][0] - w[0][0]).max(w[0][3] - w[1][3]).max(w[0][4] - w[1][4]))
        .fold(0.0, f64::max);
    (mass, mono)
}
