//! Step-by-step recursions used as independent references.
//!
//! Nothing here calls into the closed forms; each function iterates the
//! defining difference equations directly.

#![allow(dead_code)]

use rand::Rng;

pub struct Flows {
    pub active: Vec<f64>,
    pub entering: Vec<f64>,
    pub exiting: Vec<f64>,
}

/// Geometric law: `in_t = n J_{t-1}` on the cumulative joined count `J`
/// (equal to `N_{t-1}` before any exit), `out_t = in_{t-T}`, `in_0 = N0`.
pub fn geometric(n0: f64, n: f64, lock: Option<usize>, horizon: usize) -> Flows {
    let mut f = Flows {
        active: vec![n0],
        entering: vec![n0],
        exiting: vec![0.0],
    };
    let mut joined = n0;
    for t in 1..=horizon {
        let inflow = n * joined;
        joined += inflow;
        let outflow = match lock {
            Some(l) if t >= l => f.entering[t - l],
            _ => 0.0,
        };
        f.entering.push(inflow);
        f.exiting.push(outflow);
        f.active.push(f.active[t - 1] + inflow - outflow);
    }
    f
}

/// Quasi-logistic law via the Beverton-Holt map for the never-withdrawn count:
/// `M_t = (1+n) M_{t-1} / (1 + n M_{t-1}/N)`.
pub fn quasi_logistic(n0: f64, pool: f64, n: f64, lock: Option<usize>, horizon: usize) -> Flows {
    let mut joined = vec![n0];
    for t in 1..=horizon {
        let m = joined[t - 1];
        joined.push((1.0 + n) * m / (1.0 + n * m / pool));
    }
    let mut f = Flows {
        active: vec![n0],
        entering: vec![n0],
        exiting: vec![0.0],
    };
    for t in 1..=horizon {
        let inflow = joined[t] - joined[t - 1];
        let outflow = match lock {
            Some(l) if t >= l => f.entering[t - l],
            _ => 0.0,
        };
        f.entering.push(inflow);
        f.exiting.push(outflow);
        f.active.push(f.active[t - 1] + inflow - outflow);
    }
    f
}

pub struct Sir {
    pub s: Vec<f64>,
    pub i: Vec<f64>,
    pub r: Vec<f64>,
    pub entering: Vec<f64>,
    pub exiting: Vec<f64>,
}

/// Implicit non-standard system, solved step by step:
/// `S_t = S_{t-1} - beta S_t I_{t-1}/(N - R_{t-1})`,
/// `I_t = I_{t-1} + beta S_t I_{t-1}/(N - R_{t-1}) - gamma I_t`,
/// `R_t = R_{t-1} + gamma I_t`, with gamma switched off for `t <= delay`.
pub fn nssir(
    s0: f64,
    i0: f64,
    r0: f64,
    beta: f64,
    gamma: f64,
    delay: usize,
    horizon: usize,
) -> Sir {
    let n = s0 + i0 + r0;
    let mut o = Sir {
        s: vec![s0],
        i: vec![i0],
        r: vec![r0],
        entering: vec![i0],
        exiting: vec![0.0],
    };
    for t in 1..=horizon {
        let g = if t <= delay { 0.0 } else { gamma };
        let (s, i, r) = (o.s[t - 1], o.i[t - 1], o.r[t - 1]);
        let contact = beta * i / (n - r);
        let s_new = s / (1.0 + contact);
        let inflow = contact * s_new;
        let i_new = (i + inflow) / (1.0 + g);
        o.s.push(s_new);
        o.i.push(i_new);
        o.r.push(r + g * i_new);
        o.entering.push(inflow);
        o.exiting.push(g * i_new);
    }
    o
}

/// Standard explicit SIR update.
pub fn sir_standard(s0: f64, i0: f64, r0: f64, beta: f64, gamma: f64, horizon: usize) -> Sir {
    let n = s0 + i0 + r0;
    let mut o = Sir {
        s: vec![s0],
        i: vec![i0],
        r: vec![r0],
        entering: vec![i0],
        exiting: vec![0.0],
    };
    for t in 1..=horizon {
        let (s, i, r) = (o.s[t - 1], o.i[t - 1], o.r[t - 1]);
        let inflow = beta * s * i / n;
        let outflow = gamma * i;
        o.s.push(s - inflow);
        o.i.push(i + inflow - outflow);
        o.r.push(r + outflow);
        o.entering.push(inflow);
        o.exiting.push(outflow);
    }
    o
}

/// Budget equation `K_t = (1+i) K_{t-1} + (in_t - out_t - r N_{t-1}) I0`.
pub fn budget(
    active: &[f64],
    entering: &[f64],
    exiting: &[f64],
    k0_pro: f64,
    deposit: f64,
    r: f64,
    i: f64,
) -> Vec<f64> {
    let mut k = vec![k0_pro + deposit * active[0]];
    for t in 1..active.len() {
        let flow = entering[t] - exiting[t] - r * active[t - 1];
        k.push((1.0 + i) * k[t - 1] + flow * deposit);
    }
    k
}

/// `x_t = (1+rate) x_{t-1} + sum_j c_j (1+n_j)^{t-1}` from `x_{start}`.
pub fn linear_recurrence(
    rate: f64,
    initial: f64,
    start: usize,
    terms: &[(f64, f64)],
    t: usize,
) -> f64 {
    let mut x = initial;
    for k in start + 1..=t {
        let forcing: f64 = terms
            .iter()
            .map(|(c, n)| c * (1.0 + n).powi(k as i32 - 1))
            .sum();
        x = (1.0 + rate) * x + forcing;
    }
    x
}

/// Reference-model recursions, one value per period `0..=steps`.
pub fn atici(r_n: f64, r_i: f64, r_w: f64, r_p: f64, d0: f64, k0: f64, steps: usize) -> Vec<f64> {
    let alpha = (1.0 + r_p) * (1.0 - r_w) - 1.0;
    let beta = r_w * (1.0 + r_p) * d0;
    let mut k = vec![k0];
    let mut w = 0.0;
    for t in 1..=steps {
        let d_prev = d0 * (1.0 + r_i).powi(t as i32 - 1);
        k.push((1.0 + r_n) * k[t - 1] + d_prev - w);
        w = (1.0 + alpha) * w + beta * (1.0 + r_i).powi(t as i32 - 1);
    }
    k
}

pub fn stylistic(i0: f64, g: f64, r: f64, c: f64, steps: usize) -> Vec<f64> {
    let mut k = vec![i0];
    let mut inflow = i0;
    for t in 1..=steps {
        let prev = inflow;
        inflow *= 1.0 + g;
        k.push(k[t - 1] + inflow - prev * (1.0 + r) - c);
    }
    k
}

pub fn spreadsheet(k0: f64, deposits: f64, i: f64, r: f64, w: f64, steps: usize) -> Vec<f64> {
    let mut k = vec![k0];
    let mut liabilities = deposits;
    for t in 1..=steps {
        let payout = w * liabilities;
        k.push((1.0 + i) * (k[t - 1] + deposits - payout));
        liabilities = (liabilities - payout) * (1.0 + r) + deposits;
    }
    k
}

pub fn parlar(c0: f64, u0: f64, r_hat: f64, r: f64, s0: f64, steps: usize) -> Vec<f64> {
    let mut c = vec![c0];
    let mut s = s0;
    let mut u = u0;
    for t in 1..=steps {
        c.push(c[t - 1] + u - r * s);
        s += u;
        u *= 1.0 + r_hat;
    }
    c
}

/// Relative agreement with an absolute floor.
pub fn agrees(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    let d = (a - b).abs();
    d <= abs || d <= rel * a.abs().max(b.abs())
}

/// Worst relative deviation over two series, ignoring entries inside `abs`.
pub fn worst(a: &[f64], b: &[f64], abs: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y).abs();
            if d <= abs {
                0.0
            } else {
                d / x.abs().max(y.abs())
            }
        })
        .fold(0.0, f64::max)
}

pub fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..=hi)
}
