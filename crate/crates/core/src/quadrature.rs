//! Gauss–Legendre rules and an adaptive panel integrator.

use std::sync::OnceLock;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi's initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const PANEL_ORDER: usize = 16;
const MAX_DEPTH: u32 = 40;

fn panel_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_ORDER))
}

fn panel<const N: usize>(f: &impl Fn(f64) -> [f64; N], a: f64, b: f64) -> [f64; N] {
    let (x, w) = panel_rule();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = [0.0; N];
    for (xi, wi) in x.iter().zip(w) {
        let v = f(mid + half * xi);
        for (a, v) in acc.iter_mut().zip(v) {
            *a += wi * v;
        }
    }
    acc.map(|a| a * half)
}

/// Integrates a vector-valued function over `[a, b]`.
///
/// Each panel is bisected until the one-panel estimate and the sum of its two
/// halves agree to `rel_tol` relative to the magnitude of component 0 over the
/// whole interval. All components share that scale, which suits integrands
/// whose other components are bounded by component 0.
pub fn integrate_adaptive<const N: usize>(
    f: impl Fn(f64) -> [f64; N],
    a: f64,
    b: f64,
    rel_tol: f64,
) -> [f64; N] {
    const SEED_PANELS: usize = 8;
    let width = (b - a) / SEED_PANELS as f64;
    let mut stack: Vec<(f64, f64, [f64; N], u32)> = (0..SEED_PANELS)
        .map(|k| {
            let lo = a + k as f64 * width;
            let hi = if k + 1 == SEED_PANELS { b } else { lo + width };
            (lo, hi, panel(&f, lo, hi), 0)
        })
        .collect();
    let scale = stack
        .iter()
        .map(|p| p.2[0])
        .sum::<f64>()
        .abs()
        .max(f64::MIN_POSITIVE);

    let mut total = [0.0; N];
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = panel(&f, lo, mid);
        let right = panel(&f, mid, hi);
        let share = (hi - lo) / (b - a);
        let converged = (0..N).all(|c| {
            let diff = (left[c] + right[c] - whole[c]).abs();
            diff <= rel_tol * scale * share.max(1e-3) || diff <= 1e-300
        });
        if converged || depth >= MAX_DEPTH {
            for c in 0..N {
                total[c] += left[c] + right[c];
            }
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    total
}
