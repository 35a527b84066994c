#![allow(dead_code)]

use madmm::logistic::lemma1_objective;
use madmm::vecops::norm;

/// Central-difference gradient of `f` at `x` with relative step `1e-6`.
pub fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|j| {
            let h = 1e-6 * x[j].abs().max(1.0);
            p[j] = x[j] + h;
            let up = f(&p);
            p[j] = x[j] - h;
            let down = f(&p);
            p[j] = x[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn rel_error(got: &[f64], want: &[f64]) -> f64 {
    let diff: Vec<f64> = got.iter().zip(want).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(want).max(f64::MIN_POSITIVE)
}

fn golden(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut m1 = hi - g * (hi - lo);
    let mut m2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(m1), f(m2));
    for _ in 0..iters {
        if f1 < f2 {
            hi = m2;
            m2 = m1;
            f2 = f1;
            m1 = hi - g * (hi - lo);
            f1 = f(m1);
        } else {
            lo = m1;
            m1 = m2;
            f1 = f2;
            m2 = lo + g * (hi - lo);
            f2 = f(m2);
        }
    }
    if f1 < f2 {
        (m1, f1)
    } else {
        (m2, f2)
    }
}

/// Brute-force minimum of the x1 subproblem objective: a grid along the
/// soft-thresholded ray, then exact coordinate descent on the whole space.
/// The objective is convex with a separable nonsmooth part, so coordinate
/// descent reaches the global minimum.
pub fn lemma1_oracle(c: &[f64], lambda: f64, l: f64) -> (Vec<f64>, f64) {
    let d = c.len();
    let obj = |x: &[f64]| lemma1_objective(x, c, lambda, l);
    let t: Vec<f64> = c.iter().map(|v| (v.abs() - lambda).max(0.0) * v.signum()).collect();
    let tn = norm(&t);
    let reach = (tn / l).cbrt().min(tn / l) + 1.0;

    let mut best = vec![0.0; d];
    let mut best_val = 0.0;
    if tn > 0.0 {
        let along = |s: f64| t.iter().map(|v| -s * v / tn).collect::<Vec<f64>>();
        let n = 2000;
        let mut arg = 0.0;
        for k in 1..=n {
            let s = reach * k as f64 / n as f64;
            let v = obj(&along(s));
            if v < best_val {
                best_val = v;
                arg = s;
            }
        }
        let step = reach / n as f64;
        let (s, v) = golden(|s| obj(&along(s)), (arg - step).max(0.0), arg + step, 100);
        if v < best_val {
            best = along(s);
            best_val = v;
        }
    }

    let bound = reach + norm(&best);
    let mut x = best;
    for _ in 0..60 {
        let before = best_val;
        for j in 0..d {
            let mut probe = x.clone();
            let (v, fv) = golden(
                |s| {
                    probe[j] = s;
                    obj(&probe)
                },
                -bound,
                bound,
                120,
            );
            if fv < best_val {
                x[j] = v;
                best_val = fv;
            }
        }
        if before - best_val <= 1e-16 * (1.0 + best_val.abs()) {
            break;
        }
    }
    (x, best_val)
}
