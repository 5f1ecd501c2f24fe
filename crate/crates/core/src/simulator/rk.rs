//! Dormand–Prince 5(4) explicit Runge–Kutta step.

use crate::scalar::Scalar;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

pub(crate) struct Step<S> {
    pub x: Vec<S>,
    /// Right-hand side at the new state (first stage of the next step).
    pub dx: Vec<S>,
    pub error: Vec<S>,
}

/// One step of size `h` from `(t, x)` with `dx0 = f(t, x)`.
pub(crate) fn dopri_step<S: Scalar>(
    f: &dyn Fn(S, &[S]) -> Vec<S>,
    t: S,
    x: &[S],
    dx0: &[S],
    h: S,
) -> Step<S> {
    let n = x.len();
    let mut k: Vec<Vec<S>> = Vec::with_capacity(7);
    k.push(dx0.to_vec());
    let mut stage = vec![S::zero(); n];
    for s in 1..7 {
        for i in 0..n {
            let mut acc = S::zero();
            for (m, km) in k.iter().enumerate() {
                let a = A[s][m];
                if a != 0.0 {
                    acc += S::lit(a) * km[i];
                }
            }
            stage[i] = x[i] + h * acc;
        }
        let ks = f(t + S::lit(C[s]) * h, &stage);
        k.push(ks);
    }
    // Stage 7 is evaluated at the fifth-order solution.
    let x_new = stage;
    let dx = k[6].clone();
    let error = (0..n)
        .map(|i| {
            let mut acc = S::zero();
            for (m, km) in k.iter().enumerate() {
                if E[m] != 0.0 {
                    acc += S::lit(E[m]) * km[i];
                }
            }
            h * acc
        })
        .collect();
    Step { x: x_new, dx, error }
}

/// Scaled RMS error; a step is acceptable when this is at most one.
pub(crate) fn error_norm<S: Scalar>(error: &[S], x0: &[S], x1: &[S], abs_tol: S, rel_tol: S) -> S {
    let n = error.len();
    let mut acc = S::zero();
    for i in 0..n {
        let scale = abs_tol + rel_tol * x0[i].abs().max(x1[i].abs());
        let r = error[i] / scale;
        acc += r * r;
    }
    (acc / S::from_usize(n.max(1))).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_polynomials_up_to_degree_four() {
        // x' = 4t³  ⇒  x = t⁴
        let f = |t: f64, _: &[f64]| vec![4.0 * t * t * t];
        let step = dopri_step(&f, 0.5, &[0.0625], &[0.5], 0.5);
        assert!((step.x[0] - 1.0).abs() < 1e-14);
        assert!((step.dx[0] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn exponential_local_error_is_small() {
        let f = |_: f64, x: &[f64]| vec![-x[0]];
        let h = 0.1;
        let step = dopri_step(&f, 0.0, &[1.0], &[-1.0], h);
        let exact = (-h).exp();
        assert!((step.x[0] - exact).abs() < 1e-9);
        assert!(step.error[0].abs() < 1e-7);
    }
}
