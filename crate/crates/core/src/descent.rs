//! Projected Barzilai-Borwein descent on the unit boundary sphere.
//!
//! Iterates stay in the positive cone and satisfy `B(u) = 1` after every
//! step; the quotient is 0-homogeneous so renormalizing is exact. Steps are
//! accepted against the maximum of the last few quotient values and halved
//! otherwise.

use crate::fem::{Evaluation, QuotientFunctional};

const NONMONOTONE_MEMORY: usize = 10;
const STALL_WINDOW: usize = 5;
const MAX_HALVINGS: usize = 50;

#[derive(Debug, Clone, Copy)]
pub struct DescentOptions {
    pub grad_tolerance: f64,
    pub rel_tolerance: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct DescentOutcome {
    /// Minimizer normalized to `B(u) = 1`, zero on constrained DOFs.
    pub u: Vec<f64>,
    pub value: f64,
    pub evaluation: Evaluation,
    /// Sup norm of the quotient gradient over free DOFs at `u`.
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn normalize(u: &mut [f64], boundary: f64, q: f64) -> bool {
    if !(boundary > 0.0) || !boundary.is_finite() {
        return false;
    }
    let s = boundary.powf(-1.0 / q);
    u.iter_mut().for_each(|x| *x *= s);
    true
}

fn free_sup(g: &[f64], free: &[bool]) -> f64 {
    g.iter()
        .zip(free)
        .filter(|(_, &f)| f)
        .fold(0.0, |m, (x, _)| m.max(x.abs()))
}

/// Minimize the quotient over nodal vectors with `u_i = 0` wherever
/// `free[i]` is false, starting from `init` (made nonnegative and zeroed on
/// constrained DOFs). Returns `None` when the start has zero boundary norm.
pub fn minimize_quotient<F: QuotientFunctional>(
    functional: &F,
    free: &[bool],
    init: &[f64],
    opts: &DescentOptions,
) -> Option<DescentOutcome> {
    let (p, q) = functional.exponents();
    let n = functional.n_dofs();
    assert_eq!(free.len(), n);
    assert_eq!(init.len(), n);

    let mut u: Vec<f64> = init
        .iter()
        .zip(free)
        .map(|(&x, &f)| if f { x.abs() } else { 0.0 })
        .collect();
    let ev0 = functional.evaluate(&u);
    if !normalize(&mut u, ev0.boundary, q) {
        return None;
    }
    let mut ev = functional.evaluate(&u);
    let mut value = ev.quotient(p, q);
    let mut grad = masked(ev.quotient_gradient(p, q), free);
    let mut gnorm = free_sup(&grad, free);
    let direction = |u: &[f64], g: &[f64]| functional.precondition(u, g, free).map(|d| masked(d, free));
    let mut dir = direction(&u, &grad);

    let mut history: Vec<f64> = vec![value];
    let umax = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let dnorm = dir.as_ref().map_or(gnorm, |d| free_sup(d, free));
    let mut step = if dnorm > 0.0 { 1e-2 * umax / dnorm } else { 1.0 };
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iterations {
        if gnorm <= opts.grad_tolerance && stalled(&history, opts.rel_tolerance) {
            converged = true;
            break;
        }
        iterations += 1;
        let reference = history
            .iter()
            .rev()
            .take(NONMONOTONE_MEMORY)
            .fold(f64::NEG_INFINITY, |m, &x| m.max(x));

        let mut accepted = None;
        let mut trial_step = step;
        for _ in 0..MAX_HALVINGS {
            let mut trial: Vec<f64> = u
                .iter()
                .zip(dir.as_ref().unwrap_or(&grad))
                .zip(free)
                .map(|((&x, &g), &f)| if f { (x - trial_step * g).abs() } else { 0.0 })
                .collect();
            let tev = functional.evaluate(&trial);
            if normalize(&mut trial, tev.boundary, q) {
                let tev = functional.evaluate(&trial);
                let tval = tev.quotient(p, q);
                if tval.is_finite() && tval <= reference {
                    accepted = Some((trial, tev, tval));
                    break;
                }
            }
            trial_step *= 0.5;
        }
        let Some((new_u, new_ev, new_value)) = accepted else {
            // No representable decrease along the direction: at the roundoff floor.
            converged = gnorm <= opts.grad_tolerance || stalled(&history, opts.rel_tolerance);
            break;
        };
        let new_grad = masked(new_ev.quotient_gradient(p, q), free);
        let new_dir = direction(&new_u, &new_grad);
        let y: Vec<f64> = (0..n)
            .map(|i| if free[i] { new_grad[i] - grad[i] } else { 0.0 })
            .collect();
        let py = direction(&new_u, &y).unwrap_or_else(|| y.clone());
        let (mut ss, mut sy, mut yy) = (0.0, 0.0, 0.0);
        for i in 0..n {
            if free[i] {
                let s = new_u[i] - u[i];
                ss += s * s;
                sy += s * y[i];
                yy += y[i] * py[i];
            }
        }
        let bb = if dir.is_some() { sy / yy } else { ss / sy };
        step = if sy > 0.0 && bb.is_finite() && bb > 0.0 {
            bb.clamp(1e-14, 1e14)
        } else {
            2.0 * trial_step
        };
        dir = new_dir;
        u = new_u;
        ev = new_ev;
        value = new_value;
        grad = new_grad;
        gnorm = free_sup(&grad, free);
        history.push(value);
    }
    if !converged && gnorm <= opts.grad_tolerance && stalled(&history, opts.rel_tolerance) {
        converged = true;
    }
    Some(DescentOutcome {
        u,
        value,
        evaluation: ev,
        grad_norm: gnorm,
        iterations,
        converged,
    })
}

fn masked(mut g: Vec<f64>, free: &[bool]) -> Vec<f64> {
    g.iter_mut().zip(free).for_each(|(x, &f)| {
        if !f {
            *x = 0.0
        }
    });
    g
}

fn stalled(history: &[f64], rel_tolerance: f64) -> bool {
    if history.len() <= STALL_WINDOW {
        return history.len() > 1 && {
            let first = history[0];
            let last = *history.last().unwrap();
            (first - last) <= rel_tolerance * last.abs()
        };
    }
    let last = *history.last().unwrap();
    let earlier = history[history.len() - 1 - STALL_WINDOW];
    (earlier - last) <= rel_tolerance * last.abs()
}
