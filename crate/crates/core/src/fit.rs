//! Nonlinear least squares for the two exponential models used here:
//!
//! - T1 decay traces: `y = A·exp(−t/T1) + B`
//! - gain decay: `g = A·exp(−t/B)`
//!
//! Both are solved with a small dense Levenberg–Marquardt iteration. The decay
//! constant is optimized as a log-rate so it stays positive, and is clamped to
//! the configured bound.

use serde::{Deserialize, Serialize};

/// Smallest decay amplitude accepted by [`fit_decay`].
pub const MIN_AMPLITUDE: f64 = 1e-3;

/// Upper bound on a fitted T1, µs.
pub const MAX_T1_US: f64 = 1e4;

/// A decay counts as resolved when at least this many delays fall within
/// two fitted T1.
pub const MIN_POINTS_IN_DECAY: usize = 3;

const MAX_ITERATIONS: usize = 200;

/// Solve `a x = b` for a small dense system by Gaussian elimination with
/// partial pivoting. Returns `None` for (numerically) singular systems.
fn solve<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Option<[f64; N]> {
    for col in 0..N {
        let pivot = (col..N).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 || !a[pivot][col].is_finite() {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..N {
            let factor = a[row][col] / a[col][col];
            for k in col..N {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let tail: f64 = (row + 1..N).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn invert<const N: usize>(a: [[f64; N]; N]) -> Option<[[f64; N]; N]> {
    let mut inv = [[0.0; N]; N];
    for col in 0..N {
        let mut e = [0.0; N];
        e[col] = 1.0;
        let x = solve(a, e)?;
        for row in 0..N {
            inv[row][col] = x[row];
        }
    }
    Some(inv)
}

struct LmOutcome<const N: usize> {
    params: [f64; N],
    sse: f64,
    /// `JᵀJ` at the solution.
    normal: [[f64; N]; N],
    converged: bool,
}

/// Minimize `Σ (y_i − model(x_i, p))²`. `model` returns the value and the
/// gradient with respect to `p`; `project` maps a trial point back into the
/// feasible set.
fn levenberg_marquardt<const N: usize>(
    xs: &[f64],
    ys: &[f64],
    init: [f64; N],
    model: impl Fn(f64, &[f64; N]) -> (f64, [f64; N]),
    project: impl Fn(&mut [f64; N]),
) -> Option<LmOutcome<N>> {
    let evaluate = |p: &[f64; N]| {
        let mut jtj = [[0.0; N]; N];
        let mut jtr = [0.0; N];
        let mut sse = 0.0;
        for (&x, &y) in xs.iter().zip(ys) {
            let (value, grad) = model(x, p);
            let r = y - value;
            sse += r * r;
            for i in 0..N {
                jtr[i] += grad[i] * r;
                for j in 0..N {
                    jtj[i][j] += grad[i] * grad[j];
                }
            }
        }
        (sse, jtj, jtr)
    };

    let mut p = init;
    project(&mut p);
    let (mut sse, mut jtj, mut jtr) = evaluate(&p);
    if !sse.is_finite() {
        return None;
    }
    let mut lambda = 1e-3;
    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        let mut damped = jtj;
        for i in 0..N {
            damped[i][i] += lambda * jtj[i][i].max(1e-12);
        }
        let Some(step) = solve(damped, jtr) else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
            continue;
        };
        let mut trial = p;
        for i in 0..N {
            trial[i] += step[i];
        }
        project(&mut trial);
        let (trial_sse, trial_jtj, trial_jtr) = evaluate(&trial);
        if trial_sse.is_finite() && trial_sse <= sse {
            let improvement = sse - trial_sse;
            let moved = (0..N).any(|i| (trial[i] - p[i]).abs() > 1e-12 * (1.0 + p[i].abs()));
            p = trial;
            sse = trial_sse;
            jtj = trial_jtj;
            jtr = trial_jtr;
            lambda = (lambda * 0.3).max(1e-12);
            if improvement <= 1e-14 * (sse + 1e-300) || !moved || sse < 1e-30 {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                // No downhill direction left: stationary point.
                converged = true;
                break;
            }
        }
    }
    Some(LmOutcome {
        params: p,
        sse,
        normal: jtj,
        converged,
    })
}

/// Result of fitting `A·exp(−t/T1) + B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub amplitude: f64,
    pub t1: f64,
    pub offset: f64,
    pub t1_stderr: f64,
}

/// Starting point from a log-linear regression on baseline-subtracted data.
fn decay_initial_guess(ts: &[f64], ys: &[f64]) -> [f64; 3] {
    let n = ts.len();
    let tail = (n / 10).max(2).min(n);
    let baseline = ys[n - tail..].iter().sum::<f64>() / tail as f64;
    let head = ys[0] - baseline;
    let floor = 0.05 * head.abs().max(1e-6);
    let points: Vec<(f64, f64, f64)> = ts
        .iter()
        .zip(ys)
        .filter_map(|(&t, &y)| {
            let d = y - baseline;
            (d > floor).then(|| (t, d.ln(), d * d))
        })
        .collect();
    let fallback_rate = 1.0 / ts[n / 2].max(1e-6);
    let (rate, amplitude) = if points.len() >= 2 {
        let sw: f64 = points.iter().map(|p| p.2).sum();
        let mt = points.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
        let my = points.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
        let sxx: f64 = points.iter().map(|p| p.2 * (p.0 - mt).powi(2)).sum();
        let sxy: f64 = points.iter().map(|p| p.2 * (p.0 - mt) * (p.1 - my)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { -fallback_rate };
        let rate = if slope < 0.0 { -slope } else { fallback_rate };
        (rate, (my + rate * mt).exp())
    } else {
        (fallback_rate, head.max(1e-3))
    };
    [amplitude, rate.max(1.0 / MAX_T1_US).ln(), baseline]
}

/// Fit `A·exp(−t/T1) + B` to a decay trace. Returns a diagnostic message when
/// the fit is unusable.
pub fn fit_decay(ts: &[f64], ys: &[f64]) -> Result<DecayFit, String> {
    if ts.len() != ys.len() {
        return Err("delay and value arrays differ in length".into());
    }
    if ts.len() < 4 {
        return Err(format!("need at least 4 points, got {}", ts.len()));
    }
    if ts.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err("non-finite input".into());
    }
    let init = decay_initial_guess(ts, ys);
    let min_log_rate = (1.0 / MAX_T1_US).ln();
    let max_log_rate = (1e3 / ts[0].max(1e-9)).ln();
    // p = [A, ln k, B]
    let out = levenberg_marquardt(
        ts,
        ys,
        init,
        |t, p| {
            let k = p[1].exp();
            let e = (-k * t).exp();
            (p[0] * e + p[2], [e, -p[0] * t * k * e, 1.0])
        },
        |p| p[1] = p[1].clamp(min_log_rate, max_log_rate),
    )
    .ok_or("singular normal equations at the initial guess")?;
    if !out.converged {
        return Err("Levenberg-Marquardt did not converge".into());
    }
    let [amplitude, log_rate, offset] = out.params;
    let rate = log_rate.exp();
    if log_rate <= min_log_rate + 1e-9 {
        return Err(format!("T1 ran into the {MAX_T1_US} µs bound"));
    }
    if log_rate >= max_log_rate - 1e-9 {
        return Err("decay faster than the shortest delay".into());
    }
    if !(amplitude > 0.0) {
        return Err(format!("non-positive decay amplitude {amplitude}"));
    }
    if amplitude < MIN_AMPLITUDE {
        return Err(format!("decay amplitude {amplitude:.2e} not resolved"));
    }
    if ts.iter().filter(|&&t| t <= 2.0 / rate).count() < MIN_POINTS_IN_DECAY {
        return Err(format!("decay with T1 {:.3e} µs not resolved by the delay grid", 1.0 / rate));
    }
    // Covariance in (A, k, B): rescale the log-rate column of JᵀJ by 1/k.
    let mut normal = out.normal;
    for i in 0..3 {
        normal[i][1] /= rate;
        normal[1][i] /= rate;
    }
    let dof = (ts.len() - 3) as f64;
    let sigma2 = out.sse / dof;
    let t1 = 1.0 / rate;
    let t1_stderr = match invert(normal) {
        Some(cov) => (sigma2 * cov[1][1]).max(0.0).sqrt() / (rate * rate),
        None if sigma2 == 0.0 => 0.0,
        None => return Err("singular covariance".into()),
    };
    if !(t1_stderr <= t1) {
        return Err(format!("T1 undetermined: {t1:.3e} ± {t1_stderr:.3e} µs"));
    }
    Ok(DecayFit {
        amplitude,
        t1,
        offset,
        t1_stderr,
    })
}

/// Result of fitting `A·exp(−t/B)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PureDecayFit {
    pub amplitude: f64,
    /// Decay time in the unit of the abscissa.
    pub decay_time: f64,
}

/// Fit `A·exp(−t/B)` (no offset). `B` is limited to 10⁶ abscissa units;
/// a non-decaying series returns an error.
pub fn fit_pure_decay(ts: &[f64], ys: &[f64]) -> Result<PureDecayFit, String> {
    if ts.len() != ys.len() || ts.len() < 3 {
        return Err("need at least 3 paired points".into());
    }
    if ts.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err("non-finite input".into());
    }
    let span = ts.iter().cloned().fold(f64::MIN, f64::max) - ts.iter().cloned().fold(f64::MAX, f64::min);
    if !(span > 0.0) {
        return Err("abscissa has zero span".into());
    }
    // Linear regression y ≈ a + b t gives A ≈ a and B ≈ −a/b for slow decays.
    let n = ts.len() as f64;
    let mt = ts.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = ts.iter().map(|t| (t - mt).powi(2)).sum();
    let sxy: f64 = ts.iter().zip(ys).map(|(t, y)| (t - mt) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mt;
    let decay0 = if slope < 0.0 && intercept > 0.0 {
        (-intercept / slope).min(1e6)
    } else {
        10.0 * span
    };
    let min_log = (1e-3 * span).ln();
    let max_log = 1e6f64.ln();
    // p = [A, ln(1/B)]
    let out = levenberg_marquardt(
        ts,
        ys,
        [intercept, -decay0.ln()],
        |t, p| {
            let k = p[1].exp();
            let e = (-k * t).exp();
            (p[0] * e, [e, -p[0] * t * k * e])
        },
        |p| p[1] = p[1].clamp(-max_log, -min_log),
    )
    .ok_or("singular normal equations")?;
    if !out.converged {
        return Err("Levenberg-Marquardt did not converge".into());
    }
    let decay_time = (-out.params[1]).exp();
    if decay_time >= 1e6 * (1.0 - 1e-9) {
        return Err("no decay resolved".into());
    }
    Ok(PureDecayFit {
        amplitude: out.params[0],
        decay_time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
            .collect()
    }

    #[test]
    fn exact_decay_recovered() {
        let ts = log_grid(0.5, 60.0, 40);
        let ys: Vec<f64> = ts.iter().map(|t| 0.9 * (-t / 20.0).exp() + 0.05).collect();
        let fit = fit_decay(&ts, &ys).unwrap();
        assert!((fit.t1 - 20.0).abs() < 1e-6 * 20.0, "{fit:?}");
        assert!((fit.amplitude - 0.9).abs() < 1e-8);
        assert!((fit.offset - 0.05).abs() < 1e-8);
    }

    #[test]
    fn flat_trace_fails() {
        let ts = log_grid(0.5, 60.0, 40);
        let ys = vec![0.5; ts.len()];
        assert!(fit_decay(&ts, &ys).is_err());
    }

    #[test]
    fn too_few_points() {
        assert!(fit_decay(&[1.0, 2.0, 3.0], &[0.9, 0.5, 0.3]).is_err());
    }

    #[test]
    fn rising_trace_rejected() {
        let ts = log_grid(0.5, 60.0, 40);
        let ys: Vec<f64> = ts.iter().map(|t| 0.9 - 0.8 * (-t / 20.0).exp()).collect();
        assert!(fit_decay(&ts, &ys).is_err());
    }

    #[test]
    fn pure_decay_exact() {
        let ts: Vec<f64> = (0..300).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 0.3 * (-t / 89.0).exp()).collect();
        let fit = fit_pure_decay(&ts, &ys).unwrap();
        assert!((fit.amplitude - 0.3).abs() < 1e-9);
        assert!((fit.decay_time - 89.0).abs() < 1e-6);
    }

    #[test]
    fn solver_handles_pivoting() {
        let x = solve([[0.0, 1.0], [2.0, 0.0]], [3.0, 4.0]).unwrap();
        assert_eq!(x, [2.0, 3.0]);
        assert!(solve([[1.0, 2.0], [2.0, 4.0]], [1.0, 1.0]).is_none());
    }
}
