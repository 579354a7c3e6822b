//! Dormand-Prince 5(4) with step-size control and continuous output.
//!
//! Works on split complex buffers: a state of `m` complex components is a
//! slice of `2m` reals holding all real parts followed by all imaginary parts.
//! The error norm weighs each component by its complex modulus. Output times
//! are served from the 4th-order continuous extension; the integrator never
//! shortens a step to land on them.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Clone, Debug)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; estimated from the problem when `None`.
    pub initial_step: Option<f64>,
    pub max_steps: usize,
    pub safety: f64,
    pub fac_min: f64,
    pub fac_max: f64,
    /// PI stabilization exponent (Hairer's `beta`).
    pub beta: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            rtol: 1e-8,
            atol: 1e-10,
            initial_step: None,
            max_steps: 5_000_000,
            safety: 0.9,
            fac_min: 0.2,
            fac_max: 10.0,
            beta: 0.04,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub min_step: f64,
    pub max_step: f64,
}

/// Integrate `y' = f(t, y)` from `t0` through every time in `outputs`
/// (sorted, all `>= t0`). `on_output(t, y)` receives the solution at each
/// output time; `after_step` may project the state after an accepted step.
pub fn integrate<F, O, P>(
    mut f: F,
    t0: f64,
    mut y: Vec<f64>,
    outputs: &[f64],
    ctl: &StepControl,
    mut on_output: O,
    mut after_step: P,
) -> Result<StepStats>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(f64, &[f64]) -> Result<()>,
    P: FnMut(&mut [f64]),
{
    let n = y.len();
    if !n.is_multiple_of(2) {
        return Err(Error::DimensionMismatch {
            context: format!("split complex state of odd length {n}"),
        });
    }
    let m = n / 2;
    let mut stats = StepStats {
        min_step: f64::INFINITY,
        ..Default::default()
    };
    let Some(&t_end) = outputs.last() else {
        return Ok(stats);
    };
    let zero = 0.0;
    let mut k1 = vec![zero; n];
    let mut k2 = vec![zero; n];
    let mut k3 = vec![zero; n];
    let mut k4 = vec![zero; n];
    let mut k5 = vec![zero; n];
    let mut k6 = vec![zero; n];
    let mut k7 = vec![zero; n];
    let mut ytmp = vec![zero; n];
    let mut ynew = vec![zero; n];

    let mut next_out = 0;
    while next_out < outputs.len() && outputs[next_out] <= t0 {
        on_output(outputs[next_out], &y)?;
        next_out += 1;
    }
    if next_out == outputs.len() {
        return Ok(stats);
    }

    let mut t = t0;
    f(t, &y, &mut k1);
    stats.rhs_evals += 1;

    let span = t_end - t0;
    let mut h = match ctl.initial_step {
        Some(h) => h.min(span),
        None => {
            let h = initial_step(&mut f, t, &y, &k1, ctl, &mut ytmp, &mut k2);
            stats.rhs_evals += 1;
            h.min(span)
        }
    };
    let mut fac_old = 1e-4f64;
    let mut last_rejected = false;
    let expo = 0.2 - ctl.beta * 0.75;
    let uround = f64::EPSILON;

    while t < t_end {
        if stats.accepted + stats.rejected >= ctl.max_steps {
            return Err(Error::TooManySteps(ctl.max_steps));
        }
        if h < 10.0 * uround * t.abs().max(span) {
            return Err(Error::StepSizeUnderflow { t_fs: t, h });
        }
        if t + 1.01 * h >= t_end {
            h = t_end - t;
        }

        stage(&mut ytmp, &y, h, [A21], [&k1]);
        f(t + C2 * h, &ytmp, &mut k2);
        stage(&mut ytmp, &y, h, [A31, A32], [&k1, &k2]);
        f(t + C3 * h, &ytmp, &mut k3);
        stage(&mut ytmp, &y, h, [A41, A42, A43], [&k1, &k2, &k3]);
        f(t + C4 * h, &ytmp, &mut k4);
        stage(
            &mut ytmp,
            &y,
            h,
            [A51, A52, A53, A54],
            [&k1, &k2, &k3, &k4],
        );
        f(t + C5 * h, &ytmp, &mut k5);
        stage(
            &mut ytmp,
            &y,
            h,
            [A61, A62, A63, A64, A65],
            [&k1, &k2, &k3, &k4, &k5],
        );
        f(t + h, &ytmp, &mut k6);
        stage(
            &mut ynew,
            &y,
            h,
            [A71, A73, A74, A75, A76],
            [&k1, &k3, &k4, &k5, &k6],
        );
        f(t + h, &ynew, &mut k7);
        stats.rhs_evals += 6;

        let err_at = |i: usize| {
            (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h
        };
        let mut acc = 0.0f64;
        for i in 0..m {
            let (er, ei) = (err_at(i), err_at(i + m));
            let old = y[i] * y[i] + y[i + m] * y[i + m];
            let new = ynew[i] * ynew[i] + ynew[i + m] * ynew[i + m];
            let sc = ctl.atol + ctl.rtol * old.max(new).sqrt();
            acc += (er * er + ei * ei) / (sc * sc);
        }
        let err = (acc / m.max(1) as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::NonFinite { t_fs: t });
        }

        let fac11 = err.powf(expo);
        if err <= 1.0 {
            // Lund stabilization
            let mut fac = fac11 / fac_old.powf(ctl.beta);
            fac = (fac / ctl.safety).clamp(1.0 / ctl.fac_max, 1.0 / ctl.fac_min);
            let mut h_new = h / fac;
            fac_old = err.max(1e-4);

            let t_new = t + h;
            while next_out < outputs.len() && outputs[next_out] <= t_new {
                let theta = (outputs[next_out] - t) / h;
                dense_output(
                    &mut ytmp,
                    theta,
                    h,
                    &y,
                    &ynew,
                    [&k1, &k3, &k4, &k5, &k6, &k7],
                );
                on_output(outputs[next_out], &ytmp)?;
                next_out += 1;
            }

            after_step(&mut ynew);
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            stats.accepted += 1;
            stats.min_step = stats.min_step.min(h);
            stats.max_step = stats.max_step.max(h);
            t = t_new;

            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;
            h = h_new;
        } else {
            let fac = (fac11 / ctl.safety).min(1.0 / ctl.fac_min);
            h /= fac;
            stats.rejected += 1;
            last_rejected = true;
        }
    }
    Ok(stats)
}

fn stage<const M: usize>(out: &mut [f64], y: &[f64], h: f64, a: [f64; M], k: [&[f64]; M]) {
    let ha = a.map(|a| a * h);
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = y[i];
        for m in 0..M {
            acc += k[m][i] * ha[m];
        }
        *o = acc;
    }
}

fn dense_output(
    out: &mut [f64],
    theta: f64,
    h: f64,
    y: &[f64],
    ynew: &[f64],
    k: [&Vec<f64>; 6],
) {
    let [k1, k3, k4, k5, k6, k7] = k;
    let theta1 = 1.0 - theta;
    for i in 0..out.len() {
        let ydiff = ynew[i] - y[i];
        let bspl = k1[i] * h - ydiff;
        let r4 = ydiff - k7[i] * h - bspl;
        let r5 = (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7) * h;
        out[i] = y[i] + (ydiff + (bspl + (r4 + r5 * theta1) * theta) * theta1) * theta;
    }
}

fn initial_step<F>(
    f: &mut F,
    t: f64,
    y: &[f64],
    f0: &[f64],
    ctl: &StepControl,
    y1: &mut [f64],
    f1: &mut [f64],
) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let m = y.len() / 2;
    let scaled_norm = |v: &[f64]| -> f64 {
        let s: f64 = (0..m)
            .map(|i| {
                let sc = ctl.atol + ctl.rtol * y[i].hypot(y[i + m]);
                (v[i] * v[i] + v[i + m] * v[i + m]) / (sc * sc)
            })
            .sum();
        (s / m.max(1) as f64).sqrt()
    };
    let d0 = scaled_norm(y);
    let d1 = scaled_norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    for i in 0..y.len() {
        y1[i] = y[i] + f0[i] * h0;
    }
    f(t + h0, y1, f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = scaled_norm(&diff) / h0;
    let dmax = d1.max(d2);
    let h1 = if dmax <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dmax).powf(0.2)
    };
    (100.0 * h0).min(h1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C64;

    #[test]
    fn exponential_decay_to_tolerance() {
        let lambda = C64::new(-0.7, 3.0);
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.25).collect();
        let mut got = Vec::new();
        let ctl = StepControl::default();
        let stats = integrate(
            |_, y, dy| {
                let d = lambda * C64::new(y[0], y[1]);
                dy[0] = d.re;
                dy[1] = d.im;
            },
            0.0,
            vec![1.0, 0.0],
            &times,
            &ctl,
            |t, y| {
                got.push((t, C64::new(y[0], y[1])));
                Ok(())
            },
            |_| {},
        )
        .unwrap();
        assert_eq!(got.len(), times.len());
        for (t, y) in got {
            let exact = (lambda * t).exp();
            assert!((y - exact).norm() < 1e-7, "t={t} err={}", (y - exact).norm());
        }
        assert!(stats.accepted > 0);
    }

    fn sine_error(rtol: f64) -> f64 {
        // y' = cos t on an output grid that does not follow the steps
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.037).collect();
        let mut worst = 0.0f64;
        let ctl = StepControl {
            rtol,
            atol: rtol * 1e-2,
            ..Default::default()
        };
        integrate(
            |t, _, dy| {
                dy[0] = t.cos();
                dy[1] = 0.0;
            },
            0.0,
            vec![0.0, 0.0],
            &times,
            &ctl,
            |t, y| {
                worst = worst.max((y[0] - t.sin()).abs());
                Ok(())
            },
            |_| {},
        )
        .unwrap();
        worst
    }

    #[test]
    fn interpolated_output_tracks_tolerance() {
        let coarse = sine_error(1e-7);
        let fine = sine_error(1e-10);
        assert!(coarse < 1e-5, "{coarse}");
        assert!(fine < 1e-8, "{fine}");
        assert!(fine < coarse / 50.0);
    }

    #[test]
    fn step_cap_reports_error() {
        let ctl = StepControl {
            max_steps: 3,
            ..Default::default()
        };
        let r = integrate(
            |_, y, dy| {
                dy[0] = -50.0 * y[1];
                dy[1] = 50.0 * y[0];
            },
            0.0,
            vec![1.0, 0.0],
            &[0.0, 100.0],
            &ctl,
            |_, _| Ok(()),
            |_| {},
        );
        assert!(matches!(r, Err(Error::TooManySteps(3))));
    }

    #[test]
    fn nan_is_detected() {
        let r = integrate(
            |_, _, dy| dy[0] = f64::NAN,
            0.0,
            vec![1.0, 0.0],
            &[1.0],
            &StepControl {
                initial_step: Some(0.1),
                ..Default::default()
            },
            |_, _| Ok(()),
            |_| {},
        );
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn odd_length_is_rejected() {
        let r = integrate(|_, _, _| {}, 0.0, vec![1.0], &[1.0], &StepControl::default(), |_, _| Ok(()), |_| {});
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }
}
