//! Dormand-Prince 5(4) with step-size control.
//!
//! Steps are shortened to land exactly on every requested sample time, so no
//! interpolant is needed. Components that overshoot below zero after an
//! accepted step are clipped and logged.

use serde::{Deserialize, Serialize};

use super::KineticsError;
use crate::io::{csv_document, g17};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepControl {
    pub atol: f64,
    pub rtol: f64,
    /// First trial step; chosen from the right-hand side when `None`.
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
    /// Abort when `max |c_v|` exceeds this value.
    pub blowup: f64,
    /// Project negative components to zero after each accepted step.
    pub clip_negative: bool,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            atol: 1e-10,
            rtol: 1e-8,
            h_init: None,
            h_max: f64::INFINITY,
            max_steps: 5_000_000,
            blowup: 1e12,
            clip_negative: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipEvent {
    pub t: f64,
    pub species: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub clip_events: Vec<ClipEvent>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    /// CSV with header `t,c_<name>...`.
    pub fn to_csv(&self, names: &[&str]) -> String {
        let mut header = vec!["t".to_string()];
        header.extend(names.iter().map(|n| format!("c_{n}")));
        let rows = self.times.iter().zip(&self.states).map(|(t, c)| {
            let mut row = vec![g17(*t)];
            row.extend(c.iter().map(|x| g17(*x)));
            row
        });
        csv_document(&header, rows)
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least one sample")
    }
}

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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `dy/dt = f(y)` from `t0` through every time in `samples`
/// (strictly increasing, all `>= t0`).
///
/// `on_step(t, y)` runs after every accepted step; returning `true` stops the
/// integration early, in which case the last state is appended as a sample.
pub fn integrate_with<F, S>(
    mut f: F,
    y0: &[f64],
    t0: f64,
    samples: &[f64],
    ctrl: &StepControl,
    mut on_step: S,
) -> Result<Trajectory, KineticsError>
where
    F: FnMut(&[f64], &mut [f64]),
    S: FnMut(f64, &[f64]) -> bool,
{
    let n = y0.len();
    if samples.windows(2).any(|w| w[1] <= w[0]) || samples.first().is_some_and(|&s| s < t0) {
        return Err(KineticsError::SampleTimes);
    }
    let mut traj = Trajectory {
        times: Vec::with_capacity(samples.len()),
        states: Vec::with_capacity(samples.len()),
        clip_events: Vec::new(),
        accepted_steps: 0,
        rejected_steps: 0,
    };
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    f(&y, &mut k[0]);
    let mut h = ctrl
        .h_init
        .unwrap_or_else(|| initial_step(&y, &k[0], ctrl))
        .min(ctrl.h_max);
    let mut next = 0;
    while next < samples.len() && samples[next] == t {
        traj.times.push(t);
        traj.states.push(y.clone());
        next += 1;
    }
    let mut steps = 0;
    while next < samples.len() {
        if steps >= ctrl.max_steps {
            return Err(KineticsError::MaxSteps { t });
        }
        steps += 1;
        let target = samples[next];
        let landing = t + h >= target || (target - t - h) < 1e-12 * target.abs().max(1.0);
        let h_proposed = h;
        if landing {
            h = target - t;
        }
        stage(&y, h, &k, &mut tmp, &[(0, A21)]);
        f(&tmp, &mut k[1]);
        stage(&y, h, &k, &mut tmp, &[(0, A31), (1, A32)]);
        f(&tmp, &mut k[2]);
        stage(&y, h, &k, &mut tmp, &[(0, A41), (1, A42), (2, A43)]);
        f(&tmp, &mut k[3]);
        stage(&y, h, &k, &mut tmp, &[(0, A51), (1, A52), (2, A53), (3, A54)]);
        f(&tmp, &mut k[4]);
        stage(
            &y,
            h,
            &k,
            &mut tmp,
            &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)],
        );
        f(&tmp, &mut k[5]);
        stage(
            &y,
            h,
            &k,
            &mut y_new,
            &[(0, B1), (2, B3), (3, B4), (4, B5), (5, B6)],
        );
        f(&y_new, &mut k[6]);
        let mut err = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                    + E7 * k[6][i]);
            let sc = ctrl.atol + ctrl.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / sc).powi(2);
        }
        let err = if n > 0 { (err / n as f64).sqrt() } else { 0.0 };
        if !err.is_finite() {
            return Err(KineticsError::NonFinite { t });
        }
        if err <= 1.0 {
            t = if landing { target } else { t + h };
            traj.accepted_steps += 1;
            std::mem::swap(&mut y, &mut y_new);
            let mut clipped = false;
            for (i, yi) in y.iter_mut().enumerate() {
                if ctrl.clip_negative && *yi < 0.0 {
                    traj.clip_events.push(ClipEvent {
                        t,
                        species: i,
                        value: *yi,
                    });
                    *yi = 0.0;
                    clipped = true;
                }
            }
            let norm = y.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if norm > ctrl.blowup {
                return Err(KineticsError::BlowUp { t, norm });
            }
            if clipped {
                f(&y, &mut k[0]);
            } else {
                k.swap(0, 6);
            }
            if landing {
                traj.times.push(t);
                traj.states.push(y.clone());
                next += 1;
            }
            if on_step(t, &y) {
                if !landing {
                    traj.times.push(t);
                    traj.states.push(y.clone());
                }
                return Ok(traj);
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            // a landing step is artificially short and must not shrink h
            h = if landing { h_proposed.max(h * fac) } else { h * fac }.min(ctrl.h_max);
        } else {
            traj.rejected_steps += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(KineticsError::StepUnderflow { t, h });
        }
    }
    Ok(traj)
}

fn stage(y: &[f64], h: f64, k: &[Vec<f64>], out: &mut [f64], coeffs: &[(usize, f64)]) {
    for i in 0..y.len() {
        let mut acc = 0.0;
        for &(j, a) in coeffs {
            acc += a * k[j][i];
        }
        out[i] = y[i] + h * acc;
    }
}

fn initial_step(y: &[f64], f0: &[f64], ctrl: &StepControl) -> f64 {
    let mut d0 = 0.0f64;
    let mut d1 = 0.0f64;
    for (yi, fi) in y.iter().zip(f0) {
        let sc = ctrl.atol + ctrl.rtol * yi.abs();
        d0 = d0.max(yi.abs() / sc);
        d1 = d1.max(fi.abs() / sc);
    }
    if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        (0.01 * d0 / d1).min(1.0)
    }
}
