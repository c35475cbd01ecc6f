//! Adaptive Dormand–Prince 5(4) integrator for complex linear or nonlinear
//! systems y' = f(t, y), stepping exactly onto requested output times.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; 0 picks one from the derivative scale.
    pub h0: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-9,
            atol: 1e-12,
            h0: 0.0,
            h_min: 1e-12,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth minus fourth order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy(out: &mut [C64], y: &[C64], h: f64, terms: &[(f64, &[C64])]) {
    for i in 0..out.len() {
        let mut s = C64::new(0.0, 0.0);
        for (c, k) in terms {
            s += k[i] * *c;
        }
        out[i] = y[i] + s * h;
    }
}

/// Integrates from `t0` with state `y0`, calling `observe(i, times[i], y)` at
/// each requested time (non-decreasing, ≥ t0).
pub fn integrate<F, O>(
    mut f: F,
    t0: f64,
    y0: &[C64],
    times: &[f64],
    opts: OdeOptions,
    mut observe: O,
) -> Result<OdeStats>
where
    F: FnMut(f64, &[C64], &mut [C64]),
    O: FnMut(usize, f64, &[C64]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut st = OdeStats::default();
    let zero = C64::new(0.0, 0.0);
    let (mut k1, mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (
        vec![zero; n],
        vec![zero; n],
        vec![zero; n],
        vec![zero; n],
        vec![zero; n],
        vec![zero; n],
        vec![zero; n],
    );
    let mut tmp = vec![zero; n];
    let mut ynew = vec![zero; n];
    f(t, &y, &mut k1);
    st.evaluations += 1;

    let mut h = if opts.h0 > 0.0 {
        opts.h0
    } else {
        let ny = y
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
            .max(1e-10);
        let nf = k1
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
            .max(1e-10);
        (0.01 * ny / nf).clamp(1e-6, 1.0)
    };

    for (idx, &target) in times.iter().enumerate() {
        if target < t {
            return Err(Error::InvalidState(format!(
                "output time {target} precedes current time {t}"
            )));
        }
        while t < target {
            if st.accepted + st.rejected >= opts.max_steps {
                return Err(Error::StepUnderflow(h));
            }
            let remaining = target - t;
            let last = h >= remaining;
            let hs = if last { remaining } else { h };
            axpy(&mut tmp, &y, hs, &[(A21, &k1)]);
            f(t + C2 * hs, &tmp, &mut k2);
            axpy(&mut tmp, &y, hs, &[(A31, &k1), (A32, &k2)]);
            f(t + C3 * hs, &tmp, &mut k3);
            axpy(&mut tmp, &y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
            f(t + C4 * hs, &tmp, &mut k4);
            axpy(
                &mut tmp,
                &y,
                hs,
                &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)],
            );
            f(t + C5 * hs, &tmp, &mut k5);
            axpy(
                &mut tmp,
                &y,
                hs,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            );
            f(t + hs, &tmp, &mut k6);
            axpy(
                &mut ynew,
                &y,
                hs,
                &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
            );
            f(t + hs, &ynew, &mut k7);
            st.evaluations += 6;

            let mut err = 0.0;
            for i in 0..n {
                let e =
                    (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7)
                        * hs;
                let sc = opts.atol + opts.rtol * y[i].norm().max(ynew[i].norm());
                err += (e.norm() / sc).powi(2);
            }
            let err = (err / n.max(1) as f64).sqrt();
            if err <= 1.0 {
                st.accepted += 1;
                t = if last { target } else { t + hs };
                std::mem::swap(&mut y, &mut ynew);
                std::mem::swap(&mut k1, &mut k7);
            } else {
                st.rejected += 1;
            }
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            // A step shortened to hit an output time says nothing about the natural step.
            if !(last && err <= 1.0) || hs == h {
                h = hs * fac;
            }
            if h < opts.h_min {
                return Err(Error::StepUnderflow(h));
            }
        }
        observe(idx, t, &y);
    }
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotating_decay_matches_closed_form() {
        let lam = C64::new(-0.3, 2.0);
        let times: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
        let mut worst: f64 = 0.0;
        integrate(
            |_, y, dy| dy[0] = lam * y[0],
            0.0,
            &[C64::new(1.0, 0.0)],
            &times,
            OdeOptions::default(),
            |_, t, y| worst = worst.max((y[0] - (lam * t).exp()).norm()),
        )
        .unwrap();
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn time_dependent_rhs() {
        // y' = 2t y, y = exp(t²)
        let mut end = C64::new(0.0, 0.0);
        integrate(
            |t, y, dy| dy[0] = y[0] * (2.0 * t),
            0.0,
            &[C64::new(1.0, 0.0)],
            &[1.5],
            OdeOptions::default(),
            |_, _, y| end = y[0],
        )
        .unwrap();
        assert!((end.re - 2.25f64.exp()).abs() < 1e-7 * 2.25f64.exp());
    }

    #[test]
    fn backwards_output_time_is_rejected() {
        let r = integrate(
            |_, y, dy| dy[0] = y[0],
            1.0,
            &[C64::new(1.0, 0.0)],
            &[0.5],
            OdeOptions::default(),
            |_, _, _| {},
        );
        assert!(r.is_err());
    }
}
