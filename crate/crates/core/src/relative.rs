//! Instantaneous rates from two windows that differ by one cycle.
//!
//! With `W p_W(t)` the summed rate over anchors `t - W .. t`, the difference
//! `(W + 1) p_{W+1}(t + 1) - W p_W(t)` is the rate at anchor `t` alone. Both window
//! series are smoothed with the same Savitzky-Golay filter before differencing.

use nalgebra::DMatrix;

use crate::code_models::EdgeClass;
use crate::error::{Error, Result};
use crate::estimator::{sliding_series, Counts, EstimatedSeries, SeriesSet, FLAG_DEGENERATE};

pub const DEFAULT_SG_WINDOW: usize = 301;
pub const DEFAULT_SG_ORDER: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Smoothing {
    pub window: usize,
    pub order: usize,
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing { window: DEFAULT_SG_WINDOW, order: DEFAULT_SG_ORDER }
    }
}

impl Smoothing {
    pub fn validate(&self) -> Result<()> {
        if self.window % 2 == 0 {
            return Err(Error::config("sg_window", "must be odd"));
        }
        if self.window < self.order + 2 {
            return Err(Error::config("sg_window", "must be at least order + 2"));
        }
        Ok(())
    }
}

/// Hat matrix of a degree-`order` least-squares polynomial fit on `window` equispaced points:
/// row `i` maps the samples to the fitted value at point `i`.
fn hat_matrix(window: usize, order: usize) -> Result<DMatrix<f64>> {
    let h = (window / 2) as f64;
    let v = DMatrix::from_fn(window, order + 1, |i, k| ((i as f64 - h) / h.max(1.0)).powi(k as i32));
    let pinv = v.clone().pseudo_inverse(1e-12).map_err(|e| Error::numerical(e.to_string()))?;
    Ok(&v * pinv)
}

/// Savitzky-Golay smoothing. Interior points use the centred window; the first and last
/// half-windows are read off the polynomial fitted to the first and last full window.
pub fn savitzky_golay(y: &[f64], window: usize, order: usize) -> Result<Vec<f64>> {
    Smoothing { window, order }.validate()?;
    let n = y.len();
    if n < window {
        return Err(Error::config("sg_window", format!("series of {n} points is shorter than the window {window}")));
    }
    let hat = hat_matrix(window, order)?;
    let h = window / 2;
    let apply = |row: usize, start: usize| (0..window).map(|j| hat[(row, j)] * y[start + j]).sum::<f64>();
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        *o = if i < h {
            apply(i, 0)
        } else if i >= n - h {
            apply(i + window - n, n - window)
        } else {
            apply(h, i - h)
        };
    }
    Ok(out)
}

/// `(W + 1) * wide - W * narrow`, where `wide[i]` is the window-`(W + 1)` value one cycle
/// after the point of `narrow[i]`.
pub fn relative_from_series(narrow: &[f64], wide: &[f64], w: usize) -> Vec<f64> {
    let wf = w as f64;
    narrow.iter().zip(wide).map(|(&a, &b)| (wf + 1.0) * b - wf * a).collect()
}

/// Replaces NaNs by the nearest earlier finite value (the first finite one at the start).
fn fill_gaps(y: &mut [f64]) -> Result<()> {
    let first = y
        .iter()
        .copied()
        .find(|v| v.is_finite())
        .ok_or_else(|| Error::numerical("series has no valid estimate"))?;
    let mut last = first;
    for v in y.iter_mut() {
        if v.is_finite() {
            last = *v;
        } else {
            *v = last;
        }
    }
    Ok(())
}

/// Relative-window estimates of every class on end points `t` with stride 1.
/// `smoothing = None` differences the raw window series.
pub fn relative_estimate(counts: &Counts, classes: &[EdgeClass], w: usize, smoothing: Option<Smoothing>) -> Result<SeriesSet> {
    if w < 1 || counts.cycles < w + 2 {
        return Err(Error::config("window", format!("relative estimation needs at least W + 2 = {} cycles", w + 2)));
    }
    if let Some(s) = smoothing {
        s.validate()?;
    }
    let narrow = sliding_series(counts, classes, w, 1)?;
    let wide = sliding_series(counts, classes, w + 1, 1)?;
    // narrow at t pairs with wide at t + 1
    let t0 = narrow.t[0].max(wide.t[0] - 1);
    let t1 = (*narrow.t.last().unwrap()).min(wide.t.last().unwrap() - 1);
    if t1 < t0 {
        return Err(Error::data("no end point is valid for both windows"));
    }
    let na = t0 - narrow.t[0];
    let wa = t0 + 1 - wide.t[0];
    let len = t1 - t0 + 1;
    let wf = w as f64;
    let mut series = Vec::with_capacity(classes.len());
    for (sn, sw) in narrow.series.iter().zip(&wide.series) {
        let mut a = sn.p[na..na + len].to_vec();
        let mut b = sw.p[wa..wa + len].to_vec();
        let flags: Vec<u8> = (0..len)
            .map(|i| {
                let f = sn.flags[na + i] | sw.flags[wa + i];
                // a gap in either window series is filled, so the point itself is not dropped
                f & !FLAG_DEGENERATE
            })
            .collect();
        fill_gaps(&mut a)?;
        fill_gaps(&mut b)?;
        if let Some(s) = smoothing {
            a = savitzky_golay(&a, s.window, s.order)?;
            b = savitzky_golay(&b, s.window, s.order)?;
        }
        let p: Vec<f64> = relative_from_series(&a, &b, w).into_iter().map(|v| v.clamp(0.0, 0.5 - f64::EPSILON)).collect();
        let sigma: Vec<f64> = (0..len)
            .map(|i| {
                let (sa, sb) = (sn.sigma[na + i], sw.sigma[wa + i]);
                ((wf + 1.0).powi(2) * sb * sb + wf * wf * sa * sa).sqrt()
            })
            .collect();
        series.push(EstimatedSeries { class: sn.class, p, sigma, flags });
    }
    Ok(SeriesSet { window: w, t: (t0..=t1).collect(), start_cycle: counts.start_cycle, series })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::temporal_average;
    use proptest::prelude::*;
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(rng: &mut ChaCha8Rng) -> f64 {
        (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn rms(a: &[f64], b: &[f64]) -> f64 {
        (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
    }

    #[test]
    fn polynomials_pass_unchanged() {
        let y: Vec<f64> = (0..400).map(|i| {
            let x = i as f64 / 100.0;
            1.0 - 2.0 * x + 0.5 * x * x - 0.1 * x * x * x
        }).collect();
        let s = savitzky_golay(&y, 31, 3).unwrap();
        assert!(y.iter().zip(&s).all(|(a, b)| (a - b).abs() < 1e-10));
        let c = savitzky_golay(&[0.25; 50], 11, 2).unwrap();
        assert!(c.iter().all(|v| (v - 0.25).abs() < 1e-14));
    }

    #[test]
    fn matches_known_coefficients() {
        // order 2, window 5 centre weights (-3, 12, 17, 12, -3) / 35
        let y = [0.0, 0.0, 0.0, 0.0, 35.0, 0.0, 0.0, 0.0, 0.0];
        let s = savitzky_golay(&y, 5, 2).unwrap();
        for (i, want) in [(2, -3.0), (3, 12.0), (4, 17.0), (5, 12.0), (6, -3.0)] {
            assert!((s[i] - want).abs() < 1e-12, "{i} {}", s[i]);
        }
    }

    #[test]
    fn bad_parameters() {
        assert!(savitzky_golay(&[0.0; 20], 4, 2).is_err());
        assert!(savitzky_golay(&[0.0; 20], 3, 2).is_err());
        assert!(savitzky_golay(&[0.0; 5], 7, 2).is_err());
    }

    #[test]
    fn noisy_sinusoid_rms_drops_fivefold() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let clean: Vec<f64> = (0..20_000).map(|i| 0.05 + 0.02 * (2.0 * std::f64::consts::PI * i as f64 / 5000.0).sin()).collect();
        let noisy: Vec<f64> = clean.iter().map(|c| c + 0.01 * (uniform(&mut rng) - 0.5) * 12f64.sqrt()).collect();
        let s = savitzky_golay(&noisy, 301, 3).unwrap();
        assert!(rms(&s, &clean) * 5.0 <= rms(&noisy, &clean));
    }

    #[test]
    fn differencing_is_exact_on_window_averages() {
        let w = 40;
        let truth: Vec<f64> = (0..300).map(|k| 0.02 + 0.01 * (k as f64 / 13.0).sin() + 1e-4 * k as f64).collect();
        let t: Vec<usize> = (w..truth.len() - 1).collect();
        let narrow: Vec<f64> = t.iter().map(|&x| temporal_average(&truth, x, w)).collect();
        let wide: Vec<f64> = t.iter().map(|&x| temporal_average(&truth, x + 1, w + 1)).collect();
        let rec = relative_from_series(&narrow, &wide, w);
        for (i, &x) in t.iter().enumerate() {
            assert!((rec[i] - truth[x]).abs() < 1e-12);
        }
        let flat = relative_from_series(&[0.07; 5], &[0.07; 5], 2000);
        assert!(flat.iter().all(|v| (v - 0.07).abs() < 1e-12));
    }

    #[test]
    fn smoothing_does_not_hurt_band_limited_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = 200;
        let truth: Vec<f64> = (0..6000).map(|k| 0.05 + 0.02 * (2.0 * std::f64::consts::PI * k as f64 / 1500.0).cos()).collect();
        let t: Vec<usize> = (w..truth.len() - 1).collect();
        let noise = |rng: &mut ChaCha8Rng| 1e-4 * (uniform(rng) - 0.5);
        let narrow: Vec<f64> = t.iter().map(|&x| temporal_average(&truth, x, w) + noise(&mut rng)).collect();
        let wide: Vec<f64> = t.iter().map(|&x| temporal_average(&truth, x + 1, w + 1) + noise(&mut rng)).collect();
        let want: Vec<f64> = t.iter().map(|&x| truth[x]).collect();
        let raw = relative_from_series(&narrow, &wide, w);
        let sm = relative_from_series(
            &savitzky_golay(&narrow, 301, 3).unwrap(),
            &savitzky_golay(&wide, 301, 3).unwrap(),
            w,
        );
        assert!(rms(&sm, &want) <= rms(&raw, &want));
    }

    proptest! {
        #[test]
        fn telescoping_identity(vals in proptest::collection::vec(0.0f64..0.3, 30..80), w in 1usize..20) {
            let t: Vec<usize> = (w..vals.len() - 1).collect();
            let narrow: Vec<f64> = t.iter().map(|&x| temporal_average(&vals, x, w)).collect();
            let wide: Vec<f64> = t.iter().map(|&x| temporal_average(&vals, x + 1, w + 1)).collect();
            let rec = relative_from_series(&narrow, &wide, w);
            for (i, &x) in t.iter().enumerate() {
                prop_assert!((rec[i] - vals[x]).abs() < 1e-12);
            }
        }

        #[test]
        fn smoothing_is_shift_equivariant(vals in proptest::collection::vec(-1.0f64..1.0, 40..60), k in 0usize..5) {
            let a = savitzky_golay(&vals[k..], 11, 3).unwrap();
            let b = savitzky_golay(&vals, 11, 3).unwrap();
            for i in 5..a.len() - 5 {
                prop_assert!((a[i] - b[i + k]).abs() < 1e-12);
            }
        }
    }
}
