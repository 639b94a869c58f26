//! Fundamental-frequency power extraction and response metrics.
//!
//! Fundamentals come from a one-period DFT slid sample by sample, so every input
//! sample after the first full period yields one output. Reactive power is positive
//! for inductive (absorbing) behavior.

pub mod csvio;

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::SagProfile;

/// Number of samples per period, rejecting non-integer ratios.
pub fn samples_per_period(f0: f64, fs: f64) -> Result<usize> {
    let n = fs / f0;
    let r = n.round();
    if !(f0 > 0.0 && fs > 0.0) || (n - r).abs() > 1e-9 * n {
        return Err(Error::Analysis(format!(
            "sample rate {fs} Hz is not an integer multiple of {f0} Hz; resample first"
        )));
    }
    if r < 32.0 {
        return Err(Error::Analysis(format!(
            "{r} samples per period, at least 32 required"
        )));
    }
    Ok(r as usize)
}

/// Running one-period DFT at the fundamental.
///
/// The phasor of `A sin(wt + phi)` is `A e^{j(phi - pi/2)}` relative to the sample
/// counter; only phase differences between channels are meaningful.
#[derive(Debug, Clone)]
pub struct SlidingPhasor {
    n: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
    buf: Vec<f64>,
    pos: usize,
    count: u64,
    acc: Complex64,
}

impl SlidingPhasor {
    pub fn new(n: usize) -> Self {
        let (cos, sin) = (0..n)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / n as f64;
                (a.cos(), a.sin())
            })
            .unzip();
        Self {
            n,
            cos,
            sin,
            buf: vec![0.0; n],
            pos: 0,
            count: 0,
            acc: Complex64::new(0.0, 0.0),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    /// Position of the next sample within the period, the phase reference of [`Self::phasor`].
    pub fn next_index(&self) -> usize {
        self.pos
    }

    pub fn is_full(&self) -> bool {
        self.count >= self.n as u64
    }

    pub fn push(&mut self, x: f64) {
        let k = self.pos;
        let old = self.buf[k];
        self.buf[k] = x;
        let d = x - old;
        self.acc += Complex64::new(d * self.cos[k], -d * self.sin[k]);
        self.pos = (k + 1) % self.n;
        self.count += 1;
        if self.pos == 0 {
            // Drop the accumulated rounding once per period.
            self.acc = self
                .buf
                .iter()
                .enumerate()
                .map(|(k, &v)| Complex64::new(v * self.cos[k], -v * self.sin[k]))
                .sum();
        }
    }

    /// Peak-value phasor of the last period (zero-padded before the window is full).
    pub fn phasor(&self) -> Complex64 {
        self.acc * (2.0 / self.n as f64)
    }

    pub fn reset(&mut self) {
        self.buf.iter_mut().for_each(|v| *v = 0.0);
        self.pos = 0;
        self.count = 0;
        self.acc = Complex64::new(0.0, 0.0);
    }
}

/// Fundamental active and reactive power over time.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalSeries {
    pub t: Vec<f64>,
    pub p1: Vec<f64>,
    pub q1: Vec<f64>,
    pub p1_pu: Vec<f64>,
    pub q1_pu: Vec<f64>,
    pub p_base: f64,
}

impl FundamentalSeries {
    pub fn new(t: Vec<f64>, p1: Vec<f64>, q1: Vec<f64>, p_base: f64) -> Self {
        let p1_pu = p1.iter().map(|p| p / p_base).collect();
        let q1_pu = q1.iter().map(|q| q / p_base).collect();
        Self {
            t,
            p1,
            q1,
            p1_pu,
            q1_pu,
            p_base,
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Element-wise sum of several series on the same time grid.
    pub fn sum(parts: &[FundamentalSeries], p_base: f64) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Analysis("no series to sum".into()))?;
        if parts.iter().any(|s| s.t != first.t) {
            return Err(Error::Analysis("series are on different time grids".into()));
        }
        let add = |f: fn(&FundamentalSeries) -> &Vec<f64>| {
            (0..first.len())
                .map(|k| parts.iter().map(|s| f(s)[k]).sum())
                .collect()
        };
        Ok(Self::new(first.t.clone(), add(|s| &s.p1), add(|s| &s.q1), p_base))
    }

    pub fn index_at(&self, t: f64) -> usize {
        self.t.partition_point(|&x| x < t)
    }

    fn range(&self, t0: f64, t1: f64) -> std::ops::Range<usize> {
        self.index_at(t0)..self.index_at(t1)
    }

    fn step(&self) -> f64 {
        if self.len() > 1 {
            self.t[1] - self.t[0]
        } else {
            0.0
        }
    }
}

/// Fundamental P and Q from sampled voltage and current.
///
/// `t` gives the sample instants; the output starts at the sample that completes
/// the first full period.
pub fn fundamental_pq(
    t: &[f64],
    u: &[f64],
    i: &[f64],
    f0: f64,
    fs: f64,
    p_base: f64,
) -> Result<FundamentalSeries> {
    let n = samples_per_period(f0, fs)?;
    if u.len() != i.len() || u.len() != t.len() {
        return Err(Error::Analysis("voltage, current and time lengths differ".into()));
    }
    if u.len() < n {
        return Err(Error::Analysis(format!(
            "{} samples, one period needs {n}",
            u.len()
        )));
    }
    let mut pu = SlidingPhasor::new(n);
    let mut pi = SlidingPhasor::new(n);
    let m = u.len() - n + 1;
    let (mut p, mut q) = (Vec::with_capacity(m), Vec::with_capacity(m));
    for k in 0..u.len() {
        pu.push(u[k]);
        pi.push(i[k]);
        if k + 1 >= n {
            let s = 0.5 * pu.phasor() * pi.phasor().conj();
            p.push(s.re);
            q.push(s.im);
        }
    }
    Ok(FundamentalSeries::new(t[n - 1..].to_vec(), p, q, p_base))
}

/// Magnitude of the fundamental (RMS) over a sliding one-period window.
pub fn fundamental_rms(x: &[f64], n: usize) -> Vec<f64> {
    let mut ph = SlidingPhasor::new(n);
    x.iter()
        .map(|&v| {
            ph.push(v);
            ph.phasor().norm() / std::f64::consts::SQRT_2
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReactiveSign {
    Capacitive,
    Inductive,
}

impl ReactiveSign {
    pub fn label(self) -> &'static str {
        match self {
            ReactiveSign::Capacitive => "cap.",
            ReactiveSign::Inductive => "ind.",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMetrics {
    pub pf_pre: f64,
    pub q_sign_pre: ReactiveSign,
    pub p_pre_pu: f64,
    /// Drop of P below its pre-fault value during the fault (pu).
    pub dip_depth: f64,
    pub restored: bool,
    /// Mean P over the last 20 ms of the fault (pu).
    pub p_intermediate: f64,
    pub p_peak: f64,
    /// Largest-magnitude Q after clearing, sign kept (pu).
    pub q_peak: f64,
    /// Time after clearing until P stays within 5 % of its pre-fault value.
    pub t_recover: Option<f64>,
    pub disconnects: Vec<(f64, Option<f64>)>,
}

/// Window after clearing searched for the recovery peak.
pub const PEAK_WINDOW: f64 = 0.2;
const RESTORE_HOLD: f64 = 0.02;
const INTERMEDIATE_WINDOW: f64 = 0.02;

/// Phase decomposition of a sag response.
///
/// `connected` optionally gives the load's connection state on the series' time grid.
pub fn response_metrics(
    series: &FundamentalSeries,
    profile: &SagProfile,
    connected: Option<&[bool]>,
) -> Result<ResponseMetrics> {
    if series.is_empty() || series.t[0] >= profile.t_start {
        return Err(Error::Analysis(
            "series must start before the sag begins".into(),
        ));
    }
    let t_clear = profile.t_clear();
    if *series.t.last().unwrap() < t_clear {
        return Err(Error::Analysis(
            "series ends before the fault is cleared".into(),
        ));
    }
    let pre = series.index_at(profile.t_start).saturating_sub(1);
    let (p_pre, q_pre) = (series.p1_pu[pre], series.q1_pu[pre]);
    let s_pre = p_pre.hypot(q_pre);
    let pf_pre = if s_pre > 0.0 { p_pre.abs() / s_pre } else { 1.0 };
    let q_sign_pre = if q_pre < 0.0 {
        ReactiveSign::Capacitive
    } else {
        ReactiveSign::Inductive
    };

    let fault = series.range(profile.t_start, t_clear);
    let p_min = series.p1_pu[fault.clone()]
        .iter()
        .fold(f64::INFINITY, |m, &v| m.min(v));
    let dip_depth = if fault.is_empty() {
        0.0
    } else {
        (p_pre - p_min).max(0.0)
    };

    let inter = series.range((t_clear - INTERMEDIATE_WINDOW).max(profile.t_start), t_clear);
    let p_intermediate = if inter.is_empty() {
        p_pre
    } else {
        series.p1_pu[inter.clone()].iter().sum::<f64>() / inter.len() as f64
    };

    let dt = series.step();
    let mut restored = false;
    if p_intermediate >= 0.1 && dt > 0.0 {
        let hold = (RESTORE_HOLD / dt).round() as usize;
        let mut run = 0usize;
        for &p in &series.p1_pu[fault.clone()] {
            if p >= 0.9 * p_intermediate && p <= 1.1 * p_intermediate {
                run += 1;
                if run >= hold {
                    restored = true;
                    break;
                }
            } else {
                run = 0;
            }
        }
    }

    let after = series.range(t_clear, t_clear + PEAK_WINDOW);
    let p_peak = series.p1_pu[after.clone()]
        .iter()
        .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let q_peak = series.q1_pu[after.clone()]
        .iter()
        .fold(0.0_f64, |m, &v| if v.abs() > m.abs() { v } else { m });

    let tail = series.index_at(t_clear);
    let band = 0.05 * p_pre.abs();
    let t_recover = match series.p1_pu[tail..]
        .iter()
        .rposition(|&p| (p - p_pre).abs() > band)
    {
        None => Some(0.0),
        Some(k) if tail + k + 1 < series.len() => Some(series.t[tail + k + 1] - t_clear),
        Some(_) => None,
    };

    let mut disconnects = Vec::new();
    if let Some(c) = connected {
        if c.len() != series.len() {
            return Err(Error::Analysis(
                "connection trace length differs from series".into(),
            ));
        }
        for k in 1..c.len() {
            if c[k - 1] && !c[k] {
                disconnects.push((series.t[k], None));
            } else if !c[k - 1] && c[k] {
                if let Some(last) = disconnects.last_mut() {
                    last.1 = Some(series.t[k]);
                }
            }
        }
    }

    Ok(ResponseMetrics {
        pf_pre,
        q_sign_pre,
        p_pre_pu: p_pre,
        dip_depth,
        restored,
        p_intermediate,
        p_peak: if after.is_empty() { p_pre } else { p_peak },
        q_peak,
        t_recover,
        disconnects,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesComparison {
    pub rmse_p: f64,
    pub rmse_q: f64,
    pub peak_error: f64,
    pub samples: usize,
}

fn interpolate(t: &[f64], y: &[f64], x: f64) -> f64 {
    let k = t.partition_point(|&v| v <= x);
    if k == 0 {
        return y[0];
    }
    if k >= t.len() {
        return y[t.len() - 1];
    }
    let (t0, t1) = (t[k - 1], t[k]);
    let w = (x - t0) / (t1 - t0);
    y[k - 1] + w * (y[k] - y[k - 1])
}

/// Per-unit error metrics of `b` against `a`, evaluated on `a`'s samples inside the overlap.
pub fn compare_series(a: &FundamentalSeries, b: &FundamentalSeries) -> Result<SeriesComparison> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Analysis("empty series".into()));
    }
    let lo = a.t[0].max(b.t[0]);
    let hi = a.t[a.len() - 1].min(b.t[b.len() - 1]);
    let idx: Vec<usize> = (0..a.len()).filter(|&k| a.t[k] >= lo && a.t[k] <= hi).collect();
    if hi < lo || idx.is_empty() {
        return Err(Error::Analysis("series do not overlap in time".into()));
    }
    let (mut sp, mut sq, mut peak) = (0.0, 0.0, 0.0_f64);
    for &k in &idx {
        let dp = interpolate(&b.t, &b.p1_pu, a.t[k]) - a.p1_pu[k];
        let dq = interpolate(&b.t, &b.q1_pu, a.t[k]) - a.q1_pu[k];
        sp += dp * dp;
        sq += dq * dq;
        peak = peak.max(dp.abs()).max(dq.abs());
    }
    let n = idx.len() as f64;
    Ok(SeriesComparison {
        rmse_p: (sp / n).sqrt(),
        rmse_q: (sq / n).sqrt(),
        peak_error: peak,
        samples: idx.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::SQRT_2;

    const FS: f64 = 100e3;

    fn signal(n: usize, f: impl Fn(f64) -> f64) -> (Vec<f64>, Vec<f64>) {
        let t: Vec<f64> = (0..n).map(|k| k as f64 / FS).collect();
        let y = t.iter().map(|&t| f(t)).collect();
        (t, y)
    }

    fn w(t: f64) -> f64 {
        2.0 * PI * 50.0 * t
    }

    #[test]
    fn lagging_current_gives_inductive_q() {
        let (t, u) = signal(6000, |t| SQRT_2 * 230.0 * w(t).sin());
        let (_, i) = signal(6000, |t| SQRT_2 * (w(t) - PI / 6.0).sin());
        let s = fundamental_pq(&t, &u, &i, 50.0, FS, 230.0).unwrap();
        assert_eq!(s.len(), 6000 - 2000 + 1);
        for k in [0, 1234, s.len() - 1] {
            assert!((s.p1[k] - 199.18584287042088).abs() / 199.19 < 1e-6);
            assert!((s.q1[k] - 115.0).abs() / 115.0 < 1e-6);
        }
    }

    #[test]
    fn zero_current_and_harmonics_vanish() {
        let (t, u) = signal(4000, |t| SQRT_2 * 230.0 * w(t).sin());
        let zero = vec![0.0; 4000];
        let s = fundamental_pq(&t, &u, &zero, 50.0, FS, 1.0).unwrap();
        assert!(s.p1.iter().chain(&s.q1).all(|&v| v == 0.0));
        let (_, h3) = signal(4000, |t| 10.0 * (3.0 * w(t) + 0.3).sin());
        let s = fundamental_pq(&t, &u, &h3, 50.0, FS, 1.0).unwrap();
        assert!(s.p1.iter().chain(&s.q1).all(|&v| v.abs() < 1e-9));
    }

    #[test]
    fn non_integer_ratio_rejected() {
        assert!(samples_per_period(50.0, 100_010.0).is_err());
        assert!(samples_per_period(50.0, 1000.0).is_err());
        assert_eq!(samples_per_period(50.0, 100e3).unwrap(), 2000);
    }

    #[test]
    fn mean_power_equals_p1_for_pure_fundamentals() {
        let (t, u) = signal(2000, |t| 300.0 * (w(t) + 0.2).sin());
        let (_, i) = signal(2000, |t| 2.0 * (w(t) - 0.7).sin());
        let s = fundamental_pq(&t, &u, &i, 50.0, FS, 1.0).unwrap();
        let mean = u.iter().zip(&i).map(|(a, b)| a * b).sum::<f64>() / 2000.0;
        assert!((s.p1[0] - mean).abs() / mean.abs() < 1e-9);
    }

    fn flat(p: f64, q: f64, t_end: f64) -> FundamentalSeries {
        let n = (t_end * 10e3) as usize + 1;
        let t: Vec<f64> = (0..n).map(|k| k as f64 * 1e-4).collect();
        FundamentalSeries::new(t, vec![p; n], vec![q; n], 100.0)
    }

    #[test]
    fn flat_series_has_no_dip_or_events() {
        let s = flat(100.0, -20.0, 0.5);
        let conn = vec![true; s.len()];
        let m = response_metrics(&s, &SagProfile::sag(0.6, 0.1), Some(&conn)).unwrap();
        assert_eq!(m.dip_depth, 0.0);
        assert!(m.disconnects.is_empty());
        assert_eq!(m.q_sign_pre, ReactiveSign::Capacitive);
        assert!((m.pf_pre - 100.0 / 101.9803902718557).abs() < 1e-12);
        assert_eq!(m.t_recover, Some(0.0));
    }

    #[test]
    fn synthetic_phase_structure() {
        let profile = SagProfile::sag(0.6, 0.1);
        let mut s = flat(100.0, 0.0, 0.5);
        for k in 0..s.len() {
            let t = s.t[k];
            let p = if t < 0.04 {
                1.0
            } else if t < 0.07 {
                0.1
            } else if t < 0.14 {
                0.95
            } else if t < 0.16 {
                3.0
            } else {
                1.0
            };
            s.p1_pu[k] = p;
            s.p1[k] = 100.0 * p;
        }
        let conn: Vec<bool> = s.t.iter().map(|&t| !(0.05..0.3).contains(&t)).collect();
        let m = response_metrics(&s, &profile, Some(&conn)).unwrap();
        assert!(m.restored);
        assert!((m.dip_depth - 0.9).abs() < 1e-12);
        assert!((m.p_intermediate - 0.95).abs() < 1e-12);
        assert_eq!(m.p_peak, 3.0);
        assert!((m.t_recover.unwrap() - 0.02).abs() < 1e-9);
        assert_eq!(m.disconnects.len(), 1);
        assert!((m.disconnects[0].0 - 0.05).abs() < 1e-9);
        assert!((m.disconnects[0].1.unwrap() - 0.3).abs() < 1e-9);
    }

    #[test]
    fn zero_power_during_fault_is_not_restored() {
        let mut s = flat(100.0, 0.0, 0.5);
        for k in 0..s.len() {
            if (0.04..0.14).contains(&s.t[k]) {
                s.p1_pu[k] = 0.0;
            }
        }
        let m = response_metrics(&s, &SagProfile::sag(1.0, 0.1), None).unwrap();
        assert!(!m.restored);
    }

    #[test]
    fn short_series_rejected() {
        let s = flat(1.0, 0.0, 0.1);
        assert!(response_metrics(&s, &SagProfile::sag(0.6, 0.1), None).is_err());
    }

    #[test]
    fn comparison_metrics() {
        let a = flat(100.0, 10.0, 0.2);
        let c = compare_series(&a, &a).unwrap();
        assert_eq!((c.rmse_p, c.rmse_q, c.peak_error), (0.0, 0.0, 0.0));
        let b = flat(110.0, 10.0, 0.2);
        let c = compare_series(&a, &b).unwrap();
        assert!((c.rmse_p - 0.1).abs() < 1e-12);
        let mut late = flat(1.0, 0.0, 0.1);
        late.t.iter_mut().for_each(|t| *t += 5.0);
        assert!(compare_series(&a, &late).is_err());
    }

    proptest! {
        #[test]
        fn shift_equivariance(m in 1usize..500, phi in -PI..PI, amp in 0.1f64..10.0) {
            let n = 5000 + m;
            let (t, u) = signal(n, |t| 325.0 * w(t).sin() + 20.0 * (5.0 * w(t)).sin());
            let (_, i) = signal(n, |t| amp * (w(t) + phi).sin() + (t * 37.0).sin());
            let base = fundamental_pq(&t[..5000], &u[..5000], &i[..5000], 50.0, FS, 1.0).unwrap();
            let mut ud = vec![0.0; m];
            ud.extend_from_slice(&u[..5000]);
            let mut id = vec![0.0; m];
            id.extend_from_slice(&i[..5000]);
            let shifted = fundamental_pq(&t, &ud, &id, 50.0, FS, 1.0).unwrap();
            for k in 0..base.len() {
                let scale = 325.0 * amp;
                prop_assert!((shifted.p1[k + m] - base.p1[k]).abs() < 1e-9 * scale);
                prop_assert!((shifted.q1[k + m] - base.q1[k]).abs() < 1e-9 * scale);
            }
        }
    }
}
