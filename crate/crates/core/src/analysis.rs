//! Shared observables: correlation, histograms, convergence detection and
//! CSV emission. Pure functions, safe to call from any thread.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::float::Real;

/// Pearson correlation of two equally-shaped fields.
///
/// Returns `None` when either input has zero variance (the coefficient is
/// undefined there).
pub fn pearson<T: Real>(a: &[T], b: &[T]) -> Result<Option<f64>> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "pearson inputs differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Ok(None);
    }
    let n = a.len() as f64;
    let (mut sa, mut sb) = (0.0f64, 0.0f64);
    for i in 0..a.len() {
        sa += a[i].f64();
        sb += b[i].f64();
    }
    let (ma, mb) = (sa / n, sb / n);
    let (mut vaa, mut vbb, mut vab) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..a.len() {
        let da = a[i].f64() - ma;
        let db = b[i].f64() - mb;
        vaa += da * da;
        vbb += db * db;
        vab += da * db;
    }
    if vaa == 0.0 || vbb == 0.0 {
        return Ok(None);
    }
    Ok(Some(vab / (vaa.sqrt() * vbb.sqrt())))
}

/// Ordered (step, value) samples with strictly increasing steps.
#[derive(Debug, Clone, Default)]
pub struct TimeSeries {
    pub name: String,
    samples: Vec<(u64, f64)>,
}

impl TimeSeries {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            samples: Vec::new(),
        }
    }

    pub fn push(&mut self, step: u64, value: f64) {
        if let Some(&(last, _)) = self.samples.last() {
            assert!(step > last, "time series steps must be strictly increasing");
        }
        self.samples.push((step, value));
    }

    pub fn samples(&self) -> &[(u64, f64)] {
        &self.samples
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|&(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean of the last `n` samples.
    pub fn tail_mean(&self, n: usize) -> f64 {
        let k = n.min(self.samples.len());
        if k == 0 {
            return f64::NAN;
        }
        self.samples[self.samples.len() - k..]
            .iter()
            .map(|&(_, v)| v)
            .sum::<f64>()
            / k as f64
    }
}

/// Earliest step at which a sliding window of `window` samples has
/// `max - min < tol`; `None` if that never happens.
pub fn running_mean_convergence(ts: &TimeSeries, window: usize, tol: f64) -> Option<u64> {
    assert!(window >= 2, "window must be at least 2");
    let s = ts.samples();
    if s.len() < window {
        return None;
    }
    for end in window..=s.len() {
        let w = &s[end - window..end];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &(_, v) in w {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi - lo < tol {
            return Some(w[window - 1].0);
        }
    }
    None
}

/// Fixed-width histogram. Non-finite inputs are skipped.
#[derive(Debug, Clone)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Center value of the most populated bin.
    pub fn mode_center(&self) -> f64 {
        let (i, _) = self
            .counts
            .iter()
            .enumerate()
            .max_by_key(|&(_, c)| *c)
            .unwrap_or((0, &0));
        if self.hi == self.lo {
            return self.lo;
        }
        let w = (self.hi - self.lo) / self.counts.len() as f64;
        self.lo + (i as f64 + 0.5) * w
    }
}

pub fn histogram<T: Real>(values: &[T], bins: usize) -> Histogram {
    assert!(bins >= 1, "need at least one bin");
    let finite: Vec<f64> = values.iter().map(|v| v.f64()).filter(|v| v.is_finite()).collect();
    let mut counts = vec![0u64; bins];
    if finite.is_empty() {
        return Histogram {
            lo: 0.0,
            hi: 1.0,
            counts,
        };
    }
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        counts[0] = finite.len() as u64;
        return Histogram { lo, hi, counts };
    }
    let scale = bins as f64 / (hi - lo);
    for v in finite {
        let b = (((v - lo) * scale) as usize).min(bins - 1);
        counts[b] += 1;
    }
    Histogram { lo, hi, counts }
}

/// Mean and standard deviation (population) in one pass, f64-accumulated.
pub fn mean_std<T: Real>(values: &[T]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().map(|v| v.f64()).sum::<f64>() / n;
    let var = values
        .iter()
        .map(|v| {
            let d = v.f64() - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    (mean, var.sqrt())
}

/// CSV writer with a fixed numeric format (9 significant digits) so output
/// files diff cleanly across platforms.
pub struct CsvWriter {
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: impl AsRef<Path>, header: &[&str]) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", header.join(","))?;
        Ok(Self { out })
    }

    pub fn format_value(v: f64) -> String {
        if v == v.trunc() && v.abs() < 1e15 && v.is_finite() {
            format!("{}", v as i64)
        } else {
            format!("{v:.8e}")
        }
    }

    pub fn write_row(&mut self, values: &[f64]) -> Result<()> {
        let line: Vec<String> = values.iter().map(|&v| Self::format_value(v)).collect();
        writeln!(self.out, "{}", line.join(","))?;
        Ok(())
    }

    pub fn write_raw_row(&mut self, values: &[String]) -> Result<()> {
        writeln!(self.out, "{}", values.join(","))?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pearson_self_and_anti() {
        let a: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = a.iter().map(|v| -v).collect();
        assert!((pearson(&a, &a).unwrap().unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&a, &b).unwrap().unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_zero_variance_is_undefined() {
        let a = vec![2.0f64; 10];
        let b: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert_eq!(pearson(&a, &b).unwrap(), None);
    }

    #[test]
    fn pearson_shape_mismatch_errors() {
        let a = vec![1.0f64, 2.0];
        let b = vec![1.0f64];
        assert!(pearson(&a, &b).is_err());
    }

    #[test]
    fn pearson_independent_fields_decorrelate() {
        // two independent pseudo-random 1e4-cell fields: |corr| < 0.05
        let rf = crate::rng::RandomField::new(2024);
        let a: Vec<f64> = (0..10_000).map(|i| rf.uniform(0, i, 0)).collect();
        let b: Vec<f64> = (0..10_000).map(|i| rf.uniform(1, i, 0)).collect();
        let c = pearson(&a, &b).unwrap().unwrap();
        assert!(c.abs() < 0.05, "corr {c}");
    }

    proptest! {
        #[test]
        fn pearson_scale_invariant(scale in 0.1f64..10.0, shift in -5.0f64..5.0) {
            let a: Vec<f64> = (0..64).map(|i| (i as f64 * 0.7).cos()).collect();
            let b: Vec<f64> = (0..64).map(|i| (i as f64 * 0.3 + 1.0).sin()).collect();
            let scaled: Vec<f64> = a.iter().map(|v| v * scale + shift).collect();
            let c1 = pearson(&a, &b).unwrap().unwrap();
            let c2 = pearson(&scaled, &b).unwrap().unwrap();
            prop_assert!((c1 - c2).abs() < 1e-6);
        }
    }

    #[test]
    fn convergence_constant_series() {
        let mut ts = TimeSeries::new("c");
        for i in 0..10 {
            ts.push(i, 1.0);
        }
        assert_eq!(running_mean_convergence(&ts, 3, 0.1), Some(2));
    }

    #[test]
    fn convergence_divergent_series_is_none() {
        let mut ts = TimeSeries::new("d");
        for i in 0..50 {
            ts.push(i, i as f64);
        }
        assert_eq!(running_mean_convergence(&ts, 5, 0.5), None);
    }

    #[test]
    fn convergence_of_decaying_envelope() {
        // 2.269 + 0.5 exp(-t/100) * alternating sign: converges once the
        // envelope drops below tol
        let mut ts = TimeSeries::new("e");
        for t in 0..2000u64 {
            let noise = if t % 2 == 0 { 1.0 } else { -1.0 };
            ts.push(t, 2.269 + 0.5 * (-(t as f64) / 100.0).exp() * noise);
        }
        let at = running_mean_convergence(&ts, 10, 0.05).unwrap();
        // envelope peak-to-peak is 2 * 0.5 e^{-t/100} < 0.05 near t = 370
        assert!((300..500).contains(&at), "converged at {at}");
    }

    #[test]
    fn histogram_single_value() {
        let h = histogram(&[3.0f32; 17], 8);
        assert_eq!(h.counts[0], 17);
        assert_eq!(h.total(), 17);
    }

    #[test]
    fn histogram_empty_input() {
        let h = histogram::<f32>(&[], 4);
        assert!(h.counts.iter().all(|&c| c == 0));
    }

    #[test]
    fn histogram_mass_conservation_with_nonfinite() {
        let vals = [1.0f32, 2.0, f32::NAN, 3.0, f32::INFINITY, 0.5];
        assert_eq!(histogram(&vals, 4).total(), 4);
    }

    #[test]
    fn histogram_uniform_chi_square() {
        // 1e5 uniform samples over 100 bins; chi2 must stay under the
        // p = 0.01 critical value for 99 dof (134.642)
        let rf = crate::rng::RandomField::new(31);
        let vals: Vec<f64> = (0..100_000).map(|i| rf.uniform(0, i, 5)).collect();
        let h = histogram(&vals, 100);
        let expect = vals.len() as f64 / 100.0;
        let chi2: f64 = h
            .counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expect;
                d * d / expect
            })
            .sum();
        assert!(chi2 < 134.642, "chi2 {chi2}");
    }

    #[test]
    fn csv_formatting() {
        assert_eq!(CsvWriter::format_value(3.0), "3");
        assert_eq!(CsvWriter::format_value(0.25), "2.50000000e-1");
    }
}
