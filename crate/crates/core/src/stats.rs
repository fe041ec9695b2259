//! Mergeable per-site sample statistics.
//!
//! Each site keeps `(count, mean, M2)` with Welford's streaming update.
//! Partial accumulators combine with the pairwise formula of Chan, Golub and
//! LeVeque, so trajectories can be reduced in any grouping.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SiteMoments {
    pub count: u64,
    pub mean: f64,
    /// Sum of squared deviations from the mean.
    pub m2: f64,
}

impl SiteMoments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&self, other: &Self) -> Self {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let n = self.count + other.count;
        let (na, nb) = (self.count as f64, other.count as f64);
        let delta = other.mean - self.mean;
        Self {
            count: n,
            mean: self.mean + delta * nb / n as f64,
            m2: self.m2 + other.m2 + delta * delta * na * nb / n as f64,
        }
    }

    /// Unbiased sample variance; `None` with fewer than two samples.
    pub fn variance(&self) -> Option<f64> {
        (self.count >= 2).then(|| (self.m2 / (self.count - 1) as f64).max(0.0))
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> Option<f64> {
        self.variance().map(|v| (v / self.count as f64).sqrt())
    }
}

/// Running statistics of one estimator across sites.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimatorAccumulator {
    sites: Vec<SiteMoments>,
}

impl EstimatorAccumulator {
    pub fn new(n_sites: usize) -> Self {
        Self { sites: vec![SiteMoments::default(); n_sites] }
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn site(&self, site: usize) -> &SiteMoments {
        &self.sites[site]
    }

    pub fn sites(&self) -> &[SiteMoments] {
        &self.sites
    }

    /// Adds one trajectory; `None` entries leave that site untouched.
    pub fn push(&mut self, values: &[Option<f64>]) -> Result<()> {
        if values.len() != self.sites.len() {
            return Err(Error::Shape(format!("{} values for {} sites", values.len(), self.sites.len())));
        }
        for (m, v) in self.sites.iter_mut().zip(values) {
            if let Some(x) = v {
                m.push(*x);
            }
        }
        Ok(())
    }

    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.sites.len() != other.sites.len() {
            return Err(Error::Shape(format!(
                "merging accumulators over {} and {} sites",
                self.sites.len(),
                other.sites.len()
            )));
        }
        Ok(Self { sites: self.sites.iter().zip(&other.sites).map(|(a, b)| a.merge(b)).collect() })
    }

    pub fn mean(&self, site: usize) -> Option<f64> {
        let m = self.sites.get(site)?;
        (m.count > 0).then_some(m.mean)
    }

    pub fn variance(&self, site: usize) -> Option<f64> {
        self.sites.get(site)?.variance()
    }

    pub fn stderr(&self, site: usize) -> Option<f64> {
        self.sites.get(site)?.stderr()
    }
}

/// `(1/(L+1)) Σ_{ℓ=c-L/2}^{c+L/2} Var[ℓ]` for an even window width `L`.
pub fn windowed_variance(acc: &EstimatorAccumulator, center: usize, width: usize) -> Result<f64> {
    window(acc, center, width, |a, s| a.variance(s))
}

/// Window average of the per-site means, matching [`windowed_variance`].
pub fn windowed_mean(acc: &EstimatorAccumulator, center: usize, width: usize) -> Result<f64> {
    window(acc, center, width, |a, s| a.mean(s))
}

fn window(
    acc: &EstimatorAccumulator,
    center: usize,
    width: usize,
    f: impl Fn(&EstimatorAccumulator, usize) -> Option<f64>,
) -> Result<f64> {
    if !width.is_multiple_of(2) {
        return Err(Error::Contract(format!("window width must be even, got {width}")));
    }
    let half = width / 2;
    if center < half || center + half >= acc.n_sites() {
        return Err(Error::Contract(format!(
            "window of width {width} around site {center} leaves a {}-site chain",
            acc.n_sites()
        )));
    }
    let mut total = 0.0;
    for s in center - half..=center + half {
        total += f(acc, s).ok_or_else(|| Error::Contract(format!("site {s} has too few samples")))?;
    }
    Ok(total / (width + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [0.5, -0.5, 0.25, 0.125, 3.0];
        let mut m = SiteMoments::default();
        xs.iter().for_each(|&x| m.push(x));
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((m.mean - mean).abs() < 1e-15);
        assert!((m.variance().unwrap() - var).abs() < 1e-14);
    }

    #[test]
    fn merge_identity_and_commutativity() {
        let mut a = EstimatorAccumulator::new(2);
        let mut b = EstimatorAccumulator::new(2);
        a.push(&[Some(1.0), None]).unwrap();
        a.push(&[Some(2.0), Some(4.0)]).unwrap();
        b.push(&[Some(-1.0), Some(0.5)]).unwrap();
        assert_eq!(a.merge(&EstimatorAccumulator::new(2)).unwrap(), a);
        let ab = a.merge(&b).unwrap();
        let ba = b.merge(&a).unwrap();
        for s in 0..2 {
            assert!((ab.mean(s).unwrap() - ba.mean(s).unwrap()).abs() < 1e-12);
        }
        assert!((ab.variance(0).unwrap() - ba.variance(0).unwrap()).abs() < 1e-12);
        assert!(a.merge(&EstimatorAccumulator::new(3)).is_err());
    }

    #[test]
    fn constant_estimator_has_zero_window_variance() {
        let mut a = EstimatorAccumulator::new(5);
        for _ in 0..10 {
            a.push(&[Some(0.3); 5]).unwrap();
        }
        assert_eq!(windowed_variance(&a, 2, 4).unwrap(), 0.0);
        assert!(windowed_variance(&a, 1, 4).is_err());
        assert!(windowed_variance(&a, 2, 3).is_err());
    }
}
