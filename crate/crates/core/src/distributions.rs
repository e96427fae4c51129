//! Competitor-bid and own-value distributions.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `exp(mu + sigma * Z)` clamped to `[0, upper]`; the clamped tail forms an atom at `upper`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedLognormal {
    pub mu: f64,
    pub sigma: f64,
    pub upper: f64,
}

impl TruncatedLognormal {
    pub fn new(mu: f64, sigma: f64, upper: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::Validation(format!("lognormal mu must be finite, got {mu}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Validation(format!("lognormal sigma must be > 0, got {sigma}")));
        }
        if !(upper > 0.0 && upper.is_finite()) {
            return Err(Error::Validation(format!("truncation bound must be > 0, got {upper}")));
        }
        Ok(Self { mu, sigma, upper })
    }

    /// Mean 1, variance 1 competitor bids, truncated at 10.
    pub fn unit_variance() -> Self {
        Self { mu: -0.3466, sigma: 0.8326, upper: 10.0 }
    }

    /// Mean 1, variance 2 competitor bids, truncated at 15.
    pub fn double_variance() -> Self {
        Self { mu: -0.5493, sigma: 1.0481, upper: 15.0 }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        (self.mu + self.sigma * z).exp().min(self.upper)
    }

    fn untruncated_cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            standard_normal_cdf((x.ln() - self.mu) / self.sigma)
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x >= self.upper {
            1.0
        } else {
            self.untruncated_cdf(x)
        }
    }
}

/// Empirical CDF over a multiset of observed bids, kept sorted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_samples(mut samples: Vec<f64>) -> Self {
        samples.sort_by(f64::total_cmp);
        Self { sorted: samples }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of samples `<= x`; zero for an empty CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        self.sorted.partition_point(|&s| s <= x) as f64 / self.sorted.len() as f64
    }

    /// Fraction of samples `< x`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        self.sorted.partition_point(|&s| s < x) as f64 / self.sorted.len() as f64
    }

    /// Merges a batch of new observations (sorted once, then merged in linear time).
    pub fn extend(&mut self, new_bids: &[f64]) {
        debug_assert!(new_bids.iter().all(|b| b.is_finite() && *b >= 0.0));
        if new_bids.is_empty() {
            return;
        }
        let mut batch = new_bids.to_vec();
        batch.sort_by(f64::total_cmp);
        if self.sorted.last().is_none_or(|&last| last <= batch[0]) {
            self.sorted.extend_from_slice(&batch);
            return;
        }
        let old = std::mem::take(&mut self.sorted);
        let mut merged = Vec::with_capacity(old.len() + batch.len());
        let (mut i, mut j) = (0, 0);
        while i < old.len() && j < batch.len() {
            if old[i] <= batch[j] {
                merged.push(old[i]);
                i += 1;
            } else {
                merged.push(batch[j]);
                j += 1;
            }
        }
        merged.extend_from_slice(&old[i..]);
        merged.extend_from_slice(&batch[j..]);
        self.sorted = merged;
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sorted[rng.random_range(0..self.sorted.len())]
    }
}

/// Returns the CDF over the union of `cdf`'s samples and `new_bids`.
pub fn extend_empirical(cdf: &EmpiricalCdf, new_bids: &[f64]) -> EmpiricalCdf {
    let mut out = cdf.clone();
    out.extend(new_bids);
    out
}

/// A sampleable distribution with CDF access.
#[derive(Debug, Clone, PartialEq)]
pub enum BidDistribution {
    Uniform { low: f64, high: f64 },
    TruncatedLognormal(TruncatedLognormal),
    Empirical(Arc<EmpiricalCdf>),
    PointMass(f64),
}

impl BidDistribution {
    pub fn uniform(low: f64, high: f64) -> Result<Self> {
        if !(low >= 0.0 && high > low && high.is_finite()) {
            return Err(Error::Validation(format!(
                "uniform bounds must satisfy 0 <= low < high, got [{low}, {high}]"
            )));
        }
        Ok(BidDistribution::Uniform { low, high })
    }

    pub fn point_mass(at: f64) -> Result<Self> {
        if !(at >= 0.0 && at.is_finite()) {
            return Err(Error::Validation(format!("point mass must be finite and >= 0, got {at}")));
        }
        Ok(BidDistribution::PointMass(at))
    }

    pub fn empirical(cdf: EmpiricalCdf) -> Result<Self> {
        if cdf.is_empty() {
            return Err(Error::Validation("empirical distribution has no samples".into()));
        }
        Ok(BidDistribution::Empirical(Arc::new(cdf)))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            BidDistribution::Uniform { low, high } => rng.random_range(*low..*high),
            BidDistribution::TruncatedLognormal(d) => d.sample(rng),
            BidDistribution::Empirical(e) => e.sample(rng),
            BidDistribution::PointMass(x) => *x,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match self {
            BidDistribution::Uniform { low, high } => ((x - low) / (high - low)).clamp(0.0, 1.0),
            BidDistribution::TruncatedLognormal(d) => d.cdf(x),
            BidDistribution::Empirical(e) => e.cdf(x),
            BidDistribution::PointMass(p) => {
                if x >= *p {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Left limit `P(X < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            BidDistribution::TruncatedLognormal(d) => d.untruncated_cdf(x).min(1.0),
            BidDistribution::Empirical(e) => e.cdf_left(x),
            BidDistribution::PointMass(p) => {
                if x > *p {
                    1.0
                } else {
                    0.0
                }
            }
            BidDistribution::Uniform { .. } => self.cdf(x),
        }
    }

    /// Smallest `u` with `cdf(u) = 1`.
    pub fn upper_bound(&self) -> f64 {
        match self {
            BidDistribution::Uniform { high, .. } => *high,
            BidDistribution::TruncatedLognormal(d) => d.upper,
            BidDistribution::Empirical(e) => e.samples().last().copied().unwrap_or(0.0),
            BidDistribution::PointMass(p) => *p,
        }
    }
}

/// Own values: `base` draw times a `Uniform[low, high]` markup, clamped to `[0, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueModel {
    pub base: BidDistribution,
    pub multiplier_low: f64,
    pub multiplier_high: f64,
    pub upper: f64,
}

impl ValueModel {
    pub fn new(base: BidDistribution, multiplier_low: f64, multiplier_high: f64, upper: f64) -> Result<Self> {
        if !(multiplier_low >= 1.0 && multiplier_high >= multiplier_low && multiplier_high.is_finite()) {
            return Err(Error::Validation(format!(
                "value multiplier bounds must satisfy 1 <= low <= high, got [{multiplier_low}, {multiplier_high}]"
            )));
        }
        if !(upper > 0.0 && upper.is_finite()) {
            return Err(Error::Validation(format!("value bound must be > 0, got {upper}")));
        }
        Ok(Self { base, multiplier_low, multiplier_high, upper })
    }

    /// Degenerate model: always `value`.
    pub fn constant(value: f64) -> Result<Self> {
        Self::new(BidDistribution::point_mass(value)?, 1.0, 1.0, value.max(f64::MIN_POSITIVE))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let base = self.base.sample(rng);
        let markup = if self.multiplier_high > self.multiplier_low {
            rng.random_range(self.multiplier_low..self.multiplier_high)
        } else {
            self.multiplier_low
        };
        (base * markup).clamp(0.0, self.upper)
    }
}

/// DKW half-width: with probability `>= 1 - alpha`, `sup |F_m - F| <= sqrt(ln(2/alpha) / (2m))`.
pub fn dkw_epsilon(samples: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * samples as f64)).sqrt()
}

/// Kolmogorov distance `sup_x |F_m(x) - F(x)|` between an empirical CDF and `dist`.
pub fn sup_deviation(empirical: &EmpiricalCdf, dist: &BidDistribution) -> f64 {
    let xs = empirical.samples();
    let m = xs.len() as f64;
    let mut worst: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        worst = worst
            .max((i as f64 / m - dist.cdf_left(x)).abs())
            .max((j as f64 / m - dist.cdf(x)).abs());
        i = j;
    }
    worst
}

/// Reads one non-negative decimal per line (LF or CRLF, no header).
pub fn load_bid_samples(path: impl AsRef<Path>) -> Result<EmpiricalCdf> {
    let path = path.as_ref();
    let load_err = |line: usize, message: String| Error::Load {
        path: path.to_path_buf(),
        line,
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| load_err(0, e.to_string()))?;
    let mut samples = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        let value: f64 = trimmed
            .parse()
            .map_err(|_| load_err(line, format!("cannot parse '{trimmed}' as a number")))?;
        if !value.is_finite() || value < 0.0 {
            return Err(load_err(line, format!("value {value} must be finite and >= 0")));
        }
        samples.push(value);
    }
    if samples.is_empty() {
        return Err(load_err(0, "file contains no samples".into()));
    }
    Ok(EmpiricalCdf::from_samples(samples))
}

/// Writes samples in the format accepted by [`load_bid_samples`].
pub fn write_bid_samples(path: impl AsRef<Path>, samples: &[f64]) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for s in samples {
        writeln!(out, "{s}")?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Accumulator;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_variance_lognormal_has_mean_one() {
        let d = TruncatedLognormal::unit_variance();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let acc: Accumulator = (0..1_000_000).map(|_| d.sample(&mut rng)).collect();
        assert!((acc.mean() - 1.0).abs() <= 0.01, "mean {}", acc.mean());
    }

    /// `E[min(exp(mu + sigma Z), U)^k]` by Simpson's rule over `z`.
    fn clamped_moment(d: &TruncatedLognormal, k: i32) -> f64 {
        let (a, b, n) = (-12.0, 12.0, 200_000);
        let h = (b - a) / n as f64;
        let g = |z: f64| {
            let x = (d.mu + d.sigma * z).exp().min(d.upper);
            x.powi(k) * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
        };
        let mut s = g(a) + g(b);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn double_variance_lognormal_has_variance_two() {
        let d = TruncatedLognormal::double_variance();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let raw: Accumulator = (0..1_000_000)
            .map(|_| {
                let z: f64 = rand::Rng::sample(&mut rng, StandardNormal);
                (d.mu + d.sigma * z).exp()
            })
            .collect();
        assert!((raw.variance() - 2.0).abs() <= 0.1, "variance {}", raw.variance());

        // clamping at U removes a visible part of the tail
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let clamped: Accumulator = (0..1_000_000).map(|_| d.sample(&mut rng)).collect();
        let (m1, m2) = (clamped_moment(&d, 1), clamped_moment(&d, 2));
        let oracle = m2 - m1 * m1;
        assert!((clamped.mean() - m1).abs() < 0.01);
        assert!((clamped.variance() - oracle).abs() < 0.05, "{} vs {oracle}", clamped.variance());
    }

    #[test]
    fn truncation_mass_is_small() {
        // P([0, U]) >= 0.999 under the untruncated law
        for d in [TruncatedLognormal::unit_variance(), TruncatedLognormal::double_variance()] {
            assert!(d.untruncated_cdf(d.upper) >= 0.999);
            assert_eq!(d.cdf(d.upper), 1.0);
        }
    }

    #[test]
    fn degenerate_multiplier_reproduces_base() {
        let base = BidDistribution::TruncatedLognormal(TruncatedLognormal::unit_variance());
        let model = ValueModel::new(base.clone(), 1.0, 1.0, 10.0).unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            assert_eq!(model.sample(&mut a), base.sample(&mut b));
        }
    }

    #[test]
    fn value_model_stays_in_bounds() {
        let base = BidDistribution::TruncatedLognormal(TruncatedLognormal::unit_variance());
        let model = ValueModel::new(base, 1.0, 1.5, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        assert!((0..10_000).map(|_| model.sample(&mut rng)).all(|v| (0.0..=10.0).contains(&v)));
        assert!(ValueModel::new(BidDistribution::PointMass(1.0), 0.9, 1.5, 10.0).is_err());
    }

    #[test]
    fn empirical_cdf_counts() {
        let e = EmpiricalCdf::from_samples(vec![3.0, 1.0, 2.0]);
        assert!((e.cdf(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(e.cdf(-1.0), 0.0);
        assert_eq!(e.cdf(3.0), 1.0);

        let e = extend_empirical(&EmpiricalCdf::new(), &[0.5]);
        assert_eq!(e.cdf(0.5), 1.0);

        let e = extend_empirical(&EmpiricalCdf::from_samples(vec![1.0, 3.0]), &[2.0]);
        assert!((e.cdf(2.0) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empirical_grows_by_batch() {
        let d = BidDistribution::uniform(0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut e = EmpiricalCdf::new();
        for t in 1..=40 {
            let batch: Vec<f64> = (0..5).map(|_| d.sample(&mut rng)).collect();
            e.extend(&batch);
            assert_eq!(e.len(), 5 * t);
        }
        assert!(e.samples().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn negative_support_and_bounds() {
        let dists = [
            BidDistribution::uniform(0.0, 1.0).unwrap(),
            BidDistribution::TruncatedLognormal(TruncatedLognormal::unit_variance()),
            BidDistribution::empirical(EmpiricalCdf::from_samples(vec![0.2, 0.4])).unwrap(),
            BidDistribution::point_mass(0.3).unwrap(),
        ];
        for d in &dists {
            assert_eq!(d.cdf(-0.5), 0.0);
            assert_eq!(d.cdf(d.upper_bound()), 1.0);
        }
    }

    #[test]
    fn dkw_band_holds_in_most_trials() {
        let d = BidDistribution::uniform(0.0, 1.0).unwrap();
        let m = 500;
        let band = dkw_epsilon(m, 0.05);
        let covered = (0..200)
            .filter(|&trial| {
                let mut rng = ChaCha8Rng::seed_from_u64(trial);
                let e = EmpiricalCdf::from_samples((0..m).map(|_| d.sample(&mut rng)).collect());
                sup_deviation(&e, &d) <= band
            })
            .count();
        assert!(covered >= 190, "covered {covered} of 200");
    }

    #[test]
    fn loader_roundtrip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let ok = dir.path().join("ok.txt");
        fs::write(&ok, "0.5\n1.5\n").unwrap();
        assert_eq!(load_bid_samples(&ok).unwrap().samples(), &[0.5, 1.5]);

        let crlf = dir.path().join("crlf.txt");
        fs::write(&crlf, "2\r\n1\r\n").unwrap();
        assert_eq!(load_bid_samples(&crlf).unwrap().samples(), &[1.0, 2.0]);

        let empty = dir.path().join("empty.txt");
        fs::write(&empty, "").unwrap();
        assert!(matches!(load_bid_samples(&empty), Err(Error::Load { .. })));

        let bad = dir.path().join("bad.txt");
        fs::write(&bad, "0.1\n0.2\nabc\n").unwrap();
        match load_bid_samples(&bad) {
            Err(Error::Load { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected load error, got {other:?}"),
        }

        let neg = dir.path().join("neg.txt");
        fs::write(&neg, "0.1\n-2\n").unwrap();
        assert!(matches!(load_bid_samples(&neg), Err(Error::Load { line: 2, .. })));

        assert!(matches!(load_bid_samples(dir.path().join("missing.txt")), Err(Error::Load { .. })));

        let dumped = dir.path().join("dump.txt");
        write_bid_samples(&dumped, &[0.25, 3.0, 1.0 / 3.0]).unwrap();
        assert_eq!(load_bid_samples(&dumped).unwrap().samples(), &[0.25, 1.0 / 3.0, 3.0]);
    }

    #[test]
    fn seeded_streams_repeat() {
        let d = BidDistribution::TruncatedLognormal(TruncatedLognormal::double_variance());
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..100).map(|_| d.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
        assert_ne!(draw(3), draw(4));
    }

    proptest! {
        #[test]
        fn cdf_is_monotone_in_unit_interval(
            samples in prop::collection::vec(0.0f64..5.0, 1..50),
            xs in prop::collection::vec(-1.0f64..6.0, 2..20),
            mu in -1.0f64..1.0,
            sigma in 0.1f64..2.0,
        ) {
            let mut xs = xs;
            xs.sort_by(f64::total_cmp);
            let dists = [
                BidDistribution::empirical(EmpiricalCdf::from_samples(samples)).unwrap(),
                BidDistribution::TruncatedLognormal(TruncatedLognormal::new(mu, sigma, 4.0).unwrap()),
                BidDistribution::uniform(0.5, 2.0).unwrap(),
            ];
            for d in &dists {
                let ys: Vec<f64> = xs.iter().map(|&x| d.cdf(x)).collect();
                prop_assert!(ys.iter().all(|y| (0.0..=1.0).contains(y)));
                prop_assert!(ys.windows(2).all(|w| w[0] <= w[1]));
            }
        }

        #[test]
        fn merge_equals_sort(a in prop::collection::vec(0.0f64..5.0, 0..30), b in prop::collection::vec(0.0f64..5.0, 0..30)) {
            let merged = extend_empirical(&EmpiricalCdf::from_samples(a.clone()), &b);
            let mut all = a;
            all.extend(b);
            prop_assert_eq!(merged, EmpiricalCdf::from_samples(all));
        }
    }
}
