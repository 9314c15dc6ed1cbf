//! Probability mass functions over a bucketed vote-count axis.
//!
//! Bucket `i` covers the vote counts `[i * b, (i + 1) * b)` where `b` is the
//! bucket size. A distribution stores only the stretch between its first and
//! last non-zero bucket, so a point mass at 5000 votes costs one entry.

use std::cell::RefCell;
use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Tolerance on the unit total of a distribution.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// FFT output entries below this are treated as a numerical failure rather
/// than round-off.
pub const FFT_NEGATIVE_LIMIT: f64 = -1e-12;

/// `Auto` switches to the FFT once both operands exceed this many buckets.
pub const AUTO_FFT_MIN_LEN: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BucketDomain {
    bucket_size: u64,
}

impl BucketDomain {
    pub fn new(bucket_size: u64) -> Result<Self> {
        if bucket_size == 0 {
            return Err(Error::Validation("bucket size must be at least 1".into()));
        }
        Ok(BucketDomain { bucket_size })
    }

    pub fn bucket_size(self) -> u64 {
        self.bucket_size
    }

    /// Bucket containing `votes`.
    pub fn bucket_of(self, votes: u64) -> usize {
        (votes / self.bucket_size) as usize
    }

    /// Lower edge of bucket `i`.
    pub fn lower_edge(self, i: usize) -> u64 {
        i as u64 * self.bucket_size
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDist {
    domain: BucketDomain,
    /// Index of the first stored bucket.
    offset: usize,
    mass: Vec<f64>,
}

impl DiscreteDist {
    /// Dense mass starting at bucket 0. Must sum to 1 within [`MASS_TOLERANCE`].
    pub fn new(domain: BucketDomain, mass: Vec<f64>) -> Result<Self> {
        Self::with_offset(domain, 0, mass)
    }

    /// Mass for buckets `offset, offset + 1, ...`.
    pub fn with_offset(domain: BucketDomain, offset: usize, mass: Vec<f64>) -> Result<Self> {
        check_entries(&mass)?;
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "mass sums to {total}, expected 1"
            )));
        }
        Ok(DiscreteDist::trimmed(domain, offset, mass))
    }

    /// Scale non-negative weights to unit mass.
    pub fn from_weights(
        domain: BucketDomain,
        offset: usize,
        mut weights: Vec<f64>,
    ) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidDistribution(
                "weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        for w in &mut weights {
            *w /= total;
        }
        Ok(DiscreteDist::trimmed(domain, offset, weights))
    }

    pub fn point(domain: BucketDomain, bucket: usize) -> Self {
        DiscreteDist {
            domain,
            offset: bucket,
            mass: vec![1.0],
        }
    }

    /// Point mass at the bucket containing `votes`.
    pub fn point_at_votes(domain: BucketDomain, votes: u64) -> Self {
        DiscreteDist::point(domain, domain.bucket_of(votes))
    }

    fn trimmed(domain: BucketDomain, mut offset: usize, mut mass: Vec<f64>) -> Self {
        let first = mass.iter().position(|&p| p != 0.0);
        match first {
            None => DiscreteDist::point(domain, offset),
            Some(first) => {
                let last = mass.iter().rposition(|&p| p != 0.0).unwrap();
                mass.truncate(last + 1);
                mass.drain(..first);
                offset += first;
                DiscreteDist {
                    domain,
                    offset,
                    mass,
                }
            }
        }
    }

    pub fn domain(&self) -> BucketDomain {
        self.domain
    }

    pub fn bucket_size(&self) -> u64 {
        self.domain.bucket_size
    }

    /// First bucket with non-zero mass.
    pub fn support_start(&self) -> usize {
        self.offset
    }

    /// One past the last bucket with non-zero mass.
    pub fn support_end(&self) -> usize {
        self.offset + self.mass.len()
    }

    /// Length of the dense mass vector starting from bucket 0.
    pub fn len(&self) -> usize {
        self.support_end()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Stored mass, beginning at [`support_start`](Self::support_start).
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn prob(&self, bucket: usize) -> f64 {
        if bucket < self.offset {
            0.0
        } else {
            self.mass.get(bucket - self.offset).copied().unwrap_or(0.0)
        }
    }

    /// Mass at the bucket whose lower edge is `votes`.
    pub fn prob_at_votes(&self, votes: u64) -> f64 {
        self.prob(self.domain.bucket_of(votes))
    }

    pub fn dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.offset];
        v.extend_from_slice(&self.mass);
        v
    }

    /// `(bucket, probability)` pairs over the stored range.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.mass
            .iter()
            .enumerate()
            .map(move |(i, &p)| (self.offset + i, p))
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn is_point_mass(&self) -> bool {
        self.mass.len() == 1
    }

    pub fn mean_buckets(&self) -> f64 {
        self.iter().map(|(b, p)| b as f64 * p).sum()
    }

    /// Mean in votes, using bucket lower edges.
    pub fn mean_votes(&self) -> f64 {
        self.mean_buckets() * self.domain.bucket_size as f64
    }

    /// Number of buckets carrying non-zero mass.
    pub fn support_size(&self) -> usize {
        self.mass.iter().filter(|&&p| p > 0.0).count()
    }

    /// Drop mass below `bucket` and renormalize. Returns a point mass at
    /// `bucket` when nothing survives.
    pub fn truncate_below(&self, bucket: usize) -> DiscreteDist {
        if bucket <= self.offset {
            return self.clone();
        }
        let skip = bucket - self.offset;
        if skip >= self.mass.len() {
            return DiscreteDist::point(self.domain, bucket);
        }
        let rest = self.mass[skip..].to_vec();
        DiscreteDist::from_weights(self.domain, bucket, rest)
            .unwrap_or_else(|_| DiscreteDist::point(self.domain, bucket))
    }

    fn normalized(domain: BucketDomain, offset: usize, mut mass: Vec<f64>) -> Self {
        let total: f64 = mass.iter().sum();
        if total > 0.0 {
            for p in &mut mass {
                *p /= total;
            }
        }
        DiscreteDist::trimmed(domain, offset, mass)
    }
}

fn check_entries(mass: &[f64]) -> Result<()> {
    if mass.is_empty() {
        return Err(Error::InvalidDistribution("empty mass vector".into()));
    }
    for (i, &p) in mass.iter().enumerate() {
        if !p.is_finite() || !(0.0..=1.0 + MASS_TOLERANCE).contains(&p) {
            return Err(Error::InvalidDistribution(format!(
                "entry {i} is {p}, outside [0, 1]"
            )));
        }
    }
    Ok(())
}

fn check_domains(f: &DiscreteDist, g: &DiscreteDist) -> Result<()> {
    if f.domain != g.domain {
        return Err(Error::DomainMismatch {
            left: f.domain.bucket_size,
            right: g.domain.bucket_size,
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvolveStrategy {
    Naive,
    Fft,
    #[default]
    Auto,
}

/// Direct summation `(f*g)(k) = sum_i f(i) g(k - i)`.
pub fn convolve_naive(f: &DiscreteDist, g: &DiscreteDist) -> Result<DiscreteDist> {
    check_domains(f, g)?;
    let (a, b) = (&f.mass, &g.mass);
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, &y) in out[i..].iter_mut().zip(b.iter()) {
            *o += x * y;
        }
    }
    Ok(DiscreteDist::normalized(f.domain, f.offset + g.offset, out))
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Convolution through the discrete Fourier transform.
///
/// Both inputs are packed into one complex sequence `z = f + i g`; the
/// imaginary part of `z*z` is `2 (f*g)`, so one forward and one inverse
/// transform suffice.
pub fn convolve_fft(f: &DiscreteDist, g: &DiscreteDist) -> Result<DiscreteDist> {
    check_domains(f, g)?;
    let (a, b) = (&f.mass, &g.mass);
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();

    let mut z = vec![Complex::new(0.0, 0.0); n];
    for (slot, &x) in z.iter_mut().zip(a.iter()) {
        slot.re = x;
    }
    for (slot, &y) in z.iter_mut().zip(b.iter()) {
        slot.im = y;
    }

    let (fwd, inv) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    });
    fwd.process(&mut z);
    for v in z.iter_mut() {
        *v = *v * *v;
    }
    inv.process(&mut z);

    let scale = 0.5 / n as f64;
    let mut out = Vec::with_capacity(out_len);
    for (k, v) in z[..out_len].iter().enumerate() {
        let x = v.im * scale;
        if x < FFT_NEGATIVE_LIMIT {
            return Err(Error::Numerical(format!(
                "FFT convolution produced {x:e} at bucket {}",
                f.offset + g.offset + k
            )));
        }
        out.push(x.max(0.0));
    }
    Ok(DiscreteDist::normalized(f.domain, f.offset + g.offset, out))
}

pub fn convolve(
    f: &DiscreteDist,
    g: &DiscreteDist,
    strategy: ConvolveStrategy,
) -> Result<DiscreteDist> {
    // a point mass is a shift
    if f.is_point_mass() || g.is_point_mass() {
        check_domains(f, g)?;
        let (p, other) = if f.is_point_mass() { (f, g) } else { (g, f) };
        return Ok(DiscreteDist {
            domain: other.domain,
            offset: other.offset + p.offset,
            mass: other.mass.clone(),
        });
    }
    match strategy {
        ConvolveStrategy::Naive => convolve_naive(f, g),
        ConvolveStrategy::Fft => convolve_fft(f, g),
        ConvolveStrategy::Auto => {
            if f.mass.len().min(g.mass.len()) > AUTO_FFT_MIN_LEN {
                convolve_fft(f, g)
            } else {
                convolve_naive(f, g)
            }
        }
    }
}

/// Left fold of pairwise convolution.
pub fn convolve_many<'a, I>(fs: I, strategy: ConvolveStrategy) -> Result<DiscreteDist>
where
    I: IntoIterator<Item = &'a DiscreteDist>,
{
    let mut iter = fs.into_iter();
    let first = iter.next().ok_or_else(|| {
        Error::Precondition("convolve_many needs at least one distribution".into())
    })?;
    let mut acc = first.clone();
    for g in iter {
        acc = convolve(&acc, g, strategy)?;
    }
    Ok(acc)
}

/// Cumulative mass from bucket 0 through the last stored bucket.
pub fn cdf(f: &DiscreteDist) -> Vec<f64> {
    let mut out = vec![0.0; f.offset];
    let mut acc = 0.0;
    for &p in &f.mass {
        acc += p;
        out.push(acc);
    }
    out
}

/// `P(X > k)` for `k` in `0..len`, accumulated from the top so that the
/// far tail keeps its relative precision. Equals `1 - cdf`.
pub fn survival(f: &DiscreteDist) -> Vec<f64> {
    let n = f.support_end();
    let mut out = vec![0.0; n];
    let mut acc = 0.0;
    for k in (0..n).rev() {
        out[k] = acc;
        acc += f.prob(k);
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discretization {
    /// Density evaluated at each bucket's lower edge, then normalized.
    #[default]
    PdfSample,
    /// Density integrated over `[i*b, (i+1)*b)`, then normalized.
    IntervalIntegral,
}

pub const DEFAULT_TRUNC_Z: f64 = 5.0;

/// Normal distribution restricted to non-negative buckets within `trunc_z`
/// standard deviations of the mean.
pub fn discretized_normal(
    mean: f64,
    sd: f64,
    domain: BucketDomain,
    trunc_z: f64,
    method: Discretization,
) -> Result<DiscreteDist> {
    if !sd.is_finite() || sd < 0.0 || !mean.is_finite() {
        return Err(Error::Precondition(format!(
            "normal needs finite mean and sd >= 0, got mean {mean}, sd {sd}"
        )));
    }
    if trunc_z.is_nan() || trunc_z <= 0.0 {
        return Err(Error::Precondition(format!(
            "trunc_z must be positive, got {trunc_z}"
        )));
    }
    let b = domain.bucket_size as f64;
    let nearest = (mean / b).round().max(0.0) as usize;
    if sd == 0.0 {
        return Ok(DiscreteDist::point(domain, nearest));
    }

    let lo_votes = (mean - trunc_z * sd).max(0.0);
    let hi_votes = mean + trunc_z * sd;
    let (lo, hi) = match method {
        Discretization::PdfSample => ((lo_votes / b).ceil() as usize, (hi_votes / b).floor()),
        // any bucket overlapping the window
        Discretization::IntervalIntegral => {
            ((lo_votes / b).floor() as usize, (hi_votes / b).floor())
        }
    };
    if hi < 0.0 || (hi as usize) < lo {
        return Ok(DiscreteDist::point(domain, nearest));
    }
    let hi = hi as usize;

    let weights: Vec<f64> = (lo..=hi)
        .map(|i| {
            let x = i as f64 * b;
            match method {
                Discretization::PdfSample => {
                    let z = (x - mean) / sd;
                    (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
                }
                Discretization::IntervalIntegral => {
                    let left = x.max(lo_votes);
                    let right = (x + b).min(hi_votes);
                    if right <= left {
                        0.0
                    } else {
                        normal_cdf((right - mean) / sd) - normal_cdf((left - mean) / sd)
                    }
                }
            }
        })
        .collect();
    match DiscreteDist::from_weights(domain, lo, weights) {
        Ok(d) => Ok(d),
        // everything underflowed
        Err(_) => Ok(DiscreteDist::point(domain, nearest)),
    }
}

/// Standard normal CDF.
pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}
