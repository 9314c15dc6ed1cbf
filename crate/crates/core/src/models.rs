//! Scenario builders that turn concrete tallies into election models.

use serde::{Deserialize, Serialize};

use crate::dist::{
    discretized_normal, BucketDomain, DiscreteDist, Discretization, DEFAULT_TRUNC_Z,
};
use crate::engine::ElectionModel;
use crate::error::{Error, Result};
use crate::tabulator::TallyMap;

/// Relative change of each ranking's count under a recount.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecountParams {
    pub mean_shift: f64,
    pub sd_shift: f64,
    pub trunc_z: f64,
}

impl Default for RecountParams {
    fn default() -> Self {
        RecountParams {
            mean_shift: 0.00077,
            sd_shift: 0.00146,
            trunc_z: DEFAULT_TRUNC_Z,
        }
    }
}

/// Predicts recounted totals: each ranking with count `c` becomes a normal
/// with mean `c * (1 + mean_shift)` and sd `c * sd_shift`, one vote per bucket.
pub fn recount_model(tally: &TallyMap, params: &RecountParams) -> Result<ElectionModel> {
    if params.sd_shift.is_nan() || params.sd_shift < 0.0 || !params.mean_shift.is_finite() {
        return Err(Error::Validation(format!(
            "recount shifts must be finite with sd_shift >= 0, got {} / {}",
            params.mean_shift, params.sd_shift
        )));
    }
    let domain = BucketDomain::new(1)?;
    let tally = tally.collapse_full_rankings();
    let dists = tally
        .iter()
        .map(|(r, c)| {
            let f = if c == 0 {
                DiscreteDist::point(domain, 0)
            } else {
                let c = c as f64;
                discretized_normal(
                    c * (1.0 + params.mean_shift),
                    c * params.sd_shift,
                    domain,
                    params.trunc_z,
                    Discretization::PdfSample,
                )?
            };
            Ok((r.clone(), f))
        })
        .collect::<Result<Vec<_>>>()?;
    ElectionModel::new(tally.num_candidates(), domain, dists)
}

/// Election-night extrapolation from a partially counted tally.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialCountParams {
    pub fraction_counted: f64,
    /// Scale on the predicted sd of the uncounted remainder.
    pub dispersion: f64,
    pub bucket_size: u64,
}

impl PartialCountParams {
    pub const DEFAULT_DISPERSION: f64 = 0.5;

    pub fn new(fraction_counted: f64, bucket_size: u64) -> Self {
        PartialCountParams {
            fraction_counted,
            dispersion: Self::DEFAULT_DISPERSION,
            bucket_size,
        }
    }
}

/// Predicts final totals from counts covering `fraction_counted` of the ballots.
///
/// A ranking counted `c` times gets a normal over its final total with mean
/// `c / f` and sd `dispersion * (c / f) * (1 - f)`, cut below at the bucket
/// holding `c`. When that sd is under half a bucket the whole mass sits in
/// the bucket of the predicted total. A complete count (`f = 1`) is exact:
/// point masses on a one-vote grid.
pub fn partial_count_model(
    counted: &TallyMap,
    params: &PartialCountParams,
) -> Result<ElectionModel> {
    let f = params.fraction_counted;
    if !(f > 0.0 && f <= 1.0) {
        return Err(Error::Validation(format!(
            "fraction counted must be in (0, 1], got {f}"
        )));
    }
    if !params.dispersion.is_finite() || params.dispersion < 0.0 {
        return Err(Error::Validation(format!(
            "dispersion must be finite and >= 0, got {}",
            params.dispersion
        )));
    }
    let counted = counted.collapse_full_rankings();
    if f == 1.0 {
        return ElectionModel::from_tally(&counted, BucketDomain::new(1)?);
    }
    let domain = BucketDomain::new(params.bucket_size)?;
    let b = params.bucket_size as f64;
    let dists = counted
        .iter()
        .map(|(r, c)| {
            let mean = c as f64 / f;
            let sd = params.dispersion * mean * (1.0 - f);
            let floor = domain.bucket_of(c);
            let dist = if sd < 0.5 * b {
                DiscreteDist::point(domain, (mean / b).floor() as usize)
            } else {
                discretized_normal(mean, sd, domain, DEFAULT_TRUNC_Z, Discretization::PdfSample)?
                    .truncate_below(floor)
            };
            Ok((r.clone(), dist))
        })
        .collect::<Result<Vec<_>>>()?;
    ElectionModel::new(counted.num_candidates(), domain, dists)
}
