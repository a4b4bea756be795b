//! Link- and path-quality metrics: the SINR link cost used by the proposed
//! routing, the ETX/ETT/WCETT baselines, and the SINR→delivery-probability
//! ramp the simulator uses for loss modeling.

use thiserror::Error;

use crate::phy::{linear_to_db, Channel, PhyParams};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("delivery ratio {0} outside [0, 1]")]
    RatioOutOfRange(f64),
    #[error("wcett alpha {0} outside [0, 1]")]
    AlphaOutOfRange(f64),
    #[error("channel {channel} outside [1, {max}]")]
    ChannelOutOfRange { channel: Channel, max: Channel },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

/// Expected transmission count 1/(d_f·d_r); infinite when either delivery
/// ratio is zero.
pub fn etx(d_f: f64, d_r: f64) -> Result<f64, MetricsError> {
    for d in [d_f, d_r] {
        if !(0.0..=1.0).contains(&d) {
            return Err(MetricsError::RatioOutOfRange(d));
        }
    }
    let product = d_f * d_r;
    if product == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(1.0 / product)
    }
}

/// Expected transmission time ETX·S/B in seconds.
pub fn ett(etx: f64, packet_bits: f64, bandwidth_bps: f64) -> f64 {
    assert!(bandwidth_bps > 0.0, "bandwidth must be positive");
    etx * packet_bits / bandwidth_bps
}

/// Weighted cumulative ETT over a path: (1−α)·ΣETT + α·max_j X_j, where X_j
/// sums the ETTs of the links on channel j.
pub fn wcett(
    path_etts: &[(f64, Channel)],
    alpha: f64,
    channels: Channel,
) -> Result<f64, MetricsError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(MetricsError::AlphaOutOfRange(alpha));
    }
    let mut sum = 0.0;
    let mut per_channel = vec![0.0f64; channels as usize];
    for &(ett, ch) in path_etts {
        if ch < 1 || ch > channels {
            return Err(MetricsError::ChannelOutOfRange { channel: ch, max: channels });
        }
        sum += ett;
        per_channel[(ch - 1) as usize] += ett;
    }
    let max_bin = per_channel.iter().cloned().fold(0.0f64, f64::max);
    Ok((1.0 - alpha) * sum + alpha * max_bin)
}

/// SINR-derived link cost β/SINR. Links below the threshold are infeasible
/// and return `None`; feasible costs lie in (0, 1] with lower cost meaning
/// higher SINR.
pub fn sinr_cost(sinr_linear: f64, beta_linear: f64) -> Result<Option<f64>, MetricsError> {
    if sinr_linear <= 0.0 {
        return Err(MetricsError::NonPositive { name: "sinr", value: sinr_linear });
    }
    if beta_linear <= 0.0 {
        return Err(MetricsError::NonPositive { name: "beta", value: beta_linear });
    }
    if sinr_linear < beta_linear {
        Ok(None)
    } else {
        Ok(Some(beta_linear / sinr_linear))
    }
}

/// Per-attempt delivery probability as a linear ramp in dB: 0 at or below
/// the SINR threshold, 1 from `margin_db` above it.
pub fn delivery_prob(sinr_db: f64, beta_db: f64, margin_db: f64) -> f64 {
    assert!(margin_db > 0.0, "ramp margin must be positive");
    ((sinr_db - beta_db) / margin_db).clamp(0.0, 1.0)
}

/// Bundle of per-link quality figures derived from one SINR measurement.
/// The simulator models symmetric links, so d_f = d_r = the ramp probability.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkQuality {
    pub sinr_linear: f64,
    pub delivery_prob: f64,
    pub etx: f64,
    pub ett_s: f64,
    /// β/SINR, or `None` when the link is below threshold.
    pub cost: Option<f64>,
}

pub fn link_quality(
    sinr_linear: f64,
    phy: &PhyParams,
    margin_db: f64,
    packet_bits: f64,
    bandwidth_bps: f64,
) -> LinkQuality {
    let cost = sinr_cost(sinr_linear, phy.beta_linear()).unwrap_or(None);
    let p = match linear_to_db(sinr_linear) {
        Ok(db) => delivery_prob(db, phy.sinr_threshold_db, margin_db),
        Err(_) => 0.0,
    };
    let etx = etx(p, p).expect("ramp probability is in [0, 1]");
    let ett_s = if etx.is_finite() { ett(etx, packet_bits, bandwidth_bps) } else { f64::INFINITY };
    LinkQuality { sinr_linear, delivery_prob: p, etx, ett_s, cost }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn etx_examples() {
        assert_eq!(etx(1.0, 1.0).unwrap(), 1.0);
        assert_relative_eq!(etx(0.9, 0.8).unwrap(), 1.3889, max_relative = 1e-4);
        assert_eq!(etx(0.0, 0.5).unwrap(), f64::INFINITY);
        assert_eq!(etx(1.2, 0.5), Err(MetricsError::RatioOutOfRange(1.2)));
        assert_eq!(etx(0.5, -0.1), Err(MetricsError::RatioOutOfRange(-0.1)));
    }

    #[test]
    fn ett_examples() {
        // 1000-byte packet at 11 Mbps.
        assert_relative_eq!(ett(1.0, 8000.0, 11e6), 7.2727e-4, max_relative = 1e-4);
        assert_relative_eq!(ett(2.0, 8000.0, 11e6), 1.4545e-3, max_relative = 1e-4);
        assert!(ett(1.0, 8000.0, 1e18) < 1e-11);
    }

    #[test]
    fn wcett_degenerate_alpha_zero_is_ett_sum() {
        let path = [(1e-3, 1), (2e-3, 6), (3e-3, 11)];
        assert_relative_eq!(wcett(&path, 0.0, 11).unwrap(), 6e-3);
    }

    #[test]
    fn wcett_alpha_one_single_channel_is_ett_sum() {
        let path = [(1e-3, 6), (2e-3, 6)];
        assert_relative_eq!(wcett(&path, 1.0, 11).unwrap(), 3e-3);
    }

    #[test]
    fn wcett_mixed_example() {
        let path = [(1e-3, 1), (2e-3, 6)];
        assert_relative_eq!(wcett(&path, 0.5, 11).unwrap(), 2.5e-3);
    }

    #[test]
    fn wcett_rejects_bad_channel_and_alpha() {
        assert_eq!(
            wcett(&[(1e-3, 12)], 0.5, 11),
            Err(MetricsError::ChannelOutOfRange { channel: 12, max: 11 })
        );
        assert_eq!(wcett(&[(1e-3, 1)], 1.5, 11), Err(MetricsError::AlphaOutOfRange(1.5)));
    }

    #[test]
    fn sinr_cost_examples() {
        let beta = 0.1;
        assert_eq!(sinr_cost(beta, beta).unwrap(), Some(1.0));
        assert_relative_eq!(sinr_cost(10.0 * beta, beta).unwrap().unwrap(), 0.1);
        assert_eq!(sinr_cost(beta / 2.0, beta).unwrap(), None);
        assert!(sinr_cost(0.0, beta).is_err());
        assert!(sinr_cost(1.0, 0.0).is_err());
    }

    #[test]
    fn delivery_prob_ramp() {
        assert_eq!(delivery_prob(-10.0, -10.0, 20.0), 0.0);
        assert_eq!(delivery_prob(10.0, -10.0, 20.0), 1.0);
        assert_eq!(delivery_prob(0.0, -10.0, 20.0), 0.5);
        assert_eq!(delivery_prob(-30.0, -10.0, 20.0), 0.0);
        assert_eq!(delivery_prob(40.0, -10.0, 20.0), 1.0);
    }

    #[test]
    fn link_quality_bundles_consistently() {
        let phy = PhyParams::default();
        let q = link_quality(1.25e4, &phy, 20.0, 8000.0, 11e6);
        assert_eq!(q.delivery_prob, 1.0);
        assert_eq!(q.etx, 1.0);
        assert_relative_eq!(q.cost.unwrap(), 0.1 / 1.25e4, max_relative = 1e-9);

        let dead = link_quality(1e-3, &phy, 20.0, 8000.0, 11e6);
        assert_eq!(dead.cost, None);
        assert_eq!(dead.delivery_prob, 0.0);
        assert_eq!(dead.etx, f64::INFINITY);
    }

    proptest! {
        #[test]
        fn etx_is_symmetric(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            prop_assert_eq!(etx(a, b).unwrap(), etx(b, a).unwrap());
        }

        #[test]
        fn sinr_cost_strictly_decreasing(s in 0.1f64..1e6, bump in 0.01f64..10.0) {
            let beta = 0.1;
            let c1 = sinr_cost(s, beta).unwrap().unwrap();
            let c2 = sinr_cost(s + bump, beta).unwrap().unwrap();
            prop_assert!(c2 < c1);
            prop_assert!(c1 <= 1.0 && c1 > 0.0);
        }

        #[test]
        fn delivery_prob_monotone(a in -60.0f64..60.0, b in -60.0f64..60.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(delivery_prob(lo, -10.0, 20.0) <= delivery_prob(hi, -10.0, 20.0));
        }

        #[test]
        fn wcett_between_degenerate_forms(alpha in 0.0f64..=1.0) {
            let path = [(1e-3, 1u32), (2e-3, 6u32), (1.5e-3, 1u32)];
            let w = wcett(&path, alpha, 11).unwrap();
            let sum = wcett(&path, 0.0, 11).unwrap();
            let max_bin = wcett(&path, 1.0, 11).unwrap();
            prop_assert!(w <= sum + 1e-15);
            prop_assert!(w >= max_bin.min(sum) - 1e-15);
        }
    }
}
