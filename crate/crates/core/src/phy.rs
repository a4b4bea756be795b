//! Radio-physics math: dB/linear conversion, distance path gain, the
//! partially-overlapped-channel overlap factor, SINR, and Shannon capacity.
//!
//! All power arithmetic inside this module is linear milliwatts; dB values
//! are converted at the boundaries only.

use thiserror::Error;

use crate::topology::{NodeId, Topology};

/// 802.11b/g channel index, 1-based. 0 is reserved for "uncolored" links
/// during channel assignment.
pub type Channel = u32;

#[derive(Debug, Error, PartialEq)]
pub enum PhyError {
    #[error("dB conversion requires a positive ratio, got {0}")]
    NonPositiveRatio(f64),
    #[error("path gain requires a positive distance, got {0} m (co-located nodes)")]
    NonPositiveDistance(f64),
    #[error("channel {channel} outside [1, {max}]")]
    ChannelOutOfRange { channel: Channel, max: Channel },
}

/// Radio parameters shared by every node.
///
/// Transmit power is uniform across the mesh. `orthogonal_sep` is the channel
/// separation at which the overlap factor reaches zero; with the default of 5
/// the channel triple {1, 6, 11} is mutually orthogonal.
#[derive(Debug, Clone, PartialEq)]
pub struct PhyParams {
    pub tx_power_dbm: f64,
    pub noise_dbm: f64,
    pub path_loss_exp: f64,
    pub sinr_threshold_db: f64,
    pub channels: Channel,
    pub bandwidth_hz: f64,
    pub orthogonal_sep: u32,
}

impl Default for PhyParams {
    fn default() -> Self {
        PhyParams {
            tx_power_dbm: 20.0,
            noise_dbm: -90.0,
            path_loss_exp: 3.0,
            sinr_threshold_db: -10.0,
            channels: 11,
            bandwidth_hz: 22e6,
            orthogonal_sep: 5,
        }
    }
}

impl PhyParams {
    pub fn tx_power_mw(&self) -> f64 {
        db_to_linear(self.tx_power_dbm)
    }

    pub fn noise_mw(&self) -> f64 {
        db_to_linear(self.noise_dbm)
    }

    /// SINR threshold β as a linear ratio.
    pub fn beta_linear(&self) -> f64 {
        db_to_linear(self.sinr_threshold_db)
    }

    /// Overlap factor between two channels, validating both against
    /// `[1, channels]`.
    pub fn overlap_factor(&self, c1: Channel, c2: Channel) -> Result<f64, PhyError> {
        for c in [c1, c2] {
            if c < 1 || c > self.channels {
                return Err(PhyError::ChannelOutOfRange {
                    channel: c,
                    max: self.channels,
                });
            }
        }
        Ok(linear_overlap(c1, c2, self.orthogonal_sep))
    }
}

/// 10^(x/10).
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// 10·log10(x); errors on non-positive input.
pub fn linear_to_db(ratio: f64) -> Result<f64, PhyError> {
    if ratio <= 0.0 {
        return Err(PhyError::NonPositiveRatio(ratio));
    }
    Ok(10.0 * ratio.log10())
}

/// Distance-based channel gain d^-α.
pub fn path_gain(distance_m: f64, alpha: f64) -> Result<f64, PhyError> {
    if distance_m <= 0.0 {
        return Err(PhyError::NonPositiveDistance(distance_m));
    }
    Ok(distance_m.powf(-alpha))
}

/// Piecewise-linear overlap model ("linear5" with the default separation):
/// 1 at co-channel, decreasing by 1/sep per channel step, 0 at separation
/// ≥ `orthogonal_sep`.
pub fn linear_overlap(c1: Channel, c2: Channel, orthogonal_sep: u32) -> f64 {
    let sep = c1.abs_diff(c2);
    if sep >= orthogonal_sep {
        0.0
    } else {
        1.0 - sep as f64 / orthogonal_sep as f64
    }
}

/// SINR at `receiver` hearing `transmitter` on `channel`, with each
/// interferer given as a transmitting node and its channel.
///
/// Interferers farther than the interference range from the receiver
/// contribute nothing, as do interferers on channels at least
/// `orthogonal_sep` away. The interferer list must exclude the transmitter
/// itself; an interferer co-located with the receiver on an overlapping
/// channel is a domain error (zero distance).
pub fn sinr(
    receiver: NodeId,
    transmitter: NodeId,
    channel: Channel,
    interferers: &[(NodeId, Channel)],
    t: &Topology,
    p: &PhyParams,
) -> Result<f64, PhyError> {
    let power = p.tx_power_mw();
    let signal = power * path_gain(t.distance(transmitter, receiver), p.path_loss_exp)?;
    let mut interference = 0.0;
    for &(node, ch) in interferers {
        let d = t.distance(node, receiver);
        if d > t.int_range() {
            continue;
        }
        let w = p.overlap_factor(channel, ch)?;
        if w == 0.0 {
            continue;
        }
        interference += w * power * path_gain(d, p.path_loss_exp)?;
    }
    Ok(signal / (p.noise_mw() + interference))
}

/// Shannon-Hartley capacity B·log2(1 + snr) in bits per second.
pub fn shannon_capacity(snr: f64, bandwidth_hz: f64) -> f64 {
    debug_assert!(snr >= 0.0);
    bandwidth_hz * (1.0 + snr).log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{grid_topology, Link, Node, Topology};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn two_node_topology(d: f64) -> Topology {
        let nodes = vec![
            Node { id: 0, x: 0.0, y: 0.0, radios: 2, is_gateway: true },
            Node { id: 1, x: d, y: 0.0, radios: 2, is_gateway: false },
        ];
        let links = vec![Link { id: 0, a: 0, b: 1 }];
        Topology::new(nodes, links, d, 550.0).unwrap()
    }

    #[test]
    fn db_conversions() {
        assert_relative_eq!(db_to_linear(0.0), 1.0);
        assert_relative_eq!(db_to_linear(10.0), 10.0);
        // -90 dBm is 1e-9 mW (1e-12 W)
        assert_relative_eq!(db_to_linear(-90.0), 1e-9, max_relative = 1e-12);
        assert!(linear_to_db(0.0).is_err());
        assert!(linear_to_db(-3.0).is_err());
    }

    #[test]
    fn path_gain_examples() {
        assert_relative_eq!(path_gain(1.0, 2.7).unwrap(), 1.0);
        assert_relative_eq!(path_gain(200.0, 3.0).unwrap(), 1.25e-7, max_relative = 1e-12);
        assert_relative_eq!(path_gain(550.0, 3.0).unwrap(), 6.0105e-9, max_relative = 1e-4);
        assert_eq!(path_gain(0.0, 3.0), Err(PhyError::NonPositiveDistance(0.0)));
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(linear_overlap(6, 6, 5), 1.0);
        assert_eq!(linear_overlap(1, 6, 5), 0.0);
        assert_relative_eq!(linear_overlap(6, 8, 5), 0.6);
        let p = PhyParams::default();
        assert_eq!(
            p.overlap_factor(0, 6),
            Err(PhyError::ChannelOutOfRange { channel: 0, max: 11 })
        );
        assert_eq!(
            p.overlap_factor(3, 12),
            Err(PhyError::ChannelOutOfRange { channel: 12, max: 11 })
        );
    }

    #[test]
    fn sinr_without_interference() {
        let t = two_node_topology(200.0);
        let p = PhyParams::default();
        let s = sinr(1, 0, 6, &[], &t, &p).unwrap();
        assert_relative_eq!(s, 1.25e4, max_relative = 1e-9);
        assert_relative_eq!(linear_to_db(s).unwrap(), 40.9691, max_relative = 1e-4);
    }

    #[test]
    fn sinr_cochannel_interferer_at_equal_distance() {
        // Interferer as far from the receiver as the transmitter: signal and
        // interference terms cancel, noise pushes the ratio under 1.
        let nodes = vec![
            Node { id: 0, x: 0.0, y: 0.0, radios: 2, is_gateway: true },
            Node { id: 1, x: 200.0, y: 0.0, radios: 2, is_gateway: false },
            Node { id: 2, x: 400.0, y: 0.0, radios: 2, is_gateway: false },
        ];
        let links = vec![Link { id: 0, a: 0, b: 1 }, Link { id: 1, a: 1, b: 2 }];
        let t = Topology::new(nodes, links, 200.0, 550.0).unwrap();
        let p = PhyParams::default();
        let s = sinr(1, 0, 6, &[(2, 6)], &t, &p).unwrap();
        assert!(s < 1.0);
        assert!(s > 0.99);
    }

    #[test]
    fn sinr_orthogonal_interferer_is_invisible() {
        let t = two_node_topology(200.0);
        let p = PhyParams::default();
        let clean = sinr(1, 0, 1, &[], &t, &p).unwrap();
        let with_orthogonal = sinr(1, 0, 1, &[(0, 6)], &t, &p).unwrap();
        assert_eq!(clean, with_orthogonal);
    }

    #[test]
    fn sinr_ignores_interferers_beyond_range() {
        let nodes = vec![
            Node { id: 0, x: 0.0, y: 0.0, radios: 2, is_gateway: true },
            Node { id: 1, x: 200.0, y: 0.0, radios: 2, is_gateway: false },
            Node { id: 2, x: 900.0, y: 0.0, radios: 2, is_gateway: false },
            Node { id: 3, x: 1100.0, y: 0.0, radios: 2, is_gateway: false },
        ];
        let links = vec![Link { id: 0, a: 0, b: 1 }, Link { id: 1, a: 2, b: 3 }];
        let t = Topology::new(nodes, links, 200.0, 550.0).unwrap();
        let p = PhyParams::default();
        let clean = sinr(1, 0, 6, &[], &t, &p).unwrap();
        let far = sinr(1, 0, 6, &[(2, 6)], &t, &p).unwrap();
        assert_eq!(clean, far);
    }

    #[test]
    fn shannon_examples() {
        assert_eq!(shannon_capacity(0.0, 22e6), 0.0);
        assert_relative_eq!(shannon_capacity(1.0, 1.0), 1.0);
        assert_relative_eq!(shannon_capacity(1.25e4, 22e6), 2.994e8, max_relative = 1e-3);
    }

    #[test]
    fn grid_sinr_monotone_in_interferers() {
        let t = grid_topology(3, 200.0, 250.0, 550.0, 2, &[0]).unwrap();
        let p = PhyParams::default();
        let mut interferers: Vec<(NodeId, Channel)> = Vec::new();
        let mut last = sinr(1, 0, 6, &interferers, &t, &p).unwrap();
        for node in [4, 5, 7] {
            interferers.push((node, 6));
            let s = sinr(1, 0, 6, &interferers, &t, &p).unwrap();
            assert!(s <= last, "adding an interferer raised SINR");
            last = s;
        }
    }

    proptest! {
        #[test]
        fn db_round_trip(db in -120.0f64..60.0) {
            let back = linear_to_db(db_to_linear(db)).unwrap();
            prop_assert!((back - db).abs() <= 1e-12 * db.abs().max(1.0));
        }

        #[test]
        fn overlap_symmetric_and_monotone(c1 in 1u32..=11, c2 in 1u32..=11, c3 in 1u32..=11) {
            let sep = 5;
            prop_assert_eq!(linear_overlap(c1, c2, sep), linear_overlap(c2, c1, sep));
            let w = linear_overlap(c1, c2, sep);
            prop_assert!((w == 1.0) == (c1 == c2));
            prop_assert!((w == 0.0) == (c1.abs_diff(c2) >= sep));
            if c1.abs_diff(c3) >= c1.abs_diff(c2) {
                prop_assert!(linear_overlap(c1, c3, sep) <= w);
            }
        }

        #[test]
        fn path_gain_strictly_decreasing(d in 1.0f64..1000.0, step in 1.0f64..100.0, alpha in 0.5f64..5.0) {
            let near = path_gain(d, alpha).unwrap();
            let far = path_gain(d + step, alpha).unwrap();
            prop_assert!(far < near);
        }

        #[test]
        fn shannon_increasing_and_linear_in_bandwidth(snr in 0.0f64..1e6, b in 1.0f64..1e9) {
            let c = shannon_capacity(snr, b);
            prop_assert!(shannon_capacity(snr + 1.0, b) > c);
            prop_assert!((shannon_capacity(snr, 2.0 * b) - 2.0 * c).abs() <= 1e-9 * c.max(1.0));
        }
    }
}
