//! Bundled networks and datasets.
//!
//! * `basic.net`: two independent binary nodes A, B with P(A=t)=0.5, P(B=t)=0.2.
//! * `basic_mechanism.net`: basic plus observation nodes encoding a fixed
//!   not-at-random missingness mechanism for B.
//! * `basic_ex21.csv`: the exact pattern distribution that mechanism induces,
//!   as fractional weights.
//! * `asia.net`: the 8-node chest clinic network.

use std::path::PathBuf;

use crate::coarsen::CoarseningNetwork;
use crate::data::Dataset;
use crate::netfile::parse_network;
use crate::network::{Network, NodeSpec};

pub const BASIC_NET: &str = include_str!("../fixtures/basic.net");
pub const BASIC_MECHANISM_NET: &str = include_str!("../fixtures/basic_mechanism.net");
pub const BASIC_EX21_CSV: &str = include_str!("../fixtures/basic_ex21.csv");
pub const ASIA_NET: &str = include_str!("../fixtures/asia.net");

/// On-disk location of a bundled fixture file.
pub fn path(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(file)
}

pub fn basic() -> Network {
    parse_network(BASIC_NET, "basic.net").expect("bundled fixture parses")
}

pub fn asia() -> Network {
    parse_network(ASIA_NET, "asia.net").expect("bundled fixture parses")
}

pub fn basic_mechanism() -> Network {
    parse_network(BASIC_MECHANISM_NET, "basic_mechanism.net").expect("bundled fixture parses")
}

/// The fixed basic mechanism as an augmented network ready for sampling.
pub fn basic_coarsening() -> CoarseningNetwork {
    CoarseningNetwork::from_augmented(basic_mechanism(), 2).expect("bundled mechanism is well-formed")
}

/// The weighted four-pattern dataset (0.45 / 0.05 / 0.1 / 0.4).
pub fn basic_ex21_data() -> Dataset {
    Dataset::from_csv_str(BASIC_EX21_CSV, &basic()).expect("bundled dataset parses")
}

/// Two independent binary nodes with the given P(A=t), P(B=t).
pub fn basic_with(theta_a: f64, theta_b: f64) -> Network {
    basic()
        .with_cpts(vec![vec![theta_a, 1.0 - theta_a], vec![theta_b, 1.0 - theta_b]])
        .expect("valid basic parameters")
}

/// A → B over the basic state space: every distribution on the four joint
/// states is representable.
pub fn basic_saturated(theta_a: f64, b_given_at: f64, b_given_af: f64) -> Network {
    Network::new(
        "basic_saturated",
        vec![
            NodeSpec::new("A", &["t", "f"], &[]),
            NodeSpec::new("B", &["t", "f"], &["A"]),
        ],
        vec![
            vec![theta_a, 1.0 - theta_a],
            vec![b_given_at, 1.0 - b_given_at, b_given_af, 1.0 - b_given_af],
        ],
    )
    .expect("valid saturated basic parameters")
}
