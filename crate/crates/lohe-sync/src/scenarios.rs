//! Built-in benchmark inputs shared by the CLI and the acceptance suite.

use nalgebra::DMatrix;

use crate::digraph::Digraph;

/// Twelve-node benchmark digraph behind the CLI scenario `paper-fig1`.
///
/// It splits into three strongly connected components: nodes 1-5 (the unique
/// source), nodes 6-8, and nodes 9-12 (1-based), so it has a spanning tree
/// but is not strongly connected.
pub fn paper_fig1_digraph() -> Digraph {
    #[rustfmt::skip]
    let weights = [
        0.0, 0.0, 0.0, 0.0, 1.0,   0.0, 0.0, 0.0,   0.0, 0.0, 0.0, 0.0,
        2.0, 0.0, 0.0, 0.0, 1.0,   0.0, 0.0, 0.0,   0.0, 0.0, 0.0, 0.0,
        0.0, 1.0, 0.0, 0.0, 3.0,   0.0, 0.0, 0.0,   0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 2.0, 0.0, 0.0,   0.0, 0.0, 0.0,   0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 2.0, 0.0,   0.0, 0.0, 0.0,   0.0, 0.0, 0.0, 0.0,

        0.0, 1.0, 2.0, 0.0, 0.0,   0.0, 0.0, 1.0,   0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0,   2.0, 0.0, 0.0,   0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0,   0.0, 1.0, 0.0,   0.0, 0.0, 0.0, 0.0,

        0.0, 0.0, 0.0, 0.0, 0.0,   0.0, 1.0, 0.0,   0.0, 0.0, 0.0, 5.0,
        0.0, 0.0, 0.0, 0.0, 0.0,   0.0, 0.0, 3.0,   2.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0,   0.0, 0.0, 0.0,   0.0, 4.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0,   0.0, 0.0, 0.0,   0.0, 0.0, 3.0, 0.0,
    ];
    Digraph::new(DMatrix::from_row_slice(12, 12, &weights))
        .expect("benchmark weight matrix is valid")
}

/// Skew-symmetric drift matrix paired with the `paper-fig1` scenario (n = 3).
pub fn paper_fig1_omega() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        3,
        3,
        &[
            0.0, 1.0, -2.0, //
            -1.0, 0.0, -1.0, //
            2.0, 1.0, 0.0,
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_weights_spot_checks() {
        let g = paper_fig1_digraph();
        assert_eq!(g.node_count(), 12);
        assert_eq!(g.weight(1, 0), 2.0); // a_21
        assert_eq!(g.weight(2, 4), 3.0); // a_35
        assert_eq!(g.weight(8, 11), 5.0); // a_9,12
        assert_eq!(g.weight(10, 9), 4.0); // a_11,10
        assert_eq!(g.max_weight(), 5.0);
    }

    #[test]
    fn omega_is_skew_symmetric() {
        let omega = paper_fig1_omega();
        let sym = &omega + omega.transpose();
        assert_eq!(sym.amax(), 0.0);
    }
}
