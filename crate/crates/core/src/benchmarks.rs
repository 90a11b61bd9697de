//! Named test families. All use the two-state chain `T = [[0.9, 0.1], [0.2, 0.8]]`
//! unless a single matrix is involved.

use crate::linalg::{Matrix, MatrixFamily};
use crate::markov::{build_chain, MarkovChainSpec};

pub const TWO_STATE: [[f64; 2]; 2] = [[0.9, 0.1], [0.2, 0.8]];

pub fn two_state_chain() -> MarkovChainSpec {
    build_chain(&TWO_STATE.map(|r| r.to_vec())).expect("valid chain")
}

pub fn single_state_chain() -> MarkovChainSpec {
    build_chain(&[vec![1.0]]).expect("valid chain")
}

/// `{2 R(1.1), R(0.4) / 3}`, with `gamma = (2/3) log 2 + (1/3) log(1/3)`.
pub fn conformal() -> MatrixFamily {
    MatrixFamily::from_matrices(vec![
        Matrix::rotation(1.1).scaled(2.0),
        Matrix::rotation(0.4).scaled(1.0 / 3.0),
    ])
    .expect("invertible")
}

pub fn conformal_gamma() -> f64 {
    (2.0 / 3.0) * 2f64.ln() + (1.0 / 3.0) * (1.0f64 / 3.0).ln()
}

/// `{R(1) diag(2, 1), [[1, 1], [0, 1]] diag(1, 0.8)}`.
pub fn contracting() -> MatrixFamily {
    let a = Matrix::rotation(1.0).mul(&Matrix::diag(&[2.0, 1.0]));
    let shear = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).expect("square");
    MatrixFamily::from_matrices(vec![a, shear.mul(&Matrix::diag(&[1.0, 0.8]))]).expect("invertible")
}

/// Both symbols rotate by the same irrational angle, so nothing contracts
/// on the projective line.
pub fn rotation_control() -> MatrixFamily {
    let r = Matrix::rotation(2f64.sqrt());
    MatrixFamily::from_matrices(vec![r.clone(), r]).expect("invertible")
}

/// `{diag(2, 1), diag(1, 3)}`: the coordinate axes are invariant.
pub fn diagonal() -> MatrixFamily {
    MatrixFamily::from_matrices(vec![Matrix::diag(&[2.0, 1.0]), Matrix::diag(&[1.0, 3.0])])
        .expect("invertible")
}

/// A rotation and a reflection.
pub fn orthogonal() -> MatrixFamily {
    let reflect = Matrix::diag(&[1.0, -1.0]);
    MatrixFamily::from_matrices(vec![Matrix::rotation(0.7), reflect.mul(&Matrix::rotation(2.0))])
        .expect("invertible")
}
