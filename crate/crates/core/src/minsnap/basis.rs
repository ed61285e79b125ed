//! Degree-9 polynomial basis on the normalized segment time `tau in [0, 1]`.

use std::sync::OnceLock;

use nalgebra::{SMatrix, SVector};

pub const DEGREE: usize = 9;
pub const N_COEFFS: usize = DEGREE + 1;
/// Derivative orders 0..=4 are shared at every node.
pub const N_DERIVS: usize = 5;

pub type Coeffs = [f64; N_COEFFS];
pub(crate) type Mat10 = SMatrix<f64, N_COEFFS, N_COEFFS>;

fn falling(i: usize, k: usize) -> f64 {
    (0..k).map(|j| (i - j) as f64).product()
}

/// Maps node derivatives `[p(0), .., p''''(0), p(1), .., p''''(1)]` to coefficients.
fn endpoint_matrix() -> Mat10 {
    let mut a = Mat10::zeros();
    for k in 0..N_DERIVS {
        a[(k, k)] = falling(k, k);
        for i in k..N_COEFFS {
            a[(N_DERIVS + k, i)] = falling(i, k);
        }
    }
    a
}

/// Gram matrix of the r-th derivative on [0, 1] in the monomial basis.
fn derivative_gram(r: usize) -> Mat10 {
    let mut q = Mat10::zeros();
    for i in r..N_COEFFS {
        for j in r..N_COEFFS {
            q[(i, j)] = falling(i, r) * falling(j, r) / (i + j + 1 - 2 * r) as f64;
        }
    }
    q
}

pub(crate) struct Basis {
    /// Inverse of the endpoint matrix.
    pub to_coeffs: Mat10,
    /// Snap cost in node-derivative coordinates.
    pub snap_cost: Mat10,
    /// Acceleration cost in node-derivative coordinates.
    pub accel_cost: Mat10,
    pub q4: Mat10,
    pub q2: Mat10,
}

pub(crate) fn basis() -> &'static Basis {
    static BASIS: OnceLock<Basis> = OnceLock::new();
    BASIS.get_or_init(|| {
        let m = endpoint_matrix()
            .try_inverse()
            .expect("endpoint matrix is invertible");
        let q4 = derivative_gram(4);
        let q2 = derivative_gram(2);
        Basis {
            to_coeffs: m,
            snap_cost: m.transpose() * q4 * m,
            accel_cost: m.transpose() * q2 * m,
            q4,
            q2,
        }
    })
}

pub(crate) fn coeffs_from_nodes(nodes: &SVector<f64, N_COEFFS>) -> Coeffs {
    let c = basis().to_coeffs * nodes;
    let mut out = [0.0; N_COEFFS];
    out.copy_from_slice(c.as_slice());
    out
}

/// `p(tau)` and its first four derivatives with respect to `tau`.
pub fn eval_derivs(c: &Coeffs, tau: f64) -> [f64; N_DERIVS] {
    let mut out = [0.0; N_DERIVS];
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for i in (k..N_COEFFS).rev() {
            acc = acc * tau + c[i] * falling(i, k);
        }
        *o = acc;
    }
    out
}

/// `integral_0^1 (p^(r))^2 dtau` for r in {2, 4}.
pub(crate) fn derivative_energy(c: &Coeffs, r: usize) -> f64 {
    let q = match r {
        2 => &basis().q2,
        4 => &basis().q4,
        _ => unreachable!("only acceleration and snap energies are used"),
    };
    let v = SVector::<f64, N_COEFFS>::from_column_slice(c);
    (v.transpose() * q * v)[(0, 0)]
}
