//! Equality-constrained weighted least squares.
//!
//! Minimizes `||W^(1/2) (A x - y)||^2` subject to `e^T x = c`, given the
//! normal-equation ingredients `G = A^T W A` and `g = A^T W y`. The caller
//! builds those directly (they have closed forms for interaction bases), so
//! the design matrix itself is never materialized.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;

/// Condition estimates beyond this are treated as singular.
const CONDITION_LIMIT: f64 = 1e14;

/// Solves the KKT system
///
/// ```text
/// [ 2G   e ] [ x ]   [ 2g ]
/// [ e^T  0 ] [ l ] = [ c  ]
/// ```
///
/// with a rank-revealing (full-pivot) LU decomposition and returns `x`.
/// A zero pivot or an extreme condition estimate is reported as
/// [`Error::SingularSystem`] with the estimate attached.
pub(crate) fn solve_constrained_normal_equations(
    gram: &DMatrix<f64>,
    rhs: &DVector<f64>,
    constraint: &DVector<f64>,
    c: f64,
) -> Result<DVector<f64>, Error> {
    let p = gram.nrows();
    assert_eq!(gram.ncols(), p);
    assert_eq!(rhs.len(), p);
    assert_eq!(constraint.len(), p);

    let mut kkt = DMatrix::zeros(p + 1, p + 1);
    for i in 0..p {
        for j in 0..p {
            kkt[(i, j)] = 2.0 * gram[(i, j)];
        }
        kkt[(i, p)] = constraint[i];
        kkt[(p, i)] = constraint[i];
    }
    let mut full_rhs = DVector::zeros(p + 1);
    for i in 0..p {
        full_rhs[i] = 2.0 * rhs[i];
    }
    full_rhs[p] = c;

    let lu = kkt.full_piv_lu();
    let condition = condition_estimate(lu.u());
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(Error::SingularSystem { condition });
    }
    let solution = lu
        .solve(&full_rhs)
        .ok_or(Error::SingularSystem { condition })?;
    Ok(solution.rows(0, p).into_owned())
}

/// Ratio of extreme `|U_ii|` from the LU factor: a cheap condition estimate
/// that is exact about rank deficiency (a zero pivot gives infinity).
fn condition_estimate(u: DMatrix<f64>) -> f64 {
    let diag = u.diagonal();
    let mut max = 0.0f64;
    let mut min = f64::INFINITY;
    for i in 0..diag.len() {
        let d = diag[i].abs();
        max = max.max(d);
        min = min.min(d);
    }
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
