#pragma once

#include "msnmix/types.hpp"

namespace msnmix {

/// Unique symmetric positive-definite square root F of an SPD matrix m,
/// via eigendecomposition.  F F = m and F = F'.
/// Throws singularity_error for non-symmetric or non-PD input
/// (eigenvalue <= 1e-12 * max eigenvalue counts as non-PD).
MatrixXd symmetric_sqrt(const MatrixXd& m);

/// Symmetric PD inverse through LLT; throws singularity_error when the
/// Cholesky factorization fails.
MatrixXd spd_inverse(const MatrixXd& m);

/// log det of an SPD matrix through LLT.
double spd_logdet(const MatrixXd& m);

bool is_symmetric(const MatrixXd& m, double tol = 1e-10);

/// (m + m')/2 with eigenvalues floored at floor_rel * trace/p.  Used after
/// the EM dispersion update, which is symmetric analytically but not in
/// floating point.
MatrixXd symmetrize_floor(const MatrixXd& m, double floor_rel = 1e-8);

/// Column-major lower-triangle vech of a symmetric matrix:
/// (0,0),(1,0),...,(p-1,0),(1,1),...
VectorXd vech(const MatrixXd& m);
MatrixXd unvech(const VectorXd& v, Eigen::Index p);

/// Row/column of the r-th vech slot.
std::pair<Eigen::Index, Eigen::Index> vech_indices(Eigen::Index r, Eigen::Index p);

/// Symmetric elementary matrix with ones at (r,c) and (c,r).
MatrixXd sym_unit(Eigen::Index r, Eigen::Index c, Eigen::Index p);

/// Rows/cols of m restricted to idx.
MatrixXd submatrix(const MatrixXd& m, const std::vector<Eigen::Index>& rows,
                   const std::vector<Eigen::Index>& cols);
VectorXd subvector(const VectorXd& v, const std::vector<Eigen::Index>& idx);

/// Inverse of subvector: writes entries of src into dst at idx.
void scatter(const VectorXd& src, const std::vector<Eigen::Index>& idx, VectorXd& dst);

} // namespace msnmix
