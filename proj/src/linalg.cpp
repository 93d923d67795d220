#include "msnmix/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace msnmix {

bool is_symmetric(const MatrixXd& m, double tol) {
  if (m.rows() != m.cols()) return false;
  double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

MatrixXd symmetric_sqrt(const MatrixXd& m) {
  if (!is_symmetric(m))
    throw singularity_error("symmetric_sqrt: input is not symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
  const VectorXd& ev = es.eigenvalues();
  double max_ev = ev.maxCoeff();
  if (max_ev <= 0.0 || ev.minCoeff() <= 1e-12 * max_ev)
    throw singularity_error("symmetric_sqrt: matrix is not positive definite");
  MatrixXd f = es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  // Exact symmetry so downstream transposes are no-ops.
  return 0.5 * (f + f.transpose());
}

MatrixXd spd_inverse(const MatrixXd& m) {
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw singularity_error("spd_inverse: Cholesky factorization failed");
  MatrixXd inv = llt.solve(MatrixXd::Identity(m.rows(), m.cols()));
  return 0.5 * (inv + inv.transpose());
}

double spd_logdet(const MatrixXd& m) {
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw singularity_error("spd_logdet: Cholesky factorization failed");
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

MatrixXd symmetrize_floor(const MatrixXd& m, double floor_rel) {
  MatrixXd s = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(s);
  double floor = floor_rel * std::max(s.trace(), 0.0) / static_cast<double>(s.rows());
  if (floor <= 0.0) floor = floor_rel;
  if (es.eigenvalues().minCoeff() >= floor) return s;
  VectorXd ev = es.eigenvalues().cwiseMax(floor);
  MatrixXd out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

VectorXd vech(const MatrixXd& m) {
  Eigen::Index p = m.rows();
  VectorXd v(p * (p + 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index c = 0; c < p; ++c)
    for (Eigen::Index r = c; r < p; ++r) v[k++] = m(r, c);
  return v;
}

MatrixXd unvech(const VectorXd& v, Eigen::Index p) {
  MatrixXd m(p, p);
  Eigen::Index k = 0;
  for (Eigen::Index c = 0; c < p; ++c)
    for (Eigen::Index r = c; r < p; ++r) {
      m(r, c) = v[k];
      m(c, r) = v[k];
      ++k;
    }
  return m;
}

std::pair<Eigen::Index, Eigen::Index> vech_indices(Eigen::Index r, Eigen::Index p) {
  Eigen::Index k = 0;
  for (Eigen::Index c = 0; c < p; ++c)
    for (Eigen::Index row = c; row < p; ++row) {
      if (k == r) return {row, c};
      ++k;
    }
  throw std::out_of_range("vech_indices: index out of range");
}

MatrixXd sym_unit(Eigen::Index r, Eigen::Index c, Eigen::Index p) {
  MatrixXd e = MatrixXd::Zero(p, p);
  e(r, c) = 1.0;
  e(c, r) = 1.0;
  return e;
}

MatrixXd submatrix(const MatrixXd& m, const std::vector<Eigen::Index>& rows,
                   const std::vector<Eigen::Index>& cols) {
  MatrixXd out(rows.size(), cols.size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < cols.size(); ++j) out(i, j) = m(rows[i], cols[j]);
  return out;
}

VectorXd subvector(const VectorXd& v, const std::vector<Eigen::Index>& idx) {
  VectorXd out(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
  return out;
}

void scatter(const VectorXd& src, const std::vector<Eigen::Index>& idx, VectorXd& dst) {
  for (size_t i = 0; i < idx.size(); ++i) dst[idx[i]] = src[i];
}

} // namespace msnmix
