#pragma once

#include <Eigen/Dense>

#include "lqrrl/common.hpp"

// Dense linear algebra for the locally-linear model fit and the regulator
// synthesis: a regularized normal-equation solve and a minimum-norm least
// squares. Problem sizes are tiny (at most a few dozen rows, ten columns),
// so everything is plain dense row-major storage.

namespace lqrrl {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }
inline bool all_finite(const Vector& v) { return v.allFinite(); }

// Ridge magnitude used when the caller has no better idea: relative to the
// largest diagonal of the Gram matrix, so it scales with the data.
inline double default_ridge(const Matrix& gram) {
  return 1e-6 * gram.diagonal().maxCoeff();
}

// Solves (inputs' * inputs + ridge*I) X = inputs' * outputs via Cholesky,
// i.e. X minimizing |inputs*X - outputs|^2 + ridge*|X|^2.
inline Matrix solve_regularized_normal(const Matrix& inputs,
                                       const Matrix& outputs, double ridge) {
  if (inputs.rows() != outputs.rows() || inputs.rows() < 1)
    throw ShapeError("solve_regularized_normal: row counts must match and be >= 1");
  if (ridge < 0.0)
    throw ValidationError("solve_regularized_normal: ridge must be >= 0");
  if (!all_finite(inputs) || !all_finite(outputs))
    throw ValidationError("solve_regularized_normal: non-finite entries");

  Matrix gram = inputs.transpose() * inputs;
  gram.diagonal().array() += ridge;
  Eigen::LLT<Matrix> llt(gram);
  bool ok = llt.info() == Eigen::Success;
  if (ok && ridge == 0.0) {
    // Exact rank deficiency leaves a pivot near sqrt(machine eps) instead of
    // failing the factorization; treat a collapsed Cholesky diagonal as
    // singular.
    const Vector diag = Matrix(llt.matrixL()).diagonal();
    ok = diag.allFinite() && diag.minCoeff() > 1e-6 * diag.maxCoeff();
  }
  if (!ok) {
    if (ridge == 0.0)
      throw SingularityError(
          "solve_regularized_normal: Gram matrix not positive definite; "
          "raise the ridge parameter");
    throw SingularityError("solve_regularized_normal: factorization failed");
  }
  return llt.solve(inputs.transpose() * outputs);
}

// Minimum-norm x minimizing |coeff*x - rhs|_2, via SVD. Singular values
// below 1e-10 of the largest are treated as zero.
inline Vector least_squares_min_norm(const Matrix& coeff, const Vector& rhs) {
  if (coeff.rows() < 1 || coeff.cols() < 1)
    throw ShapeError("least_squares_min_norm: empty coefficient matrix");
  if (coeff.rows() != rhs.size())
    throw ShapeError("least_squares_min_norm: rhs length mismatch");
  if (!all_finite(coeff) || !all_finite(rhs))
    throw ValidationError("least_squares_min_norm: non-finite entries");

  Eigen::JacobiSVD<Matrix> svd(coeff,
                               Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = 1e-10 * sv(0);
  Vector scaled = svd.matrixU().transpose() * rhs;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    scaled(i) = sv(i) > cutoff ? scaled(i) / sv(i) : 0.0;
  return svd.matrixV() * scaled;
}

// Largest eigenvalue magnitude; used for closed-loop stability checks.
inline double spectral_radius(const Matrix& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace lqrrl
