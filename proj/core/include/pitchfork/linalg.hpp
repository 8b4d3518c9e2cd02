#pragma once

#include <Eigen/Dense>

namespace pitchfork {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;

/// Spectral norm (largest singular value). Cheap paths for the 1x1 and 2x2
/// blocks this toolkit produces; falls back to a full SVD otherwise.
inline double spectral_norm(const Mat& a) {
  if (a.size() == 0) return 0.0;
  if (a.rows() == 1 && a.cols() == 1) return std::abs(a(0, 0));
  if (a.rows() == 1 || a.cols() == 1) return a.norm();
  if (a.rows() == 2 && a.cols() == 2) {
    // singular values of a 2x2 from the closed form
    const double fro2 = a.squaredNorm();
    const double det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    const double gap = std::sqrt(std::max(0.0, fro2 * fro2 - 4.0 * det * det));
    return std::sqrt(0.5 * (fro2 + gap));
  }
  return a.jacobiSvd().singularValues()(0);
}

}  // namespace pitchfork
