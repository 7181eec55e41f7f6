#include "roadfuse/kalman.hpp"

#include <cmath>

#include <Eigen/LU>

namespace roadfuse {

namespace {

Mat2 symmetrized(const Mat2& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

KalmanState KalmanState::initial(const Eigen::Vector2d& z, const Mat2& q, const Mat2& r) {
  KalmanState s;
  s.x = z;
  s.P = r;
  s.Q = q;
  s.R = r;
  return s;
}

KalmanState kalman_predict(const KalmanState& s) {
  KalmanState out = s;
  out.x = s.A * s.x;
  out.P = symmetrized(s.A * s.P * s.A.transpose() + s.Q);
  return out;
}

KalmanState kalman_update(const KalmanState& s, const Eigen::Vector2d& z) {
  const Mat2 innovation_cov = s.H * s.P * s.H.transpose() + s.R;
  const double det = innovation_cov.determinant();
  const double scale = innovation_cov.cwiseAbs().maxCoeff();
  if (!std::isfinite(det) || !(std::abs(det) > 1e-300) ||
      !(std::abs(det) > 1e-14 * scale * scale)) {
    throw SingularInnovation("innovation covariance H P H^T + R is singular");
  }
  const Mat2 gain = s.P * s.H.transpose() * innovation_cov.inverse();
  KalmanState out = s;
  out.x = s.x + gain * (z - s.H * s.x);
  out.P = symmetrized((Mat2::Identity() - gain * s.H) * s.P);
  return out;
}

}  // namespace roadfuse
