#pragma once

#include <stdexcept>

#include <Eigen/Core>

namespace roadfuse {

using Mat2 = Eigen::Matrix2d;

class SingularInnovation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Linear Kalman filter over a 2D world position. A and H stay identity in this
/// system; they are carried so the update equations read in full.
struct KalmanState {
  Eigen::Vector2d x = Eigen::Vector2d::Zero();
  Mat2 P = Mat2::Identity();
  Mat2 A = Mat2::Identity();
  Mat2 H = Mat2::Identity();
  Mat2 Q = Mat2::Identity() * 1e-4;
  Mat2 R = Mat2::Identity();

  static KalmanState initial(const Eigen::Vector2d& z, const Mat2& q, const Mat2& r);
};

/// x- = A x, P- = A P A^T + Q (symmetrized).
KalmanState kalman_predict(const KalmanState& s);

/// K = P- H^T (H P- H^T + R)^-1; x = x- + K (z - H x-); P = (I - K H) P-.
/// Throws SingularInnovation when the innovation covariance is not invertible.
KalmanState kalman_update(const KalmanState& s, const Eigen::Vector2d& z);

}  // namespace roadfuse
