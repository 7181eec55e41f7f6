#include <doctest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "roadfuse/assignment.hpp"
#include "roadfuse/kalman.hpp"

using namespace roadfuse;

TEST_SUITE("assignment") {

TEST_CASE("Kuhn-Munkres equals brute force on random matrices") {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> dim(1, 6);
  std::uniform_int_distribution<int> val(-1024, 1024);
  for (int trial = 0; trial < 300; ++trial) {
    const int r = dim(rng), c = dim(rng);
    Eigen::MatrixXd w(r, c);
    // dyadic values keep every sum exact
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) w(i, j) = val(rng) / 64.0;
    const auto a = kuhn_munkres_max(w);
    CHECK(a.size() == static_cast<std::size_t>(std::min(r, c)));
    double total = 0.0;
    std::set<std::size_t> rows, cols;
    for (std::size_t k = 0; k < a.size(); ++k) {
      total += a[k].weight;
      CHECK(a[k].weight == w(static_cast<Eigen::Index>(a[k].row), static_cast<Eigen::Index>(a[k].col)));
      rows.insert(a[k].row);
      cols.insert(a[k].col);
      if (k > 0) CHECK(a[k - 1].row < a[k].row);
    }
    CHECK(rows.size() == a.size());
    CHECK(cols.size() == a.size());
    CHECK(total == oracle::brute_force_assignment(w));
  }
}

TEST_CASE("Kuhn-Munkres beats greedy where greedy is suboptimal") {
  Eigen::MatrixXd w(2, 2);
  w << 0.9, 0.8, 0.7, 0.1;
  const auto a = kuhn_munkres_max(w);
  REQUIRE(a.size() == 2);
  CHECK(a[0].col == 1);
  CHECK(a[1].col == 0);
}

TEST_CASE("max_weight_matching drops non-positive pairs") {
  Eigen::MatrixXd w(3, 2);
  w << 0.0, 0.0, 0.5, 0.0, 0.0, -1.0;
  const auto a = max_weight_matching(w);
  REQUIRE(a.size() == 1);
  CHECK(a[0].row == 1);
  CHECK(a[0].col == 0);
  CHECK(max_weight_matching(Eigen::MatrixXd::Zero(3, 3)).empty());
  CHECK(kuhn_munkres_max(Eigen::MatrixXd(0, 3)).empty());
}

}  // TEST_SUITE

TEST_SUITE("kalman") {

TEST_CASE("one scalar step reproduces the hand-computed recursion") {
  KalmanState s;
  s.x = Eigen::Vector2d(0, 0);
  s.P = Mat2::Identity();
  s.Q = Mat2::Identity() * 0.01;
  s.R = Mat2::Identity() * 0.1;
  const KalmanState pred = kalman_predict(s);
  CHECK(pred.P(0, 0) == doctest::Approx(1.01));
  const KalmanState upd = kalman_update(pred, Eigen::Vector2d(1.0, -2.0));
  const double k = 1.01 / 1.11;
  CHECK(upd.x(0) == doctest::Approx(k * 1.0));
  CHECK(upd.x(1) == doctest::Approx(k * -2.0));
  CHECK(upd.P(0, 0) == doctest::Approx(0.0910).epsilon(1e-3));
  CHECK(upd.P(0, 0) == doctest::Approx((1.0 - k) * 1.01));
  CHECK(upd.P(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("matrix filter matches a scalar oracle per axis") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 0.3);
  KalmanState s = KalmanState::initial({0.5, -0.5}, Mat2::Identity() * 1e-3, Mat2::Identity() * 0.05);
  double x0 = 0.5, x1 = -0.5, p = 0.05;
  const double q = 1e-3, r = 0.05;
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector2d z(1.0 + n(rng), 2.0 + n(rng));
    s = kalman_update(kalman_predict(s), z);
    p += q;
    const double k = p / (p + r);
    x0 += k * (z(0) - x0);
    x1 += k * (z(1) - x1);
    p *= 1.0 - k;
    CHECK(s.x(0) == doctest::Approx(x0).epsilon(1e-9));
    CHECK(s.x(1) == doctest::Approx(x1).epsilon(1e-9));
    CHECK(s.P(0, 0) == doctest::Approx(p).epsilon(1e-9));
  }
}

TEST_CASE("covariance stays symmetric positive definite and shrinks on update") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 100; ++trial) {
    Mat2 a;
    a << u(rng), u(rng), u(rng), u(rng);
    KalmanState s;
    s.P = a * a.transpose() + Mat2::Identity() * 0.01;
    Mat2 b;
    b << u(rng), u(rng), u(rng), u(rng);
    s.R = b * b.transpose() + Mat2::Identity() * 0.01;
    for (int i = 0; i < 20; ++i) {
      const KalmanState pred = kalman_predict(s);
      s = kalman_update(pred, Eigen::Vector2d(u(rng), u(rng)));
      CHECK(s.P(0, 1) == s.P(1, 0));
      CHECK(s.P.determinant() > 0.0);
      CHECK(s.P.trace() > 0.0);
      CHECK(s.P.trace() <= pred.P.trace() + 1e-12);
    }
  }
}

TEST_CASE("singular innovation is reported") {
  KalmanState s;
  s.P = Mat2::Zero();
  s.Q = Mat2::Zero();
  s.R = Mat2::Zero();
  CHECK_THROWS_AS(kalman_update(kalman_predict(s), Eigen::Vector2d(1, 1)), SingularInnovation);
}

TEST_CASE("zero measurement noise on a static target is exact") {
  KalmanState s = KalmanState::initial({2.0, 3.0}, Mat2::Zero(), Mat2::Identity() * 1e-6);
  for (int i = 0; i < 50; ++i) s = kalman_update(kalman_predict(s), Eigen::Vector2d(2.0, 3.0));
  CHECK((s.x - Eigen::Vector2d(2.0, 3.0)).norm() < 1e-12);
}

}  // TEST_SUITE
