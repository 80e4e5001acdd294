#include "oracles.hpp"

#include "rmfd/kalman.hpp"

#include <doctest.h>

using namespace rmfd;

namespace {

double max_abs(const Matrix& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

void compare_with_oracle(const oracle::RandomSystem& sys, FilterMethod method, double tol) {
  const FilterOutput f = kalman_filter(sys.ss, sys.X, method);
  const SmootherOutput s = kalman_smooth(sys.ss, f, sys.X);
  const auto ref = oracle::joint_gaussian(sys.ss, sys.X);
  CHECK(std::abs(f.loglik - ref.loglik) < tol * std::max(1.0, std::abs(ref.loglik)));
  for (int t = 0; t < sys.X.rows(); ++t) {
    CHECK(max_abs(s.s_smooth[t] - ref.mean[t]) < tol);
    CHECK(max_abs(s.P_smooth[t] - ref.cov[t]) < tol);
    if (t > 0) CHECK(max_abs(s.lag_cov[t] - ref.lag_cov[t]) < tol);
  }
}

}  // namespace

TEST_CASE("filter and smoother match joint Gaussian conditioning") {
  auto rng = stream_rng(21, 0);
  for (int rep = 0; rep < 12; ++rep) {
    const int q = 1 + rep % 2;
    const int m = q * (1 + rep % 3);
    const int n = m + 1 + rep % 3;
    const auto sys = oracle::random_system(m, q, n, 15 + rep, rng);
    compare_with_oracle(sys, FilterMethod::woodbury, 1e-8);
    compare_with_oracle(sys, FilterMethod::dense, 1e-8);
  }
}

TEST_CASE("missing observations are conditioned away") {
  auto rng = stream_rng(22, 0);
  for (int rep = 0; rep < 6; ++rep) {
    auto sys = oracle::random_system(4, 2, 6, 18, rng, 0.25);
    sys.X.row(3).setConstant(std::nan(""));
    compare_with_oracle(sys, FilterMethod::woodbury, 1e-8);
    compare_with_oracle(sys, FilterMethod::dense, 1e-8);
  }
}

TEST_CASE("more states than series takes the dense-equivalent path") {
  auto rng = stream_rng(23, 0);
  const auto sys = oracle::random_system(6, 2, 3, 20, rng);
  compare_with_oracle(sys, FilterMethod::woodbury, 1e-8);
}

TEST_CASE("stationary covariance solves the Lyapunov equation") {
  auto rng = stream_rng(24, 0);
  const auto sys = oracle::random_system(5, 2, 4, 5, rng);
  const Matrix P = stationary_state_cov(sys.ss);
  const Matrix ref = oracle::lyapunov_kron(sys.ss.A, sys.ss.B * sys.ss.sigma_eps * sys.ss.B.transpose());
  CHECK(max_abs(P - ref) < 1e-10);
}

TEST_CASE("gain and innovation covariance are consistent") {
  auto rng = stream_rng(25, 0);
  const auto sys = oracle::random_system(4, 2, 5, 10, rng);
  const FilterOutput f = kalman_filter(sys.ss, sys.X);
  for (int t = 0; t < 10; ++t) {
    const Matrix S = innovation_cov(sys.ss, f, t, sys.X);
    const Matrix ref = sys.ss.C * f.P_pred[t] * sys.ss.C.transpose() + sys.ss.sigma_xi * Matrix::Identity(5, 5);
    CHECK(max_abs(S - ref) < 1e-10);
    const Matrix K = kalman_gain(sys.ss, f, t, sys.X);
    CHECK(max_abs(K - sys.ss.A * f.P_pred[t] * sys.ss.C.transpose() * ref.inverse()) < 1e-9);
    CHECK(max_abs(f.L[t] - (sys.ss.A - K * sys.ss.C)) < 1e-9);
  }
}

TEST_CASE("smoothed moments equal direct sums over the oracle posterior") {
  auto rng = stream_rng(26, 0);
  const auto sys = oracle::random_system(4, 2, 5, 20, rng);
  const FilterOutput f = kalman_filter(sys.ss, sys.X);
  const SmootherOutput s = kalman_smooth(sys.ss, f, sys.X);
  const SmoothedMoments mo = smoothed_moments(sys.ss, s, sys.X);
  const auto ref = oracle::joint_gaussian(sys.ss, sys.X);
  const int T = 20;
  Matrix Mss = Matrix::Zero(4, 4), Msx = Matrix::Zero(4, 5), M11 = Matrix::Zero(4, 4), M1 = Matrix::Zero(4, 4),
         Mt = Matrix::Zero(4, 4);
  double xi = 0.0;
  for (int t = 0; t < T; ++t) {
    const Matrix E = ref.cov[t] + ref.mean[t] * ref.mean[t].transpose();
    Mss += E;
    Msx += ref.mean[t] * sys.X.row(t);
    const Vector e = sys.X.row(t).transpose() - sys.ss.C * ref.mean[t];
    xi += e.squaredNorm() + (sys.ss.C * ref.cov[t] * sys.ss.C.transpose()).trace();
    if (t > 0) {
      M11 += ref.cov[t - 1] + ref.mean[t - 1] * ref.mean[t - 1].transpose();
      M1 += ref.lag_cov[t] + ref.mean[t - 1] * ref.mean[t].transpose();
      Mt += E;
    }
  }
  CHECK(max_abs(mo.M_ss - Mss / T) < 1e-9);
  CHECK(max_abs(mo.M_sx - Msx / T) < 1e-9);
  CHECK(max_abs(mo.M_s1s1 - M11 / T) < 1e-9);
  CHECK(max_abs(mo.M_s1s - M1 / T) < 1e-9);
  CHECK(max_abs(mo.M_ss_tail - Mt / T) < 1e-9);
  CHECK(std::abs(mo.sigma_xi_new - xi / (5.0 * T)) < 1e-9);
  CHECK(std::abs(sigma_xi_from_moments(mo, sys.ss.C) - mo.sigma_xi_new) < 1e-9);

  const Matrix& A = sys.ss.A;
  Matrix U = Matrix::Zero(4, 4);
  for (int t = 1; t < T; ++t) {
    const Matrix Ett = ref.cov[t] + ref.mean[t] * ref.mean[t].transpose();
    const Matrix E11 = ref.cov[t - 1] + ref.mean[t - 1] * ref.mean[t - 1].transpose();
    const Matrix E1t = ref.lag_cov[t] + ref.mean[t - 1] * ref.mean[t].transpose();
    U += Ett - A * E1t - E1t.transpose() * A.transpose() + A * E11 * A.transpose();
  }
  CHECK(max_abs(sigma_eps_from_moments(mo, A, 2, T - 1) - U.topLeftCorner(2, 2) / (T - 1)) < 1e-9);
  CHECK(max_abs(mo.sigma_eps_new - U.topLeftCorner(2, 2) / (T - 1)) < 1e-9);
  const SmoothedMoments lit = smoothed_moments(sys.ss, s, sys.X, MomentVariant::literal);
  CHECK(max_abs(lit.sigma_eps_new - U.topLeftCorner(2, 2) / T) < 1e-9);
}

TEST_CASE("smoothed shocks follow the transition equation") {
  auto rng = stream_rng(27, 0);
  const auto sys = oracle::random_system(4, 2, 5, 12, rng);
  const FilterOutput f = kalman_filter(sys.ss, sys.X);
  const SmootherOutput s = kalman_smooth(sys.ss, f, sys.X);
  for (int t = 1; t < 12; ++t) {
    const Vector ref = sys.ss.B.transpose() * (s.s_smooth[t] - sys.ss.A * s.s_smooth[t - 1]);
    CHECK(max_abs(s.eps_smooth[t] - ref) < 1e-12);
    CHECK(max_abs(s.e_smooth[t] - (sys.X.row(t).transpose() - sys.ss.C * s.s_smooth[t])) < 1e-12);
  }
}

TEST_CASE("moments need complete data") {
  auto rng = stream_rng(28, 0);
  auto sys = oracle::random_system(2, 1, 3, 8, rng);
  sys.X(2, 1) = std::nan("");
  const FilterOutput f = kalman_filter(sys.ss, sys.X);
  const SmootherOutput s = kalman_smooth(sys.ss, f, sys.X);
  CHECK_THROWS_AS(smoothed_moments(sys.ss, s, sys.X), ValidationError);
}

TEST_CASE("dimension errors") {
  auto rng = stream_rng(29, 0);
  const auto sys = oracle::random_system(2, 1, 3, 8, rng);
  CHECK_THROWS_AS(kalman_filter(sys.ss, Matrix::Zero(8, 4)), DimensionError);
}
