#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "dslap/gpr.hpp"

using namespace dslap;

namespace {

Dataset random_batch(std::mt19937_64& rng, int n, int in, int out) {
  std::uniform_real_distribution<double> u(-2, 2);
  Dataset d;
  d.Z.resize(n, in);
  d.Y.resize(n, out);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < in; ++j) d.Z(i, j) = u(rng);
    for (int j = 0; j < out; ++j) d.Y(i, j) = 0.05 * std::sin(d.Z(i, 0) + j) + 0.01 * u(rng);
  }
  d.batches = {static_cast<std::size_t>(n)};
  return d;
}

// Dense oracle: explicit matrices and a QR solve, no Cholesky.
void dense(const RbfKernel& k, double se, const Dataset& d, const Eigen::VectorXd& z, Eigen::VectorXd& mu, double& var) {
  const Eigen::Index n = d.Z.rows();
  Eigen::MatrixXd K(n, n);
  Eigen::VectorXd ks(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    ks[i] = k(d.Z.row(i).transpose(), z);
    for (Eigen::Index j = 0; j < n; ++j) K(i, j) = k(d.Z.row(i).transpose(), d.Z.row(j).transpose());
  }
  K.diagonal().array() += se * se;
  const auto qr = K.colPivHouseholderQr();
  mu = (ks.transpose() * qr.solve(d.Y)).transpose();
  var = k(z, z) - ks.dot(qr.solve(ks));
}

}  // namespace

TEST_CASE("prior: zero mean, sqrt(a) deviation") {
  const Posterior p = Posterior::fit({0.0025, 1.0}, 0.01, 4, 1);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(4);
  CHECK(p.mean(z)[0] == 0.0);
  CHECK(p.stddev(z) == doctest::Approx(0.05));
  CHECK(p.prior_stddev() == doctest::Approx(0.05));
}

TEST_CASE("posterior matches the dense solve") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2, 2);
  const RbfKernel k{0.0025, 1.0};
  for (int t = 0; t < 20; ++t) {
    const Dataset d = random_batch(rng, 5 + t, 4, 2);
    const Posterior p = Posterior::fit(k, 0.1, 4, 2, d);
    for (int q = 0; q < 5; ++q) {
      Eigen::VectorXd z(4);
      for (int j = 0; j < 4; ++j) z[j] = u(rng);
      Eigen::VectorXd mu;
      double var;
      dense(k, 0.1, d, z, mu, var);
      CHECK((p.mean(z) - mu).cwiseAbs().maxCoeff() < 1e-8);
      CHECK(std::abs(p.variance(z) - var) < 1e-8);
    }
  }
}

TEST_CASE("batched variance equals pointwise variance") {
  std::mt19937_64 rng(2);
  const Posterior p = Posterior::fit({0.0025, 1.0}, 0.01, 4, 1, random_batch(rng, 30, 4, 1));
  const Eigen::MatrixXd Zq = random_batch(rng, 12, 4, 1).Z;
  const Eigen::VectorXd v = p.variance_batch(Zq);
  for (Eigen::Index i = 0; i < Zq.rows(); ++i) CHECK(v[i] == doctest::Approx(p.variance(Zq.row(i).transpose())));
}

TEST_CASE("variance never grows as data is added") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int t = 0; t < 20; ++t) {
    Posterior p = Posterior::fit({0.0025, 1.0}, 0.01, 4, 1);
    std::vector<Eigen::VectorXd> probes(10, Eigen::VectorXd(4));
    for (auto& z : probes)
      for (int j = 0; j < 4; ++j) z[j] = u(rng);
    std::vector<double> last(probes.size());
    for (std::size_t i = 0; i < probes.size(); ++i) last[i] = p.stddev(probes[i]);
    for (int b = 0; b < 4; ++b) {
      p = p.update(random_batch(rng, 6, 4, 1));
      for (std::size_t i = 0; i < probes.size(); ++i) {
        const double s = p.stddev(probes[i]);
        CHECK(s >= 0.0);
        CHECK(s <= last[i] + 1e-12);
        last[i] = s;
      }
    }
  }
}

TEST_CASE("incremental update equals a refit on all data") {
  std::mt19937_64 rng(4);
  const RbfKernel k{0.0025, 1.0};
  const Dataset a = random_batch(rng, 10, 4, 1), b = random_batch(rng, 8, 4, 1);
  const Posterior inc = Posterior::fit(k, 0.01, 4, 1, a).update(b);
  Dataset all = a;
  all.append(b);
  const Posterior full = Posterior::fit(k, 0.01, 4, 1, all);
  CHECK(inc.size() == 18u);
  CHECK(inc.data().batches == std::vector<std::size_t>{10, 8});
  const Eigen::VectorXd z = Eigen::VectorXd::Constant(4, 0.3);
  CHECK(inc.mean(z)[0] == doctest::Approx(full.mean(z)[0]).epsilon(1e-10));
  CHECK(inc.variance(z) == doctest::Approx(full.variance(z)).epsilon(1e-10));
}

TEST_CASE("thinning keeps the most recent batches") {
  std::mt19937_64 rng(5);
  Posterior p = Posterior::fit({0.0025, 1.0}, 0.01, 4, 1);
  std::vector<Dataset> batches;
  for (int b = 0; b < 5; ++b) {
    batches.push_back(random_batch(rng, 3 + b, 4, 1));
    p = p.update(batches.back());
  }
  const Posterior t = p.thinned(2);
  CHECK(t.data().batches == std::vector<std::size_t>{6, 7});
  CHECK(t.data().Z.topRows(6) == batches[3].Z);
  CHECK(p.thinned(10).size() == p.size());
}

TEST_CASE("json round trip reproduces predictions") {
  std::mt19937_64 rng(6);
  const Posterior p = Posterior::fit({0.0025, 1.0}, 0.01, 4, 2, random_batch(rng, 15, 4, 2));
  const Posterior q = Posterior::from_json(p.to_json());
  const Eigen::VectorXd z = Eigen::VectorXd::Constant(4, -0.7);
  CHECK((q.mean(z) - p.mean(z)).norm() == 0.0);
  CHECK(q.variance(z) == p.variance(z));
}

TEST_CASE("noise-free duplicate inputs still factor") {
  Dataset d;
  d.Z = Eigen::MatrixXd::Zero(4, 4);
  d.Y = Eigen::MatrixXd::Constant(4, 1, 0.1);
  d.batches = {4};
  const Posterior p = Posterior::fit({0.0025, 1.0}, 0.0, 4, 1, d);
  CHECK(std::isfinite(p.mean(Eigen::VectorXd::Zero(4))[0]));
  CHECK(p.variance(Eigen::VectorXd::Zero(4)) >= 0.0);
}
