#include "dslap/gpr.hpp"

#include <stdexcept>

#include <json.hpp>

namespace dslap {

void Dataset::append(const Dataset& other) {
  if (other.empty()) return;
  if (empty()) {
    *this = other;
    if (batches.empty()) batches.push_back(size());
    return;
  }
  if (other.Z.cols() != Z.cols() || other.Y.cols() != Y.cols())
    throw std::invalid_argument("dataset: dimension mismatch");
  const Eigen::Index n = Z.rows(), m = other.Z.rows();
  Z.conservativeResize(n + m, Eigen::NoChange);
  Y.conservativeResize(n + m, Eigen::NoChange);
  Z.bottomRows(m) = other.Z;
  Y.bottomRows(m) = other.Y;
  if (other.batches.empty())
    batches.push_back(static_cast<std::size_t>(m));
  else
    batches.insert(batches.end(), other.batches.begin(), other.batches.end());
}

Dataset Dataset::tail(std::size_t max_batches) const {
  if (batches.size() <= max_batches) return *this;
  Dataset out;
  out.batches.assign(batches.end() - static_cast<std::ptrdiff_t>(max_batches), batches.end());
  std::size_t keep = 0;
  for (auto b : out.batches) keep += b;
  out.Z = Z.bottomRows(static_cast<Eigen::Index>(keep));
  out.Y = Y.bottomRows(static_cast<Eigen::Index>(keep));
  return out;
}

Eigen::MatrixXd gram(const RbfKernel& kernel, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  Eigen::MatrixXd K(A.rows(), B.rows());
  for (Eigen::Index j = 0; j < B.rows(); ++j)
    for (Eigen::Index i = 0; i < A.rows(); ++i) K(i, j) = kernel(A.row(i), B.row(j));
  return K;
}

Posterior Posterior::fit(const RbfKernel& kernel, double sigma_e, int inputs, int outputs, Dataset data) {
  if (!(kernel.a > 0 && kernel.lambda > 0)) throw std::invalid_argument("gpr: kernel parameters must be positive");
  if (sigma_e < 0) throw std::invalid_argument("gpr: negative noise");
  Posterior p;
  p.kernel_ = kernel;
  p.sigma_e_ = sigma_e;
  p.inputs_ = inputs;
  p.outputs_ = outputs;
  if (data.empty()) {
    data.Z.resize(0, inputs);
    data.Y.resize(0, outputs);
    data.batches.clear();
  } else if (data.Z.cols() != inputs || data.Y.cols() != outputs || data.Z.rows() != data.Y.rows()) {
    throw std::invalid_argument("gpr: dataset shape mismatch");
  }
  if (!data.empty() && data.batches.empty()) data.batches.push_back(data.size());
  p.data_ = std::move(data);
  p.factor_from_scratch();
  p.solve_weights();
  return p;
}

void Posterior::factor_from_scratch() {
  const Eigen::Index n = data_.Z.rows();
  if (n == 0) {
    L_.resize(0, 0);
    jitter_ = 0;
    return;
  }
  const Eigen::MatrixXd K = gram(kernel_, data_.Z, data_.Z);
  const double noise = sigma_e_ * sigma_e_;
  double ladder[] = {0.0, kJitterLadder[0], kJitterLadder[1], kJitterLadder[2]};
  for (double j : ladder) {
    Eigen::MatrixXd A = K;
    A.diagonal().array() += noise + j;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success && (llt.matrixL().toDenseMatrix().diagonal().array() > 0).all()) {
      L_ = llt.matrixL();
      jitter_ = j;
      return;
    }
  }
  throw std::runtime_error("gpr: covariance not positive definite after jitter ladder");
}

void Posterior::solve_weights() {
  if (data_.empty()) {
    alpha_.resize(0, outputs_);
    return;
  }
  alpha_ = L_.triangularView<Eigen::Lower>().solve(data_.Y);
  L_.triangularView<Eigen::Lower>().transpose().solveInPlace(alpha_);
}

Posterior Posterior::update(const Dataset& batch) const {
  if (batch.empty()) return *this;
  if (data_.empty()) return fit(kernel_, sigma_e_, inputs_, outputs_, batch);
  Posterior p = *this;
  const Eigen::Index n = data_.Z.rows(), m = batch.Z.rows();
  p.data_.append(batch);
  const Eigen::MatrixXd Knb = gram(kernel_, data_.Z, batch.Z);
  Eigen::MatrixXd Kbb = gram(kernel_, batch.Z, batch.Z);
  Kbb.diagonal().array() += sigma_e_ * sigma_e_ + jitter_;
  const Eigen::MatrixXd L21t = L_.triangularView<Eigen::Lower>().solve(Knb);
  const Eigen::MatrixXd S = Kbb - L21t.transpose() * L21t;
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) {
    p.factor_from_scratch();
  } else {
    p.L_ = Eigen::MatrixXd::Zero(n + m, n + m);
    p.L_.topLeftCorner(n, n) = L_;
    p.L_.bottomLeftCorner(m, n) = L21t.transpose();
    p.L_.bottomRightCorner(m, m) = llt.matrixL();
  }
  p.solve_weights();
  return p;
}

Posterior Posterior::thinned(std::size_t max_batches) const {
  if (data_.batches.size() <= max_batches) return *this;
  return fit(kernel_, sigma_e_, inputs_, outputs_, data_.tail(max_batches));
}

Eigen::VectorXd Posterior::mean(const Eigen::VectorXd& z) const {
  if (data_.empty()) return Eigen::VectorXd::Zero(outputs_);
  Eigen::VectorXd k(data_.Z.rows());
  for (Eigen::Index i = 0; i < k.size(); ++i) k[i] = kernel_(z, data_.Z.row(i).transpose());
  return alpha_.transpose() * k;
}

double Posterior::variance(const Eigen::VectorXd& z) const {
  if (data_.empty()) return kernel_.a;
  Eigen::VectorXd k(data_.Z.rows());
  for (Eigen::Index i = 0; i < k.size(); ++i) k[i] = kernel_(z, data_.Z.row(i).transpose());
  L_.triangularView<Eigen::Lower>().solveInPlace(k);
  return std::max(0.0, kernel_.a - k.squaredNorm());
}

Eigen::VectorXd Posterior::variance_batch(const Eigen::MatrixXd& Zq) const {
  if (data_.empty()) return Eigen::VectorXd::Constant(Zq.rows(), kernel_.a);
  Eigen::MatrixXd K = gram(kernel_, data_.Z, Zq);
  L_.triangularView<Eigen::Lower>().solveInPlace(K);
  return (kernel_.a - K.colwise().squaredNorm().transpose().array()).cwiseMax(0.0).matrix();
}

std::string Posterior::to_json() const {
  nlohmann::json j;
  j["kernel"] = {{"a", kernel_.a}, {"lambda", kernel_.lambda}};
  j["sigma_e"] = sigma_e_;
  j["inputs"] = inputs_;
  j["outputs"] = outputs_;
  j["batches"] = data_.batches;
  auto rows = [](const Eigen::MatrixXd& M) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
      std::vector<double> row(M.cols());
      for (Eigen::Index c = 0; c < M.cols(); ++c) row[c] = M(r, c);
      a.push_back(row);
    }
    return a;
  };
  j["Z"] = rows(data_.Z);
  j["Y"] = rows(data_.Y);
  return j.dump();
}

Posterior Posterior::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  RbfKernel k{j.at("kernel").at("a").get<double>(), j.at("kernel").at("lambda").get<double>()};
  const int in = j.at("inputs").get<int>(), out = j.at("outputs").get<int>();
  Dataset d;
  const auto& Z = j.at("Z");
  const auto& Y = j.at("Y");
  d.Z.resize(static_cast<Eigen::Index>(Z.size()), in);
  d.Y.resize(static_cast<Eigen::Index>(Y.size()), out);
  for (std::size_t r = 0; r < Z.size(); ++r) {
    for (int c = 0; c < in; ++c) d.Z(r, c) = Z[r][c].get<double>();
    for (int c = 0; c < out; ++c) d.Y(r, c) = Y[r][c].get<double>();
  }
  d.batches = j.at("batches").get<std::vector<std::size_t>>();
  return fit(k, j.at("sigma_e").get<double>(), in, out, std::move(d));
}

Eigen::VectorXd lattice_input(const GridSpec& grid, LatticeIndex x, std::size_t u) {
  const State s = grid.physical_point(x);
  const Control& c = grid.control(u);
  Eigen::VectorXd z(s.size() + c.size());
  z << s, c;
  return z;
}

double sup_sigma(const Posterior& post, const GridSpec& grid) {
  const double cap = post.prior_stddev();
  if (post.size() == 0) return cap;
  const auto nx = static_cast<LatticeIndex>(grid.size());
  const std::size_t nu = grid.num_controls();
  double best = 0.0;
  auto visit = [&](LatticeIndex x) {
    for (std::size_t u = 0; u < nu; ++u) {
      best = std::max(best, post.stddev(lattice_input(grid, x, u)));
      if (best >= cap) return true;
    }
    return false;
  };
  // A sparse, well spread probe first: far-from-data points hit the cap.
  constexpr LatticeIndex kProbe = 997;
  for (LatticeIndex x = 0; x < nx; x += kProbe)
    if (visit(x)) return cap;
  for (LatticeIndex x = 0; x < nx; ++x)
    if (x % kProbe != 0 && visit(x)) return cap;
  return best;
}

}  // namespace dslap
