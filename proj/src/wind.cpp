#include "dslap/wind.hpp"

#include <cmath>
#include <complex>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

namespace dslap {

namespace {

// Catmull-Rom basis for the four samples around a cell, parameter t in [0,1].
void cr_weights(double t, double w[4]) {
  const double t2 = t * t, t3 = t2 * t;
  w[0] = 0.5 * (-t3 + 2 * t2 - t);
  w[1] = 0.5 * (3 * t3 - 5 * t2 + 2);
  w[2] = 0.5 * (-3 * t3 + 4 * t2 + t);
  w[3] = 0.5 * (t3 - t2);
}

void cr_derivs(double t, double w[4]) {
  const double t2 = t * t;
  w[0] = 0.5 * (-3 * t2 + 4 * t - 1);
  w[1] = 0.5 * (9 * t2 - 10 * t);
  w[2] = 0.5 * (-9 * t2 + 8 * t + 1);
  w[3] = 0.5 * (3 * t2 - 2 * t);
}

// Power-basis coefficients of the Catmull-Rom weights: w_k(t) = sum_p kCr[p][k] t^p.
constexpr double kCr[4][4] = {{0, 1, 0, 0}, {-0.5, 0, 0.5, 0}, {1, -2.5, 2, -0.5}, {-0.5, 1.5, -1.5, 0.5}};

// Largest |Bernstein coefficient| of a tensor polynomial sum a[p][q] s^p t^q
// of degrees (n, m) on the unit square; by the convex hull property this
// bounds the polynomial there.
double bernstein_bound(const double a[4][4], int n, int m) {
  auto binom = [](int x, int y) {
    double r = 1;
    for (int i = 1; i <= y; ++i) r = r * (x - y + i) / i;
    return r;
  };
  double tmp[4][4] = {}, b[4][4] = {};
  for (int j = 0; j <= n; ++j)
    for (int q = 0; q <= m; ++q)
      for (int k = 0; k <= j; ++k) tmp[j][q] += binom(j, k) / binom(n, k) * a[k][q];
  double best = 0;
  for (int j = 0; j <= n; ++j)
    for (int l = 0; l <= m; ++l) {
      for (int k = 0; k <= l; ++k) b[j][l] += binom(l, k) / binom(m, k) * tmp[j][k];
      best = std::max(best, std::abs(b[j][l]));
    }
  return best;
}

void locate(double x, Interval r, double d, int n, int& cell, double& t) {
  if (n == 1) {
    cell = 0;
    t = 0;
    return;
  }
  const double u = (std::clamp(x, r.lo, r.hi) - r.lo) / d;
  cell = std::min(static_cast<int>(std::floor(u)), n - 2);
  t = u - cell;
}

void fft2(std::vector<std::complex<double>>& a, int n, bool inverse) {
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> in(n), out(n);
  for (int pass = 0; pass < 2; ++pass) {
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) in[c] = pass == 0 ? a[r * n + c] : a[c * n + r];
      if (inverse)
        fft.inv(out, in);
      else
        fft.fwd(out, in);
      for (int c = 0; c < n; ++c) (pass == 0 ? a[r * n + c] : a[c * n + r]) = out[c];
    }
  }
}

}  // namespace

WindField::WindField(Interval x1, Interval x2, int n1, int n2, std::vector<double> samples, WindSpec spec)
    : x1_(x1), x2_(x2), n1_(n1), n2_(n2), samples_(std::move(samples)), spec_(spec) {
  if (n1 < 1 || n2 < 1 || samples_.size() != static_cast<std::size_t>(n1) * n2)
    throw std::invalid_argument("wind: sample grid size mismatch");
  d1_ = n1 > 1 ? (x1.hi - x1.lo) / (n1 - 1) : 1.0;
  d2_ = n2 > 1 ? (x2.hi - x2.lo) / (n2 - 1) : 1.0;
  compute_bounds();
}

double WindField::sample(int i, int j) const {
  i = std::clamp(i, 0, n1_ - 1);
  j = std::clamp(j, 0, n2_ - 1);
  return samples_[static_cast<std::size_t>(i) * n2_ + j];
}

double WindField::operator()(double x1, double x2) const {
  int ci, cj;
  double ti, tj, wi[4], wj[4];
  locate(x1, x1_, d1_, n1_, ci, ti);
  locate(x2, x2_, d2_, n2_, cj, tj);
  cr_weights(ti, wi);
  cr_weights(tj, wj);
  double v = 0;
  for (int a = 0; a < 4; ++a) {
    double row = 0;
    for (int b = 0; b < 4; ++b) row += wj[b] * sample(ci - 1 + a, cj - 1 + b);
    v += wi[a] * row;
  }
  return v;
}

Eigen::Vector2d WindField::gradient(double x1, double x2) const {
  int ci, cj;
  double ti, tj, wi[4], wj[4], di[4], dj[4];
  locate(x1, x1_, d1_, n1_, ci, ti);
  locate(x2, x2_, d2_, n2_, cj, tj);
  cr_weights(ti, wi);
  cr_weights(tj, wj);
  cr_derivs(ti, di);
  cr_derivs(tj, dj);
  Eigen::Vector2d g = Eigen::Vector2d::Zero();
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      const double s = sample(ci - 1 + a, cj - 1 + b);
      g[0] += di[a] * wj[b] * s;
      g[1] += wi[a] * dj[b] * s;
    }
  if (n1_ > 1) g[0] /= d1_; else g[0] = 0;
  if (n2_ > 1) g[1] /= d2_; else g[1] = 0;
  return g;
}

void WindField::compute_bounds() {
  // Per cell the interpolant is a bicubic polynomial; Bernstein coefficients
  // of it and of its partial derivatives give rigorous, tight bounds.
  sup_ = 0.0;
  lip_ = 0.0;
  const int c1 = std::max(1, n1_ - 1), c2 = std::max(1, n2_ - 1);
  for (int ci = 0; ci < c1; ++ci)
    for (int cj = 0; cj < c2; ++cj) {
      double S[4][4], T[4][4] = {}, P[4][4] = {};
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) S[a][b] = sample(ci - 1 + a, cj - 1 + b);
      // A single sample along an axis means the field is constant along it.
      for (int p = 0; p < 4; ++p)
        for (int b = 0; b < 4; ++b)
          for (int a = 0; a < 4; ++a) T[p][b] += (n1_ > 1 ? kCr[p][a] : (p == 0 && a == 1)) * S[a][b];
      for (int p = 0; p < 4; ++p)
        for (int q = 0; q < 4; ++q)
          for (int b = 0; b < 4; ++b) P[p][q] += T[p][b] * (n2_ > 1 ? kCr[q][b] : (q == 0 && b == 1));
      double D1[4][4] = {}, D2[4][4] = {};
      for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 4; ++q) D1[p][q] = (p + 1) * P[p + 1][q];
      for (int p = 0; p < 4; ++p)
        for (int q = 0; q < 3; ++q) D2[p][q] = (q + 1) * P[p][q + 1];
      sup_ = std::max(sup_, bernstein_bound(P, 3, 3));
      lip_ = std::max(lip_, bernstein_bound(D1, 2, 3) / d1_ + bernstein_bound(D2, 3, 2) / d2_);
    }
}

std::pair<double, double> WindField::domain_stats() const {
  const int m1 = std::max(1, 4 * (n1_ - 1) + 1), m2 = std::max(1, 4 * (n2_ - 1) + 1);
  double s = 0, s2 = 0;
  for (int i = 0; i < m1; ++i)
    for (int j = 0; j < m2; ++j) {
      const double a = m1 > 1 ? x1_.lo + (x1_.hi - x1_.lo) * i / (m1 - 1) : x1_.lo;
      const double b = m2 > 1 ? x2_.lo + (x2_.hi - x2_.lo) * j / (m2 - 1) : x2_.lo;
      const double w = (*this)(a, b);
      s += w;
      s2 += w * w;
    }
  const double n = static_cast<double>(m1) * m2;
  const double mean = s / n;
  return {mean, std::sqrt(std::max(0.0, s2 / n - mean * mean))};
}

DisturbanceField WindField::as_disturbance(int n_x, std::vector<int> mask) const {
  DisturbanceField g;
  g.n_x = n_x;
  g.mask = std::move(mask);
  const WindField copy = *this;
  g.scalar = [copy](const State& x) { return copy(x[0], x[1]); };
  g.sup = sup_;
  g.lipschitz = lip_;
  return g;
}

void WindField::save_csv(std::ostream& os) const {
  os.precision(17);
  os << "# seed=" << spec_.seed << "\n# r_w=" << spec_.r_w << "\n# std_ratio=" << spec_.std_ratio
     << "\n# v=" << spec_.v << "\n# correlation_length=" << spec_.correlation_length
     << "\n# spectrum=" << (spec_.spectrum == WindSpectrum::VonKarman ? "von_karman" : "gaussian")
     << "\n# x1=" << x1_.lo << ":" << x1_.hi << "\n# x2=" << x2_.lo << ":" << x2_.hi << "\n# n1=" << n1_
     << "\n# n2=" << n2_ << "\n";
  os << "i,j,x1,x2,w\n";
  for (int i = 0; i < n1_; ++i)
    for (int j = 0; j < n2_; ++j)
      os << i << ',' << j << ',' << x1_.lo + i * d1_ << ',' << x2_.lo + j * d2_ << ',' << sample(i, j) << '\n';
}

WindField WindField::load_csv(std::istream& is) {
  WindSpec spec;
  Interval x1{}, x2{};
  int n1 = 0, n2 = 0;
  std::string line;
  auto range = [](const std::string& v) {
    const auto c = v.find(':');
    return Interval{std::stod(v.substr(0, c)), std::stod(v.substr(c + 1))};
  };
  while (std::getline(is, line) && !line.empty() && line[0] == '#') {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(2, eq - 2), val = line.substr(eq + 1);
    if (key == "seed") spec.seed = std::stoull(val);
    else if (key == "r_w") spec.r_w = std::stod(val);
    else if (key == "std_ratio") spec.std_ratio = std::stod(val);
    else if (key == "v") spec.v = std::stod(val);
    else if (key == "correlation_length") spec.correlation_length = std::stod(val);
    else if (key == "spectrum") spec.spectrum = val == "gaussian" ? WindSpectrum::Gaussian : WindSpectrum::VonKarman;
    else if (key == "x1") x1 = range(val);
    else if (key == "x2") x2 = range(val);
    else if (key == "n1") n1 = std::stoi(val);
    else if (key == "n2") n2 = std::stoi(val);
  }
  if (line != "i,j,x1,x2,w") throw std::runtime_error("wind csv: missing header row");
  std::vector<double> samples(static_cast<std::size_t>(n1) * n2, 0.0);
  std::size_t seen = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok[5];
    for (auto& t : tok) std::getline(ss, t, ',');
    const int i = std::stoi(tok[0]), j = std::stoi(tok[1]);
    if (i < 0 || i >= n1 || j < 0 || j >= n2) throw std::runtime_error("wind csv: index out of range");
    samples[static_cast<std::size_t>(i) * n2 + j] = std::stod(tok[4]);
    ++seen;
  }
  if (seen != samples.size()) throw std::runtime_error("wind csv: sample count mismatch");
  spec.resolution = n1;
  return WindField(x1, x2, n1, n2, std::move(samples), spec);
}

WindField gen_wind_field(const WindSpec& spec, Interval x1, Interval x2) {
  if (!(spec.r_w > 0.0 && spec.r_w <= 1.0)) throw std::invalid_argument("wind: r_w must lie in (0, 1]");
  if (spec.std_ratio < 0.0) throw std::invalid_argument("wind: std_ratio must be >= 0");
  if (spec.resolution < 4) throw std::invalid_argument("wind: resolution must be >= 4");
  const int n = spec.resolution;
  const double target_mean = spec.r_w * spec.v;
  const double target_std = spec.std_ratio * spec.v;

  std::vector<double> raw(static_cast<std::size_t>(n) * n, 0.0);
  if (target_std > 0.0) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::complex<double>> a(raw.size());
    for (auto& c : a) c = normal(rng);
    fft2(a, n, false);
    // Periodic spectral grid; the physical period is the sample extent.
    const double extent = std::max(x1.hi - x1.lo, x2.hi - x2.lo);
    const double span = extent * n / std::max(1, n - 1);
    const double L = spec.correlation_length;
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        const int fr = r <= n / 2 ? r : r - n, fc = c <= n / 2 ? c : c - n;
        const double k = 2.0 * std::numbers::pi * std::hypot(fr, fc) / span;
        const double kl = k * L;
        const double amp = spec.spectrum == WindSpectrum::VonKarman ? std::pow(1.0 + kl * kl, -11.0 / 12.0)
                                                                    : std::exp(-0.25 * kl * kl);
        a[r * n + c] *= amp;
      }
    fft2(a, n, true);
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = a[i].real();
  }

  WindField shaped(x1, x2, n, n, raw, spec);
  const auto [m, s] = shaped.domain_stats();
  std::vector<double> out(raw.size(), target_mean);
  if (target_std > 0.0 && s > 0.0) {
    const double k = target_std / s;
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = target_mean + k * (raw[i] - m);
  }
  return WindField(x1, x2, n, n, std::move(out), spec);
}

}  // namespace dslap
