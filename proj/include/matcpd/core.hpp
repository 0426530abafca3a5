#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

// Core types and statistics for matrix-valued time series: mode norms,
// the weighted CUSUM process, and robust per-component rescaling.
//
// Conventions used throughout:
//   - observations are p1 x p2 real matrices X_1..X_N, stored vectorised
//     column-major (component (i,j) of X_t sits at flat index j*p1 + i);
//   - epochs n index the split "first n vs last N-n" and run over
//     [nu, N - nu] for a boundary margin 1 <= nu < N/2.

namespace matcpd {

template <class Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// ---------------------------------------------------------------------------
// Errors

enum class errc {
  invalid_data,  // non-finite, malformed or inconsistent input
  boundary,      // parameter outside its admissible range
  numerical,     // factorization or other numeric failure
  schema,        // config/report schema violation
  internal       // broken invariant; indicates a bug
};

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

// ---------------------------------------------------------------------------
// Norm specification

enum class Mode : std::uint8_t { one = 0, two = 1, dot = 2 };
enum class Lq : std::uint8_t { two = 0, inf = 1 };

// A mode norm ||.||_[mode, q].  For q = inf the three modes coincide (the
// max absolute entry), so specs with q = inf compare equal regardless of mode.
struct NormSpec {
  Mode mode = Mode::one;
  Lq q = Lq::two;

  static constexpr NormSpec mode1() { return {Mode::one, Lq::two}; }
  static constexpr NormSpec mode2() { return {Mode::two, Lq::two}; }
  static constexpr NormSpec dot() { return {Mode::dot, Lq::two}; }
  static constexpr NormSpec max() { return {Mode::one, Lq::inf}; }

  // Position in the canonical order mode1, mode2, dot, max; doubles as the
  // tie-break order wherever a single spec must be selected.
  int index() const noexcept {
    if (q == Lq::inf) return 3;
    return static_cast<int>(mode);
  }

  const char* label() const noexcept {
    switch (index()) {
      case 0: return "mode1";
      case 1: return "mode2";
      case 2: return "dot";
      default: return "max";
    }
  }

  // Sparsity of the aligned shift class the norm targets: the number of
  // entries over which the q = 2 mass is collected.
  Eigen::Index sparsity(Eigen::Index p1, Eigen::Index p2) const {
    switch (index()) {
      case 0: return p2;
      case 1: return p1;
      case 2: return isqrt(p1 * p2);
      default: return 1;
    }
  }

  friend bool operator==(NormSpec a, NormSpec b) { return a.index() == b.index(); }
  friend bool operator!=(NormSpec a, NormSpec b) { return !(a == b); }

  static Eigen::Index isqrt(Eigen::Index p) {
    if (p < 0) throw Error(errc::boundary, "isqrt: negative argument");
    auto r = static_cast<Eigen::Index>(std::sqrt(static_cast<double>(p)));
    while (r * r > p) --r;
    while ((r + 1) * (r + 1) <= p) ++r;
    return r;
  }
};

// Canonical four-norm family used by the adaptive test.
inline const std::vector<NormSpec>& adaptive_norms() {
  static const std::vector<NormSpec> k = {NormSpec::mode1(), NormSpec::mode2(),
                                          NormSpec::dot(), NormSpec::max()};
  return k;
}

inline NormSpec parse_norm(const std::string& s) {
  if (s == "mode1") return NormSpec::mode1();
  if (s == "mode2") return NormSpec::mode2();
  if (s == "dot") return NormSpec::dot();
  if (s == "max") return NormSpec::max();
  throw Error(errc::schema, "unknown norm '" + s + "' (expected mode1|mode2|dot|max)");
}

// ---------------------------------------------------------------------------
// Mode norms

// ||a||_[1,2]: largest row l2 norm.   ||a||_[2,2]: largest column l2 norm.
// ||a||_[.,2]: l2 norm of the floor(sqrt(p)) largest absolute entries.
// q = inf: max absolute entry.
template <class Derived>
typename Derived::Scalar mode_norm(const Eigen::MatrixBase<Derived>& a, NormSpec spec) {
  using Scalar = typename Derived::Scalar;
  if (a.size() == 0) throw Error(errc::boundary, "mode_norm: empty matrix");
  switch (spec.index()) {
    case 0:
      return std::sqrt(a.derived().rowwise().squaredNorm().maxCoeff());
    case 1:
      return std::sqrt(a.derived().colwise().squaredNorm().maxCoeff());
    case 2: {
      const Eigen::Index p = a.size();
      const Eigen::Index s = NormSpec::isqrt(p);
      std::vector<Scalar> sq(static_cast<std::size_t>(p));
      Eigen::Map<DenseVector<Scalar>>(sq.data(), p) =
          a.derived().reshaped().array().square();
      std::nth_element(sq.begin(), sq.begin() + (p - s), sq.end());
      Scalar acc = 0;
      for (Eigen::Index i = p - s; i < p; ++i) acc += sq[static_cast<std::size_t>(i)];
      return std::sqrt(acc);
    }
    default:
      return a.derived().cwiseAbs().maxCoeff();
  }
}

// ---------------------------------------------------------------------------
// Matrix series

// N observations of a p1 x p2 matrix, stored as a p x N matrix whose column
// t-1 is vec(X_t).  Zero-copy matrix views are exposed per observation.
template <class Scalar>
class MatrixSeries {
 public:
  MatrixSeries() = default;

  MatrixSeries(Eigen::Index p1, Eigen::Index p2, Eigen::Index n)
      : p1_(p1), p2_(p2), flat_(p1 * p2, n) {
    if (p1 < 1 || p2 < 1 || n < 1)
      throw Error(errc::boundary, "MatrixSeries: dimensions must be positive");
  }

  static MatrixSeries from_observations(const std::vector<DenseMatrix<Scalar>>& obs) {
    if (obs.empty()) throw Error(errc::invalid_data, "MatrixSeries: no observations");
    MatrixSeries s(obs[0].rows(), obs[0].cols(),
                   static_cast<Eigen::Index>(obs.size()));
    for (std::size_t t = 0; t < obs.size(); ++t) {
      if (obs[t].rows() != s.p1_ || obs[t].cols() != s.p2_)
        throw Error(errc::invalid_data,
                    "MatrixSeries: observation " + std::to_string(t + 1) +
                        " has inconsistent dimensions");
      s.flat_.col(static_cast<Eigen::Index>(t)) = obs[t].reshaped();
    }
    return s;
  }

  Eigen::Index n() const noexcept { return flat_.cols(); }
  Eigen::Index p1() const noexcept { return p1_; }
  Eigen::Index p2() const noexcept { return p2_; }
  Eigen::Index p() const noexcept { return flat_.rows(); }

  // t is 1-based to match the epoch convention.
  Eigen::Map<const DenseMatrix<Scalar>> obs(Eigen::Index t) const {
    if (t < 1 || t > n()) throw Error(errc::boundary, "MatrixSeries: t out of range");
    return Eigen::Map<const DenseMatrix<Scalar>>(flat_.col(t - 1).data(), p1_, p2_);
  }

  // Time series of component (i, j), 1-based indices.
  auto component(Eigen::Index i, Eigen::Index j) const {
    if (i < 1 || i > p1_ || j < 1 || j > p2_)
      throw Error(errc::boundary, "MatrixSeries: component out of range");
    return flat_.row((j - 1) * p1_ + (i - 1));
  }

  DenseMatrix<Scalar>& flat() noexcept { return flat_; }
  const DenseMatrix<Scalar>& flat() const noexcept { return flat_; }

  bool all_finite() const { return flat_.allFinite(); }

  void require_finite(const char* who) const {
    if (!all_finite()) {
      for (Eigen::Index t = 0; t < flat_.cols(); ++t)
        for (Eigen::Index k = 0; k < flat_.rows(); ++k)
          if (!std::isfinite(flat_(k, t)))
            throw Error(errc::invalid_data,
                        std::string(who) + ": non-finite value at (t=" +
                            std::to_string(t + 1) + ",i=" +
                            std::to_string(k % p1_ + 1) + ",j=" +
                            std::to_string(k / p1_ + 1) + ")");
    }
  }

  // Sub-series of observations s+1 .. e (global 1-based), copied.
  MatrixSeries slice(Eigen::Index s, Eigen::Index e) const {
    if (s < 0 || e > n() || e - s < 1)
      throw Error(errc::boundary, "MatrixSeries: bad slice");
    MatrixSeries out(p1_, p2_, e - s);
    out.flat_ = flat_.middleCols(s, e - s);
    return out;
  }

 private:
  Eigen::Index p1_ = 0, p2_ = 0;
  DenseMatrix<Scalar> flat_;
};

using MatrixSeriesXd = MatrixSeries<double>;

// ---------------------------------------------------------------------------
// Robust rescaling

enum class ScaleEstimator {
  median_abs_dev,  // median |x - median(x)|, consistency constant 1
  mean_abs_dev     // mean |x - mean(x)|
};

template <class Scalar>
struct MadResult {
  MatrixSeries<Scalar> series;
  DenseVector<Scalar> scale;               // per flat component
  std::vector<Eigen::Index> zero_scale;    // flat indices left unscaled
};

namespace detail {

template <class Scalar>
Scalar median_inplace(std::vector<Scalar>& v) {
  const std::size_t n = v.size();
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (n % 2 == 1) return *mid;
  const Scalar hi = *mid;
  const Scalar lo = *std::max_element(v.begin(), mid);
  return (lo + hi) / Scalar(2);
}

}  // namespace detail

// Divides each component series by its scale estimate.  Components whose
// scale is exactly zero are left untouched and reported in zero_scale.
template <class Scalar>
MadResult<Scalar> mad_scale(const MatrixSeries<Scalar>& x,
                            ScaleEstimator est = ScaleEstimator::median_abs_dev) {
  x.require_finite("mad_scale");
  const Eigen::Index p = x.p(), n = x.n();
  MadResult<Scalar> out{x, DenseVector<Scalar>(p), {}};
  std::vector<Scalar> buf(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < p; ++k) {
    auto row = x.flat().row(k);
    Scalar s;
    if (est == ScaleEstimator::median_abs_dev) {
      for (Eigen::Index t = 0; t < n; ++t) buf[static_cast<std::size_t>(t)] = row[t];
      const Scalar med = detail::median_inplace(buf);
      for (Eigen::Index t = 0; t < n; ++t)
        buf[static_cast<std::size_t>(t)] = std::abs(row[t] - med);
      s = detail::median_inplace(buf);
    } else {
      const Scalar mean = row.mean();
      s = (row.array() - mean).abs().mean();
    }
    out.scale[k] = s;
    if (s == Scalar(0)) {
      out.zero_scale.push_back(k);
    } else {
      out.series.flat().row(k) = row / s;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CUSUM process

inline void check_margin(Eigen::Index nu, Eigen::Index n, const char* who) {
  if (nu < 1 || 2 * nu >= n)
    throw Error(errc::boundary, std::string(who) + ": need 1 <= nu < N/2 (nu=" +
                                    std::to_string(nu) + ", N=" + std::to_string(n) + ")");
}

inline bool is_standard_gamma(double gamma) { return gamma == 0.0 || gamma == 0.5; }

// C_n over epochs n in [nu, N - nu]:
//   C_n = {(n/N)((N-n)/N)}^{-gamma} N^{-1/2} (sum_{t<=n} X_t - (n/N) sum_t X_t).
// gamma = 0.5 gives the classical root-scaled mean difference (up to sign);
// gamma values other than 0 and 0.5 are accepted but nonstandard.
template <class Scalar>
struct CusumProcess {
  Eigen::Index start = 0;    // first epoch, equals nu
  Eigen::Index n_total = 0;  // N
  double gamma = 0.5;
  std::vector<DenseMatrix<Scalar>> mats;

  Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(mats.size()); }
  Eigen::Index epoch(Eigen::Index i) const noexcept { return start + i; }

  const DenseMatrix<Scalar>& at_epoch(Eigen::Index n) const {
    if (n < start || n >= start + size())
      throw Error(errc::boundary, "CusumProcess: epoch out of range");
    return mats[static_cast<std::size_t>(n - start)];
  }
};

template <class Scalar>
CusumProcess<Scalar> cusum_process(const MatrixSeries<Scalar>& x, Eigen::Index nu,
                                   double gamma = 0.5) {
  const Eigen::Index n = x.n(), p1 = x.p1(), p2 = x.p2();
  check_margin(nu, n, "cusum_process");
  x.require_finite("cusum_process");

  CusumProcess<Scalar> c;
  c.start = nu;
  c.n_total = n;
  c.gamma = gamma;
  c.mats.reserve(static_cast<std::size_t>(n - 2 * nu + 1));

  // The process is translation invariant, so sums are taken against the
  // first observation; a constant series then yields exact zeros.
  const DenseVector<Scalar> base = x.flat().col(0);
  DenseVector<Scalar> prefix = DenseVector<Scalar>::Zero(x.p());
  DenseVector<Scalar> total = DenseVector<Scalar>::Zero(x.p());
  for (Eigen::Index t = 1; t < n; ++t) total += x.flat().col(t) - base;
  for (Eigen::Index t = 1; t < nu; ++t) prefix += x.flat().col(t) - base;
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));

  for (Eigen::Index k = nu; k <= n - nu; ++k) {
    const double frac = static_cast<double>(k) / static_cast<double>(n);
    const double w = std::pow(frac * (1.0 - frac), -gamma) * inv_sqrt_n;
    DenseVector<Scalar> v = w * (prefix - frac * total);
    c.mats.emplace_back(Eigen::Map<const DenseMatrix<Scalar>>(v.data(), p1, p2));
    if (k < n - nu) prefix += x.flat().col(k) - base;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Test statistic

template <class Scalar>
struct Statistic {
  Scalar value = 0;
  Eigen::Index argmax = 0;  // earliest epoch attaining the max
};

template <class Scalar>
Statistic<Scalar> test_statistic(const CusumProcess<Scalar>& c, NormSpec spec) {
  if (c.size() == 0) throw Error(errc::boundary, "test_statistic: empty process");
  Statistic<Scalar> out{std::numeric_limits<Scalar>::lowest(), c.start};
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    const Scalar v = mode_norm(c.mats[static_cast<std::size_t>(i)], spec);
    if (v > out.value) {
      out.value = v;
      out.argmax = c.epoch(i);
    }
  }
  return out;
}

}  // namespace matcpd
