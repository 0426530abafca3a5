#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include "matcpd/core.hpp"
#include "matcpd/linalg.hpp"
#include "matcpd/rng.hpp"

// Synthetic matrix series: Gaussian noise with one of four covariance
// designs, optional AR(1) temporal dependence, and accumulating mean shifts
// with several alignment patterns.  (spec, seed) fully determines the output.

namespace matcpd {

// ---------------------------------------------------------------------------
// Covariance designs for vec(noise), indexed column-major

struct CovarianceSpec {
  enum class Kind { identity, kronecker_random, banded, compound_symmetry };
  Kind kind = Kind::identity;
  std::uint64_t seed = 0;     // kronecker_random: draw of the random factors
  double rho_row = 0.5;       // banded: decay across rows
  double rho_col = 0.3;       // banded: decay across columns
  double offdiag = 0.2;       // compound_symmetry

  static CovarianceSpec identity() { return {}; }
  static CovarianceSpec kronecker_random(std::uint64_t seed) {
    CovarianceSpec s;
    s.kind = Kind::kronecker_random;
    s.seed = seed;
    return s;
  }
  static CovarianceSpec banded(double rho_row = 0.5, double rho_col = 0.3) {
    CovarianceSpec s;
    s.kind = Kind::banded;
    s.rho_row = rho_row;
    s.rho_col = rho_col;
    return s;
  }
  static CovarianceSpec compound_symmetry(double offdiag = 0.2) {
    CovarianceSpec s;
    s.kind = Kind::compound_symmetry;
    s.offdiag = offdiag;
    return s;
  }
};

struct CovarianceModel {
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd chol;  // lower factor, possibly after jitter
  double jitter = 0.0;
  // Retained Kronecker factors: sigma = kron(factor_col, factor_row).
  std::optional<Eigen::MatrixXd> factor_row, factor_col;
};

namespace detail {

inline Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols,
                                       std::uint64_t key) {
  CounterRng rng(key);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = rng.normal(static_cast<std::uint64_t>(i));
  return m;
}

// Random symmetric PSD factor Q diag(|normal|) Q^T with Q orthonormal from a
// sign-fixed QR of a Gaussian matrix.
inline Eigen::MatrixXd random_psd_factor(Eigen::Index p, std::uint64_t key) {
  const Eigen::MatrixXd g = gaussian_matrix(p, p, derive_seed(key, 1));
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::VectorXd rdiag = qr.matrixQR().diagonal();
  for (Eigen::Index i = 0; i < p; ++i)
    if (rdiag[i] < 0) q.col(i) = -q.col(i);
  CounterRng rng(derive_seed(key, 2));
  Eigen::VectorXd lambda(p);
  for (Eigen::Index i = 0; i < p; ++i)
    lambda[i] = std::abs(rng.normal(static_cast<std::uint64_t>(i)));
  Eigen::MatrixXd s = q * lambda.asDiagonal() * q.transpose();
  return 0.5 * (s + s.transpose());
}

}  // namespace detail

inline CovarianceModel build_covariance(const CovarianceSpec& spec, Eigen::Index p1,
                                        Eigen::Index p2) {
  if (p1 < 1 || p2 < 1)
    throw Error(errc::boundary, "build_covariance: dimensions must be positive");
  const Eigen::Index p = p1 * p2;
  CovarianceModel m;
  switch (spec.kind) {
    case CovarianceSpec::Kind::identity:
      m.sigma = Eigen::MatrixXd::Identity(p, p);
      break;
    case CovarianceSpec::Kind::kronecker_random: {
      m.factor_row = detail::random_psd_factor(p1, derive_seed(spec.seed, 10));
      m.factor_col = detail::random_psd_factor(p2, derive_seed(spec.seed, 20));
      m.sigma = Eigen::kroneckerProduct(*m.factor_col, *m.factor_row);
      break;
    }
    case CovarianceSpec::Kind::banded: {
      m.sigma.resize(p, p);
      for (Eigen::Index cb = 0; cb < p2; ++cb)
        for (Eigen::Index rb = 0; rb < p1; ++rb)
          for (Eigen::Index ca = 0; ca < p2; ++ca)
            for (Eigen::Index ra = 0; ra < p1; ++ra)
              m.sigma(ca * p1 + ra, cb * p1 + rb) =
                  std::pow(spec.rho_row, std::abs(ra - rb)) *
                  std::pow(spec.rho_col, std::abs(ca - cb));
      break;
    }
    case CovarianceSpec::Kind::compound_symmetry: {
      if (!(spec.offdiag > -1.0 && spec.offdiag < 1.0))
        throw Error(errc::boundary, "build_covariance: offdiag must be in (-1,1)");
      m.sigma = Eigen::MatrixXd::Constant(p, p, spec.offdiag);
      m.sigma.diagonal().setOnes();
      break;
    }
  }
  CholResult c = chol_with_jitter(m.sigma, "build_covariance");
  m.chol = std::move(c.lower);
  m.jitter = c.jitter;
  return m;
}

// ---------------------------------------------------------------------------
// Shift patterns

struct ShiftSpec {
  enum class Kind { one_mode, two_modes, block, random_cells };
  Kind kind = Kind::one_mode;
  Eigen::Index cells = 0;       // one_mode / two_modes / random_cells
  Eigen::Index side = 0;        // block
  Eigen::Index row = 1, col = 1;  // block top-left corner, 1-based
  double magnitude = 0.0;
  std::uint64_t seed = 0;       // random_cells

  static ShiftSpec one_mode(Eigen::Index k, double a) {
    return {Kind::one_mode, k, 0, 1, 1, a, 0};
  }
  static ShiftSpec two_modes(Eigen::Index k, double a) {
    return {Kind::two_modes, k, 0, 1, 1, a, 0};
  }
  static ShiftSpec block(Eigen::Index side, double a, Eigen::Index row = 1,
                         Eigen::Index col = 1) {
    return {Kind::block, 0, side, row, col, a, 0};
  }
  static ShiftSpec random_cells(Eigen::Index k, double a, std::uint64_t seed) {
    return {Kind::random_cells, k, 0, 1, 1, a, seed};
  }
};

// The k affected cells all take the value magnitude.  one_mode fills row 1
// left to right and overflows into subsequent rows; two_modes fills row 1,
// then column 1 below it, then the remaining submatrix row by row.
inline Eigen::MatrixXd build_shift(const ShiftSpec& spec, Eigen::Index p1,
                                   Eigen::Index p2) {
  if (p1 < 1 || p2 < 1)
    throw Error(errc::boundary, "build_shift: dimensions must be positive");
  if (!std::isfinite(spec.magnitude))
    throw Error(errc::invalid_data, "build_shift: magnitude must be finite");
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(p1, p2);
  const Eigen::Index p = p1 * p2;
  switch (spec.kind) {
    case ShiftSpec::Kind::one_mode: {
      if (spec.cells < 0 || spec.cells > p)
        throw Error(errc::boundary, "build_shift: cell count out of range");
      for (Eigen::Index i = 0; i < spec.cells; ++i)
        delta(i / p2, i % p2) = spec.magnitude;
      break;
    }
    case ShiftSpec::Kind::two_modes: {
      if (spec.cells < 0 || spec.cells > p)
        throw Error(errc::boundary, "build_shift: cell count out of range");
      Eigen::Index left = spec.cells;
      for (Eigen::Index c = 0; c < p2 && left > 0; ++c, --left)
        delta(0, c) = spec.magnitude;
      for (Eigen::Index r = 1; r < p1 && left > 0; ++r, --left)
        delta(r, 0) = spec.magnitude;
      for (Eigen::Index r = 1; r < p1 && left > 0; ++r)
        for (Eigen::Index c = 1; c < p2 && left > 0; ++c, --left)
          delta(r, c) = spec.magnitude;
      break;
    }
    case ShiftSpec::Kind::block: {
      if (spec.side < 1 || spec.row < 1 || spec.col < 1 ||
          spec.row - 1 + spec.side > p1 || spec.col - 1 + spec.side > p2)
        throw Error(errc::boundary, "build_shift: block does not fit");
      delta.block(spec.row - 1, spec.col - 1, spec.side, spec.side)
          .setConstant(spec.magnitude);
      break;
    }
    case ShiftSpec::Kind::random_cells: {
      if (spec.cells < 0 || spec.cells > p)
        throw Error(errc::boundary, "build_shift: cell count out of range");
      std::vector<Eigen::Index> idx(static_cast<std::size_t>(p));
      for (Eigen::Index i = 0; i < p; ++i) idx[static_cast<std::size_t>(i)] = i;
      CounterRng rng(spec.seed);
      for (Eigen::Index i = 0; i < spec.cells; ++i) {
        const auto j =
            i + static_cast<Eigen::Index>(rng.uniform_index(
                    static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(p - i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        delta.data()[idx[static_cast<std::size_t>(i)]] = spec.magnitude;
      }
      break;
    }
  }
  return delta;
}

// ---------------------------------------------------------------------------
// Scenarios

struct ChangeSpec {
  Eigen::Index epoch = 0;  // observations t > epoch receive the shift
  ShiftSpec shift;
};

struct ScenarioSpec {
  Eigen::Index p1 = 0, p2 = 0, n = 0;
  CovarianceSpec cov;
  double ar1_rho = 0.0;
  std::vector<ChangeSpec> changes;  // epochs strictly increasing in (0, n)
  std::uint64_t seed = 0;
};

namespace detail {
constexpr std::uint64_t kNoiseStream = 0x6573696f6eull;
}

// Caches the covariance factor and shift matrices so a simulation study pays
// the Cholesky once per scenario.
class SeriesGenerator {
 public:
  explicit SeriesGenerator(ScenarioSpec spec) : spec_(std::move(spec)) {
    if (spec_.n < 1 || spec_.p1 < 1 || spec_.p2 < 1)
      throw Error(errc::boundary, "SeriesGenerator: dimensions must be positive");
    if (!(std::abs(spec_.ar1_rho) < 1.0))
      throw Error(errc::boundary, "SeriesGenerator: need |ar1_rho| < 1");
    Eigen::Index prev = 0;
    for (const ChangeSpec& ch : spec_.changes) {
      if (ch.epoch <= prev || ch.epoch >= spec_.n)
        throw Error(errc::boundary,
                    "SeriesGenerator: change epochs must be strictly increasing "
                    "inside (0, N)");
      prev = ch.epoch;
      deltas_.push_back(build_shift(ch.shift, spec_.p1, spec_.p2));
    }
    cov_ = build_covariance(spec_.cov, spec_.p1, spec_.p2);
  }

  const ScenarioSpec& spec() const noexcept { return spec_; }
  const CovarianceModel& covariance() const noexcept { return cov_; }

  MatrixSeriesXd generate() const { return generate(spec_.seed); }

  // Stationary AR(1) noise: eps_1 has the marginal law N(0, Sigma) and
  // eps_t = rho eps_{t-1} + sqrt(1-rho^2) eta_t keeps it.
  MatrixSeriesXd generate(std::uint64_t seed) const {
    const Eigen::Index n = spec_.n, p = spec_.p1 * spec_.p2;
    MatrixSeriesXd x(spec_.p1, spec_.p2, n);
    CounterRng rng(derive_seed(seed, detail::kNoiseStream));
    Eigen::VectorXd z(p), eta(p);
    const double rho = spec_.ar1_rho;
    const double innov = std::sqrt(1.0 - rho * rho);
    for (Eigen::Index t = 0; t < n; ++t) {
      for (Eigen::Index j = 0; j < p; ++j)
        z[j] = rng.normal(static_cast<std::uint64_t>(t) * static_cast<std::uint64_t>(p) +
                          static_cast<std::uint64_t>(j));
      eta.noalias() = cov_.chol.triangularView<Eigen::Lower>() * z;
      if (t == 0)
        x.flat().col(0) = eta;
      else
        x.flat().col(t) = rho * x.flat().col(t - 1) + innov * eta;
    }
    if (!deltas_.empty()) {
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
      std::size_t next = 0;
      for (Eigen::Index t = 1; t <= n; ++t) {
        while (next < deltas_.size() && t > spec_.changes[next].epoch)
          mean += deltas_[next++].reshaped();
        if (next > 0) x.flat().col(t - 1) += mean;
      }
    }
    return x;
  }

 private:
  ScenarioSpec spec_;
  CovarianceModel cov_;
  std::vector<Eigen::MatrixXd> deltas_;
};

inline MatrixSeriesXd generate_series(const ScenarioSpec& spec) {
  return SeriesGenerator(spec).generate();
}

}  // namespace matcpd
