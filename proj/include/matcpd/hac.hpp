#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "matcpd/core.hpp"

// Long-run dependence plumbing for the dependent multiplier bootstrap:
// quadratic spectral kernel, AR(1)-based automatic bandwidth, and the
// Toeplitz correlation matrix of the multiplier sequence.

namespace matcpd {

// Quadratic spectral kernel, unit at 0, with the small-|x| limit expanded in
// series to avoid 0/0.  K(5/6) = 3/pi^2.
inline double qs_kernel(double x) {
  constexpr double pi = 3.141592653589793238462643383279503;
  const double z = 1.2 * pi * x;
  // The closed form divides sin(z)/z - cos(z) = z^2/3 - z^4/30 + ... by z^2,
  // so near 0 it cancels catastrophically; the series keeps full precision
  // there and both branches agree to ~1e-12 at the switchover.
  if (std::abs(z) < 0.02) {
    const double z2 = z * z;
    return 1.0 - z2 / 10.0 + z2 * z2 / 280.0;
  }
  return 25.0 / (12.0 * pi * pi * x * x) * (std::sin(z) / z - std::cos(z));
}

struct Ar1Fit {
  double rho = 0.0;
  double sigma2 = 0.0;
  bool degenerate = false;  // constant series, excluded from bandwidth pooling
};

// Least-squares AR(1) slope on the centered series (no intercept term).
// rho is clamped to +-0.97 so the (1-rho)^{-8} bandwidth weights stay finite.
template <class Derived>
Ar1Fit ar1_fit(const Eigen::DenseBase<Derived>& series) {
  const Eigen::Index n = series.size();
  if (n < 2) return {0.0, 0.0, true};
  Eigen::VectorXd y(n);
  for (Eigen::Index t = 0; t < n; ++t) y[t] = static_cast<double>(series(t));
  y.array() -= y.mean();

  double sxy = 0.0, sxx = 0.0;
  for (Eigen::Index t = 1; t < n; ++t) {
    sxy += y[t] * y[t - 1];
    sxx += y[t - 1] * y[t - 1];
  }
  if (sxx == 0.0) return {0.0, 0.0, true};

  Ar1Fit fit;
  fit.rho = std::clamp(sxy / sxx, -0.97, 0.97);
  double rss = 0.0;
  for (Eigen::Index t = 1; t < n; ++t) {
    const double r = y[t] - fit.rho * y[t - 1];
    rss += r * r;
  }
  fit.sigma2 = rss / static_cast<double>(n - 1);
  return fit;
}

constexpr double kMinBandwidth = 1.0;

// Andrews plug-in bandwidth for the QS kernel pooled over component fits:
//   a = sum_j 4 rho_j^2 sigma_j^4 (1-rho_j)^{-8} / sum_j sigma_j^4 (1-rho_j)^{-4},
//   l = 1.3221 (a N)^{1/5}, floored at kMinBandwidth.
inline double andrews_bandwidth_from_fits(const std::vector<Ar1Fit>& fits,
                                          Eigen::Index n) {
  if (n < 2) throw Error(errc::boundary, "andrews_bandwidth: need N >= 2");
  double num = 0.0, den = 0.0;
  for (const Ar1Fit& f : fits) {
    if (f.degenerate) continue;
    const double om = 1.0 - f.rho;
    const double s4 = f.sigma2 * f.sigma2;
    const double w4 = 1.0 / (om * om * om * om);
    num += 4.0 * f.rho * f.rho * s4 * w4 * w4;
    den += s4 * w4;
  }
  if (den == 0.0) return kMinBandwidth;
  const double a = num / den;
  const double l = 1.3221 * std::pow(a * static_cast<double>(n), 0.2);
  return std::max(l, kMinBandwidth);
}

template <class Scalar>
double andrews_bandwidth(const MatrixSeries<Scalar>& x) {
  std::vector<Ar1Fit> fits;
  fits.reserve(static_cast<std::size_t>(x.p()));
  for (Eigen::Index k = 0; k < x.p(); ++k) fits.push_back(ar1_fit(x.flat().row(k)));
  return andrews_bandwidth_from_fits(fits, x.n());
}

// Multiplier correlation Theta_{ij} = K((i-j)/l); symmetric Toeplitz, unit
// diagonal, PSD up to rounding because the QS kernel is positive definite.
inline Eigen::MatrixXd toeplitz_theta(Eigen::Index n, double bandwidth) {
  if (n < 1) throw Error(errc::boundary, "toeplitz_theta: need N >= 1");
  if (!(bandwidth > 0.0))
    throw Error(errc::boundary, "toeplitz_theta: bandwidth must be positive");
  Eigen::VectorXd k(n);
  for (Eigen::Index d = 0; d < n; ++d)
    k[d] = qs_kernel(static_cast<double>(d) / bandwidth);
  Eigen::MatrixXd theta(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) theta(i, j) = k[std::abs(i - j)];
  return theta;
}

}  // namespace matcpd
