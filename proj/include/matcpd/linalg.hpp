#pragma once

#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "matcpd/core.hpp"

namespace matcpd {

struct CholResult {
  Eigen::MatrixXd lower;
  double jitter = 0.0;  // diagonal boost that made the factorization succeed
};

// LLT with an escalating diagonal jitter.  Symmetric PSD inputs that are
// numerically rank-deficient (band-limited Toeplitz, sample covariances)
// factor once a small multiple of the identity is added.
inline CholResult chol_with_jitter(const Eigen::MatrixXd& a, const char* who) {
  if (a.rows() != a.cols())
    throw Error(errc::boundary, std::string(who) + ": matrix not square");
  static constexpr double kLadder[] = {0.0, 1e-10, 1e-8, 1e-6};
  Eigen::LLT<Eigen::MatrixXd> llt;
  for (double jitter : kLadder) {
    if (jitter == 0.0) {
      llt.compute(a);
    } else {
      Eigen::MatrixXd boosted = a;
      boosted.diagonal().array() += jitter;
      llt.compute(boosted);
    }
    if (llt.info() == Eigen::Success)
      return {Eigen::MatrixXd(llt.matrixL()), jitter};
  }
  throw Error(errc::numerical,
              std::string(who) + ": Cholesky failed after jitter up to 1e-6 (matrix of "
                                 "order " + std::to_string(a.rows()) + ")");
}

}  // namespace matcpd
