#pragma once

// Lanczos approximation of exp(-i tau H) v for Hermitian H given as a
// matrix-vector product.

#include <functional>

#include <Eigen/Dense>

namespace aqed {

using HermitianApply = std::function<void(const Eigen::VectorXcd& in, Eigen::VectorXcd& out)>;

struct KrylovOptions {
  int dimension = 20;
  double tolerance = 1e-10;     // per-step error estimate, relative to |v|
  int max_halvings = 30;
};

struct KrylovStats {
  long substeps = 0;            // accepted exponentials
  long matvecs = 0;
  long halvings = 0;
  double max_error_estimate = 0.0;
};

class KrylovExponential {
 public:
  explicit KrylovExponential(KrylovOptions options = {});

  /// v <- exp(-i tau H) v, subdividing tau until each piece meets the tolerance.
  void apply(const HermitianApply& h, double tau, Eigen::VectorXcd& v, KrylovStats& stats) const;

  /// One exponential in a single Krylov space, stopping early once converged;
  /// returns the error estimate relative to |v|.
  double try_step(const HermitianApply& h, double tau, const Eigen::VectorXcd& v,
                  Eigen::VectorXcd& out, long& matvecs) const;

  const KrylovOptions& options() const { return options_; }

 private:
  KrylovOptions options_;
};

}  // namespace aqed
