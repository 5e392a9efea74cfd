#pragma once

#include <stdexcept>
#include <string>

namespace wasscc {

// Raised when an instance (or a subproblem of it) has no feasible point.
// Kept distinct from ConvergenceError so callers can tell "no solution
// exists" apart from "the solver gave up".
class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when an iterative routine exhausts its budget without meeting
// its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

// Probability level constrained to the open interval (0, 1).
class ProbLevel {
 public:
  explicit ProbLevel(double p) : p_(p) {
    if (!(p > 0.0 && p < 1.0))
      throw std::invalid_argument("ProbLevel: value " + std::to_string(p) +
                                  " must lie strictly inside (0, 1)");
  }
  double value() const { return p_; }
  ProbLevel complement() const { return ProbLevel(1.0 - p_); }

 private:
  double p_;
};

// Which norm defines the transport cost of the ambiguity ball.
enum class NormConvention {
  kSigmaWeighted,  // ||Sigma^{-1/2} v||_2, individual Gaussian case
  kEuclidean,      // plain 2-norm, joint RHS case
};

// Ambiguity ball description: radius, risk level, norm.
// delta = 0 is allowed and means "no ambiguity" (nominal chance constraint);
// operations that require a strictly positive radius check for it themselves.
struct AmbiguitySpec {
  double delta;
  ProbLevel eps;
  NormConvention norm;

  AmbiguitySpec(double delta_, ProbLevel eps_,
                NormConvention norm_ = NormConvention::kSigmaWeighted)
      : delta(delta_), eps(eps_), norm(norm_) {
    if (!(delta >= 0.0))
      throw std::invalid_argument("AmbiguitySpec: radius must be >= 0");
  }
};

}  // namespace wasscc
