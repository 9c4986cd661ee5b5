#pragma once

#include "bdd/errors.hpp"

namespace bdd::gold {

/// A logarithm base: any positive real except 1.
class LogBase {
public:
    explicit LogBase(double lambda);

    double lambda() const noexcept { return lambda_; }

private:
    double lambda_;
};

/// The four golden-ratio values: p1, p2 solve p^2 + p - 1 = 0 and their
/// negations solve p^2 - p - 1 = 0.
struct GoldenRoots {
    double p1;
    double p2;
    double neg_p1;
    double neg_p2;
};

/// The derived optimizer pair: alpha = sqrt(2) * p1 and eta = (1 - alpha)^2.
struct Hyperparams {
    double alpha;
    double eta;
};

struct AdaptResult {
    LogBase base;
    int iterations;
};

/// log_b(x) = ln(x) / ln(b). Throws DomainError for x <= 0.
double log_base(double x, const LogBase& base);

/// Rebase a logarithm value: given y = log_from(x), returns log_to(x).
double convert_base(double value, const LogBase& from, const LogBase& to);

/// The base lambda = x^(1/x) for which log_lambda(x) = x. Defined for
/// every positive x except 1. Computed as exp(ln(x)/x); no base is ever
/// cached across arguments.
LogBase fixed_base(double x);

/// Iteratively adapts a base toward fixed_base(x) by blending in
/// log-space: ln(lambda) <- (1-rate)*ln(lambda) + rate*ln(x)/x. Stops as
/// soon as |log_lambda(x) - x| <= tol and reports the iterations used.
/// rate = 1 reproduces fixed_base(x) in a single step, bit for bit.
/// Throws ConvergenceError when max_iter updates do not reach tol.
AdaptResult adapt_base(double x, const LogBase& lambda0, double rate,
                       double tol, int max_iter);

/// p1 = (sqrt(5)-1)/2, p2 = (-sqrt(5)-1)/2, and their negations.
GoldenRoots golden_roots();

/// (1-p) - p^2: residual of the complement-equals-square identity, zero
/// at p1 and p2.
double complement_square_residual(double p) noexcept;

/// Momentum weight alpha = sqrt(2) * p1 = 0.874032...
double derive_alpha() noexcept;

/// Learning rate eta = (1 - alpha)^2. Throws DomainError for alpha
/// outside (0, 1).
double derive_eta(double alpha);

/// Convenience bundle of derive_alpha / derive_eta.
Hyperparams derived_hyperparams();

} // namespace bdd::gold
