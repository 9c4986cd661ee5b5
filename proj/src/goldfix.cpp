#include "bdd/goldfix.hpp"

#include <cmath>
#include <string>

namespace bdd::gold {

LogBase::LogBase(double lambda) : lambda_(lambda) {
    if (!(lambda > 0.0) || lambda == 1.0) {
        throw DomainError("logarithm base must be positive and not 1, got " +
                          std::to_string(lambda));
    }
}

double log_base(double x, const LogBase& base) {
    if (!(x > 0.0)) {
        throw DomainError("logarithm argument must be positive, got " +
                          std::to_string(x));
    }
    return std::log(x) / std::log(base.lambda());
}

double convert_base(double value, const LogBase& from, const LogBase& to) {
    return value / log_base(to.lambda(), from);
}

LogBase fixed_base(double x) {
    if (!(x > 0.0) || x == 1.0) {
        throw DomainError("fixed_base requires x > 0 and x != 1, got " +
                          std::to_string(x));
    }
    // exp(ln(x)/x) rather than pow(x, 1/x): adapt_base iterates on
    // ln(lambda) and must land on the identical double at rate 1.
    return LogBase(std::exp(std::log(x) / x));
}

AdaptResult adapt_base(double x, const LogBase& lambda0, double rate,
                       double tol, int max_iter) {
    if (!(x > 0.0) || x == 1.0) {
        throw DomainError("adapt_base requires x > 0 and x != 1, got " +
                          std::to_string(x));
    }
    if (!(rate > 0.0) || rate > 1.0) {
        throw DomainError("adapt_base rate must lie in (0,1], got " +
                          std::to_string(rate));
    }
    const double target = std::log(x) / x;
    double ln_lambda = std::log(lambda0.lambda());
    for (int iteration = 0; iteration <= max_iter; ++iteration) {
        const double lambda = std::exp(ln_lambda);
        if (lambda != 1.0 && std::abs(std::log(x) / std::log(lambda) - x) <= tol) {
            return AdaptResult{LogBase(lambda), iteration};
        }
        if (iteration == max_iter) {
            break;
        }
        ln_lambda = (1.0 - rate) * ln_lambda + rate * target;
    }
    throw ConvergenceError("adapt_base did not reach tolerance " +
                           std::to_string(tol) + " within " +
                           std::to_string(max_iter) + " iterations");
}

GoldenRoots golden_roots() {
    const double root5 = std::sqrt(5.0);
    const double p1 = (root5 - 1.0) / 2.0;
    const double p2 = (-root5 - 1.0) / 2.0;
    return GoldenRoots{p1, p2, -p1, -p2};
}

double complement_square_residual(double p) noexcept {
    return (1.0 - p) - p * p;
}

double derive_alpha() noexcept {
    return std::sqrt(2.0) * golden_roots().p1;
}

double derive_eta(double alpha) {
    if (!(alpha > 0.0) || !(alpha < 1.0)) {
        throw DomainError("derive_eta requires alpha in (0,1), got " +
                          std::to_string(alpha));
    }
    const double complement = 1.0 - alpha;
    return complement * complement;
}

Hyperparams derived_hyperparams() {
    const double alpha = derive_alpha();
    return Hyperparams{alpha, derive_eta(alpha)};
}

} // namespace bdd::gold
