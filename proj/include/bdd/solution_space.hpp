#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "bdd/errors.hpp"
#include "bdd/goldfix.hpp"

namespace bdd::sol {

/// An angle restricted to the first quadrant [0, pi/2].
class Angle {
public:
    explicit Angle(double phi);

    double phi() const noexcept { return phi_; }

private:
    double phi_;
};

/// How log terms are evaluated. FixedPoint applies the identity reading
/// log_lambda(x) = x; Explicit evaluates an ordinary logarithm in the
/// given base. Keeping the two readings distinct at every call site is
/// the point of this type: they are never blended silently.
class LogMode {
public:
    static LogMode fixed_point() { return LogMode(std::nullopt); }
    static LogMode explicit_base(gold::LogBase base) { return LogMode(base); }

    bool is_fixed_point() const noexcept { return !base_.has_value(); }

    const gold::LogBase& base() const {
        if (!base_) {
            throw StateError("LogMode is fixed-point; it has no explicit base");
        }
        return *base_;
    }

    /// Evaluates the log term for this mode. Explicit mode throws
    /// SingularityError at x = 0 and DomainError for x < 0.
    double log_term(double x) const;

private:
    explicit LogMode(std::optional<gold::LogBase> base) : base_(base) {}

    std::optional<gold::LogBase> base_;
};

/// One sample of the unit-circle solution sweep.
struct SolutionPoint {
    double phi;
    double forward_value; // 2 sin(phi) L(cos(phi))
    double reverse_value; // 2 L(sin(phi)) cos(phi)
};

/// Stage-by-stage evaluation of one transformation chain. stage_values
/// holds the six printed right-hand sides under the chain's stated
/// substitutions; stage_residuals the five consecutive differences. The
/// assumption residuals record how far the input is from the three
/// substitution conditions: the complement constraint, the
/// prior-equals-posterior assumption, and the golden condition
/// 1 - p = p^2. The first two are zero by construction (the chain
/// substitutes them); the golden condition vanishes only at the positive
/// golden root.
struct ChainTrace {
    std::array<double, 6> stage_values{};
    std::array<double, 5> stage_residuals{};
    struct AssumptionResiduals {
        double complement_prior = 0.0;
        double prior_equals_posterior = 0.0;
        double golden_condition = 0.0;
    } assumption_residuals;
};

/// 2 sin(phi) L(cos(phi)). Explicit mode is singular at phi = pi/2.
double eval_forward(const Angle& phi, const LogMode& mode);

/// 2 L(sin(phi)) cos(phi). Explicit mode is singular at phi = 0.
double eval_reverse(const Angle& phi, const LogMode& mode);

/// n+1 uniformly spaced samples of [0, pi/2], ordered by phi. In
/// Explicit mode the two singular endpoints are moved inward by half a
/// step so every sample is finite. Throws PreconditionError for n < 2.
std::vector<SolutionPoint> sweep(int n, const LogMode& mode);

/// The angle solving sin(phi) = cos(phi), found by bisection on
/// [0, pi/2]; equals pi/4 to within 1e-10.
Angle inner_solution();

/// The complementary angle pi/2 - phi. Uses a two-term representation of
/// pi/2: the naive subtraction loses ~6e-17 to the rounding of pi/2
/// itself, which the log pole near the endpoints amplifies past 1e-12.
Angle mirror_angle(const Angle& phi);

/// Forward chain evaluated at P(B) = p_b. Throws DomainError outside (0,1).
ChainTrace chain_eval_forward(double p_b, const LogMode& mode);

/// Reverse chain evaluated at P(A|B) = p_a_given_b. Throws DomainError
/// outside (0,1).
ChainTrace chain_eval_reverse(double p_a_given_b, const LogMode& mode);

/// CSV rendering of a sweep: header phi,forward,reverse then one row per
/// point, values at 6 significant digits.
std::string sweep_csv(const std::vector<SolutionPoint>& points);

} // namespace bdd::sol
