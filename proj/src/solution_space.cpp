#include "bdd/solution_space.hpp"

#include <charconv>
#include <cmath>
#include <numbers>

namespace bdd::sol {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

void append_6sig(std::string& out, double v) {
    char buf[32];
    const auto result = std::to_chars(buf, buf + sizeof(buf), v,
                                      std::chars_format::general, 6);
    out.append(buf, result.ptr);
}

} // namespace

Angle::Angle(double phi) : phi_(phi) {
    if (!(phi >= 0.0) || !(phi <= kHalfPi)) {
        throw DomainError("angle must lie in [0, pi/2]");
    }
}

double LogMode::log_term(double x) const {
    if (!base_) {
        return x;
    }
    if (x == 0.0) {
        throw SingularityError("explicit logarithm diverges at 0");
    }
    return gold::log_base(x, *base_);
}

double eval_forward(const Angle& phi, const LogMode& mode) {
    // cos(pi/2) rounds to 6.1e-17 rather than 0, so the pole is detected
    // on the angle itself.
    if (!mode.is_fixed_point() && phi.phi() >= kHalfPi) {
        throw SingularityError("forward value diverges at phi = pi/2 in explicit mode");
    }
    return 2.0 * std::sin(phi.phi()) * mode.log_term(std::cos(phi.phi()));
}

double eval_reverse(const Angle& phi, const LogMode& mode) {
    if (!mode.is_fixed_point() && phi.phi() <= 0.0) {
        throw SingularityError("reverse value diverges at phi = 0 in explicit mode");
    }
    return 2.0 * mode.log_term(std::sin(phi.phi())) * std::cos(phi.phi());
}

std::vector<SolutionPoint> sweep(int n, const LogMode& mode) {
    if (n < 2) {
        throw PreconditionError("sweep requires n >= 2");
    }
    const double step = kHalfPi / n;
    std::vector<SolutionPoint> points;
    points.reserve(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) {
        double phi = i * step;
        if (!mode.is_fixed_point()) {
            // Both endpoints hit a log(0) in one of the two values; pull
            // them half a step inward.
            if (i == 0) {
                phi = step / 2.0;
            } else if (i == n) {
                phi = kHalfPi - step / 2.0;
            }
        }
        const Angle angle(phi);
        points.push_back(SolutionPoint{phi, eval_forward(angle, mode),
                                       eval_reverse(angle, mode)});
    }
    return points;
}

Angle mirror_angle(const Angle& phi) {
    // pi/2 = kHalfPi + kHalfPiLow to double-double accuracy. The first
    // subtraction is exact for phi in [kHalfPi/2, kHalfPi] (Sterbenz) and
    // harmless elsewhere, so adding the low word recovers the real
    // complement to within one ulp of the small result.
    constexpr double kHalfPiLow = 6.123233995736766e-17;
    double psi = (kHalfPi - phi.phi()) + kHalfPiLow;
    if (psi > kHalfPi) {
        psi = kHalfPi;
    } else if (psi < 0.0) {
        psi = 0.0;
    }
    return Angle(psi);
}

Angle inner_solution() {
    double lo = 0.0;
    double hi = kHalfPi;
    // sin - cos is -1 at 0 and +1 at pi/2; bisect to well below the
    // 1e-10 placement tolerance.
    while (hi - lo > 1e-13) {
        const double mid = 0.5 * (lo + hi);
        if (std::sin(mid) - std::cos(mid) < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return Angle(0.5 * (lo + hi));
}

ChainTrace chain_eval_forward(double p_b, const LogMode& mode) {
    if (!(p_b > 0.0) || !(p_b < 1.0)) {
        throw DomainError("chain_eval_forward requires P(B) in (0,1)");
    }
    const double p = p_b;
    const double p_a = 1.0 - p;      // complement substitution
    const double p_b_given_a = p;    // prior-equals-posterior substitution
    const double phi = std::asin(p);

    ChainTrace trace;
    auto& s = trace.stage_values;
    s[0] = (p_a / p) * mode.log_term(p_b_given_a / 1.0);
    s[1] = ((1.0 - p) / p) * mode.log_term(p_b_given_a);
    s[2] = (1.0 - p) * mode.log_term(p * p);
    s[3] = p * mode.log_term(1.0 - p * p);
    s[4] = 2.0 * p * mode.log_term(std::sqrt(1.0 - p * p));
    s[5] = 2.0 * std::sin(phi) * mode.log_term(std::cos(phi));
    for (int i = 0; i < 5; ++i) {
        trace.stage_residuals[i] = s[i + 1] - s[i];
    }
    trace.assumption_residuals.complement_prior = std::abs(p_a - (1.0 - p));
    trace.assumption_residuals.prior_equals_posterior = std::abs(p_b_given_a - p);
    trace.assumption_residuals.golden_condition = std::abs((1.0 - p) - p * p);
    return trace;
}

ChainTrace chain_eval_reverse(double p_a_given_b, const LogMode& mode) {
    if (!(p_a_given_b > 0.0) || !(p_a_given_b < 1.0)) {
        throw DomainError("chain_eval_reverse requires P(A|B) in (0,1)");
    }
    const double q = p_a_given_b;
    const double p_b_given_a = 1.0 - q; // complement substitution
    const double p_a = q;               // prior-equals-posterior substitution
    const double phi = std::acos(q);

    ChainTrace trace;
    auto& s = trace.stage_values;
    s[0] = mode.log_term(p_a / 1.0) * (p_b_given_a / q);
    s[1] = mode.log_term(p_a) * ((1.0 - q) / q);
    s[2] = mode.log_term(q * q) * (1.0 - q);
    s[3] = mode.log_term(1.0 - q * q) * q;
    s[4] = 2.0 * mode.log_term(std::sqrt(1.0 - q * q)) * q;
    s[5] = 2.0 * mode.log_term(std::sin(phi)) * std::cos(phi);
    for (int i = 0; i < 5; ++i) {
        trace.stage_residuals[i] = s[i + 1] - s[i];
    }
    trace.assumption_residuals.complement_prior = std::abs(p_b_given_a - (1.0 - q));
    trace.assumption_residuals.prior_equals_posterior = std::abs(p_a - q);
    trace.assumption_residuals.golden_condition = std::abs((1.0 - q) - q * q);
    return trace;
}

std::string sweep_csv(const std::vector<SolutionPoint>& points) {
    std::string out = "phi,forward,reverse\n";
    for (const auto& point : points) {
        append_6sig(out, point.phi);
        out.push_back(',');
        append_6sig(out, point.forward_value);
        out.push_back(',');
        append_6sig(out, point.reverse_value);
        out.push_back('\n');
    }
    return out;
}

} // namespace bdd::sol
