#pragma once

#include "bdd/errors.hpp"

namespace bdd::bayes {

/// A probability restricted to the open interval (0, 1). Boundary values
/// are rejected at construction so every downstream ratio and logarithm
/// is finite.
class Probability {
public:
    explicit Probability(double value);

    double value() const noexcept { return value_; }

private:
    double value_;
};

/// The four probabilities of Bayes' theorem under the complement
/// constraints P(A) = 1 - P(B) and P(B|A) = 1 - P(A|B). Only the two
/// free parameters (P(B), P(A|B)) are stored; the complements are
/// derived, so the constraints hold structurally.
class BayesState {
public:
    BayesState(Probability p_b, Probability p_a_given_b) noexcept
        : p_b_(p_b), p_a_given_b_(p_a_given_b) {}

    double p_a() const noexcept { return 1.0 - p_b_.value(); }
    double p_b() const noexcept { return p_b_.value(); }
    double p_a_given_b() const noexcept { return p_a_given_b_.value(); }
    double p_b_given_a() const noexcept { return 1.0 - p_a_given_b_.value(); }

private:
    Probability p_b_;
    Probability p_a_given_b_;
};

enum class Orientation { forward, reverse };

/// One round of the sender/receiver image exchange. Images are bits:
/// 0 = original coloring, 1 = inverted.
struct DualExchangeTrace {
    int sender_image = 0;
    int receiver_expected = 0;
    bool feedback_sent = false;
    int final_sender_image = 0;
    int final_receiver_image = 0;
    int rounds_used = 0;
};

/// Builds a state from the two free parameters. Throws DomainError when
/// either input lies outside (0, 1).
BayesState make_state(double p_b, double p_a_given_b);

/// P(A|B)/P(B|A) - P(A)/P(B). Zero iff the ratio form of Bayes' theorem
/// holds, which under the complement constraints means P(A|B) = P(A).
double outer_residual(const BayesState& s);

/// (P(A)/P(B)) * (P(B|A)/P(A|B)). Equals 1 exactly when the outer
/// equation holds.
double product_identity(const BayesState& s);

/// Residual of the entangled (inner) equation. forward evaluates
/// P(A)/P(B) - P(B|A)/P(A|B); reverse evaluates the reciprocal form
/// P(B)/P(A) - P(A|B)/P(B|A). Zero iff P(A|B) = P(B).
double inner_residual(const BayesState& s, Orientation orientation);

/// |p - (1-p)/p|: distance from the condition the inner equation imposes
/// on a single probability. Zero exactly at the positive golden root.
/// Throws DomainError outside (0, 1).
double multiplicand_gap(double p);

/// Simulates the single-feedback exchange: if the receiver's expected
/// image differs from the sender's, the receiver requests one inversion.
/// Final images agree in all cases.
DualExchangeTrace simulate_dual_exchange(int sender_image, int receiver_expected);

} // namespace bdd::bayes
