#include "bdd/bayes.hpp"

#include <cmath>
#include <string>

namespace bdd::bayes {

Probability::Probability(double value) : value_(value) {
    if (!(value > 0.0) || !(value < 1.0)) {
        throw DomainError("probability must lie in the open interval (0,1), got " +
                          std::to_string(value));
    }
}

BayesState make_state(double p_b, double p_a_given_b) {
    return BayesState(Probability(p_b), Probability(p_a_given_b));
}

double outer_residual(const BayesState& s) {
    return s.p_a_given_b() / s.p_b_given_a() - s.p_a() / s.p_b();
}

double product_identity(const BayesState& s) {
    return (s.p_a() / s.p_b()) * (s.p_b_given_a() / s.p_a_given_b());
}

double inner_residual(const BayesState& s, Orientation orientation) {
    if (orientation == Orientation::forward) {
        return s.p_a() / s.p_b() - s.p_b_given_a() / s.p_a_given_b();
    }
    return s.p_b() / s.p_a() - s.p_a_given_b() / s.p_b_given_a();
}

double multiplicand_gap(double p) {
    if (!(p > 0.0) || !(p < 1.0)) {
        throw DomainError("multiplicand_gap requires p in (0,1), got " +
                          std::to_string(p));
    }
    return std::abs(p - (1.0 - p) / p);
}

DualExchangeTrace simulate_dual_exchange(int sender_image, int receiver_expected) {
    DualExchangeTrace trace;
    trace.sender_image = sender_image;
    trace.receiver_expected = receiver_expected;
    if (sender_image == receiver_expected) {
        trace.feedback_sent = false;
        trace.rounds_used = 0;
        trace.final_sender_image = sender_image;
        trace.final_receiver_image = sender_image;
    } else {
        // Receiver tells the sender to invert; both ends then hold the
        // receiver's expected image.
        trace.feedback_sent = true;
        trace.rounds_used = 1;
        trace.final_sender_image = receiver_expected;
        trace.final_receiver_image = receiver_expected;
    }
    return trace;
}

} // namespace bdd::bayes
