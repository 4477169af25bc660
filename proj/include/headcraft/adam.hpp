// adam.hpp — Adam optimizer state and update rule (bias-corrected form).
#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace headcraft {

struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    std::size_t step = 0;
    std::vector<double> m;  // first moment
    std::vector<double> v;  // second moment

    explicit AdamState(std::size_t n = 0, double lr = 1e-3)
        : learning_rate(lr), m(n, 0.0), v(n, 0.0) {}
};

// One Adam step: params -= lr * m_hat / (sqrt(v_hat) + eps).
inline void adam_step(AdamState& state, std::vector<double>& params,
                      const std::vector<double>& grads) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::runtime_error("adam_step: shape mismatch");
    state.step += 1;
    const double b1 = state.beta1, b2 = state.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        double g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        double m_hat = state.m[i] / c1;
        double v_hat = state.v[i] / c2;
        params[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

}  // namespace headcraft
