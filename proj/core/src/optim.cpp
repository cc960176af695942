#include "evtta/optim.hpp"

#include <cmath>

#include "evtta/errors.hpp"

namespace evtta {

AdamState AdamState::init(const std::vector<ParamRef>& subset, double lr) {
    if (lr <= 0.0) throw ValidationError("adam learning rate must be positive");
    AdamState state;
    state.lr = lr;
    state.names.reserve(subset.size());
    state.m.reserve(subset.size());
    state.v.reserve(subset.size());
    for (const ParamRef& p : subset) {
        state.names.push_back(p.name);
        state.m.push_back(Tensor::zeros(p.value->shape));
        state.v.push_back(Tensor::zeros(p.value->shape));
    }
    return state;
}

void adam_step(const std::vector<ParamRef>& subset, AdamState& state) {
    if (subset.size() != state.names.size())
        throw ValidationError("adam state covers " + std::to_string(state.names.size()) +
                              " parameters, step got " + std::to_string(subset.size()));
    for (std::size_t i = 0; i < subset.size(); ++i) {
        if (subset[i].name != state.names[i])
            throw ValidationError("adam state mismatch at '" + subset[i].name + "', expected '" +
                                  state.names[i] + "'");
        if (!subset[i].value->same_shape(state.m[i]))
            throw ValidationError("adam moment shape mismatch for '" + subset[i].name + "'");
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < subset.size(); ++i) {
        Tensor& value = *subset[i].value;
        const Tensor& grad = *subset[i].grad;
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        for (std::size_t j = 0; j < value.data.size(); ++j) {
            const double g = grad.data[j];
            m.data[j] = state.beta1 * m.data[j] + (1.0 - state.beta1) * g;
            v.data[j] = state.beta2 * v.data[j] + (1.0 - state.beta2) * g * g;
            const double mhat = m.data[j] / bc1;
            const double vhat = v.data[j] / bc2;
            value.data[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

} // namespace evtta
