#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evtta/layers.hpp"

namespace evtta {

/// Adam with bias correction. Moment buffers are keyed to the exact parameter
/// subset the state was initialized with; stepping a different subset is an
/// error.
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t t = 0;
    std::vector<std::string> names;
    std::vector<Tensor> m;
    std::vector<Tensor> v;

    static AdamState init(const std::vector<ParamRef>& subset, double lr);
};

/// One Adam update over the subset, reading each parameter's accumulated
/// gradient. Parameters outside the subset are untouched by construction.
void adam_step(const std::vector<ParamRef>& subset, AdamState& state);

} // namespace evtta
