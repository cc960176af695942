#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "evtta/layers.hpp"
#include "evtta/tensor.hpp"

namespace evtta {

enum class HeadKind { softmax, gaussian };

/// Ordered layer pipeline. forward must precede backward; grads accumulate
/// until zero_grad.
class Model {
public:
    Model() = default;
    Model(Model&&) = default;
    Model& operator=(Model&&) = default;

    void append(std::unique_ptr<Layer> layer);

    Tensor forward(const Tensor& batch, bool train);
    /// Propagates d(loss)/d(output); accumulates parameter grads, returns
    /// d(loss)/d(input).
    Tensor backward(const Tensor& dout);
    void zero_grad();

    std::vector<ParamRef> params();
    std::vector<ParamRef> bn_params();
    std::vector<BufferRef> buffers();

    HeadKind head() const;
    std::size_t layer_count() const { return layers_.size(); }

    /// Checkpoint: JSON manifest of layer specs + packed little-endian f64
    /// blob of parameters and buffers. Round-trips bit-exactly.
    std::string save() const;
    static Model load(const std::string& bytes);
    Model clone() const;

private:
    std::vector<std::unique_ptr<Layer>> layers_;
    bool forwarded_ = false;
};

/// Conv(3x3,16)-BN-ReLU-Pool-Conv(3x3,32)-BN-ReLU-Pool-GAP-Dense(classes)
/// with a softmax head.
Model make_classifier(int classes, std::uint64_t seed);

/// Same trunk with a two-output dense layer and a (mu, sigma) head.
Model make_regressor(std::uint64_t seed);

} // namespace evtta
