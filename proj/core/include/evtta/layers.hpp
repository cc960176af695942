#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "evtta/tensor.hpp"

namespace evtta {

class Rng;

/// Named view of one trainable parameter; is_bn tags the batch-norm affine
/// pair that test-time adaptation is allowed to touch.
struct ParamRef {
    std::string name;
    Tensor* value = nullptr;
    Tensor* grad = nullptr;
    bool is_bn = false;
};

/// Non-trainable state saved with checkpoints (batch-norm running stats).
struct BufferRef {
    std::string name;
    Tensor* value = nullptr;
};

/// One pipeline stage. forward caches whatever backward needs; backward
/// accumulates into parameter grads and returns the input gradient.
class Layer {
public:
    virtual ~Layer() = default;
    virtual std::string kind() const = 0;
    virtual Tensor forward(const Tensor& x, bool train) = 0;
    virtual Tensor backward(const Tensor& dy) = 0;
    virtual std::vector<ParamRef> params() { return {}; }
    virtual std::vector<BufferRef> buffers() { return {}; }
    /// Structural attributes for the checkpoint manifest (no tensor data).
    virtual std::string spec_json() const = 0;
};

std::unique_ptr<Layer> make_conv2d(int in_ch, int out_ch, int kernel, int pad, Rng& rng);
std::unique_ptr<Layer> make_batchnorm(int channels, double eps = 1e-5, double momentum = 0.1);
std::unique_ptr<Layer> make_relu();
std::unique_ptr<Layer> make_maxpool2();
std::unique_ptr<Layer> make_global_avg_pool();
std::unique_ptr<Layer> make_dense(int in, int out, Rng& rng);
std::unique_ptr<Layer> make_softmax_head();
std::unique_ptr<Layer> make_gaussian_head();

/// Rebuilds a layer from its manifest entry (weights filled in separately).
std::unique_ptr<Layer> layer_from_spec(const std::string& spec_json);

} // namespace evtta
