#include "evtta/layers.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "evtta/errors.hpp"
#include "evtta/rng.hpp"

namespace evtta {

namespace {

using nlohmann::json;

void require_rank4(const Tensor& x, const char* who) {
    if (x.shape.size() != 4)
        throw ValidationError(std::string(who) + " expects a [N,C,H,W] input, got shape " +
                              x.shape_str());
}

void require_channels(const Tensor& x, std::size_t ch, const char* who) {
    if (x.shape[1] != ch)
        throw ValidationError(std::string(who) + " expects " + std::to_string(ch) +
                              " channels, got shape " + x.shape_str());
}

class Conv2d final : public Layer {
public:
    Conv2d(int in_ch, int out_ch, int kernel, int pad)
        : in_ch_(in_ch), out_ch_(out_ch), k_(kernel), pad_(pad) {
        if (in_ch < 1 || out_ch < 1 || kernel < 1 || pad < 0)
            throw ValidationError("conv2d needs positive channel/kernel sizes");
        weight_ = Tensor::zeros({static_cast<std::size_t>(out_ch), static_cast<std::size_t>(in_ch),
                                 static_cast<std::size_t>(kernel), static_cast<std::size_t>(kernel)});
        bias_ = Tensor::zeros({static_cast<std::size_t>(out_ch)});
        dweight_ = Tensor::zeros(weight_.shape);
        dbias_ = Tensor::zeros(bias_.shape);
    }

    void init(Rng& rng) {
        const double scale = std::sqrt(2.0 / (in_ch_ * k_ * k_));
        for (double& w : weight_.data) w = rng.normal(0.0, scale);
    }

    std::string kind() const override { return "conv2d"; }

    Tensor forward(const Tensor& x, bool) override {
        require_rank4(x, "conv2d");
        require_channels(x, static_cast<std::size_t>(in_ch_), "conv2d");
        input_ = x;
        const std::size_t n = x.shape[0], h = x.shape[2], w = x.shape[3];
        const std::size_t oh = h + 2 * pad_ - k_ + 1, ow = w + 2 * pad_ - k_ + 1;
        Tensor y = Tensor::zeros({n, static_cast<std::size_t>(out_ch_), oh, ow});
        for (std::size_t ni = 0; ni < n; ++ni) {
            for (int oc = 0; oc < out_ch_; ++oc) {
                double* yp = &y.data[((ni * out_ch_ + oc) * oh) * ow];
                const double b = bias_.data[oc];
                for (std::size_t i = 0; i < oh * ow; ++i) yp[i] = b;
                for (int ic = 0; ic < in_ch_; ++ic) {
                    const double* xp = &x.data[((ni * in_ch_ + ic) * h) * w];
                    for (int ky = 0; ky < k_; ++ky) {
                        for (int kx = 0; kx < k_; ++kx) {
                            const double wv =
                                weight_.data[(((oc * in_ch_ + ic) * k_) + ky) * k_ + kx];
                            for (std::size_t oy = 0; oy < oh; ++oy) {
                                const long iy = static_cast<long>(oy) + ky - pad_;
                                if (iy < 0 || iy >= static_cast<long>(h)) continue;
                                const long x0 = std::max(0L, static_cast<long>(pad_) - kx);
                                const long x1 = std::min(static_cast<long>(ow),
                                                         static_cast<long>(w) + pad_ - kx);
                                double* yrow = yp + oy * ow;
                                const double* xrow = xp + iy * w + (x0 + kx - pad_);
                                for (long ox = x0; ox < x1; ++ox)
                                    yrow[ox] += wv * xrow[ox - x0];
                            }
                        }
                    }
                }
            }
        }
        has_input_ = true;
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        if (!has_input_) throw ValidationError("conv2d backward called before forward");
        const std::size_t n = input_.shape[0], h = input_.shape[2], w = input_.shape[3];
        const std::size_t oh = dy.shape[2], ow = dy.shape[3];
        Tensor dx = Tensor::zeros(input_.shape);
        for (std::size_t ni = 0; ni < n; ++ni) {
            for (int oc = 0; oc < out_ch_; ++oc) {
                const double* dyp = &dy.data[((ni * out_ch_ + oc) * oh) * ow];
                double db = 0.0;
                for (std::size_t i = 0; i < oh * ow; ++i) db += dyp[i];
                dbias_.data[oc] += db;
                for (int ic = 0; ic < in_ch_; ++ic) {
                    const double* xp = &input_.data[((ni * in_ch_ + ic) * h) * w];
                    double* dxp = &dx.data[((ni * in_ch_ + ic) * h) * w];
                    for (int ky = 0; ky < k_; ++ky) {
                        for (int kx = 0; kx < k_; ++kx) {
                            const std::size_t widx = (((oc * in_ch_ + ic) * k_) + ky) * k_ + kx;
                            const double wv = weight_.data[widx];
                            double dw = 0.0;
                            for (std::size_t oy = 0; oy < oh; ++oy) {
                                const long iy = static_cast<long>(oy) + ky - pad_;
                                if (iy < 0 || iy >= static_cast<long>(h)) continue;
                                const long x0 = std::max(0L, static_cast<long>(pad_) - kx);
                                const long x1 = std::min(static_cast<long>(ow),
                                                         static_cast<long>(w) + pad_ - kx);
                                const double* dyrow = dyp + oy * ow;
                                const double* xrow = xp + iy * w + (x0 + kx - pad_);
                                double* dxrow = dxp + iy * w + (x0 + kx - pad_);
                                for (long ox = x0; ox < x1; ++ox) {
                                    dw += dyrow[ox] * xrow[ox - x0];
                                    dxrow[ox - x0] += dyrow[ox] * wv;
                                }
                            }
                            dweight_.data[widx] += dw;
                        }
                    }
                }
            }
        }
        return dx;
    }

    std::vector<ParamRef> params() override {
        return {{"weight", &weight_, &dweight_, false}, {"bias", &bias_, &dbias_, false}};
    }

    std::string spec_json() const override {
        return json{{"kind", "conv2d"}, {"in", in_ch_}, {"out", out_ch_}, {"kernel", k_},
                    {"pad", pad_}}
            .dump();
    }

private:
    int in_ch_, out_ch_, k_, pad_;
    Tensor weight_, bias_, dweight_, dbias_;
    Tensor input_;
    bool has_input_ = false;
};

class BatchNorm final : public Layer {
public:
    BatchNorm(int channels, double eps, double momentum)
        : ch_(channels), eps_(eps), momentum_(momentum) {
        if (channels < 1) throw ValidationError("batchnorm needs >= 1 channel");
        gamma_ = Tensor::zeros({static_cast<std::size_t>(channels)});
        beta_ = Tensor::zeros({static_cast<std::size_t>(channels)});
        std::fill(gamma_.data.begin(), gamma_.data.end(), 1.0);
        dgamma_ = Tensor::zeros(gamma_.shape);
        dbeta_ = Tensor::zeros(beta_.shape);
        running_mean_ = Tensor::zeros(gamma_.shape);
        running_var_ = Tensor::zeros(gamma_.shape);
        std::fill(running_var_.data.begin(), running_var_.data.end(), 1.0);
    }

    std::string kind() const override { return "batchnorm"; }

    Tensor forward(const Tensor& x, bool train) override {
        require_rank4(x, "batchnorm");
        require_channels(x, static_cast<std::size_t>(ch_), "batchnorm");
        const std::size_t n = x.shape[0], h = x.shape[2], w = x.shape[3];
        const std::size_t m = n * h * w; // elements per channel
        xhat_ = Tensor::zeros(x.shape);
        inv_std_.assign(ch_, 0.0);
        Tensor y = Tensor::zeros(x.shape);
        for (int c = 0; c < ch_; ++c) {
            double mean, var;
            if (train) {
                double s = 0.0;
                for (std::size_t ni = 0; ni < n; ++ni) {
                    const double* xp = &x.data[((ni * ch_ + c) * h) * w];
                    for (std::size_t i = 0; i < h * w; ++i) s += xp[i];
                }
                mean = s / static_cast<double>(m);
                double sq = 0.0;
                for (std::size_t ni = 0; ni < n; ++ni) {
                    const double* xp = &x.data[((ni * ch_ + c) * h) * w];
                    for (std::size_t i = 0; i < h * w; ++i) {
                        const double d = xp[i] - mean;
                        sq += d * d;
                    }
                }
                var = sq / static_cast<double>(m); // population variance normalizes
                const double unbiased =
                    m > 1 ? sq / static_cast<double>(m - 1) : var;
                running_mean_.data[c] = (1.0 - momentum_) * running_mean_.data[c] + momentum_ * mean;
                running_var_.data[c] =
                    (1.0 - momentum_) * running_var_.data[c] + momentum_ * unbiased;
            } else {
                mean = running_mean_.data[c];
                var = running_var_.data[c];
            }
            const double inv = 1.0 / std::sqrt(var + eps_);
            inv_std_[c] = inv;
            const double g = gamma_.data[c], b = beta_.data[c];
            for (std::size_t ni = 0; ni < n; ++ni) {
                const double* xp = &x.data[((ni * ch_ + c) * h) * w];
                double* hp = &xhat_.data[((ni * ch_ + c) * h) * w];
                double* yp = &y.data[((ni * ch_ + c) * h) * w];
                for (std::size_t i = 0; i < h * w; ++i) {
                    hp[i] = (xp[i] - mean) * inv;
                    yp[i] = g * hp[i] + b;
                }
            }
        }
        train_mode_ = train;
        has_input_ = true;
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        if (!has_input_) throw ValidationError("batchnorm backward called before forward");
        const std::size_t n = dy.shape[0], h = dy.shape[2], w = dy.shape[3];
        const double m = static_cast<double>(n * h * w);
        Tensor dx = Tensor::zeros(dy.shape);
        for (int c = 0; c < ch_; ++c) {
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (std::size_t ni = 0; ni < n; ++ni) {
                const double* dp = &dy.data[((ni * ch_ + c) * h) * w];
                const double* hp = &xhat_.data[((ni * ch_ + c) * h) * w];
                for (std::size_t i = 0; i < h * w; ++i) {
                    sum_dy += dp[i];
                    sum_dy_xhat += dp[i] * hp[i];
                }
            }
            dgamma_.data[c] += sum_dy_xhat;
            dbeta_.data[c] += sum_dy;
            const double g = gamma_.data[c], inv = inv_std_[c];
            if (train_mode_) {
                const double k = g * inv / m;
                for (std::size_t ni = 0; ni < n; ++ni) {
                    const double* dp = &dy.data[((ni * ch_ + c) * h) * w];
                    const double* hp = &xhat_.data[((ni * ch_ + c) * h) * w];
                    double* xp = &dx.data[((ni * ch_ + c) * h) * w];
                    for (std::size_t i = 0; i < h * w; ++i)
                        xp[i] = k * (m * dp[i] - sum_dy - hp[i] * sum_dy_xhat);
                }
            } else {
                const double k = g * inv; // stats are constants in eval mode
                for (std::size_t ni = 0; ni < n; ++ni) {
                    const double* dp = &dy.data[((ni * ch_ + c) * h) * w];
                    double* xp = &dx.data[((ni * ch_ + c) * h) * w];
                    for (std::size_t i = 0; i < h * w; ++i) xp[i] = k * dp[i];
                }
            }
        }
        return dx;
    }

    std::vector<ParamRef> params() override {
        return {{"gamma", &gamma_, &dgamma_, true}, {"beta", &beta_, &dbeta_, true}};
    }

    std::vector<BufferRef> buffers() override {
        return {{"running_mean", &running_mean_}, {"running_var", &running_var_}};
    }

    std::string spec_json() const override {
        return json{{"kind", "batchnorm"}, {"channels", ch_}, {"eps", eps_},
                    {"momentum", momentum_}}
            .dump();
    }

private:
    int ch_;
    double eps_, momentum_;
    Tensor gamma_, beta_, dgamma_, dbeta_, running_mean_, running_var_;
    Tensor xhat_;
    std::vector<double> inv_std_;
    bool train_mode_ = true;
    bool has_input_ = false;
};

class ReLU final : public Layer {
public:
    std::string kind() const override { return "relu"; }

    Tensor forward(const Tensor& x, bool) override {
        input_ = x;
        Tensor y = x;
        for (double& v : y.data) v = std::max(0.0, v);
        has_input_ = true;
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        if (!has_input_) throw ValidationError("relu backward called before forward");
        Tensor dx = dy;
        for (std::size_t i = 0; i < dx.data.size(); ++i)
            if (input_.data[i] <= 0.0) dx.data[i] = 0.0;
        return dx;
    }

    std::string spec_json() const override { return json{{"kind", "relu"}}.dump(); }

private:
    Tensor input_;
    bool has_input_ = false;
};

class MaxPool2 final : public Layer {
public:
    std::string kind() const override { return "maxpool2"; }

    Tensor forward(const Tensor& x, bool) override {
        require_rank4(x, "maxpool2");
        const std::size_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
        if (h % 2 != 0 || w % 2 != 0)
            throw ValidationError("maxpool2 needs even spatial dims, got " + x.shape_str());
        in_shape_ = x.shape;
        const std::size_t oh = h / 2, ow = w / 2;
        Tensor y = Tensor::zeros({n, c, oh, ow});
        argmax_.assign(y.numel(), 0);
        for (std::size_t nc = 0; nc < n * c; ++nc) {
            const double* xp = &x.data[nc * h * w];
            double* yp = &y.data[nc * oh * ow];
            std::size_t* ap = &argmax_[nc * oh * ow];
            for (std::size_t oy = 0; oy < oh; ++oy) {
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    const std::size_t base = (2 * oy) * w + 2 * ox;
                    std::size_t best = base;
                    for (const std::size_t cand : {base + 1, base + w, base + w + 1})
                        if (xp[cand] > xp[best]) best = cand;
                    yp[oy * ow + ox] = xp[best];
                    ap[oy * ow + ox] = nc * h * w + best;
                }
            }
        }
        has_input_ = true;
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        if (!has_input_) throw ValidationError("maxpool2 backward called before forward");
        Tensor dx = Tensor::zeros(in_shape_);
        for (std::size_t i = 0; i < dy.data.size(); ++i) dx.data[argmax_[i]] += dy.data[i];
        return dx;
    }

    std::string spec_json() const override { return json{{"kind", "maxpool2"}}.dump(); }

private:
    std::vector<std::size_t> in_shape_;
    std::vector<std::size_t> argmax_;
    bool has_input_ = false;
};

class GlobalAvgPool final : public Layer {
public:
    std::string kind() const override { return "gap"; }

    Tensor forward(const Tensor& x, bool) override {
        require_rank4(x, "global_avg_pool");
        in_shape_ = x.shape;
        const std::size_t n = x.shape[0], c = x.shape[1], hw = x.shape[2] * x.shape[3];
        Tensor y = Tensor::zeros({n, c});
        for (std::size_t nc = 0; nc < n * c; ++nc) {
            const double* xp = &x.data[nc * hw];
            double s = 0.0;
            for (std::size_t i = 0; i < hw; ++i) s += xp[i];
            y.data[nc] = s / static_cast<double>(hw);
        }
        has_input_ = true;
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        if (!has_input_) throw ValidationError("global_avg_pool backward called before forward");
        const std::size_t hw = in_shape_[2] * in_shape_[3];
        Tensor dx = Tensor::zeros(in_shape_);
        for (std::size_t nc = 0; nc < dy.data.size(); ++nc) {
            const double g = dy.data[nc] / static_cast<double>(hw);
            double* xp = &dx.data[nc * hw];
            for (std::size_t i = 0; i < hw; ++i) xp[i] = g;
        }
        return dx;
    }

    std::string spec_json() const override { return json{{"kind", "gap"}}.dump(); }

private:
    std::vector<std::size_t> in_shape_;
    bool has_input_ = false;
};

class Dense final : public Layer {
public:
    Dense(int in, int out) : in_(in), out_(out) {
        if (in < 1 || out < 1) throw ValidationError("dense needs positive dims");
        weight_ = Tensor::zeros({static_cast<std::size_t>(out), static_cast<std::size_t>(in)});
        bias_ = Tensor::zeros({static_cast<std::size_t>(out)});
        dweight_ = Tensor::zeros(weight_.shape);
        dbias_ = Tensor::zeros(bias_.shape);
    }

    void init(Rng& rng) {
        const double scale = std::sqrt(2.0 / in_);
        for (double& w : weight_.data) w = rng.normal(0.0, scale);
    }

    std::string kind() const override { return "dense"; }

    Tensor forward(const Tensor& x, bool) override {
        if (x.shape.size() != 2 || x.shape[1] != static_cast<std::size_t>(in_))
            throw ValidationError("dense expects [N, " + std::to_string(in_) + "], got " +
                                  x.shape_str());
        input_ = x;
        const std::size_t n = x.shape[0];
        Tensor y = Tensor::zeros({n, static_cast<std::size_t>(out_)});
        for (std::size_t ni = 0; ni < n; ++ni) {
            const double* xp = &x.data[ni * in_];
            double* yp = &y.data[ni * out_];
            for (int o = 0; o < out_; ++o) {
                const double* wp = &weight_.data[static_cast<std::size_t>(o) * in_];
                double s = bias_.data[o];
                for (int i = 0; i < in_; ++i) s += wp[i] * xp[i];
                yp[o] = s;
            }
        }
        has_input_ = true;
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        if (!has_input_) throw ValidationError("dense backward called before forward");
        const std::size_t n = input_.shape[0];
        Tensor dx = Tensor::zeros(input_.shape);
        for (std::size_t ni = 0; ni < n; ++ni) {
            const double* xp = &input_.data[ni * in_];
            const double* dp = &dy.data[ni * out_];
            double* dxp = &dx.data[ni * in_];
            for (int o = 0; o < out_; ++o) {
                const double g = dp[o];
                dbias_.data[o] += g;
                double* dwp = &dweight_.data[static_cast<std::size_t>(o) * in_];
                const double* wp = &weight_.data[static_cast<std::size_t>(o) * in_];
                for (int i = 0; i < in_; ++i) {
                    dwp[i] += g * xp[i];
                    dxp[i] += g * wp[i];
                }
            }
        }
        return dx;
    }

    std::vector<ParamRef> params() override {
        return {{"weight", &weight_, &dweight_, false}, {"bias", &bias_, &dbias_, false}};
    }

    std::string spec_json() const override {
        return json{{"kind", "dense"}, {"in", in_}, {"out", out_}}.dump();
    }

private:
    int in_, out_;
    Tensor weight_, bias_, dweight_, dbias_;
    Tensor input_;
    bool has_input_ = false;
};

class SoftmaxHead final : public Layer {
public:
    std::string kind() const override { return "softmax"; }

    Tensor forward(const Tensor& x, bool) override {
        if (x.shape.size() != 2) throw ValidationError("softmax expects [N, C], got " + x.shape_str());
        const std::size_t n = x.shape[0], c = x.shape[1];
        Tensor y = Tensor::zeros(x.shape);
        for (std::size_t ni = 0; ni < n; ++ni) {
            const double* xp = &x.data[ni * c];
            double* yp = &y.data[ni * c];
            double mx = xp[0];
            for (std::size_t i = 1; i < c; ++i) mx = std::max(mx, xp[i]);
            double z = 0.0;
            for (std::size_t i = 0; i < c; ++i) {
                yp[i] = std::exp(xp[i] - mx);
                z += yp[i];
            }
            for (std::size_t i = 0; i < c; ++i) yp[i] /= z;
        }
        probs_ = y;
        has_input_ = true;
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        if (!has_input_) throw ValidationError("softmax backward called before forward");
        const std::size_t n = dy.shape[0], c = dy.shape[1];
        Tensor dx = Tensor::zeros(dy.shape);
        for (std::size_t ni = 0; ni < n; ++ni) {
            const double* pp = &probs_.data[ni * c];
            const double* dp = &dy.data[ni * c];
            double dot = 0.0;
            for (std::size_t i = 0; i < c; ++i) dot += pp[i] * dp[i];
            double* xp = &dx.data[ni * c];
            for (std::size_t i = 0; i < c; ++i) xp[i] = pp[i] * (dp[i] - dot);
        }
        return dx;
    }

    std::string spec_json() const override { return json{{"kind", "softmax"}}.dump(); }

private:
    Tensor probs_;
    bool has_input_ = false;
};

/// Maps raw head outputs (a, b) to (mu, sigma) with sigma = exp(b/2), i.e.
/// the second logit predicts log-variance and sigma stays positive.
class GaussianHead final : public Layer {
public:
    std::string kind() const override { return "gaussian"; }

    Tensor forward(const Tensor& x, bool) override {
        if (x.shape.size() != 2 || x.shape[1] != 2)
            throw ValidationError("gaussian head expects [N, 2], got " + x.shape_str());
        Tensor y = x;
        for (std::size_t ni = 0; ni < x.shape[0]; ++ni)
            y.data[ni * 2 + 1] = std::exp(x.data[ni * 2 + 1] / 2.0);
        out_ = y;
        has_input_ = true;
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        if (!has_input_) throw ValidationError("gaussian head backward called before forward");
        Tensor dx = dy;
        for (std::size_t ni = 0; ni < dy.shape[0]; ++ni)
            dx.data[ni * 2 + 1] = dy.data[ni * 2 + 1] * out_.data[ni * 2 + 1] * 0.5;
        return dx;
    }

    std::string spec_json() const override { return json{{"kind", "gaussian"}}.dump(); }

private:
    Tensor out_;
    bool has_input_ = false;
};

} // namespace

std::unique_ptr<Layer> make_conv2d(int in_ch, int out_ch, int kernel, int pad, Rng& rng) {
    auto layer = std::make_unique<Conv2d>(in_ch, out_ch, kernel, pad);
    layer->init(rng);
    return layer;
}

std::unique_ptr<Layer> make_batchnorm(int channels, double eps, double momentum) {
    return std::make_unique<BatchNorm>(channels, eps, momentum);
}

std::unique_ptr<Layer> make_relu() { return std::make_unique<ReLU>(); }

std::unique_ptr<Layer> make_maxpool2() { return std::make_unique<MaxPool2>(); }

std::unique_ptr<Layer> make_global_avg_pool() { return std::make_unique<GlobalAvgPool>(); }

std::unique_ptr<Layer> make_dense(int in, int out, Rng& rng) {
    auto layer = std::make_unique<Dense>(in, out);
    layer->init(rng);
    return layer;
}

std::unique_ptr<Layer> make_softmax_head() { return std::make_unique<SoftmaxHead>(); }

std::unique_ptr<Layer> make_gaussian_head() { return std::make_unique<GaussianHead>(); }

std::unique_ptr<Layer> layer_from_spec(const std::string& spec_json) {
    json spec;
    try {
        spec = json::parse(spec_json);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("bad layer spec: ") + e.what());
    }
    const std::string kind = spec.value("kind", "");
    if (kind == "conv2d")
        return std::make_unique<Conv2d>(spec.at("in").get<int>(), spec.at("out").get<int>(),
                                        spec.at("kernel").get<int>(), spec.at("pad").get<int>());
    if (kind == "batchnorm")
        return std::make_unique<BatchNorm>(spec.at("channels").get<int>(),
                                           spec.at("eps").get<double>(),
                                           spec.at("momentum").get<double>());
    if (kind == "relu") return make_relu();
    if (kind == "maxpool2") return make_maxpool2();
    if (kind == "gap") return make_global_avg_pool();
    if (kind == "dense") return std::make_unique<Dense>(spec.at("in").get<int>(), spec.at("out").get<int>());
    if (kind == "softmax") return make_softmax_head();
    if (kind == "gaussian") return make_gaussian_head();
    throw ParseError("unknown layer kind '" + kind + "' in checkpoint manifest");
}

} // namespace evtta
