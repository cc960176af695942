#include "evtta/model.hpp"

#include <nlohmann/json.hpp>

#include "evtta/binio.hpp"
#include "evtta/errors.hpp"
#include "evtta/rng.hpp"

namespace evtta {

namespace {
constexpr char kMagic[5] = "NNC0";
}

void Model::append(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

Tensor Model::forward(const Tensor& batch, bool train) {
    if (layers_.empty()) throw ValidationError("model has no layers");
    Tensor x = batch;
    for (auto& layer : layers_) x = layer->forward(x, train);
    forwarded_ = true;
    return x;
}

Tensor Model::backward(const Tensor& dout) {
    if (!forwarded_) throw ValidationError("model backward called before forward");
    Tensor g = dout;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
}

void Model::zero_grad() {
    for (auto& layer : layers_)
        for (const ParamRef& p : layer->params())
            std::fill(p.grad->data.begin(), p.grad->data.end(), 0.0);
}

std::vector<ParamRef> Model::params() {
    std::vector<ParamRef> out;
    for (std::size_t i = 0; i < layers_.size(); ++i)
        for (ParamRef p : layers_[i]->params()) {
            p.name = "L" + std::to_string(i) + "." + p.name;
            out.push_back(p);
        }
    return out;
}

std::vector<ParamRef> Model::bn_params() {
    std::vector<ParamRef> out;
    for (ParamRef p : params())
        if (p.is_bn) out.push_back(p);
    return out;
}

std::vector<BufferRef> Model::buffers() {
    std::vector<BufferRef> out;
    for (std::size_t i = 0; i < layers_.size(); ++i)
        for (BufferRef b : layers_[i]->buffers()) {
            b.name = "L" + std::to_string(i) + "." + b.name;
            out.push_back(b);
        }
    return out;
}

HeadKind Model::head() const {
    if (layers_.empty()) throw ValidationError("model has no layers");
    const std::string kind = layers_.back()->kind();
    if (kind == "softmax") return HeadKind::softmax;
    if (kind == "gaussian") return HeadKind::gaussian;
    throw ValidationError("model ends in '" + kind + "', expected a softmax or gaussian head");
}

std::string Model::save() const {
    nlohmann::ordered_json manifest;
    manifest["layers"] = nlohmann::ordered_json::array();
    for (const auto& layer : layers_)
        manifest["layers"].push_back(nlohmann::ordered_json::parse(layer->spec_json()));

    std::string blob;
    std::size_t count = 0;
    for (const auto& layer : layers_) {
        for (const ParamRef& p : layer->params()) count += p.value->numel();
        for (const BufferRef& b : layer->buffers()) count += b.value->numel();
    }
    const std::string text = manifest.dump();
    std::string out;
    out.reserve(16 + text.size() + 8 * count);
    out.append(kMagic, 4);
    put_u64(out, text.size());
    out.append(text);
    put_u64(out, count);
    for (const auto& layer : layers_) {
        for (const ParamRef& p : layer->params())
            for (double v : p.value->data) put_f64(out, v);
        for (const BufferRef& b : layer->buffers())
            for (double v : b.value->data) put_f64(out, v);
    }
    return out;
}

Model Model::load(const std::string& bytes) {
    ByteReader reader(byte_view(bytes));
    reader.expect_magic(kMagic);
    const std::uint64_t manifest_len = reader.get_u64();
    if (manifest_len > reader.remaining())
        throw ParseError("checkpoint manifest claims " + std::to_string(manifest_len) +
                         " bytes, only " + std::to_string(reader.remaining()) + " present");
    std::string text(manifest_len, '\0');
    for (char& c : text) c = static_cast<char>(reader.get_u8());
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("bad checkpoint manifest: ") + e.what());
    }
    Model model;
    for (const auto& spec : manifest.at("layers")) model.append(layer_from_spec(spec.dump()));

    const std::uint64_t count = reader.get_u64();
    std::size_t expect = 0;
    for (auto& layer : model.layers_) {
        for (const ParamRef& p : layer->params()) expect += p.value->numel();
        for (const BufferRef& b : layer->buffers()) expect += b.value->numel();
    }
    if (count != expect)
        throw ParseError("checkpoint blob holds " + std::to_string(count) +
                         " values, manifest needs " + std::to_string(expect));
    for (auto& layer : model.layers_) {
        for (const ParamRef& p : layer->params())
            for (double& v : p.value->data) v = reader.get_f64();
        for (const BufferRef& b : layer->buffers())
            for (double& v : b.value->data) v = reader.get_f64();
    }
    if (reader.remaining() != 0) throw ParseError("checkpoint has trailing bytes");
    return model;
}

Model Model::clone() const { return load(save()); }

Model make_classifier(int classes, std::uint64_t seed) {
    if (classes < 1) throw ValidationError("classifier needs >= 1 class");
    Rng rng(derive_seed(seed, {seed_tag::init}));
    Model m;
    m.append(make_conv2d(2, 16, 3, 1, rng));
    m.append(make_batchnorm(16));
    m.append(make_relu());
    m.append(make_maxpool2());
    m.append(make_conv2d(16, 32, 3, 1, rng));
    m.append(make_batchnorm(32));
    m.append(make_relu());
    m.append(make_maxpool2());
    m.append(make_global_avg_pool());
    m.append(make_dense(32, classes, rng));
    m.append(make_softmax_head());
    return m;
}

Model make_regressor(std::uint64_t seed) {
    Rng rng(derive_seed(seed, {seed_tag::init}));
    Model m;
    m.append(make_conv2d(2, 16, 3, 1, rng));
    m.append(make_batchnorm(16));
    m.append(make_relu());
    m.append(make_maxpool2());
    m.append(make_conv2d(16, 32, 3, 1, rng));
    m.append(make_batchnorm(32));
    m.append(make_relu());
    m.append(make_maxpool2());
    m.append(make_global_avg_pool());
    m.append(make_dense(32, 2, rng));
    m.append(make_gaussian_head());
    return m;
}

} // namespace evtta
