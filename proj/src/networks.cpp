#include "hdcg/networks.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "hdcg/errors.hpp"

namespace hdcg {

void GeneratorSpec::validate() const {
    if (base_channels < 1) throw ConfigError("generator base_channels must be >= 1");
    if (n_downsample < 0 || n_downsample > 8) throw ConfigError("generator n_downsample must lie in [0, 8]");
    if (n_resblocks < 0) throw ConfigError("generator n_resblocks must be >= 0");
    if (convs_per_resblock < 1) throw ConfigError("generator convs_per_resblock must be >= 1");
    if (initial_kernel < 1 || initial_kernel % 2 == 0) throw ConfigError("generator initial_kernel must be odd");
    if (kernel < 1 || kernel % 2 == 0) throw ConfigError("generator kernel must be odd");
    if (upsample_mode == UpsampleMode::FractionalStride && kernel < 2)
        throw ConfigError("fractional-strided up-sampling needs kernel >= 3");
}

void DiscriminatorSpec::validate() const {
    if (base_channels < 1) throw ConfigError("discriminator base_channels must be >= 1");
    if (n_downsample < 1 || n_downsample > 12) throw ConfigError("discriminator n_downsample must lie in [1, 12]");
    if (convs_per_resblock < 1) throw ConfigError("discriminator convs_per_resblock must be >= 1");
    if (n_classes < 2) throw ConfigError("discriminator needs at least 2 classes");
    if (kernel < 1 || kernel % 2 == 0) throw ConfigError("discriminator kernel must be odd");
}

void to_json(nlohmann::json& j, const GeneratorSpec& s) {
    j = nlohmann::json{{"base_channels", s.base_channels},
                       {"n_downsample", s.n_downsample},
                       {"n_resblocks", s.n_resblocks},
                       {"convs_per_resblock", s.convs_per_resblock},
                       {"initial_kernel", s.initial_kernel},
                       {"kernel", s.kernel},
                       {"norm", "instance"},
                       {"activation", "relu"},
                       {"skip_connections", s.skip_connections},
                       {"upsample_mode",
                        s.upsample_mode == UpsampleMode::ResizeConv ? "resize_conv" : "fractional_stride"}};
}

void from_json(const nlohmann::json& j, GeneratorSpec& s) {
    const GeneratorSpec d;
    s.base_channels = j.value("base_channels", d.base_channels);
    s.n_downsample = j.value("n_downsample", d.n_downsample);
    s.n_resblocks = j.value("n_resblocks", d.n_resblocks);
    s.convs_per_resblock = j.value("convs_per_resblock", d.convs_per_resblock);
    s.initial_kernel = j.value("initial_kernel", d.initial_kernel);
    s.kernel = j.value("kernel", d.kernel);
    s.skip_connections = j.value("skip_connections", d.skip_connections);
    if (j.value("norm", std::string("instance")) != "instance") throw ConfigError("only instance norm is supported");
    if (j.value("activation", std::string("relu")) != "relu") throw ConfigError("only relu is supported");
    const auto mode = j.value("upsample_mode", std::string("resize_conv"));
    if (mode == "resize_conv")
        s.upsample_mode = UpsampleMode::ResizeConv;
    else if (mode == "fractional_stride")
        s.upsample_mode = UpsampleMode::FractionalStride;
    else
        throw ConfigError("unknown upsample_mode '" + mode + "'");
}

void to_json(nlohmann::json& j, const DiscriminatorSpec& s) {
    j = nlohmann::json{{"base_channels", s.base_channels},
                       {"n_downsample", s.n_downsample},
                       {"convs_per_resblock", s.convs_per_resblock},
                       {"n_classes", s.n_classes},
                       {"kernel", s.kernel},
                       {"head", "global_average_pool_then_linear"}};
}

void from_json(const nlohmann::json& j, DiscriminatorSpec& s) {
    const DiscriminatorSpec d;
    s.base_channels = j.value("base_channels", d.base_channels);
    s.n_downsample = j.value("n_downsample", d.n_downsample);
    s.convs_per_resblock = j.value("convs_per_resblock", d.convs_per_resblock);
    s.n_classes = j.value("n_classes", d.n_classes);
    s.kernel = j.value("kernel", d.kernel);
}

// ---- StageNetwork ----------------------------------------------------------

ConvUnit StageNetwork::make_unit(const std::string& prefix, nn::ConvGeometry g, bool norm, bool relu, bool bias,
                                 bool transposed) {
    ConvUnit u;
    u.geometry = g;
    u.norm = norm;
    u.relu = relu;
    u.transposed = transposed;
    const int rows = transposed ? g.in_channels : g.out_channels;
    const int cols = transposed ? g.out_channels : g.in_channels;
    u.weight = params_.add(prefix + "/weight", {rows, cols, g.kernel, g.kernel});
    // A bias in front of instance norm is cancelled by the mean subtraction.
    if (bias) u.bias = params_.add(prefix + "/bias", {g.out_channels});
    return u;
}

void StageNetwork::initialize(std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 0.02);
    for (auto& p : params_) {
        const bool is_bias = p.name.size() >= 5 && p.name.compare(p.name.size() - 5, 5, "/bias") == 0;
        for (double& v : p.value) v = is_bias ? 0.0 : normal(rng);
    }
}

std::vector<std::string> StageNetwork::layer_names() const {
    std::vector<std::string> names;
    for (const auto& s : stages_) names.push_back(s.name);
    return names;
}

int StageNetwork::stage_index(const std::string& name) const {
    for (std::size_t i = 0; i < stages_.size(); ++i)
        if (stages_[i].name == name) return static_cast<int>(i);
    throw ConfigError("unknown layer '" + name + "'");
}

nn::Tensor StageNetwork::run_unit(const ConvUnit& u, const nn::Tensor& x, UnitCache* cache) const {
    const auto& w = params_[u.weight].value;
    std::span<const double> b;
    if (u.bias >= 0) b = params_[u.bias].value;
    nn::Tensor y = u.transposed ? nn::conv_transpose2d_forward(x, w, b, u.geometry)
                                : nn::conv2d_forward(x, w, b, u.geometry);
    if (u.norm) {
        nn::InstanceNormCache local;
        y = nn::instance_norm_forward(y, cache ? cache->norm : local);
    }
    if (u.relu) nn::relu_inplace(y);
    if (cache) {
        cache->input = x;
        if (u.relu) cache->output = y;
    }
    return y;
}

nn::Tensor StageNetwork::backprop_unit(const ConvUnit& u, const UnitCache& cache, nn::Tensor grad,
                                       nn::Gradients* grads, bool need_input_grad) const {
    if (u.relu) nn::relu_backward_inplace(grad, cache.output);
    if (u.norm) grad = nn::instance_norm_backward(grad, cache.norm);
    std::span<double> gw;
    std::span<double> gb;
    if (grads) {
        gw = (*grads)[u.weight];
        if (u.bias >= 0) gb = (*grads)[u.bias];
    }
    const auto& w = params_[u.weight].value;
    return u.transposed ? nn::conv_transpose2d_backward(cache.input, grad, w, u.geometry, gw, gb, need_input_grad)
                        : nn::conv2d_backward(cache.input, grad, w, u.geometry, gw, gb, need_input_grad);
}

nn::Tensor StageNetwork::run_stages(const nn::Tensor& x, NetworkTrace* trace, int stop_after) const {
    std::vector<bool> is_skip_source(stages_.size(), false);
    for (const auto& s : stages_)
        if (s.skip_from >= 0) is_skip_source[s.skip_from] = true;

    if (trace) {
        trace->input = x;
        trace->stages.assign(stages_.size(), StageCache{});
    }
    std::vector<nn::Tensor> kept(stages_.size());
    nn::Tensor cur = x;
    for (std::size_t i = 0; i < stages_.size(); ++i) {
        const Stage& s = stages_[i];
        StageCache* sc = trace ? &trace->stages[i] : nullptr;
        if (sc) sc->units.resize(s.units.size());
        auto unit_cache = [sc](std::size_t k) { return sc ? &sc->units[k] : nullptr; };

        switch (s.kind) {
            case StageKind::Plain:
                cur = run_unit(s.units[0], cur, unit_cache(0));
                break;
            case StageKind::Residual: {
                nn::Tensor body = cur;
                for (std::size_t k = 0; k < s.units.size(); ++k) body = run_unit(s.units[k], body, unit_cache(k));
                body += cur;
                cur = std::move(body);
                break;
            }
            case StageKind::Up: {
                if (sc) sc->own_channels = cur.channels();
                if (s.skip_from >= 0) cur = nn::concat_channels(cur, kept[s.skip_from]);
                if (sc) sc->pre_upsample = cur.shape();
                if (s.upsample) cur = nn::upsample_bilinear2x(cur);
                cur = run_unit(s.units[0], cur, unit_cache(0));
                break;
            }
        }
        if (is_skip_source[i]) kept[i] = cur;
        if (sc) sc->output = cur;
        if (static_cast<int>(i) == stop_after) break;
    }
    return cur;
}

nn::Tensor StageNetwork::backprop_stages(const NetworkTrace& trace, nn::Tensor grad, nn::Gradients* grads,
                                         bool need_input_grad) const {
    std::vector<nn::Tensor> skip_grads(stages_.size());
    for (std::size_t r = stages_.size(); r-- > 0;) {
        const Stage& s = stages_[r];
        const StageCache& sc = trace.stages[r];
        if (skip_grads[r].size() > 0) grad += skip_grads[r];
        const bool need = r > 0 || need_input_grad;

        switch (s.kind) {
            case StageKind::Plain:
                grad = backprop_unit(s.units[0], sc.units[0], std::move(grad), grads, need);
                break;
            case StageKind::Residual: {
                nn::Tensor body = grad;
                for (std::size_t k = s.units.size(); k-- > 0;)
                    body = backprop_unit(s.units[k], sc.units[k], std::move(body), grads, true);
                grad += body;
                break;
            }
            case StageKind::Up: {
                nn::Tensor g = backprop_unit(s.units[0], sc.units[0], std::move(grad), grads, true);
                if (s.upsample) g = nn::upsample_bilinear2x_backward(g, sc.pre_upsample);
                if (s.skip_from >= 0) {
                    auto [main, skip] = nn::split_channels(g, sc.own_channels);
                    if (skip_grads[s.skip_from].size() == 0)
                        skip_grads[s.skip_from] = std::move(skip);
                    else
                        skip_grads[s.skip_from] += skip;
                    g = std::move(main);
                }
                grad = std::move(g);
                break;
            }
        }
    }
    return grad;
}

// ---- Generator -------------------------------------------------------------

Generator::Generator(GeneratorSpec spec) : spec_(spec) {
    spec_.validate();
    const int k = spec_.kernel;
    const int pad = k / 2;
    int c = spec_.base_channels;

    stages_.push_back(Stage{"initial convolution", StageKind::Plain,
                            {make_unit("initial convolution", {1, c, spec_.initial_kernel, 1, spec_.initial_kernel / 2},
                                       true, true, false)}});
    std::vector<int> down_stage(spec_.n_downsample + 1, -1);
    for (int i = 1; i <= spec_.n_downsample; ++i) {
        const std::string name = "down-sampling " + std::to_string(i);
        stages_.push_back(Stage{name, StageKind::Plain, {make_unit(name, {c, 2 * c, k, 2, pad}, true, true, false)}});
        c *= 2;
        down_stage[i] = static_cast<int>(stages_.size() - 1);
    }
    for (int j = 1; j <= spec_.n_resblocks; ++j) {
        Stage s{"residual block " + std::to_string(j), StageKind::Residual, {}};
        for (int u = 1; u <= spec_.convs_per_resblock; ++u)
            s.units.push_back(make_unit(s.name + "/conv" + std::to_string(u), {c, c, k, 1, pad}, true, true, false));
        stages_.push_back(std::move(s));
    }
    for (int i = 1; i <= spec_.n_downsample; ++i) {
        Stage s{"up-sampling " + std::to_string(i), StageKind::Up, {}};
        int in = c;
        if (spec_.skip_connections) {
            s.skip_from = down_stage[spec_.n_downsample + 1 - i];
            in += c;  // the matching down-sampling stage has the same width
        }
        const int out = std::max(c / 2, 1);
        if (spec_.upsample_mode == UpsampleMode::ResizeConv) {
            s.upsample = true;
            s.units.push_back(make_unit(s.name, {in, out, k, 1, pad}, true, true, false));
        } else {
            s.units.push_back(make_unit(s.name, {in, out, k, 2, pad}, true, true, false, true));
        }
        stages_.push_back(std::move(s));
        c = out;
    }
    stages_.push_back(
        Stage{"final convolution", StageKind::Plain, {make_unit("final convolution", {c, 1, k, 1, pad}, false, false, true)}});
}

void Generator::check_input(const nn::Shape& in) const {
    const int m = spec_.size_multiple();
    if (in.channels != 1) throw ShapeError("generator expects a single-channel input");
    if (in.height % m != 0 || in.width % m != 0)
        throw ShapeError("generator input " + std::to_string(in.height) + "x" + std::to_string(in.width) +
                         " is not divisible by " + std::to_string(m));
}

nn::Tensor Generator::forward(const nn::Tensor& x, NetworkTrace* trace) const {
    check_input(x.shape());
    return run_stages(x, trace);
}

nn::Tensor Generator::layer_output(const nn::Tensor& x, const std::string& layer) const {
    check_input(x.shape());
    return run_stages(x, nullptr, stage_index(layer));
}

nn::Tensor Generator::backward(const NetworkTrace& trace, const nn::Tensor& grad_out, nn::Gradients* grads,
                               bool need_input_grad) const {
    return backprop_stages(trace, grad_out, grads, need_input_grad);
}

std::vector<LayerInfo> Generator::layer_shapes(int height, int width) const {
    check_input(nn::Shape{1, height, width});
    std::vector<LayerInfo> out;
    nn::Shape cur{1, height, width};
    for (const auto& s : stages_) {
        const ConvUnit& u = s.units.back();
        if (s.kind == StageKind::Up) {
            cur = nn::Shape{u.geometry.out_channels, cur.height * 2, cur.width * 2};
        } else if (s.kind == StageKind::Plain) {
            cur = nn::conv_output_shape(cur, u.geometry);
        }
        out.push_back(LayerInfo{s.name, cur});
    }
    return out;
}

// ---- Discriminator ---------------------------------------------------------

Discriminator::Discriminator(DiscriminatorSpec spec) : spec_(spec) {
    spec_.validate();
    const int k = spec_.kernel;
    const int pad = k / 2;
    int in = 1;
    for (int i = 1; i <= spec_.n_downsample; ++i) {
        const int c = spec_.base_channels << (i - 1);
        const std::string down = "down-sampling " + std::to_string(i);
        stages_.push_back(Stage{down, StageKind::Plain, {make_unit(down, {in, c, k, 2, pad}, true, true, false)}});
        Stage res{"residual block " + std::to_string(i), StageKind::Residual, {}};
        for (int u = 1; u <= spec_.convs_per_resblock; ++u)
            res.units.push_back(make_unit(res.name + "/conv" + std::to_string(u), {c, c, k, 1, pad}, true, true, false));
        stages_.push_back(std::move(res));
        in = c;
    }
    head_weight_ = params_.add("logits/weight", {spec_.n_classes, in});
    head_bias_ = params_.add("logits/bias", {spec_.n_classes});
}

std::vector<double> Discriminator::forward(const nn::Tensor& x, NetworkTrace* trace) const {
    const int m = 1 << spec_.n_downsample;
    if (x.channels() != 1) throw ShapeError("discriminator expects a single-channel input");
    if (x.height() < m || x.width() < m)
        throw ShapeError("discriminator input must be at least " + std::to_string(m) + " pixels per side");
    const nn::Tensor features = run_stages(x, trace);
    auto pooled = nn::global_average_pool(features);
    auto logits = nn::linear_forward(pooled, params_[head_weight_].value, params_[head_bias_].value,
                                     spec_.n_classes);
    auto probs = nn::softmax(logits);
    if (trace) {
        trace->pooled = std::move(pooled);
        trace->logits = std::move(logits);
        trace->probabilities = probs;
    }
    return probs;
}

nn::Tensor Discriminator::backward(const NetworkTrace& trace, std::span<const double> grad_logits,
                                   nn::Gradients* grads, bool need_input_grad) const {
    std::span<double> gw;
    std::span<double> gb;
    if (grads) {
        gw = (*grads)[head_weight_];
        gb = (*grads)[head_bias_];
    }
    const auto g_pooled = nn::linear_backward(trace.pooled, grad_logits, params_[head_weight_].value, gw, gb);
    nn::Tensor g = nn::global_average_pool_backward(g_pooled, trace.stages.back().output.shape());
    return backprop_stages(trace, std::move(g), grads, need_input_grad);
}

std::vector<LayerInfo> Discriminator::layer_shapes(int height, int width) const {
    std::vector<LayerInfo> out;
    nn::Shape cur{1, height, width};
    for (const auto& s : stages_) {
        if (s.kind == StageKind::Plain) cur = nn::conv_output_shape(cur, s.units[0].geometry);
        out.push_back(LayerInfo{s.name, cur});
    }
    out.push_back(LayerInfo{"average pooling", nn::Shape{cur.channels, 1, 1}});
    out.push_back(LayerInfo{"logits", nn::Shape{spec_.n_classes, 1, 1}});
    return out;
}

nn::Tensor to_tensor(const Image& img) {
    return nn::Tensor(nn::Shape{1, img.height(), img.width()},
                      std::vector<double>(img.pixels().begin(), img.pixels().end()));
}

Image tensor_to_image(const nn::Tensor& t, int channel) {
    const auto ch = t.channel(channel);
    return Image(t.height(), t.width(), std::vector<double>(ch.begin(), ch.end()));
}

}  // namespace hdcg
