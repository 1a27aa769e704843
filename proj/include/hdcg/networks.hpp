#pragma once

#include <random>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hdcg/image.hpp"
#include "hdcg/nn/ops.hpp"
#include "hdcg/nn/tensor.hpp"

namespace hdcg {

enum class UpsampleMode { ResizeConv, FractionalStride };

struct GeneratorSpec {
    int base_channels = 16;
    int n_downsample = 3;
    int n_resblocks = 6;
    int convs_per_resblock = 3;
    int initial_kernel = 7;
    int kernel = 3;
    bool skip_connections = true;
    UpsampleMode upsample_mode = UpsampleMode::ResizeConv;
    // Normalization is always instance norm and activation always ReLU.

    void validate() const;
    /// Input sides must be divisible by this.
    int size_multiple() const noexcept { return 1 << n_downsample; }
};

struct DiscriminatorSpec {
    int base_channels = 16;
    int n_downsample = 7;
    int convs_per_resblock = 2;
    int n_classes = 3;
    int kernel = 3;

    void validate() const;
};

void to_json(nlohmann::json& j, const GeneratorSpec& s);
void from_json(const nlohmann::json& j, GeneratorSpec& s);
void to_json(nlohmann::json& j, const DiscriminatorSpec& s);
void from_json(const nlohmann::json& j, DiscriminatorSpec& s);

/// Output shape of one named layer, as listed in the architecture tables.
struct LayerInfo {
    std::string name;
    nn::Shape output;
};

/// conv -> [instance norm] -> [ReLU], optionally preceded by x2 bilinear
/// up-scaling or implemented as a transposed convolution.
struct ConvUnit {
    nn::ConvGeometry geometry;
    int weight = -1;
    int bias = -1;
    bool norm = true;
    bool relu = true;
    bool transposed = false;
};

struct UnitCache {
    nn::Tensor input;
    nn::InstanceNormCache norm;
    nn::Tensor output;
};

enum class StageKind { Plain, Residual, Up };

struct Stage {
    std::string name;
    StageKind kind = StageKind::Plain;
    std::vector<ConvUnit> units;
    bool upsample = false;  // resize-convolution up-scaling before the unit
    int skip_from = -1;     // stage index whose output is concatenated onto the input
};

struct StageCache {
    std::vector<UnitCache> units;
    nn::Shape pre_upsample;
    int own_channels = 0;  // channels of the main path before a skip concat
    nn::Tensor output;
};

/// Per-call activations needed for the backward pass.
struct NetworkTrace {
    std::vector<StageCache> stages;
    nn::Tensor input;
    // Discriminator head only.
    std::vector<double> pooled;
    std::vector<double> logits;
    std::vector<double> probabilities;
};

/// Shared machinery for the stage-based networks.
class StageNetwork {
public:
    nn::ParameterSet& parameters() noexcept { return params_; }
    const nn::ParameterSet& parameters() const noexcept { return params_; }
    const std::vector<Stage>& stages() const noexcept { return stages_; }

    /// Conv kernels ~ N(0, 0.02); biases zero.
    void initialize(std::mt19937_64& rng);
    std::size_t parameter_count() const noexcept { return params_.scalar_count(); }
    /// Names of all inspectable layers in forward order.
    std::vector<std::string> layer_names() const;

protected:
    nn::Tensor run_stages(const nn::Tensor& x, NetworkTrace* trace, int stop_after = -1) const;
    nn::Tensor backprop_stages(const NetworkTrace& trace, nn::Tensor grad, nn::Gradients* grads,
                               bool need_input_grad) const;
    ConvUnit make_unit(const std::string& prefix, nn::ConvGeometry g, bool norm, bool relu, bool bias,
                       bool transposed = false);
    int stage_index(const std::string& name) const;

    nn::ParameterSet params_;
    std::vector<Stage> stages_;

private:
    nn::Tensor run_unit(const ConvUnit& u, const nn::Tensor& x, UnitCache* cache) const;
    nn::Tensor backprop_unit(const ConvUnit& u, const UnitCache& cache, nn::Tensor grad, nn::Gradients* grads,
                             bool need_input_grad) const;
};

/// Image-to-image generator: initial conv, strided down-sampling, residual
/// bottleneck, up-sampling with skip concatenation, linear 1-channel output.
class Generator : public StageNetwork {
public:
    explicit Generator(GeneratorSpec spec = {});

    const GeneratorSpec& spec() const noexcept { return spec_; }

    /// Throws ShapeError when the input sides are not divisible by 2^n_downsample.
    void check_input(const nn::Shape& in) const;
    nn::Tensor forward(const nn::Tensor& x, NetworkTrace* trace = nullptr) const;
    /// Output of the named layer (forward stops there).
    nn::Tensor layer_output(const nn::Tensor& x, const std::string& layer) const;
    /// Accumulates parameter gradients into `grads` (may be null) and returns
    /// the input gradient when requested.
    nn::Tensor backward(const NetworkTrace& trace, const nn::Tensor& grad_out, nn::Gradients* grads,
                        bool need_input_grad = true) const;

    std::vector<LayerInfo> layer_shapes(int height, int width) const;

private:
    GeneratorSpec spec_;
};

/// Strided-conv / residual-block classifier with global average pooling and a
/// softmax head.
class Discriminator : public StageNetwork {
public:
    explicit Discriminator(DiscriminatorSpec spec = {});

    const DiscriminatorSpec& spec() const noexcept { return spec_; }

    /// Returns class probabilities; the trace additionally stores logits.
    std::vector<double> forward(const nn::Tensor& x, NetworkTrace* trace = nullptr) const;
    /// Backpropagates a gradient with respect to the logits.
    nn::Tensor backward(const NetworkTrace& trace, std::span<const double> grad_logits, nn::Gradients* grads,
                        bool need_input_grad = true) const;

    std::vector<LayerInfo> layer_shapes(int height, int width) const;

private:
    DiscriminatorSpec spec_;
    int head_weight_ = -1;
    int head_bias_ = -1;
};

nn::Tensor to_tensor(const Image& img);
Image tensor_to_image(const nn::Tensor& t, int channel = 0);

}  // namespace hdcg
