#include "hdcg/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "hdcg/errors.hpp"

namespace hdcg::nn {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMatrix>;
using MatMap = Eigen::Map<RowMatrix>;
using StridedMap = Eigen::Map<RowMatrix, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>>;

// Upper bound on im2col buffer entries; large inputs are processed in row bands.
constexpr std::size_t kMaxColumnEntries = std::size_t{1} << 22;

int rows_per_chunk(const ConvGeometry& g, const Shape& out) {
    const std::size_t k = static_cast<std::size_t>(g.in_channels) * g.kernel * g.kernel;
    const std::size_t per_row = k * out.width;
    return static_cast<int>(std::clamp<std::size_t>(kMaxColumnEntries / std::max<std::size_t>(per_row, 1), 1,
                                                    static_cast<std::size_t>(out.height)));
}

void im2col(const Tensor& x, const ConvGeometry& g, const Shape& out, int oy0, int oy1, RowMatrix& cols) {
    const int P = (oy1 - oy0) * out.width;
    cols.resize(static_cast<Eigen::Index>(g.in_channels) * g.kernel * g.kernel, P);
    const int H = x.height();
    const int W = x.width();
    Eigen::Index row = 0;
    for (int ci = 0; ci < g.in_channels; ++ci) {
        const double* plane = x.channel(ci).data();
        for (int ky = 0; ky < g.kernel; ++ky) {
            for (int kx = 0; kx < g.kernel; ++kx, ++row) {
                double* dst = cols.row(row).data();
                for (int oy = oy0; oy < oy1; ++oy) {
                    const int iy = oy * g.stride - g.padding + ky;
                    double* d = dst + static_cast<std::size_t>(oy - oy0) * out.width;
                    if (iy < 0 || iy >= H) {
                        std::fill(d, d + out.width, 0.0);
                        continue;
                    }
                    const double* src = plane + static_cast<std::size_t>(iy) * W;
                    for (int ox = 0; ox < out.width; ++ox) {
                        const int ix = ox * g.stride - g.padding + kx;
                        d[ox] = (ix >= 0 && ix < W) ? src[ix] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_add(const RowMatrix& cols, const ConvGeometry& g, const Shape& out, int oy0, int oy1, Tensor& gx) {
    const int H = gx.height();
    const int W = gx.width();
    Eigen::Index row = 0;
    for (int ci = 0; ci < g.in_channels; ++ci) {
        double* plane = gx.channel(ci).data();
        for (int ky = 0; ky < g.kernel; ++ky) {
            for (int kx = 0; kx < g.kernel; ++kx, ++row) {
                const double* src = cols.row(row).data();
                for (int oy = oy0; oy < oy1; ++oy) {
                    const int iy = oy * g.stride - g.padding + ky;
                    if (iy < 0 || iy >= H) continue;
                    const double* s = src + static_cast<std::size_t>(oy - oy0) * out.width;
                    double* d = plane + static_cast<std::size_t>(iy) * W;
                    for (int ox = 0; ox < out.width; ++ox) {
                        const int ix = ox * g.stride - g.padding + kx;
                        if (ix >= 0 && ix < W) d[ix] += s[ox];
                    }
                }
            }
        }
    }
}

void check_weight(std::span<const double> weight, const ConvGeometry& g) {
    const auto expected = static_cast<std::size_t>(g.out_channels) * g.in_channels * g.kernel * g.kernel;
    if (weight.size() != expected) throw ShapeError("convolution weight has wrong size");
}

// Input gradient of a convolution: gx = col2im(W^T gy).
Tensor conv_input_grad(const Tensor& grad_out, std::span<const double> weight, const ConvGeometry& g,
                       const Shape& input_shape) {
    const Shape out = grad_out.shape();
    const Eigen::Index K = static_cast<Eigen::Index>(g.in_channels) * g.kernel * g.kernel;
    ConstMatMap Wm(weight.data(), g.out_channels, K);
    Tensor gx(input_shape);
    RowMatrix cols;
    const int chunk = rows_per_chunk(g, out);
    for (int oy0 = 0; oy0 < out.height; oy0 += chunk) {
        const int oy1 = std::min(out.height, oy0 + chunk);
        const Eigen::Index P = static_cast<Eigen::Index>(oy1 - oy0) * out.width;
        ConstStridedMap gy(grad_out.data() + static_cast<std::size_t>(oy0) * out.width, g.out_channels, P,
                           Eigen::OuterStride<>(static_cast<Eigen::Index>(out.plane())));
        cols.noalias() = Wm.transpose() * gy;
        col2im_add(cols, g, out, oy0, oy1, gx);
    }
    return gx;
}

void weight_grad(const Tensor& x, const Tensor& grad_out, const ConvGeometry& g, std::span<double> grad_weight) {
    const Shape out = grad_out.shape();
    const Eigen::Index K = static_cast<Eigen::Index>(g.in_channels) * g.kernel * g.kernel;
    MatMap gW(grad_weight.data(), g.out_channels, K);
    RowMatrix cols;
    const int chunk = rows_per_chunk(g, out);
    for (int oy0 = 0; oy0 < out.height; oy0 += chunk) {
        const int oy1 = std::min(out.height, oy0 + chunk);
        const Eigen::Index P = static_cast<Eigen::Index>(oy1 - oy0) * out.width;
        im2col(x, g, out, oy0, oy1, cols);
        ConstStridedMap gy(grad_out.data() + static_cast<std::size_t>(oy0) * out.width, g.out_channels, P,
                           Eigen::OuterStride<>(static_cast<Eigen::Index>(out.plane())));
        gW.noalias() += gy * cols.transpose();
    }
}

void add_bias(Tensor& y, std::span<const double> bias) {
    if (bias.empty()) return;
    for (int c = 0; c < y.channels(); ++c)
        for (double& v : y.channel(c)) v += bias[c];
}

void bias_grad(const Tensor& grad_out, std::span<double> grad_bias) {
    if (grad_bias.empty()) return;
    for (int c = 0; c < grad_out.channels(); ++c) {
        const auto ch = grad_out.channel(c);
        grad_bias[c] += std::accumulate(ch.begin(), ch.end(), 0.0);
    }
}

// The conv whose adjoint is the given transposed conv maps the transposed
// output back onto its input.
ConvGeometry adjoint_geometry(const ConvGeometry& g) {
    return ConvGeometry{g.out_channels, g.in_channels, g.kernel, g.stride, g.padding};
}

}  // namespace

std::string Shape::str() const {
    return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.count()) throw ShapeError("tensor data size does not match shape " + shape_.str());
}

Tensor& Tensor::operator+=(const Tensor& other) {
    if (!(shape_ == other.shape_)) throw ShapeError("tensor shape mismatch in +=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

int ParameterSet::add(std::string name, std::vector<int> shape) {
    std::size_t n = 1;
    for (int s : shape) n *= static_cast<std::size_t>(s);
    params_.push_back(Parameter{std::move(name), std::move(shape), std::vector<double>(n, 0.0)});
    return static_cast<int>(params_.size() - 1);
}

std::size_t ParameterSet::scalar_count() const noexcept {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

const Parameter* ParameterSet::find(const std::string& name) const {
    for (const auto& p : params_)
        if (p.name == name) return &p;
    return nullptr;
}

Gradients zero_gradients(const ParameterSet& params) {
    Gradients g;
    g.reserve(params.size());
    for (const auto& p : params) g.emplace_back(p.value.size(), 0.0);
    return g;
}

Shape conv_output_shape(const Shape& in, const ConvGeometry& g) {
    return Shape{g.out_channels, (in.height + 2 * g.padding - g.kernel) / g.stride + 1,
                 (in.width + 2 * g.padding - g.kernel) / g.stride + 1};
}

Tensor conv2d_forward(const Tensor& x, std::span<const double> weight, std::span<const double> bias,
                      const ConvGeometry& g) {
    if (x.channels() != g.in_channels)
        throw ShapeError("convolution expects " + std::to_string(g.in_channels) + " channels, got " +
                         std::to_string(x.channels()));
    check_weight(weight, g);
    const Shape out = conv_output_shape(x.shape(), g);
    if (out.height <= 0 || out.width <= 0) throw ShapeError("convolution input too small");
    Tensor y(out);
    const Eigen::Index K = static_cast<Eigen::Index>(g.in_channels) * g.kernel * g.kernel;
    ConstMatMap Wm(weight.data(), g.out_channels, K);
    RowMatrix cols;
    const int chunk = rows_per_chunk(g, out);
    for (int oy0 = 0; oy0 < out.height; oy0 += chunk) {
        const int oy1 = std::min(out.height, oy0 + chunk);
        const Eigen::Index P = static_cast<Eigen::Index>(oy1 - oy0) * out.width;
        im2col(x, g, out, oy0, oy1, cols);
        StridedMap ym(y.data() + static_cast<std::size_t>(oy0) * out.width, g.out_channels, P,
                      Eigen::OuterStride<>(static_cast<Eigen::Index>(out.plane())));
        ym.noalias() = Wm * cols;
    }
    add_bias(y, bias);
    return y;
}

Tensor conv2d_backward(const Tensor& x, const Tensor& grad_out, std::span<const double> weight,
                       const ConvGeometry& g, std::span<double> grad_weight, std::span<double> grad_bias,
                       bool need_input_grad) {
    check_weight(weight, g);
    if (!grad_weight.empty()) weight_grad(x, grad_out, g, grad_weight);
    bias_grad(grad_out, grad_bias);
    if (!need_input_grad) return {};
    return conv_input_grad(grad_out, weight, g, x.shape());
}

Shape conv_transpose_output_shape(const Shape& in, const ConvGeometry& g) {
    return Shape{g.out_channels, in.height * g.stride, in.width * g.stride};
}

Tensor conv_transpose2d_forward(const Tensor& x, std::span<const double> weight, std::span<const double> bias,
                                const ConvGeometry& g) {
    if (x.channels() != g.in_channels) throw ShapeError("transposed convolution channel mismatch");
    const ConvGeometry adj = adjoint_geometry(g);
    check_weight(weight, adj);
    const Shape out = conv_transpose_output_shape(x.shape(), g);
    if (!(conv_output_shape(out, adj) == x.shape()))
        throw ShapeError("transposed convolution geometry is not invertible for " + x.shape().str());
    Tensor y = conv_input_grad(x, weight, adj, out);
    add_bias(y, bias);
    return y;
}

Tensor conv_transpose2d_backward(const Tensor& x, const Tensor& grad_out, std::span<const double> weight,
                                 const ConvGeometry& g, std::span<double> grad_weight, std::span<double> grad_bias,
                                 bool need_input_grad) {
    const ConvGeometry adj = adjoint_geometry(g);
    check_weight(weight, adj);
    if (!grad_weight.empty()) weight_grad(grad_out, x, adj, grad_weight);
    bias_grad(grad_out, grad_bias);
    if (!need_input_grad) return {};
    return conv2d_forward(grad_out, weight, {}, adj);
}

Tensor instance_norm_forward(const Tensor& x, InstanceNormCache& cache) {
    Tensor y(x.shape());
    cache.inv_std.assign(x.channels(), 0.0);
    const double n = static_cast<double>(x.shape().plane());
    for (int c = 0; c < x.channels(); ++c) {
        const auto in = x.channel(c);
        double mean = 0.0;
        for (double v : in) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : in) var += (v - mean) * (v - mean);
        var /= n;
        const double inv = 1.0 / std::sqrt(var + kInstanceNormEps);
        cache.inv_std[c] = inv;
        auto out = y.channel(c);
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = (in[i] - mean) * inv;
    }
    cache.normalized = y;
    return y;
}

Tensor instance_norm_backward(const Tensor& grad_out, const InstanceNormCache& cache) {
    Tensor gx(grad_out.shape());
    const double n = static_cast<double>(grad_out.shape().plane());
    for (int c = 0; c < grad_out.channels(); ++c) {
        const auto gy = grad_out.channel(c);
        const auto xh = cache.normalized.channel(c);
        double mean_gy = 0.0;
        double mean_gy_xh = 0.0;
        for (std::size_t i = 0; i < gy.size(); ++i) {
            mean_gy += gy[i];
            mean_gy_xh += gy[i] * xh[i];
        }
        mean_gy /= n;
        mean_gy_xh /= n;
        auto out = gx.channel(c);
        const double inv = cache.inv_std[c];
        for (std::size_t i = 0; i < gy.size(); ++i) out[i] = inv * (gy[i] - mean_gy - xh[i] * mean_gy_xh);
    }
    return gx;
}

void relu_inplace(Tensor& x) {
    for (double& v : x.values()) v = v > 0.0 ? v : 0.0;
}

void relu_backward_inplace(Tensor& grad, const Tensor& output) {
    auto g = grad.values();
    auto o = output.values();
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!(o[i] > 0.0)) g[i] = 0.0;
}

namespace {

struct Tap {
    int lo;
    int hi;
    double w_hi;
};

// Source taps for x2 bilinear up-scaling along one axis (half-pixel centres).
std::vector<Tap> upsample_taps(int n_in) {
    std::vector<Tap> taps(2 * n_in);
    for (int o = 0; o < 2 * n_in; ++o) {
        const double src = std::max((o + 0.5) / 2.0 - 0.5, 0.0);
        const int lo = std::min(static_cast<int>(src), n_in - 1);
        const int hi = std::min(lo + 1, n_in - 1);
        taps[o] = Tap{lo, hi, src - lo};
    }
    return taps;
}

}  // namespace

Tensor upsample_bilinear2x(const Tensor& x) {
    const Shape in = x.shape();
    Tensor y(Shape{in.channels, in.height * 2, in.width * 2});
    const auto ty = upsample_taps(in.height);
    const auto tx = upsample_taps(in.width);
    for (int c = 0; c < in.channels; ++c) {
        for (int oy = 0; oy < 2 * in.height; ++oy) {
            const Tap& a = ty[oy];
            for (int ox = 0; ox < 2 * in.width; ++ox) {
                const Tap& b = tx[ox];
                const double top = (1 - b.w_hi) * x.at(c, a.lo, b.lo) + b.w_hi * x.at(c, a.lo, b.hi);
                const double bot = (1 - b.w_hi) * x.at(c, a.hi, b.lo) + b.w_hi * x.at(c, a.hi, b.hi);
                y.at(c, oy, ox) = (1 - a.w_hi) * top + a.w_hi * bot;
            }
        }
    }
    return y;
}

Tensor upsample_bilinear2x_backward(const Tensor& grad_out, const Shape& input_shape) {
    Tensor gx(input_shape);
    const auto ty = upsample_taps(input_shape.height);
    const auto tx = upsample_taps(input_shape.width);
    for (int c = 0; c < input_shape.channels; ++c) {
        for (int oy = 0; oy < 2 * input_shape.height; ++oy) {
            const Tap& a = ty[oy];
            for (int ox = 0; ox < 2 * input_shape.width; ++ox) {
                const Tap& b = tx[ox];
                const double g = grad_out.at(c, oy, ox);
                gx.at(c, a.lo, b.lo) += g * (1 - a.w_hi) * (1 - b.w_hi);
                gx.at(c, a.lo, b.hi) += g * (1 - a.w_hi) * b.w_hi;
                gx.at(c, a.hi, b.lo) += g * a.w_hi * (1 - b.w_hi);
                gx.at(c, a.hi, b.hi) += g * a.w_hi * b.w_hi;
            }
        }
    }
    return gx;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.height() != b.height() || a.width() != b.width())
        throw ShapeError("cannot concatenate " + a.shape().str() + " and " + b.shape().str());
    Tensor out(Shape{a.channels() + b.channels(), a.height(), a.width()});
    std::copy(a.values().begin(), a.values().end(), out.values().begin());
    std::copy(b.values().begin(), b.values().end(), out.values().begin() + static_cast<std::ptrdiff_t>(a.size()));
    return out;
}

std::pair<Tensor, Tensor> split_channels(const Tensor& grad, int first_channels) {
    const Shape s = grad.shape();
    Tensor a(Shape{first_channels, s.height, s.width});
    Tensor b(Shape{s.channels - first_channels, s.height, s.width});
    std::copy(grad.values().begin(), grad.values().begin() + static_cast<std::ptrdiff_t>(a.size()),
              a.values().begin());
    std::copy(grad.values().begin() + static_cast<std::ptrdiff_t>(a.size()), grad.values().end(),
              b.values().begin());
    return {std::move(a), std::move(b)};
}

std::vector<double> global_average_pool(const Tensor& x) {
    std::vector<double> out(x.channels());
    for (int c = 0; c < x.channels(); ++c) {
        const auto ch = x.channel(c);
        out[c] = std::accumulate(ch.begin(), ch.end(), 0.0) / static_cast<double>(ch.size());
    }
    return out;
}

Tensor global_average_pool_backward(std::span<const double> grad_out, const Shape& input_shape) {
    Tensor gx(input_shape);
    const double n = static_cast<double>(input_shape.plane());
    for (int c = 0; c < input_shape.channels; ++c)
        for (double& v : gx.channel(c)) v = grad_out[c] / n;
    return gx;
}

std::vector<double> linear_forward(std::span<const double> x, std::span<const double> weight,
                                   std::span<const double> bias, int out_features) {
    const std::size_t in = x.size();
    std::vector<double> y(out_features);
    for (int o = 0; o < out_features; ++o) {
        double acc = bias.empty() ? 0.0 : bias[o];
        for (std::size_t i = 0; i < in; ++i) acc += weight[o * in + i] * x[i];
        y[o] = acc;
    }
    return y;
}

std::vector<double> linear_backward(std::span<const double> x, std::span<const double> grad_out,
                                    std::span<const double> weight, std::span<double> grad_weight,
                                    std::span<double> grad_bias) {
    const std::size_t in = x.size();
    std::vector<double> gx(in, 0.0);
    for (std::size_t o = 0; o < grad_out.size(); ++o) {
        if (!grad_bias.empty()) grad_bias[o] += grad_out[o];
        for (std::size_t i = 0; i < in; ++i) {
            if (!grad_weight.empty()) grad_weight[o * in + i] += grad_out[o] * x[i];
            gx[i] += weight[o * in + i] * grad_out[o];
        }
    }
    return gx;
}

std::vector<double> softmax(std::span<const double> logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) sum += (p[i] = std::exp(logits[i] - m));
    for (double& v : p) v /= sum;
    return p;
}

}  // namespace hdcg::nn
