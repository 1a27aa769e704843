#pragma once

#include <span>
#include <vector>

#include "hdcg/nn/tensor.hpp"

// Forward/backward kernels for single-sample CHW tensors. Backward functions
// accumulate (+=) into parameter gradients and return the input gradient.

namespace hdcg::nn {

struct ConvGeometry {
    int in_channels = 1;
    int out_channels = 1;
    int kernel = 3;
    int stride = 1;
    int padding = 1;
};

Shape conv_output_shape(const Shape& in, const ConvGeometry& g);

/// Zero-padded cross-correlation. Weight layout (out, in, k, k); `bias` may be empty.
Tensor conv2d_forward(const Tensor& x, std::span<const double> weight, std::span<const double> bias,
                      const ConvGeometry& g);

/// `grad_weight` / `grad_bias` may be empty to skip parameter gradients.
Tensor conv2d_backward(const Tensor& x, const Tensor& grad_out, std::span<const double> weight,
                       const ConvGeometry& g, std::span<double> grad_weight, std::span<double> grad_bias,
                       bool need_input_grad = true);

/// Fractional-strided (transposed) convolution, the adjoint of conv2d with the
/// same geometry; output size is exactly stride * input size. Weight layout
/// (in, out, k, k) where `in` is the transposed layer's input channel count.
Shape conv_transpose_output_shape(const Shape& in, const ConvGeometry& g);
Tensor conv_transpose2d_forward(const Tensor& x, std::span<const double> weight, std::span<const double> bias,
                                const ConvGeometry& g);
Tensor conv_transpose2d_backward(const Tensor& x, const Tensor& grad_out, std::span<const double> weight,
                                 const ConvGeometry& g, std::span<double> grad_weight, std::span<double> grad_bias,
                                 bool need_input_grad = true);

struct InstanceNormCache {
    Tensor normalized;
    std::vector<double> inv_std;
};

inline constexpr double kInstanceNormEps = 1e-5;

Tensor instance_norm_forward(const Tensor& x, InstanceNormCache& cache);
Tensor instance_norm_backward(const Tensor& grad_out, const InstanceNormCache& cache);

void relu_inplace(Tensor& x);
/// Masks `grad` in place where the forward output was not positive.
void relu_backward_inplace(Tensor& grad, const Tensor& output);

/// Bilinear x2 up-scaling with half-pixel centres and edge clamping.
Tensor upsample_bilinear2x(const Tensor& x);
Tensor upsample_bilinear2x_backward(const Tensor& grad_out, const Shape& input_shape);

Tensor concat_channels(const Tensor& a, const Tensor& b);
/// Splits a gradient into the first `first_channels` channels and the rest.
std::pair<Tensor, Tensor> split_channels(const Tensor& grad, int first_channels);

std::vector<double> global_average_pool(const Tensor& x);
Tensor global_average_pool_backward(std::span<const double> grad_out, const Shape& input_shape);

/// y = W x + b with W of shape (out, in).
std::vector<double> linear_forward(std::span<const double> x, std::span<const double> weight,
                                   std::span<const double> bias, int out_features);
std::vector<double> linear_backward(std::span<const double> x, std::span<const double> grad_out,
                                    std::span<const double> weight, std::span<double> grad_weight,
                                    std::span<double> grad_bias);

std::vector<double> softmax(std::span<const double> logits);

}  // namespace hdcg::nn
