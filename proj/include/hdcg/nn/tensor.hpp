#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace hdcg::nn {

struct Shape {
    int channels = 0;
    int height = 0;
    int width = 0;

    std::size_t count() const noexcept {
        return static_cast<std::size_t>(channels) * height * width;
    }
    std::size_t plane() const noexcept { return static_cast<std::size_t>(height) * width; }
    std::string str() const;

    friend bool operator==(const Shape&, const Shape&) = default;
};

/// Single-sample CHW activation tensor.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0) : shape_(shape), data_(shape.count(), fill) {}
    Tensor(Shape shape, std::vector<double> data);

    const Shape& shape() const noexcept { return shape_; }
    int channels() const noexcept { return shape_.channels; }
    int height() const noexcept { return shape_.height; }
    int width() const noexcept { return shape_.width; }
    std::size_t size() const noexcept { return data_.size(); }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    std::vector<double>& storage() noexcept { return data_; }

    std::span<double> channel(int c) noexcept { return {data_.data() + c * shape_.plane(), shape_.plane()}; }
    std::span<const double> channel(int c) const noexcept {
        return {data_.data() + c * shape_.plane(), shape_.plane()};
    }

    double& at(int c, int y, int x) noexcept { return data_[(c * shape_.plane()) + y * shape_.width + x]; }
    double at(int c, int y, int x) const noexcept { return data_[(c * shape_.plane()) + y * shape_.width + x]; }

    Tensor& operator+=(const Tensor& other);

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

/// A named, shaped block of trainable values.
struct Parameter {
    std::string name;
    std::vector<int> shape;
    std::vector<double> value;

    friend bool operator==(const Parameter&, const Parameter&) = default;
};

/// Ordered parameter list of one network; gradients use the same ordering.
class ParameterSet {
public:
    int add(std::string name, std::vector<int> shape);

    std::size_t size() const noexcept { return params_.size(); }
    std::size_t scalar_count() const noexcept;

    Parameter& operator[](std::size_t i) { return params_[i]; }
    const Parameter& operator[](std::size_t i) const { return params_[i]; }
    const Parameter* find(const std::string& name) const;

    auto begin() noexcept { return params_.begin(); }
    auto end() noexcept { return params_.end(); }
    auto begin() const noexcept { return params_.begin(); }
    auto end() const noexcept { return params_.end(); }

    friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

private:
    std::vector<Parameter> params_;
};

using Gradients = std::vector<std::vector<double>>;

Gradients zero_gradients(const ParameterSet& params);

}  // namespace hdcg::nn
