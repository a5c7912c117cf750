// Copyright (c) 2026 the wbcdetect authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace wbc {

// A layer owns its parameters and the activations retained by the last
// forward pass. backward() consumes the retained state, accumulates
// parameter gradients (unless frozen) and returns the gradient with
// respect to the layer input.
class Layer {
public:
    virtual ~Layer() = default;

    virtual Tensor forward(const Tensor& input) = 0;
    virtual Tensor backward(const Tensor& grad_output) = 0;
    virtual std::vector<Parameter*> params() { return {}; }
    virtual std::string kind() const = 0;

protected:
    void require_forward(bool has_forward) const;
};

class Conv2d final : public Layer {
public:
    // weights [K,C,kh,kw], bias [K]; zero padding.
    Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad,
           const std::string& name);

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output) override;
    std::vector<Parameter*> params() override { return {&weights, &bias}; }
    std::string kind() const override { return "conv2d"; }

    void init_xavier(Rng& rng);

    Parameter weights;
    Parameter bias;
    int stride = 1;
    int pad = 0;

private:
    int in_channels_, out_channels_, kernel_;
    Tensor input_;
    bool has_forward_ = false;
};

class Relu final : public Layer {
public:
    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output) override;
    std::string kind() const override { return "relu"; }

private:
    Tensor input_;
    bool has_forward_ = false;
};

class MaxPool2d final : public Layer {
public:
    MaxPool2d(int window, int stride);

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output) override;
    std::string kind() const override { return "max_pool2d"; }

    // flat input offsets of each output cell's maximum, for backward routing
    const std::vector<std::size_t>& argmax() const { return argmax_; }

private:
    int window_, stride_;
    std::vector<int> input_shape_;
    std::vector<std::size_t> argmax_;
    bool has_forward_ = false;
};

class FullyConnected final : public Layer {
public:
    // weights [m,n], bias [m]. Accepts any input shape with n elements and
    // flattens it; backward restores the original shape.
    FullyConnected(int in_features, int out_features, const std::string& name);

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output) override;
    std::vector<Parameter*> params() override { return {&weights, &bias}; }
    std::string kind() const override { return "fully_connected"; }

    void init_xavier(Rng& rng);

    Parameter weights;
    Parameter bias;

private:
    int in_features_, out_features_;
    Tensor input_;
    std::vector<int> input_shape_;
    bool has_forward_ = false;
};

class Softmax final : public Layer {
public:
    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output) override;
    std::string kind() const override { return "softmax"; }

private:
    Tensor output_;
    bool has_forward_ = false;
};

// Fixed stack of layers. forward() retains per-layer activations; backward()
// walks them in reverse and rejects calls without a preceding forward.
class Sequential {
public:
    Sequential() = default;

    template <typename L, typename... Args>
    L& emplace(Args&&... args) {
        auto layer = std::make_unique<L>(std::forward<Args>(args)...);
        L& ref = *layer;
        layers_.push_back(std::move(layer));
        return ref;
    }

    Tensor forward(const Tensor& input);
    Tensor backward(const Tensor& grad_output);

    std::vector<Parameter*> params();
    void set_frozen(bool frozen);
    std::size_t layer_count() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_[i]; }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
    bool has_forward_ = false;
};

// value <- value - lr * grad for unfrozen parameters, then all gradients
// are cleared. Frozen parameter bytes are never touched.
void sgd_update(const std::vector<Parameter*>& params, double learning_rate);

struct ParamGroup {
    std::vector<Parameter*> params;
    double learning_rate = 0.0;
};

void sgd_update(const std::vector<ParamGroup>& groups);

// numerically stable softmax (max-subtraction)
std::vector<double> softmax_stable(const std::vector<double>& logits);

// Cross-entropy of a 2-class (or m-class) probability vector against a hard
// label, and its fused gradient with respect to the logits (p - onehot).
double cross_entropy(const std::vector<double>& probs, int label);
double softmax_cross_entropy(const std::vector<double>& logits, int label,
                             std::vector<double>* grad_logits);

// smooth-L1: 0.5 x^2 for |x| < 1, |x| - 0.5 otherwise
double smooth_l1(double x);
double smooth_l1_grad(double x);

}  // namespace wbc
