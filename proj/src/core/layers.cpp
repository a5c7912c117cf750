// Copyright (c) 2026 the wbcdetect authors
// SPDX-License-Identifier: Apache-2.0

#include "core/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace wbc {

void Layer::require_forward(bool has_forward) const {
    if (!has_forward)
        throw std::logic_error(kind() + ": backward called before forward");
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride_, int pad_,
               const std::string& name)
    : weights(name + ".weight", Tensor({out_channels, in_channels, kernel, kernel})),
      bias(name + ".bias", Tensor({out_channels})),
      stride(stride_),
      pad(pad_),
      in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel) {
    if (kernel < 1 || stride_ < 1 || pad_ < 0)
        throw std::invalid_argument("conv2d: kernel >= 1, stride >= 1, pad >= 0 required");
}

void Conv2d::init_xavier(Rng& rng) {
    const int fan_in = in_channels_ * kernel_ * kernel_;
    const int fan_out = out_channels_ * kernel_ * kernel_;
    const double s = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& w : weights.value.values()) w = rng.uniform(-s, s);
    bias.value.zero();
}

Tensor Conv2d::forward(const Tensor& input) {
    if (input.ndim() != 3 || input.dim(0) != in_channels_)
        throw std::invalid_argument("conv2d: input shape " + input.shape_str() +
                                    " does not match " + std::to_string(in_channels_) +
                                    " input channels");
    const int h = input.dim(1), w = input.dim(2);
    if (h + 2 * pad < kernel_ || w + 2 * pad < kernel_)
        throw std::invalid_argument("conv2d: kernel larger than padded input");
    const int oh = (h + 2 * pad - kernel_) / stride + 1;
    const int ow = (w + 2 * pad - kernel_) / stride + 1;

    input_ = input;
    has_forward_ = true;

    Tensor out({out_channels_, oh, ow});
    const double* in = input.data();
    const double* wt = weights.value.data();
    double* o = out.data();
    for (int k = 0; k < out_channels_; ++k) {
        const double b = bias.value[static_cast<std::size_t>(k)];
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double acc = b;
                const int y0 = oy * stride - pad;
                const int x0 = ox * stride - pad;
                for (int c = 0; c < in_channels_; ++c) {
                    const double* in_c = in + static_cast<std::size_t>(c) * h * w;
                    const double* w_kc =
                        wt + (static_cast<std::size_t>(k) * in_channels_ + c) * kernel_ * kernel_;
                    for (int ky = 0; ky < kernel_; ++ky) {
                        const int y = y0 + ky;
                        if (y < 0 || y >= h) continue;
                        const double* row = in_c + static_cast<std::size_t>(y) * w;
                        const double* wrow = w_kc + static_cast<std::size_t>(ky) * kernel_;
                        for (int kx = 0; kx < kernel_; ++kx) {
                            const int x = x0 + kx;
                            if (x < 0 || x >= w) continue;
                            acc += wrow[kx] * row[x];
                        }
                    }
                }
                o[(static_cast<std::size_t>(k) * oh + oy) * ow + ox] = acc;
            }
        }
    }
    return out;
}

Tensor Conv2d::backward(const Tensor& grad_output) {
    require_forward(has_forward_);
    has_forward_ = false;

    const int h = input_.dim(1), w = input_.dim(2);
    const int oh = grad_output.dim(1), ow = grad_output.dim(2);

    Tensor grad_input(input_.shape());
    const double* in = input_.data();
    const double* wt = weights.value.data();
    const double* g = grad_output.data();
    double* gi = grad_input.data();
    double* gw = weights.grad.data();
    double* gb = bias.grad.data();

    for (int k = 0; k < out_channels_; ++k) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                const double go = g[(static_cast<std::size_t>(k) * oh + oy) * ow + ox];
                if (go == 0.0) continue;
                if (!bias.frozen) gb[k] += go;
                const int y0 = oy * stride - pad;
                const int x0 = ox * stride - pad;
                for (int c = 0; c < in_channels_; ++c) {
                    const std::size_t in_off = static_cast<std::size_t>(c) * h * w;
                    const std::size_t w_off =
                        (static_cast<std::size_t>(k) * in_channels_ + c) * kernel_ * kernel_;
                    for (int ky = 0; ky < kernel_; ++ky) {
                        const int y = y0 + ky;
                        if (y < 0 || y >= h) continue;
                        for (int kx = 0; kx < kernel_; ++kx) {
                            const int x = x0 + kx;
                            if (x < 0 || x >= w) continue;
                            const std::size_t ii = in_off + static_cast<std::size_t>(y) * w + x;
                            const std::size_t wi = w_off + static_cast<std::size_t>(ky) * kernel_ + kx;
                            if (!weights.frozen) gw[wi] += go * in[ii];
                            gi[ii] += go * wt[wi];
                        }
                    }
                }
            }
        }
    }
    return grad_input;
}

// ---------------------------------------------------------------------------
// Relu

Tensor Relu::forward(const Tensor& input) {
    input_ = input;
    has_forward_ = true;
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0 ? input[i] : 0.0;
    return out;
}

Tensor Relu::backward(const Tensor& grad_output) {
    require_forward(has_forward_);
    has_forward_ = false;
    Tensor grad(input_.shape());
    for (std::size_t i = 0; i < grad.size(); ++i)
        grad[i] = input_[i] > 0.0 ? grad_output[i] : 0.0;
    return grad;
}

// ---------------------------------------------------------------------------
// MaxPool2d

MaxPool2d::MaxPool2d(int window, int stride) : window_(window), stride_(stride) {
    if (window < 1 || stride < 1)
        throw std::invalid_argument("max_pool2d: window and stride must be >= 1");
}

Tensor MaxPool2d::forward(const Tensor& input) {
    const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
    if (window_ > h || window_ > w)
        throw std::invalid_argument("max_pool2d: window larger than input");
    const int oh = (h - window_) / stride_ + 1;
    const int ow = (w - window_) / stride_ + 1;

    input_shape_ = input.shape();
    argmax_.assign(static_cast<std::size_t>(c) * oh * ow, 0);
    has_forward_ = true;

    Tensor out({c, oh, ow});
    const double* in = input.data();
    double* o = out.data();
    for (int ch = 0; ch < c; ++ch) {
        const double* in_c = in + static_cast<std::size_t>(ch) * h * w;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double best = -std::numeric_limits<double>::infinity();
                std::size_t best_i = 0;
                for (int ky = 0; ky < window_; ++ky) {
                    const int y = oy * stride_ + ky;
                    for (int kx = 0; kx < window_; ++kx) {
                        const int x = ox * stride_ + kx;
                        const std::size_t i = static_cast<std::size_t>(y) * w + x;
                        if (in_c[i] > best) {
                            best = in_c[i];
                            best_i = i;
                        }
                    }
                }
                const std::size_t oi = (static_cast<std::size_t>(ch) * oh + oy) * ow + ox;
                o[oi] = best;
                argmax_[oi] = static_cast<std::size_t>(ch) * h * w + best_i;
            }
        }
    }
    return out;
}

Tensor MaxPool2d::backward(const Tensor& grad_output) {
    require_forward(has_forward_);
    has_forward_ = false;
    Tensor grad(input_shape_);
    for (std::size_t i = 0; i < grad_output.size(); ++i) grad[argmax_[i]] += grad_output[i];
    return grad;
}

// ---------------------------------------------------------------------------
// FullyConnected

FullyConnected::FullyConnected(int in_features, int out_features, const std::string& name)
    : weights(name + ".weight", Tensor({out_features, in_features})),
      bias(name + ".bias", Tensor({out_features})),
      in_features_(in_features),
      out_features_(out_features) {}

void FullyConnected::init_xavier(Rng& rng) {
    const double s = std::sqrt(6.0 / (in_features_ + out_features_));
    for (auto& w : weights.value.values()) w = rng.uniform(-s, s);
    bias.value.zero();
}

Tensor FullyConnected::forward(const Tensor& input) {
    if (input.size() != static_cast<std::size_t>(in_features_))
        throw std::invalid_argument("fully_connected: input has " + std::to_string(input.size()) +
                                    " elements, expected " + std::to_string(in_features_));
    input_ = input;
    input_shape_ = input.shape();
    has_forward_ = true;

    Tensor out({out_features_});
    const double* in = input.data();
    const double* wt = weights.value.data();
    for (int i = 0; i < out_features_; ++i) {
        double acc = bias.value[static_cast<std::size_t>(i)];
        const double* row = wt + static_cast<std::size_t>(i) * in_features_;
        for (int j = 0; j < in_features_; ++j) acc += row[j] * in[j];
        out[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

Tensor FullyConnected::backward(const Tensor& grad_output) {
    require_forward(has_forward_);
    has_forward_ = false;

    Tensor grad_input(input_shape_);
    const double* g = grad_output.data();
    const double* in = input_.data();
    const double* wt = weights.value.data();
    double* gi = grad_input.data();
    double* gw = weights.grad.data();
    double* gb = bias.grad.data();
    for (int i = 0; i < out_features_; ++i) {
        const double go = g[i];
        const std::size_t row = static_cast<std::size_t>(i) * in_features_;
        if (!bias.frozen) gb[i] += go;
        for (int j = 0; j < in_features_; ++j) {
            if (!weights.frozen) gw[row + j] += go * in[j];
            gi[j] += go * wt[row + j];
        }
    }
    return grad_input;
}

// ---------------------------------------------------------------------------
// Softmax

Tensor Softmax::forward(const Tensor& input) {
    output_ = Tensor(input.shape(), softmax_stable(input.values()));
    has_forward_ = true;
    return output_;
}

Tensor Softmax::backward(const Tensor& grad_output) {
    require_forward(has_forward_);
    has_forward_ = false;
    double dot = 0.0;
    for (std::size_t i = 0; i < output_.size(); ++i) dot += grad_output[i] * output_[i];
    Tensor grad(output_.shape());
    for (std::size_t i = 0; i < output_.size(); ++i)
        grad[i] = output_[i] * (grad_output[i] - dot);
    return grad;
}

// ---------------------------------------------------------------------------
// Sequential

Tensor Sequential::forward(const Tensor& input) {
    Tensor x = input;
    for (auto& layer : layers_) x = layer->forward(x);
    has_forward_ = true;
    return x;
}

Tensor Sequential::backward(const Tensor& grad_output) {
    if (!has_forward_) throw std::logic_error("sequential: backward called before forward");
    has_forward_ = false;
    Tensor g = grad_output;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
}

std::vector<Parameter*> Sequential::params() {
    std::vector<Parameter*> out;
    for (auto& layer : layers_)
        for (Parameter* p : layer->params()) out.push_back(p);
    return out;
}

void Sequential::set_frozen(bool frozen) {
    for (Parameter* p : params()) p->frozen = frozen;
}

// ---------------------------------------------------------------------------
// SGD

void sgd_update(const std::vector<Parameter*>& params, double learning_rate) {
    for (Parameter* p : params) {
        if (!p->frozen) {
            double* v = p->value.data();
            const double* g = p->grad.data();
            for (std::size_t i = 0; i < p->value.size(); ++i) v[i] -= learning_rate * g[i];
        }
        p->grad.zero();
    }
}

void sgd_update(const std::vector<ParamGroup>& groups) {
    for (const auto& group : groups) sgd_update(group.params, group.learning_rate);
}

// ---------------------------------------------------------------------------
// losses

std::vector<double> softmax_stable(const std::vector<double>& logits) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

double cross_entropy(const std::vector<double>& probs, int label) {
    return -std::log(std::max(probs[static_cast<std::size_t>(label)], 1e-300));
}

double softmax_cross_entropy(const std::vector<double>& logits, int label,
                             std::vector<double>* grad_logits) {
    const std::vector<double> p = softmax_stable(logits);
    if (grad_logits) {
        grad_logits->assign(p.begin(), p.end());
        (*grad_logits)[static_cast<std::size_t>(label)] -= 1.0;
    }
    return cross_entropy(p, label);
}

double smooth_l1(double x) {
    const double a = std::fabs(x);
    return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

double smooth_l1_grad(double x) {
    if (x > 1.0) return 1.0;
    if (x < -1.0) return -1.0;
    return x;
}

}  // namespace wbc
