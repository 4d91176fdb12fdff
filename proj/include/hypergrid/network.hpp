#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hypergrid/errors.hpp"
#include "hypergrid/rng.hpp"
#include "hypergrid/tensor.hpp"

namespace hypergrid {

// Spectral-spatial model: a stack of valid (no padding, unit stride) 3D
// convolution layers followed by a dense classification block. Each conv
// layer owns K kernels; by default a kernel is shared across all input
// feature maps and the per-map results are summed into one output map
// (per_channel_kernels switches to the standard one-kernel-per-channel
// convolution for comparison).
struct NetworkConfig {
    std::size_t patch_width = 7;
    std::size_t patch_height = 7;
    std::size_t bands = 200;
    std::size_t conv_layers = 3;
    std::size_t kernels = 24;
    std::size_t kernel_extent = 3;
    std::vector<std::size_t> dense_widths = {512, 256, 128};
    std::size_t num_classes = 2;
    bool per_channel_kernels = false;
};

// Throws ConfigError if the conv stack would shrink any axis below 1,
// or if the class count / extents are unusable.
void validate(const NetworkConfig& cfg);

struct LevelShape {
    std::size_t maps, x, y, bands;
    bool operator==(const LevelShape&) const = default;
};

// Input shape followed by the output shape of every conv layer.
std::vector<LevelShape> shape_trace(const NetworkConfig& cfg);

// Length of the flattened conv output (K * x * y * bands after the last layer).
std::size_t flatten_length(const NetworkConfig& cfg);

// Trainable parameter count per layer (conv layers first, then dense).
std::vector<std::size_t> layer_param_counts(const NetworkConfig& cfg);
std::size_t param_count(const NetworkConfig& cfg);

template <typename T>
struct Conv3dLayerT {
    // (K, e, e, e) when the kernel is shared across input maps,
    // (K, C, e, e, e) in per-channel mode.
    TensorT<T> weights;
    std::vector<T> biases;
};

template <typename T>
struct DenseLayerT {
    TensorT<T> weights;  // (in_features, out_features), row-major
    std::vector<T> biases;
};

template <typename T>
struct ModelParamsT {
    std::vector<Conv3dLayerT<T>> conv;
    std::vector<DenseLayerT<T>> dense;
};

using Conv3dLayer = Conv3dLayerT<float>;
using DenseLayer = DenseLayerT<float>;
using ModelParams = ModelParamsT<float>;

// Visits every parameter array in declaration order: conv weights, conv
// biases per layer, then dense weights, dense biases per layer. Checkpoints,
// Adam state and gradient flattening all rely on this order.
template <typename T, typename F>
void for_each_block(ModelParamsT<T>& p, F&& f) {
    for (auto& layer : p.conv) {
        f(layer.weights.values());
        f(layer.biases);
    }
    for (auto& layer : p.dense) {
        f(layer.weights.values());
        f(layer.biases);
    }
}

template <typename T, typename F>
void for_each_block(const ModelParamsT<T>& p, F&& f) {
    for (const auto& layer : p.conv) {
        f(layer.weights.values());
        f(layer.biases);
    }
    for (const auto& layer : p.dense) {
        f(layer.weights.values());
        f(layer.biases);
    }
}

// Human-readable block names in the same order as for_each_block.
std::vector<std::string> block_names(const NetworkConfig& cfg);

namespace detail {

template <typename T>
void check_conv_input(const TensorT<T>& input, const TensorT<T>& weights) {
    if (input.rank() != 4)
        throw std::invalid_argument("conv3d: input must be (channels, x, y, bands)");
    if (weights.rank() != 4 && weights.rank() != 5)
        throw std::invalid_argument("conv3d: weights must be rank 4 (shared) or 5 (per channel)");
    const std::size_t e = weights.extent(weights.rank() - 1);
    if (weights.extent(weights.rank() - 2) != e || weights.extent(weights.rank() - 3) != e)
        throw std::invalid_argument("conv3d: kernels must be cubic");
    if (weights.rank() == 5 && weights.extent(1) != input.extent(0))
        throw std::invalid_argument("conv3d: per-channel weights expect " +
                                    std::to_string(input.extent(0)) + " channels");
    for (std::size_t a = 1; a < 4; ++a) {
        if (input.extent(a) < e)
            throw std::invalid_argument("conv3d: input extent " + std::to_string(input.extent(a)) +
                                        " smaller than kernel extent " + std::to_string(e));
    }
}

// Sum of all input channels; the shared-kernel scheme convolves this once
// per kernel since sum_c conv(x_c, w) == conv(sum_c x_c, w).
template <typename T>
TensorT<T> channel_sum(const TensorT<T>& input) {
    const std::size_t C = input.extent(0);
    const std::size_t plane = input.size() / C;
    TensorT<T> out({input.extent(1), input.extent(2), input.extent(3)});
    const T* src = input.data();
    T* dst = out.data();
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < plane; ++i) dst[i] += src[c * plane + i];
    return out;
}

// Valid 3D correlation of a single volume with a single cubic kernel,
// accumulated into out (which already holds the bias).
template <typename T>
void conv_accumulate(const T* vol, std::size_t X, std::size_t Y, std::size_t L, const T* kernel,
                     std::size_t e, T* out) {
    const std::size_t OX = X - e + 1, OY = Y - e + 1, OL = L - e + 1;
    for (std::size_t dx = 0; dx < e; ++dx) {
        for (std::size_t dy = 0; dy < e; ++dy) {
            for (std::size_t dl = 0; dl < e; ++dl) {
                const T w = kernel[(dx * e + dy) * e + dl];
                for (std::size_t ox = 0; ox < OX; ++ox) {
                    for (std::size_t oy = 0; oy < OY; ++oy) {
                        const T* src = vol + ((ox + dx) * Y + (oy + dy)) * L + dl;
                        T* dst = out + (ox * OY + oy) * OL;
                        for (std::size_t ol = 0; ol < OL; ++ol) dst[ol] += w * src[ol];
                    }
                }
            }
        }
    }
}

}  // namespace detail

// out[k] = sum_c conv(input[c], kernel_k) + bias_k (shared kernels), or the
// standard per-channel convolution when weights carry a channel axis.
template <typename T>
TensorT<T> conv3d_forward(const TensorT<T>& input, const Conv3dLayerT<T>& layer) {
    detail::check_conv_input(input, layer.weights);
    const bool shared = layer.weights.rank() == 4;
    const std::size_t K = layer.weights.extent(0);
    const std::size_t e = layer.weights.extent(shared ? 1 : 2);
    const std::size_t C = input.extent(0);
    const std::size_t X = input.extent(1), Y = input.extent(2), L = input.extent(3);
    const std::size_t OX = X - e + 1, OY = Y - e + 1, OL = L - e + 1;
    if (layer.biases.size() != K) throw std::invalid_argument("conv3d: bias count != kernel count");

    TensorT<T> out({K, OX, OY, OL});
    const std::size_t out_plane = OX * OY * OL;
    const std::size_t in_plane = X * Y * L;
    const std::size_t ksize = e * e * e;

    if (shared) {
        TensorT<T> summed;
        const T* vol = input.data();
        if (C > 1) {
            summed = detail::channel_sum(input);
            vol = summed.data();
        }
        for (std::size_t k = 0; k < K; ++k) {
            T* dst = out.data() + k * out_plane;
            std::fill(dst, dst + out_plane, layer.biases[k]);
            detail::conv_accumulate(vol, X, Y, L, layer.weights.data() + k * ksize, e, dst);
        }
    } else {
        for (std::size_t k = 0; k < K; ++k) {
            T* dst = out.data() + k * out_plane;
            std::fill(dst, dst + out_plane, layer.biases[k]);
            for (std::size_t c = 0; c < C; ++c) {
                detail::conv_accumulate(input.data() + c * in_plane, X, Y, L,
                                        layer.weights.data() + (k * C + c) * ksize, e, dst);
            }
        }
    }
    return out;
}

template <typename T>
struct Conv3dGradsT {
    TensorT<T> input;
    TensorT<T> weights;
    std::vector<T> biases;
};

namespace detail {

template <typename T>
void conv_grad_kernel(const T* vol, std::size_t X, std::size_t Y, std::size_t L, const T* up,
                      std::size_t e, T* grad_kernel) {
    const std::size_t OX = X - e + 1, OY = Y - e + 1, OL = L - e + 1;
    for (std::size_t dx = 0; dx < e; ++dx) {
        for (std::size_t dy = 0; dy < e; ++dy) {
            for (std::size_t dl = 0; dl < e; ++dl) {
                T acc = T{};
                for (std::size_t ox = 0; ox < OX; ++ox) {
                    for (std::size_t oy = 0; oy < OY; ++oy) {
                        const T* u = up + (ox * OY + oy) * OL;
                        const T* src = vol + ((ox + dx) * Y + (oy + dy)) * L + dl;
                        for (std::size_t ol = 0; ol < OL; ++ol) acc += u[ol] * src[ol];
                    }
                }
                grad_kernel[(dx * e + dy) * e + dl] += acc;
            }
        }
    }
}

// Scatter upstream through the kernel back onto the input volume.
template <typename T>
void conv_grad_input(T* grad_vol, std::size_t X, std::size_t Y, std::size_t L, const T* up,
                     const T* kernel, std::size_t e) {
    const std::size_t OX = X - e + 1, OY = Y - e + 1, OL = L - e + 1;
    for (std::size_t dx = 0; dx < e; ++dx) {
        for (std::size_t dy = 0; dy < e; ++dy) {
            for (std::size_t dl = 0; dl < e; ++dl) {
                const T w = kernel[(dx * e + dy) * e + dl];
                for (std::size_t ox = 0; ox < OX; ++ox) {
                    for (std::size_t oy = 0; oy < OY; ++oy) {
                        const T* u = up + (ox * OY + oy) * OL;
                        T* dst = grad_vol + ((ox + dx) * Y + (oy + dy)) * L + dl;
                        for (std::size_t ol = 0; ol < OL; ++ol) dst[ol] += w * u[ol];
                    }
                }
            }
        }
    }
}

}  // namespace detail

namespace detail {

// Core of the conv backward pass: adds weight/bias gradients into an
// accumulator (so mini-batches need no per-sample gradient buffers) and
// returns the gradient wrt the input stack.
template <typename T>
TensorT<T> conv3d_backward_acc(const TensorT<T>& input, const Conv3dLayerT<T>& layer,
                               const TensorT<T>& upstream, TensorT<T>& gw_acc,
                               std::vector<T>& gb_acc) {
    check_conv_input(input, layer.weights);
    const bool shared = layer.weights.rank() == 4;
    const std::size_t K = layer.weights.extent(0);
    const std::size_t e = layer.weights.extent(shared ? 1 : 2);
    const std::size_t C = input.extent(0);
    const std::size_t X = input.extent(1), Y = input.extent(2), L = input.extent(3);
    const std::size_t OX = X - e + 1, OY = Y - e + 1, OL = L - e + 1;
    if (upstream.shape() != std::vector<std::size_t>{K, OX, OY, OL})
        throw std::invalid_argument("conv3d_backward: upstream shape mismatch");
    if (!gw_acc.same_shape(layer.weights) || gb_acc.size() != K)
        throw std::invalid_argument("conv3d_backward: accumulator shape mismatch");

    TensorT<T> grad_input(input.shape());
    const std::size_t out_plane = OX * OY * OL;
    const std::size_t in_plane = X * Y * L;
    const std::size_t ksize = e * e * e;

    for (std::size_t k = 0; k < K; ++k) {
        const T* u = upstream.data() + k * out_plane;
        T acc = T{};
        for (std::size_t i = 0; i < out_plane; ++i) acc += u[i];
        gb_acc[k] += acc;
    }

    if (shared) {
        TensorT<T> summed;
        const T* vol = input.data();
        if (C > 1) {
            summed = channel_sum(input);
            vol = summed.data();
        }
        TensorT<T> grad_sum({X, Y, L});
        for (std::size_t k = 0; k < K; ++k) {
            const T* u = upstream.data() + k * out_plane;
            conv_grad_kernel(vol, X, Y, L, u, e, gw_acc.data() + k * ksize);
            conv_grad_input(grad_sum.data(), X, Y, L, u, layer.weights.data() + k * ksize, e);
        }
        // d(sum_c x_c)/dx_c = 1, so every channel receives the same gradient.
        for (std::size_t c = 0; c < C; ++c)
            std::copy(grad_sum.data(), grad_sum.data() + in_plane, grad_input.data() + c * in_plane);
    } else {
        for (std::size_t k = 0; k < K; ++k) {
            const T* u = upstream.data() + k * out_plane;
            for (std::size_t c = 0; c < C; ++c) {
                conv_grad_kernel(input.data() + c * in_plane, X, Y, L, u, e,
                                 gw_acc.data() + (k * C + c) * ksize);
                conv_grad_input(grad_input.data() + c * in_plane, X, Y, L, u,
                                layer.weights.data() + (k * C + c) * ksize, e);
            }
        }
    }
    return grad_input;
}

}  // namespace detail

// Exact analytic gradients of conv3d_forward. grad_biases[k] is the sum of
// the upstream over output map k.
template <typename T>
Conv3dGradsT<T> conv3d_backward(const TensorT<T>& input, const Conv3dLayerT<T>& layer,
                                const TensorT<T>& upstream) {
    Conv3dGradsT<T> g;
    g.weights = TensorT<T>(layer.weights.shape());
    g.biases.assign(layer.biases.size(), T{});
    g.input = detail::conv3d_backward_acc(input, layer, upstream, g.weights, g.biases);
    return g;
}

// Elementwise max(0, x). The subgradient at exactly 0 is taken as 0.
template <typename T>
TensorT<T> relu(const TensorT<T>& t) {
    TensorT<T> out(t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = t[i] > T{} ? t[i] : T{};
    return out;
}

template <typename T>
std::vector<T> relu(const std::vector<T>& x) {
    std::vector<T> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T{} ? x[i] : T{};
    return out;
}

template <typename T>
TensorT<T> relu_backward(const TensorT<T>& pre, const TensorT<T>& upstream) {
    if (!pre.same_shape(upstream)) throw std::invalid_argument("relu_backward: shape mismatch");
    TensorT<T> out(pre.shape());
    for (std::size_t i = 0; i < pre.size(); ++i) out[i] = pre[i] > T{} ? upstream[i] : T{};
    return out;
}

template <typename T>
std::vector<T> relu_backward(const std::vector<T>& pre, const std::vector<T>& upstream) {
    if (pre.size() != upstream.size()) throw std::invalid_argument("relu_backward: shape mismatch");
    std::vector<T> out(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) out[i] = pre[i] > T{} ? upstream[i] : T{};
    return out;
}

// y = xW + b
template <typename T>
std::vector<T> dense_forward(const std::vector<T>& x, const DenseLayerT<T>& layer) {
    const std::size_t in = layer.weights.extent(0), out_n = layer.weights.extent(1);
    if (x.size() != in)
        throw std::invalid_argument("dense: input length " + std::to_string(x.size()) +
                                    " != in_features " + std::to_string(in));
    if (layer.biases.size() != out_n) throw std::invalid_argument("dense: bias length mismatch");
    std::vector<T> y(layer.biases);
    const T* W = layer.weights.data();
    for (std::size_t i = 0; i < in; ++i) {
        const T xi = x[i];
        const T* row = W + i * out_n;
        for (std::size_t j = 0; j < out_n; ++j) y[j] += xi * row[j];
    }
    return y;
}

template <typename T>
struct DenseGradsT {
    std::vector<T> input;
    TensorT<T> weights;
    std::vector<T> biases;
};

template <typename T>
DenseGradsT<T> dense_backward(const std::vector<T>& x, const DenseLayerT<T>& layer,
                              const std::vector<T>& upstream) {
    const std::size_t in = layer.weights.extent(0), out_n = layer.weights.extent(1);
    if (x.size() != in || upstream.size() != out_n)
        throw std::invalid_argument("dense_backward: shape mismatch");
    DenseGradsT<T> g;
    g.input.assign(in, T{});
    g.weights = TensorT<T>(layer.weights.shape());
    g.biases = upstream;
    const T* W = layer.weights.data();
    T* gw = g.weights.data();
    for (std::size_t i = 0; i < in; ++i) {
        const T* row = W + i * out_n;
        T* grow = gw + i * out_n;
        T acc = T{};
        const T xi = x[i];
        for (std::size_t j = 0; j < out_n; ++j) {
            acc += upstream[j] * row[j];
            grow[j] = xi * upstream[j];
        }
        g.input[i] = acc;
    }
    return g;
}

template <typename T>
struct SoftmaxLossT {
    T loss;
    std::vector<T> grad;
};

// Fused softmax + cross-entropy with max-subtraction; grad = softmax - onehot.
template <typename T>
SoftmaxLossT<T> softmax_cross_entropy(std::span<const T> logits, std::size_t label) {
    if (logits.empty()) throw std::invalid_argument("softmax: empty logits");
    if (label >= logits.size())
        throw std::invalid_argument("softmax: label " + std::to_string(label) + " out of range for " +
                                    std::to_string(logits.size()) + " classes");
    const T max = *std::max_element(logits.begin(), logits.end());
    T z = T{};
    std::vector<T> ex(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        ex[i] = std::exp(logits[i] - max);
        z += ex[i];
    }
    SoftmaxLossT<T> out;
    out.loss = std::log(z) - (logits[label] - max);
    out.grad.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i)
        out.grad[i] = ex[i] / z - (i == label ? T{1} : T{0});
    return out;
}

template <typename T>
struct ForwardCacheT {
    std::vector<TensorT<T>> conv_in;    // input stack of each conv layer
    std::vector<TensorT<T>> conv_pre;   // pre-ReLU conv outputs
    std::vector<std::vector<T>> dense_in;
    std::vector<std::vector<T>> dense_pre;
};

// Full model: conv layers with ReLU, flatten in (map, x, y, band) row-major
// order, dense block with ReLU between hidden layers, raw scores out.
template <typename T>
std::vector<T> forward(const ModelParamsT<T>& params, const NetworkConfig& cfg,
                       const TensorT<T>& patch, ForwardCacheT<T>* cache = nullptr) {
    if (patch.shape() != std::vector<std::size_t>{cfg.patch_width, cfg.patch_height, cfg.bands})
        throw std::invalid_argument("forward: patch shape mismatch");
    if (params.conv.size() != cfg.conv_layers || params.dense.size() != cfg.dense_widths.size() + 1)
        throw std::invalid_argument("forward: parameter layout does not match config");

    TensorT<T> stack({1, cfg.patch_width, cfg.patch_height, cfg.bands}, patch.values());
    for (const auto& layer : params.conv) {
        if (cache) cache->conv_in.push_back(stack);
        TensorT<T> pre = conv3d_forward(stack, layer);
        if (cache) cache->conv_pre.push_back(pre);
        stack = relu(pre);
    }

    std::vector<T> x = stack.values();
    const std::size_t n_dense = params.dense.size();
    for (std::size_t d = 0; d < n_dense; ++d) {
        if (cache) cache->dense_in.push_back(x);
        std::vector<T> pre = dense_forward(x, params.dense[d]);
        if (cache) cache->dense_pre.push_back(pre);
        x = (d + 1 < n_dense) ? relu(pre) : std::move(pre);
    }
    return x;
}

template <typename T>
ModelParamsT<T> zeros_like(const ModelParamsT<T>& params) {
    ModelParamsT<T> z;
    z.conv.reserve(params.conv.size());
    for (const auto& l : params.conv)
        z.conv.push_back({TensorT<T>(l.weights.shape()), std::vector<T>(l.biases.size(), T{})});
    z.dense.reserve(params.dense.size());
    for (const auto& l : params.dense)
        z.dense.push_back({TensorT<T>(l.weights.shape()), std::vector<T>(l.biases.size(), T{})});
    return z;
}

template <typename T>
void accumulate(ModelParamsT<T>& acc, const ModelParamsT<T>& delta) {
    for (std::size_t l = 0; l < acc.conv.size(); ++l) {
        auto& w = acc.conv[l].weights.values();
        const auto& dw = delta.conv[l].weights.values();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] += dw[i];
        for (std::size_t i = 0; i < acc.conv[l].biases.size(); ++i)
            acc.conv[l].biases[i] += delta.conv[l].biases[i];
    }
    for (std::size_t l = 0; l < acc.dense.size(); ++l) {
        auto& w = acc.dense[l].weights.values();
        const auto& dw = delta.dense[l].weights.values();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] += dw[i];
        for (std::size_t i = 0; i < acc.dense[l].biases.size(); ++i)
            acc.dense[l].biases[i] += delta.dense[l].biases[i];
    }
}

template <typename T>
void scale(ModelParamsT<T>& params, T factor) {
    for_each_block(params, [factor](std::vector<T>& block) {
        for (T& v : block) v *= factor;
    });
}

// Backprop through the cached forward pass; returns gradients shaped like the
// parameters.
template <typename T>
ModelParamsT<T> backward(const ModelParamsT<T>& params, const NetworkConfig& /*cfg*/,
                         const ForwardCacheT<T>& cache, const std::vector<T>& score_grad) {
    ModelParamsT<T> grads = zeros_like(params);

    std::vector<T> up = score_grad;
    for (std::size_t d = params.dense.size(); d-- > 0;) {
        if (d + 1 < params.dense.size()) up = relu_backward(cache.dense_pre[d], up);
        DenseGradsT<T> g = dense_backward(cache.dense_in[d], params.dense[d], up);
        grads.dense[d].weights = std::move(g.weights);
        grads.dense[d].biases = std::move(g.biases);
        up = std::move(g.input);
    }

    TensorT<T> up_stack(cache.conv_pre.back().shape(), std::move(up));
    for (std::size_t l = params.conv.size(); l-- > 0;) {
        TensorT<T> up_pre = relu_backward(cache.conv_pre[l], up_stack);
        Conv3dGradsT<T> g = conv3d_backward(cache.conv_in[l], params.conv[l], up_pre);
        grads.conv[l].weights = std::move(g.weights);
        grads.conv[l].biases = std::move(g.biases);
        up_stack = std::move(g.input);
    }
    return grads;
}

template <typename T>
struct LossAndGradsT {
    T loss;
    ModelParamsT<T> grads;
};

template <typename T>
LossAndGradsT<T> loss_and_grads(const ModelParamsT<T>& params, const NetworkConfig& cfg,
                                const TensorT<T>& patch, std::size_t label) {
    ForwardCacheT<T> cache;
    std::vector<T> scores = forward(params, cfg, patch, &cache);
    SoftmaxLossT<T> sm = softmax_cross_entropy(std::span<const T>(scores), label);
    return {sm.loss, backward(params, cfg, cache, sm.grad)};
}

template <typename T>
T model_loss(const ModelParamsT<T>& params, const NetworkConfig& cfg, const TensorT<T>& patch,
             std::size_t label) {
    std::vector<T> scores = forward(params, cfg, patch);
    return softmax_cross_entropy(std::span<const T>(scores), label).loss;
}

// Weights uniform in [-s, s] with s = sqrt(6 / fan_in); biases zero.
// fan_in = e^3 * input_channels for conv layers, in_features for dense.
template <typename T>
ModelParamsT<T> init_params(const NetworkConfig& cfg, SeededRng& rng) {
    validate(cfg);
    ModelParamsT<T> p;
    const std::size_t e = cfg.kernel_extent;
    std::size_t channels = 1;
    for (std::size_t l = 0; l < cfg.conv_layers; ++l) {
        const double s = std::sqrt(6.0 / static_cast<double>(e * e * e * channels));
        std::vector<std::size_t> wshape =
            cfg.per_channel_kernels
                ? std::vector<std::size_t>{cfg.kernels, channels, e, e, e}
                : std::vector<std::size_t>{cfg.kernels, e, e, e};
        TensorT<T> w(wshape);
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<T>(rng.uniform(-s, s));
        p.conv.push_back({std::move(w), std::vector<T>(cfg.kernels, T{})});
        channels = cfg.kernels;
    }
    std::size_t in = flatten_length(cfg);
    std::vector<std::size_t> outs(cfg.dense_widths);
    outs.push_back(cfg.num_classes);
    for (std::size_t width : outs) {
        const double s = std::sqrt(6.0 / static_cast<double>(in));
        TensorT<T> w({in, width});
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<T>(rng.uniform(-s, s));
        p.dense.push_back({std::move(w), std::vector<T>(width, T{})});
        in = width;
    }
    return p;
}

template <typename T>
struct AdamStateT {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    std::vector<std::vector<T>> m, v;

    static AdamStateT moments_for(const ModelParamsT<T>& params) {
        AdamStateT st;
        for_each_block(params, [&st](const std::vector<T>& block) {
            st.m.emplace_back(block.size(), T{});
            st.v.emplace_back(block.size(), T{});
        });
        return st;
    }
};

using AdamState = AdamStateT<float>;

// Standard Adam with bias correction.
template <typename T>
void adam_step(ModelParamsT<T>& params, const ModelParamsT<T>& grads, AdamStateT<T>& state) {
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    std::size_t bi = 0;
    std::vector<const std::vector<T>*> grad_blocks;
    for_each_block(grads, [&grad_blocks](const std::vector<T>& block) { grad_blocks.push_back(&block); });
    if (grad_blocks.size() != state.m.size())
        throw std::invalid_argument("adam: gradient layout does not match state");
    for_each_block(params, [&](std::vector<T>& block) {
        const std::vector<T>& g = *grad_blocks[bi];
        if (g.size() != block.size()) throw std::invalid_argument("adam: gradient shape mismatch");
        std::vector<T>& m = state.m[bi];
        std::vector<T>& v = state.v[bi];
        for (std::size_t i = 0; i < block.size(); ++i) {
            const double gi = static_cast<double>(g[i]);
            const double mi = state.beta1 * static_cast<double>(m[i]) + (1.0 - state.beta1) * gi;
            const double vi = state.beta2 * static_cast<double>(v[i]) + (1.0 - state.beta2) * gi * gi;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            block[i] -= static_cast<T>(state.learning_rate * (mi / bc1) / (std::sqrt(vi / bc2) + state.epsilon));
        }
        ++bi;
    });
}

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string block;
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

// Central finite differences of the full loss wrt every parameter.
ModelParamsT<double> fd_gradients(const NetworkConfig& cfg, const ModelParamsT<double>& params,
                                  const TensorD& patch, std::size_t label, double eps);

GradCheckResult max_relative_error(const NetworkConfig& cfg, const ModelParamsT<double>& analytic,
                                   const ModelParamsT<double>& numeric);

// Builds a seeded random model + patch and compares every analytic parameter
// gradient of the loss against central differences. 64-bit throughout.
GradCheckResult gradient_check(const NetworkConfig& cfg, std::uint64_t seed, double eps);

// Small fixed configuration used by the gradcheck command and tests.
NetworkConfig tiny_verification_config();

// Checkpoint: "HGMODEL1" magic, canonical text header, then every parameter
// block as little-endian f32 in declaration order. Bit-exact round-trip.
void save_checkpoint(const std::string& path, const NetworkConfig& cfg, const ModelParams& params);
std::pair<NetworkConfig, ModelParams> load_checkpoint(const std::string& path);

}  // namespace hypergrid
