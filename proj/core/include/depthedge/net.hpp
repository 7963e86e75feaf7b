#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "depthedge/error.hpp"
#include "depthedge/image.hpp"

namespace depthedge {

/// Dense batch tensor, NCHW.
template <class T>
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_, T fill = T(0))
        : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    std::size_t index(int b, int ch, int y, int x) const {
        return ((static_cast<std::size_t>(b) * c + ch) * h + y) * w + x;
    }
    T& operator()(int b, int ch, int y, int x) { return data[index(b, ch, y, x)]; }
    T operator()(int b, int ch, int y, int x) const { return data[index(b, ch, y, x)]; }
    T* sample(int b) { return data.data() + static_cast<std::size_t>(b) * c * plane(); }
    const T* sample(int b) const { return data.data() + static_cast<std::size_t>(b) * c * plane(); }
};

enum class OutputHead : std::uint32_t {
    Edge = 0,              // 1 channel, sigmoid
    ContourDirection = 1,  // 3 channels: sigmoid, tanh, tanh
};

struct ArchitectureConfig {
    int encoder_depth = 5;
    int in_channels = 7;
    int kernel = 4;
    int factor = 2;
    std::vector<int> widths;        // one per encoder layer; decoder mirrors
    std::vector<bool> batch_norm;   // one per layer: encoders then decoders
    OutputHead head = OutputHead::Edge;
    double leaky_slope = 0.2;
    double disparity_scale = 1.0 / 32.0;  // applied to the disparity input channel

    /// Doubling schedule from 16 capped at 256; batch norm off on the two
    /// encoder and two decoder layers next to the bottleneck and on the output layer.
    static ArchitectureConfig make_default(int encoder_depth, OutputHead head = OutputHead::Edge);

    int layer_count() const { return 2 * encoder_depth; }
    int head_channels() const { return head == OutputHead::Edge ? 1 : 3; }
    int min_input() const { return 1 << encoder_depth; }
    void validate() const;

    int conv_in(int layer) const;
    int conv_out(int layer) const;
    /// Encoder layer whose pre-activation output is concatenated after decoder layer
    /// `layer`, or -1.
    int skip_source(int layer) const;

    friend bool operator==(const ArchitectureConfig&, const ArchitectureConfig&) = default;
};

std::string describe(const ArchitectureConfig& arch);

/// Per-layer parameters. Running statistics are only populated on batch-norm
/// layers and are not trained.
template <class T>
struct LayerTensors {
    std::vector<T> weight;  // [out][in][ky][kx]
    std::vector<T> bias;
    std::vector<T> gamma;
    std::vector<T> beta;
    std::vector<T> running_mean;
    std::vector<T> running_var;
};

template <class T>
struct NetworkParameters {
    ArchitectureConfig arch;
    std::vector<LayerTensors<T>> layers;

    /// Zero biases, unit gamma, zero beta, unit running variance; kernels drawn
    /// uniformly with He-style fan-in bound sqrt(6 / ((1 + slope^2) fan_in)).
    static NetworkParameters initialize(const ArchitectureConfig& arch, std::uint64_t seed);

    template <class U>
    NetworkParameters<U> cast() const;

    std::size_t trainable_count() const;
};

template <class T>
using Gradients = std::vector<LayerTensors<T>>;

template <class T>
Gradients<T> zero_gradients(const NetworkParameters<T>& params);

enum class Mode { Train, Infer };

// Individual layer operations (exposed for testing and benchmarking).

template <class T>
T leaky_relu(T x, T slope = T(0.2)) {
    return x >= T(0) ? x : slope * x;
}
template <class T>
T leaky_relu_derivative(T x, T slope = T(0.2)) {
    return x >= T(0) ? T(1) : slope;
}

struct ConvGeometry {
    int kernel = 4;
    int stride = 1;
    int pad_before = 1;
    int pad_after = 2;
    int out_size(int in) const { return (in + pad_before + pad_after - kernel) / stride + 1; }
};

template <class T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const std::vector<T>& weight, const std::vector<T>& bias,
                         int out_channels, const ConvGeometry& g);

/// Accumulates into grad_weight / grad_bias; returns the input gradient.
template <class T>
Tensor<T> conv2d_backward(const Tensor<T>& input, const std::vector<T>& weight, const Tensor<T>& grad_out,
                          const ConvGeometry& g, std::vector<T>& grad_weight, std::vector<T>& grad_bias);

template <class T>
Tensor<T> upsample2(const Tensor<T>& x);
template <class T>
Tensor<T> upsample2_backward(const Tensor<T>& grad);

struct BatchNormCache {
    std::vector<double> mean;
    std::vector<double> inv_std;
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

/// Train mode normalizes with batch statistics (returned in `cache`); infer mode
/// with the running averages.
template <class T>
Tensor<T> batch_norm_forward(const Tensor<T>& x, const LayerTensors<T>& layer, Mode mode, BatchNormCache* cache,
                             std::type_identity_t<Tensor<T>>* normalized = nullptr);

template <class T>
Tensor<T> batch_norm_backward(const Tensor<T>& normalized, const LayerTensors<T>& layer,
                              const BatchNormCache& cache, const Tensor<T>& grad_out, std::vector<T>& grad_gamma,
                              std::vector<T>& grad_beta);

/// Everything backward() needs from a training-mode forward pass.
template <class T>
struct ForwardCache {
    std::vector<Tensor<T>> conv_input;   // per layer, after upsampling for decoders
    std::vector<Tensor<T>> normalized;   // per batch-norm layer, x-hat
    std::vector<BatchNormCache> bn;      // per layer
    std::vector<Tensor<T>> pre_activation;  // per layer, including concatenated skips
    Tensor<T> output;
    bool valid = false;
};

/// X is a batch of in_channels images; returns the head output at input resolution.
template <class T>
Tensor<T> forward(const NetworkParameters<T>& params, const Tensor<T>& x, Mode mode,
                  ForwardCache<T>* cache = nullptr);

/// Parameter gradients of (data loss + lambda * |p|^2) given dLoss/dOutput.
template <class T>
Gradients<T> backward(const NetworkParameters<T>& params, const ForwardCache<T>& cache,
                      const Tensor<T>& grad_output, double l2_lambda);

/// Fold the batch statistics of a training pass into the running averages.
template <class T>
void update_running_stats(NetworkParameters<T>& params, const ForwardCache<T>& cache);

/// E = (1/n) * sum((weight * (pred - target))^2) over all n elements.
template <class T>
double masked_mse(const Tensor<T>& pred, const Tensor<T>& target, const Tensor<T>& weight,
                  Tensor<T>* grad = nullptr);

template <class T>
double l2_penalty(const NetworkParameters<T>& params, double lambda);

/// Single-image loss on rasters (channel-interleaved images of equal shape).
double loss(const Image& pred, const Image& target, const Image& mask);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

template <class T>
struct AdamState {
    Gradients<T> m;
    Gradients<T> v;
    long step = 0;
};

template <class T>
AdamState<T> make_adam_state(const NetworkParameters<T>& params);

template <class T>
void adam_step(NetworkParameters<T>& params, const Gradients<T>& grads, AdamState<T>& state,
               const AdamConfig& cfg);

/// Visit every trainable tensor of params together with its gradient slot.
template <class T, class Fn>
void for_each_trainable(NetworkParameters<T>& params, Gradients<T>& grads, Fn&& fn) {
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto& p = params.layers[l];
        auto& g = grads[l];
        fn(p.weight, g.weight);
        fn(p.bias, g.bias);
        fn(p.gamma, g.gamma);
        fn(p.beta, g.beta);
    }
}

// Image <-> tensor plumbing.

/// Concatenate color (3), disparity (1, multiplied by disparity_scale) and normals (3).
Image make_network_input(const Image& color, const Image& disparity, const Image& normals,
                         double disparity_scale);
Tensor<float> to_tensor(std::span<const Image> batch);
Image from_tensor(const Tensor<float>& t, int index);

}  // namespace depthedge
