#include "depthedge/net.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "depthedge/rng.hpp"

namespace depthedge {

// ---------------------------------------------------------------------------
// Architecture

ArchitectureConfig ArchitectureConfig::make_default(int encoder_depth, OutputHead head) {
    ArchitectureConfig a;
    a.encoder_depth = encoder_depth;
    a.head = head;
    int w = 16;
    for (int k = 0; k < encoder_depth; ++k) {
        a.widths.push_back(w);
        w = std::min(2 * w, 256);
    }
    const int n = encoder_depth;
    a.batch_norm.assign(static_cast<std::size_t>(2 * n), false);
    for (int l = 0; l < 2 * n; ++l) {
        const bool near_bottleneck = (l >= n - 2 && l < n) || (l >= n && l < n + 2);
        const bool output = l == 2 * n - 1;
        a.batch_norm[static_cast<std::size_t>(l)] = !near_bottleneck && !output;
    }
    return a;
}

void ArchitectureConfig::validate() const {
    if (encoder_depth < 1 || encoder_depth > 12) throw input_error("encoder depth must be in [1, 12]");
    if (kernel != 4) throw input_error("only 4x4 kernels are supported");
    if (factor != 2) throw input_error("only a resampling factor of 2 is supported");
    if (in_channels < 1) throw input_error("network needs at least one input channel");
    if (static_cast<int>(widths.size()) != encoder_depth) {
        throw input_error("architecture lists " + std::to_string(widths.size()) + " widths for " +
                          std::to_string(encoder_depth) + " encoder layers");
    }
    for (int w : widths)
        if (w < 1) throw input_error("channel widths must be >= 1");
    if (static_cast<int>(batch_norm.size()) != layer_count()) {
        throw input_error("batch-norm mask must have one entry per layer");
    }
    if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw input_error("leaky slope must be in [0, 1)");
}

int ArchitectureConfig::conv_in(int l) const {
    const int n = encoder_depth;
    if (l == 0) return in_channels;
    if (l < n) return widths[static_cast<std::size_t>(l - 1)];
    const int d = l - n;
    if (d == 0) return widths[static_cast<std::size_t>(n - 1)];
    return 2 * widths[static_cast<std::size_t>(n - 1 - d)];
}

int ArchitectureConfig::conv_out(int l) const {
    const int n = encoder_depth;
    if (l < n) return widths[static_cast<std::size_t>(l)];
    const int d = l - n;
    if (d == n - 1) return head_channels();
    return widths[static_cast<std::size_t>(n - 2 - d)];
}

int ArchitectureConfig::skip_source(int l) const {
    const int n = encoder_depth;
    if (l < n) return -1;
    const int d = l - n;
    if (d == n - 1) return -1;
    return n - 2 - d;
}

std::string describe(const ArchitectureConfig& a) {
    std::ostringstream s;
    s << "encoder_depth=" << a.encoder_depth << " widths=";
    for (std::size_t i = 0; i < a.widths.size(); ++i) s << (i ? "," : "") << a.widths[i];
    s << " batch_norm=";
    for (bool b : a.batch_norm) s << (b ? '1' : '0');
    s << " head=" << (a.head == OutputHead::Edge ? "edge" : "contour+direction");
    return s.str();
}

// ---------------------------------------------------------------------------
// Parameters

template <class T>
NetworkParameters<T> NetworkParameters<T>::initialize(const ArchitectureConfig& arch, std::uint64_t seed) {
    arch.validate();
    NetworkParameters<T> p;
    p.arch = arch;
    Rng rng(seed);
    const int k2 = arch.kernel * arch.kernel;
    for (int l = 0; l < arch.layer_count(); ++l) {
        LayerTensors<T> t;
        const int cin = arch.conv_in(l), cout = arch.conv_out(l);
        const double fan_in = static_cast<double>(cin) * k2;
        const double bound = std::sqrt(6.0 / ((1.0 + arch.leaky_slope * arch.leaky_slope) * fan_in));
        t.weight.resize(static_cast<std::size_t>(cout) * cin * k2);
        for (auto& v : t.weight) v = static_cast<T>(rng.uniform(-bound, bound));
        t.bias.assign(static_cast<std::size_t>(cout), T(0));
        if (arch.batch_norm[static_cast<std::size_t>(l)]) {
            t.gamma.assign(static_cast<std::size_t>(cout), T(1));
            t.beta.assign(static_cast<std::size_t>(cout), T(0));
            t.running_mean.assign(static_cast<std::size_t>(cout), T(0));
            t.running_var.assign(static_cast<std::size_t>(cout), T(1));
        }
        p.layers.push_back(std::move(t));
    }
    return p;
}

template <class T>
template <class U>
NetworkParameters<U> NetworkParameters<T>::cast() const {
    NetworkParameters<U> out;
    out.arch = arch;
    auto conv = [](const std::vector<T>& v) { return std::vector<U>(v.begin(), v.end()); };
    for (const auto& l : layers) {
        out.layers.push_back({conv(l.weight), conv(l.bias), conv(l.gamma), conv(l.beta), conv(l.running_mean),
                              conv(l.running_var)});
    }
    return out;
}

template <class T>
std::size_t NetworkParameters<T>::trainable_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size() + l.gamma.size() + l.beta.size();
    return n;
}

template <class T>
Gradients<T> zero_gradients(const NetworkParameters<T>& params) {
    Gradients<T> g(params.layers.size());
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        g[l].weight.assign(params.layers[l].weight.size(), T(0));
        g[l].bias.assign(params.layers[l].bias.size(), T(0));
        g[l].gamma.assign(params.layers[l].gamma.size(), T(0));
        g[l].beta.assign(params.layers[l].beta.size(), T(0));
    }
    return g;
}

// ---------------------------------------------------------------------------
// Convolution via im2col + GEMM

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
void im2col(const T* in, int c, int h, int w, const ConvGeometry& g, int oh, int ow, RowMat<T>& col) {
    const int k = g.kernel;
    col.resize(static_cast<Eigen::Index>(c) * k * k, static_cast<Eigen::Index>(oh) * ow);
    for (int ci = 0; ci < c; ++ci) {
        const T* plane = in + static_cast<std::size_t>(ci) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                T* row = col.data() + static_cast<std::size_t>((ci * k + ky) * k + kx) * oh * ow;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * g.stride - g.pad_before + ky;
                    T* dst = row + static_cast<std::size_t>(oy) * ow;
                    if (iy < 0 || iy >= h) {
                        std::fill(dst, dst + ow, T(0));
                        continue;
                    }
                    const T* src = plane + static_cast<std::size_t>(iy) * w;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * g.stride - g.pad_before + kx;
                        dst[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
                    }
                }
            }
        }
    }
}

template <class T>
void col2im_add(const RowMat<T>& col, int c, int h, int w, const ConvGeometry& g, int oh, int ow, T* out) {
    const int k = g.kernel;
    for (int ci = 0; ci < c; ++ci) {
        T* plane = out + static_cast<std::size_t>(ci) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const T* row = col.data() + static_cast<std::size_t>((ci * k + ky) * k + kx) * oh * ow;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * g.stride - g.pad_before + ky;
                    if (iy < 0 || iy >= h) continue;
                    const T* src = row + static_cast<std::size_t>(oy) * ow;
                    T* dst = plane + static_cast<std::size_t>(iy) * w;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * g.stride - g.pad_before + kx;
                        if (ix >= 0 && ix < w) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

ConvGeometry layer_geometry(const ArchitectureConfig& arch, int l) {
    if (l < arch.encoder_depth) return {arch.kernel, 2, 1, 1};
    return {arch.kernel, 1, 1, 2};
}

}  // namespace

template <class T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const std::vector<T>& weight, const std::vector<T>& bias,
                         int out_channels, const ConvGeometry& g) {
    const int k2 = g.kernel * g.kernel;
    const Eigen::Index kdim = static_cast<Eigen::Index>(input.c) * k2;
    if (weight.size() != static_cast<std::size_t>(out_channels) * kdim || bias.size() != static_cast<std::size_t>(out_channels)) {
        throw shape_error("conv2d: parameter size does not match channel counts");
    }
    const int oh = g.out_size(input.h), ow = g.out_size(input.w);
    if (oh < 1 || ow < 1) throw shape_error("conv2d: input too small for kernel");
    Tensor<T> out(input.n, out_channels, oh, ow);
    Eigen::Map<const RowMat<T>> wmat(weight.data(), out_channels, kdim);
    RowMat<T> col;
    for (int b = 0; b < input.n; ++b) {
        im2col(input.sample(b), input.c, input.h, input.w, g, oh, ow, col);
        Eigen::Map<RowMat<T>> omat(out.sample(b), out_channels, static_cast<Eigen::Index>(oh) * ow);
        omat.noalias() = wmat * col;
        for (int c = 0; c < out_channels; ++c) omat.row(c).array() += bias[static_cast<std::size_t>(c)];
    }
    return out;
}

template <class T>
Tensor<T> conv2d_backward(const Tensor<T>& input, const std::vector<T>& weight, const Tensor<T>& grad_out,
                          const ConvGeometry& g, std::vector<T>& grad_weight, std::vector<T>& grad_bias) {
    const int k2 = g.kernel * g.kernel;
    const Eigen::Index kdim = static_cast<Eigen::Index>(input.c) * k2;
    const int cout = grad_out.c, oh = grad_out.h, ow = grad_out.w;
    Eigen::Map<const RowMat<T>> wmat(weight.data(), cout, kdim);
    Eigen::Map<RowMat<T>> gw(grad_weight.data(), cout, kdim);
    Tensor<T> grad_in(input.n, input.c, input.h, input.w);
    RowMat<T> col, dcol;
    for (int b = 0; b < input.n; ++b) {
        im2col(input.sample(b), input.c, input.h, input.w, g, oh, ow, col);
        Eigen::Map<const RowMat<T>> go(grad_out.sample(b), cout, static_cast<Eigen::Index>(oh) * ow);
        gw.noalias() += go * col.transpose();
        for (int c = 0; c < cout; ++c) grad_bias[static_cast<std::size_t>(c)] += go.row(c).sum();
        dcol.noalias() = wmat.transpose() * go;
        col2im_add(dcol, input.c, input.h, input.w, g, oh, ow, grad_in.sample(b));
    }
    return grad_in;
}

template <class T>
Tensor<T> upsample2(const Tensor<T>& x) {
    Tensor<T> out(x.n, x.c, 2 * x.h, 2 * x.w);
    for (int b = 0; b < x.n; ++b)
        for (int c = 0; c < x.c; ++c)
            for (int y = 0; y < out.h; ++y)
                for (int xx = 0; xx < out.w; ++xx) out(b, c, y, xx) = x(b, c, y / 2, xx / 2);
    return out;
}

template <class T>
Tensor<T> upsample2_backward(const Tensor<T>& grad) {
    Tensor<T> out(grad.n, grad.c, grad.h / 2, grad.w / 2);
    for (int b = 0; b < grad.n; ++b)
        for (int c = 0; c < grad.c; ++c)
            for (int y = 0; y < grad.h; ++y)
                for (int xx = 0; xx < grad.w; ++xx) out(b, c, y / 2, xx / 2) += grad(b, c, y, xx);
    return out;
}

// ---------------------------------------------------------------------------
// Batch normalization

template <class T>
Tensor<T> batch_norm_forward(const Tensor<T>& x, const LayerTensors<T>& layer, Mode mode, BatchNormCache* cache,
                             std::type_identity_t<Tensor<T>>* normalized) {
    Tensor<T> out(x.n, x.c, x.h, x.w);
    if (normalized) *normalized = Tensor<T>(x.n, x.c, x.h, x.w);
    const std::size_t plane = x.plane();
    const double count = static_cast<double>(x.n) * plane;
    if (cache) {
        cache->mean.assign(static_cast<std::size_t>(x.c), 0.0);
        cache->inv_std.assign(static_cast<std::size_t>(x.c), 0.0);
    }
    for (int c = 0; c < x.c; ++c) {
        double mean, var;
        if (mode == Mode::Train) {
            double s = 0.0;
            for (int b = 0; b < x.n; ++b) {
                const T* p = x.sample(b) + static_cast<std::size_t>(c) * plane;
                for (std::size_t i = 0; i < plane; ++i) s += p[i];
            }
            mean = s / count;
            double v = 0.0;
            for (int b = 0; b < x.n; ++b) {
                const T* p = x.sample(b) + static_cast<std::size_t>(c) * plane;
                for (std::size_t i = 0; i < plane; ++i) v += (p[i] - mean) * (p[i] - mean);
            }
            var = v / count;
        } else {
            mean = layer.running_mean[static_cast<std::size_t>(c)];
            var = layer.running_var[static_cast<std::size_t>(c)];
        }
        const double inv = 1.0 / std::sqrt(var + kBatchNormEps);
        if (cache) {
            cache->mean[static_cast<std::size_t>(c)] = mean;
            cache->inv_std[static_cast<std::size_t>(c)] = inv;
        }
        const double gamma = layer.gamma[static_cast<std::size_t>(c)];
        const double beta = layer.beta[static_cast<std::size_t>(c)];
        for (int b = 0; b < x.n; ++b) {
            const std::size_t off = static_cast<std::size_t>(b) * x.c * plane + static_cast<std::size_t>(c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                const double xh = (x.data[off + i] - mean) * inv;
                if (normalized) normalized->data[off + i] = static_cast<T>(xh);
                out.data[off + i] = static_cast<T>(gamma * xh + beta);
            }
        }
    }
    return out;
}

template <class T>
Tensor<T> batch_norm_backward(const Tensor<T>& xh, const LayerTensors<T>& layer, const BatchNormCache& cache,
                              const Tensor<T>& grad_out, std::vector<T>& grad_gamma, std::vector<T>& grad_beta) {
    Tensor<T> grad_in(xh.n, xh.c, xh.h, xh.w);
    const std::size_t plane = xh.plane();
    const double count = static_cast<double>(xh.n) * plane;
    for (int c = 0; c < xh.c; ++c) {
        double sum_dy = 0.0, sum_dy_xh = 0.0;
        for (int b = 0; b < xh.n; ++b) {
            const std::size_t off = static_cast<std::size_t>(b) * xh.c * plane + static_cast<std::size_t>(c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                sum_dy += grad_out.data[off + i];
                sum_dy_xh += grad_out.data[off + i] * xh.data[off + i];
            }
        }
        grad_gamma[static_cast<std::size_t>(c)] += static_cast<T>(sum_dy_xh);
        grad_beta[static_cast<std::size_t>(c)] += static_cast<T>(sum_dy);
        const double gamma = layer.gamma[static_cast<std::size_t>(c)];
        const double scale = gamma * cache.inv_std[static_cast<std::size_t>(c)] / count;
        for (int b = 0; b < xh.n; ++b) {
            const std::size_t off = static_cast<std::size_t>(b) * xh.c * plane + static_cast<std::size_t>(c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                grad_in.data[off + i] = static_cast<T>(
                    scale * (count * grad_out.data[off + i] - sum_dy - xh.data[off + i] * sum_dy_xh));
            }
        }
    }
    return grad_in;
}

// ---------------------------------------------------------------------------
// Network

namespace {

template <class T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w) throw shape_error("skip concatenation size mismatch");
    Tensor<T> out(a.n, a.c + b.c, a.h, a.w);
    const std::size_t pa = static_cast<std::size_t>(a.c) * a.plane();
    const std::size_t pb = static_cast<std::size_t>(b.c) * b.plane();
    for (int s = 0; s < a.n; ++s) {
        std::copy(a.sample(s), a.sample(s) + pa, out.sample(s));
        std::copy(b.sample(s), b.sample(s) + pb, out.sample(s) + pa);
    }
    return out;
}

template <class T>
T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

template <class T>
void check_input(const ArchitectureConfig& arch, const Tensor<T>& x) {
    if (x.c != arch.in_channels) {
        throw shape_error("network expects " + std::to_string(arch.in_channels) + " input channels, got " +
                          std::to_string(x.c));
    }
    const int m = arch.min_input();
    if (x.h % m != 0 || x.w % m != 0 || x.h < m || x.w < m) {
        throw shape_error("network input " + std::to_string(x.w) + "x" + std::to_string(x.h) +
                          " must be a positive multiple of " + std::to_string(m) + " in both dimensions");
    }
}

}  // namespace

template <class T>
Tensor<T> forward(const NetworkParameters<T>& params, const Tensor<T>& x, Mode mode, ForwardCache<T>* cache) {
    const auto& arch = params.arch;
    check_input(arch, x);
    const int layers = arch.layer_count();
    const int n = arch.encoder_depth;
    if (static_cast<int>(params.layers.size()) != layers) throw shape_error("parameter/architecture layer count mismatch");
    std::vector<Tensor<T>> pre(static_cast<std::size_t>(layers));
    if (cache) {
        cache->conv_input.assign(static_cast<std::size_t>(layers), {});
        cache->normalized.assign(static_cast<std::size_t>(layers), {});
        cache->bn.assign(static_cast<std::size_t>(layers), {});
        cache->valid = false;
    }
    const T slope = static_cast<T>(arch.leaky_slope);
    Tensor<T> act = x;
    for (int l = 0; l < layers; ++l) {
        const auto& lp = params.layers[static_cast<std::size_t>(l)];
        Tensor<T> input = l < n ? std::move(act) : upsample2(act);
        Tensor<T> z = conv2d_forward(input, lp.weight, lp.bias, arch.conv_out(l), layer_geometry(arch, l));
        if (arch.batch_norm[static_cast<std::size_t>(l)]) {
            BatchNormCache bc;
            Tensor<T> xh;
            z = batch_norm_forward(z, lp, mode, &bc, cache ? &xh : nullptr);
            if (cache) {
                cache->bn[static_cast<std::size_t>(l)] = std::move(bc);
                cache->normalized[static_cast<std::size_t>(l)] = std::move(xh);
            }
        }
        if (cache) cache->conv_input[static_cast<std::size_t>(l)] = std::move(input);
        const int skip = arch.skip_source(l);
        pre[static_cast<std::size_t>(l)] = skip >= 0 ? concat(z, pre[static_cast<std::size_t>(skip)]) : std::move(z);
        const Tensor<T>& p = pre[static_cast<std::size_t>(l)];
        act = Tensor<T>(p.n, p.c, p.h, p.w);
        if (l == layers - 1) {
            for (int b = 0; b < p.n; ++b)
                for (int c = 0; c < p.c; ++c)
                    for (std::size_t i = 0; i < p.plane(); ++i) {
                        const std::size_t idx = p.index(b, c, 0, 0) + i;
                        act.data[idx] = c == 0 ? sigmoid(p.data[idx]) : std::tanh(p.data[idx]);
                    }
        } else {
            for (std::size_t i = 0; i < p.data.size(); ++i) act.data[i] = leaky_relu(p.data[i], slope);
        }
    }
    if (cache) {
        cache->pre_activation = std::move(pre);
        cache->output = act;
        cache->valid = true;
    }
    return act;
}

template <class T>
Gradients<T> backward(const NetworkParameters<T>& params, const ForwardCache<T>& cache, const Tensor<T>& grad_output,
                      double l2_lambda) {
    if (!cache.valid) throw input_error("backward requires the cache of a training-mode forward pass");
    const auto& arch = params.arch;
    const int layers = arch.layer_count();
    const int n = arch.encoder_depth;
    Gradients<T> grads = zero_gradients(params);
    const T slope = static_cast<T>(arch.leaky_slope);
    std::vector<Tensor<T>> skip_grad(static_cast<std::size_t>(n));
    Tensor<T> grad_act = grad_output;
    for (int l = layers - 1; l >= 0; --l) {
        const auto ul = static_cast<std::size_t>(l);
        const Tensor<T>& p = cache.pre_activation[ul];
        Tensor<T> dp(p.n, p.c, p.h, p.w);
        if (l == layers - 1) {
            const Tensor<T>& out = cache.output;
            for (int b = 0; b < p.n; ++b)
                for (int c = 0; c < p.c; ++c)
                    for (std::size_t i = 0; i < p.plane(); ++i) {
                        const std::size_t idx = p.index(b, c, 0, 0) + i;
                        const T y = out.data[idx];
                        dp.data[idx] = grad_act.data[idx] * (c == 0 ? y * (T(1) - y) : T(1) - y * y);
                    }
        } else {
            for (std::size_t i = 0; i < p.data.size(); ++i) {
                dp.data[i] = grad_act.data[i] * leaky_relu_derivative(p.data[i], slope);
            }
        }
        if (l < n && !skip_grad[ul].data.empty()) {
            for (std::size_t i = 0; i < dp.data.size(); ++i) dp.data[i] += skip_grad[ul].data[i];
        }
        const int cout = arch.conv_out(l);
        Tensor<T> dz;
        const int skip = arch.skip_source(l);
        if (skip >= 0) {
            dz = Tensor<T>(p.n, cout, p.h, p.w);
            Tensor<T> ds(p.n, p.c - cout, p.h, p.w);
            const std::size_t pz = static_cast<std::size_t>(cout) * p.plane();
            const std::size_t ps = static_cast<std::size_t>(p.c - cout) * p.plane();
            for (int b = 0; b < p.n; ++b) {
                std::copy(dp.sample(b), dp.sample(b) + pz, dz.sample(b));
                std::copy(dp.sample(b) + pz, dp.sample(b) + pz + ps, ds.sample(b));
            }
            skip_grad[static_cast<std::size_t>(skip)] = std::move(ds);
        } else {
            dz = std::move(dp);
        }
        const auto& lp = params.layers[ul];
        if (arch.batch_norm[ul]) {
            dz = batch_norm_backward(cache.normalized[ul], lp, cache.bn[ul], dz, grads[ul].gamma, grads[ul].beta);
        }
        Tensor<T> din =
            conv2d_backward(cache.conv_input[ul], lp.weight, dz, layer_geometry(arch, l), grads[ul].weight, grads[ul].bias);
        grad_act = l < n ? std::move(din) : upsample2_backward(din);
    }
    if (l2_lambda != 0.0) {
        auto& mp = const_cast<NetworkParameters<T>&>(params);
        for_each_trainable(mp, grads, [&](std::vector<T>& v, std::vector<T>& g) {
            for (std::size_t i = 0; i < v.size(); ++i) g[i] += static_cast<T>(2.0 * l2_lambda * v[i]);
        });
    }
    return grads;
}

template <class T>
void update_running_stats(NetworkParameters<T>& params, const ForwardCache<T>& cache) {
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        if (!params.arch.batch_norm[l]) continue;
        auto& lp = params.layers[l];
        const auto& bc = cache.bn[l];
        const auto& xh = cache.normalized[l];
        const double count = static_cast<double>(xh.n) * xh.plane();
        for (std::size_t c = 0; c < lp.running_mean.size(); ++c) {
            const double var = 1.0 / (bc.inv_std[c] * bc.inv_std[c]) - kBatchNormEps;
            const double unbiased = count > 1 ? var * count / (count - 1) : var;
            lp.running_mean[c] = static_cast<T>((1 - kBatchNormMomentum) * lp.running_mean[c] + kBatchNormMomentum * bc.mean[c]);
            lp.running_var[c] = static_cast<T>((1 - kBatchNormMomentum) * lp.running_var[c] + kBatchNormMomentum * unbiased);
        }
    }
}

// ---------------------------------------------------------------------------
// Loss, regularization, optimizer

template <class T>
double masked_mse(const Tensor<T>& pred, const Tensor<T>& target, const Tensor<T>& weight, Tensor<T>* grad) {
    if (pred.data.size() != target.data.size() || pred.data.size() != weight.data.size() || pred.c != target.c ||
        pred.h != target.h || pred.w != target.w) {
        throw shape_error("loss: prediction, target and mask shapes differ");
    }
    const double n = static_cast<double>(pred.data.size());
    if (grad) *grad = Tensor<T>(pred.n, pred.c, pred.h, pred.w);
    double e = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const double m = weight.data[i];
        const double r = static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i]);
        e += (m * r) * (m * r);
        if (grad) grad->data[i] = static_cast<T>(2.0 * m * m * r / n);
    }
    return e / n;
}

double loss(const Image& pred, const Image& target, const Image& mask) {
    if (!pred.same_shape(target) || !pred.same_shape(mask)) throw shape_error("loss: shape mismatch");
    double e = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double m = mask.data()[i];
        const double r = static_cast<double>(pred.data()[i]) - static_cast<double>(target.data()[i]);
        e += (m * r) * (m * r);
    }
    return e / static_cast<double>(pred.size());
}

template <class T>
double l2_penalty(const NetworkParameters<T>& params, double lambda) {
    double s = 0.0;
    for (const auto& l : params.layers) {
        for (const auto* v : {&l.weight, &l.bias, &l.gamma, &l.beta})
            for (T x : *v) s += static_cast<double>(x) * x;
    }
    return lambda * s;
}

template <class T>
AdamState<T> make_adam_state(const NetworkParameters<T>& params) {
    return {zero_gradients(params), zero_gradients(params), 0};
}

template <class T>
void adam_step(NetworkParameters<T>& params, const Gradients<T>& grads, AdamState<T>& state, const AdamConfig& cfg) {
    if (grads.size() != params.layers.size()) throw shape_error("adam_step: gradient/parameter mismatch");
    ++state.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto& p = params.layers[l];
        const auto& g = grads[l];
        auto& m = state.m[l];
        auto& v = state.v[l];
        auto update = [&](std::vector<T>& pv, const std::vector<T>& gv, std::vector<T>& mv, std::vector<T>& vv) {
            for (std::size_t i = 0; i < pv.size(); ++i) {
                const double gi = gv[i];
                mv[i] = static_cast<T>(cfg.beta1 * mv[i] + (1 - cfg.beta1) * gi);
                vv[i] = static_cast<T>(cfg.beta2 * vv[i] + (1 - cfg.beta2) * gi * gi);
                const double mh = mv[i] / c1, vh = vv[i] / c2;
                pv[i] = static_cast<T>(pv[i] - cfg.learning_rate * mh / (std::sqrt(vh) + cfg.epsilon));
            }
        };
        update(p.weight, g.weight, m.weight, v.weight);
        update(p.bias, g.bias, m.bias, v.bias);
        update(p.gamma, g.gamma, m.gamma, v.gamma);
        update(p.beta, g.beta, m.beta, v.beta);
    }
}

// ---------------------------------------------------------------------------
// Image plumbing

Image make_network_input(const Image& color, const Image& disparity, const Image& normals, double disparity_scale) {
    if (color.channels() != 3 || disparity.channels() != 1 || normals.channels() != 3) {
        throw shape_error("network input needs 3-channel color, 1-channel disparity and 3-channel normals");
    }
    if (!color.same_size(disparity) || !color.same_size(normals)) throw shape_error("input channels differ in size");
    Image d = disparity;
    for (auto& v : d.data()) v = static_cast<float>(v * disparity_scale);
    Image n = normals;
    for (auto& v : n.data())
        if (std::isnan(v)) v = 0.0f;
    const Image parts[] = {color, d, n};
    return concat_channels(parts);
}

Tensor<float> to_tensor(std::span<const Image> batch) {
    if (batch.empty()) throw shape_error("to_tensor: empty batch");
    const Image& first = batch[0];
    Tensor<float> t(static_cast<int>(batch.size()), first.channels(), first.height(), first.width());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        if (!batch[b].same_shape(first)) throw shape_error("to_tensor: batch images differ in shape");
        const auto src = batch[b].data();
        for (int y = 0; y < t.h; ++y)
            for (int x = 0; x < t.w; ++x)
                for (int c = 0; c < t.c; ++c)
                    t(static_cast<int>(b), c, y, x) = src[(static_cast<std::size_t>(y) * t.w + x) * t.c + c];
    }
    return t;
}

Image from_tensor(const Tensor<float>& t, int index) {
    Image img(t.w, t.h, t.c);
    for (int y = 0; y < t.h; ++y)
        for (int x = 0; x < t.w; ++x)
            for (int c = 0; c < t.c; ++c) img.at(x, y, c) = t(index, c, y, x);
    return img;
}

// ---------------------------------------------------------------------------
// Explicit instantiations

#define DEPTHEDGE_INSTANTIATE(T)                                                                                  \
    template struct NetworkParameters<T>;                                                                         \
    template Gradients<T> zero_gradients(const NetworkParameters<T>&);                                            \
    template Tensor<T> conv2d_forward(const Tensor<T>&, const std::vector<T>&, const std::vector<T>&, int,       \
                                      const ConvGeometry&);                                                       \
    template Tensor<T> conv2d_backward(const Tensor<T>&, const std::vector<T>&, const Tensor<T>&,                \
                                       const ConvGeometry&, std::vector<T>&, std::vector<T>&);                    \
    template Tensor<T> upsample2(const Tensor<T>&);                                                               \
    template Tensor<T> upsample2_backward(const Tensor<T>&);                                                      \
    template Tensor<T> batch_norm_forward(const Tensor<T>&, const LayerTensors<T>&, Mode, BatchNormCache*,       \
                                          std::type_identity_t<Tensor<T>>*);                                      \
    template Tensor<T> batch_norm_backward(const Tensor<T>&, const LayerTensors<T>&, const BatchNormCache&,      \
                                           const Tensor<T>&, std::vector<T>&, std::vector<T>&);                   \
    template Tensor<T> forward(const NetworkParameters<T>&, const Tensor<T>&, Mode, ForwardCache<T>*);           \
    template Gradients<T> backward(const NetworkParameters<T>&, const ForwardCache<T>&, const Tensor<T>&, double); \
    template void update_running_stats(NetworkParameters<T>&, const ForwardCache<T>&);                            \
    template double masked_mse(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>*);                 \
    template double l2_penalty(const NetworkParameters<T>&, double);                                              \
    template AdamState<T> make_adam_state(const NetworkParameters<T>&);                                           \
    template void adam_step(NetworkParameters<T>&, const Gradients<T>&, AdamState<T>&, const AdamConfig&);

DEPTHEDGE_INSTANTIATE(float)
DEPTHEDGE_INSTANTIATE(double)

template NetworkParameters<double> NetworkParameters<float>::cast<double>() const;
template NetworkParameters<float> NetworkParameters<double>::cast<float>() const;
template NetworkParameters<float> NetworkParameters<float>::cast<float>() const;

}  // namespace depthedge
