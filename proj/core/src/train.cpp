#include "depthedge/train.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

#include "depthedge/image_io.hpp"

namespace depthedge {

void TrainConfig::validate(const ArchitectureConfig& arch) const {
    if (patch_size <= 0 || batch_size <= 0 || epochs < 0 || patches_per_scene <= 0 || max_width <= 0) {
        throw input_error("training: patch_size, batch_size, patches_per_scene and max_width must be positive");
    }
    if (!(adam.learning_rate > 0) || !(adam.epsilon > 0) || !(adam.beta1 > 0 && adam.beta1 < 1) ||
        !(adam.beta2 > 0 && adam.beta2 < 1)) {
        throw input_error("training: invalid Adam settings");
    }
    if (l2_lambda < 0 || !(mask_weight > 0)) throw input_error("training: l2_lambda must be >= 0 and mask_weight > 0");
    if (!(validation_fraction >= 0 && validation_fraction < 1)) {
        throw input_error("training: validation_fraction must lie in [0, 1)");
    }
    const int m = arch.min_input();
    if (patch_size < m || patch_size % m != 0) {
        throw input_error("training: patch_size " + std::to_string(patch_size) + " must be a positive multiple of " +
                          std::to_string(m) + " (2^encoder_depth)");
    }
}

TrainingExample make_example(const SceneBundle& s, const ArchitectureConfig& arch, double mask_weight) {
    if (!s.has_truth()) throw input_error("scene '" + s.name + "' has no ground truth; run the gt stage first");
    TrainingExample ex;
    ex.input = make_network_input(s.color, s.disparity_est, s.normals_est, arch.disparity_scale);
    Image m = s.mask;
    for (auto& v : m.data())
        if (v > 1.0f) v = static_cast<float>(mask_weight);
    if (arch.head == OutputHead::Edge) {
        ex.target = s.edges_gt;
        ex.mask = std::move(m);
    } else {
        const int w = s.color.width(), h = s.color.height();
        ex.target = Image(w, h, 3);
        ex.mask = Image(w, h, 3);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const float c = s.straddle_gt.at(x, y);
                ex.target.at(x, y, 0) = c;
                ex.target.at(x, y, 1) = s.directions_gt.at(x, y, 0);
                ex.target.at(x, y, 2) = s.directions_gt.at(x, y, 1);
                ex.mask.at(x, y, 0) = m.at(x, y);
                ex.mask.at(x, y, 1) = ex.mask.at(x, y, 2) = c > 0.5f ? 1.0f : 0.0f;
            }
    }
    return ex;
}

std::pair<int, int> patch_offset(int width, int height, int patch, Rng& rng) {
    if (width < patch || height < patch) {
        throw input_error("scene " + std::to_string(width) + "x" + std::to_string(height) +
                          " is smaller than the patch size " + std::to_string(patch) +
                          "; regenerate the dataset with a larger canvas or lower patch_size");
    }
    const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(width - patch + 1)));
    const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(height - patch + 1)));
    return {x, y};
}

namespace {

Image crop(const Image& img, int x0, int y0, int w, int h) {
    Image out(w, h, img.channels());
    const int c = img.channels();
    for (int y = 0; y < h; ++y) {
        const float* src = img.data().data() + (static_cast<std::size_t>(y0 + y) * img.width() + x0) * c;
        std::copy(src, src + static_cast<std::size_t>(w) * c, out.data().data() + static_cast<std::size_t>(y) * w * c);
    }
    return out;
}

Image pad_replicate(const Image& img, int w, int h) {
    Image out(w, h, img.channels());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = img.clamped(x, y, c);
    return out;
}

// Forward one image in infer mode at any size.
Image run_padded(const NetworkParameters<float>& params, const Image& input) {
    const int m = params.arch.min_input();
    const int w = (input.width() + m - 1) / m * m, h = (input.height() + m - 1) / m * m;
    const Image padded = (w == input.width() && h == input.height()) ? input : pad_replicate(input, w, h);
    const Image batch[] = {padded};
    const Tensor<float> out = forward(params, to_tensor(batch), Mode::Infer);
    const Image full = from_tensor(out, 0);
    return (w == input.width() && h == input.height()) ? full : crop(full, 0, 0, input.width(), input.height());
}

template <class T>
bool all_finite(const std::vector<T>& v) {
    return std::all_of(v.begin(), v.end(), [](T x) { return std::isfinite(x); });
}

std::string layer_name(const ArchitectureConfig& arch, int l) {
    const int n = arch.encoder_depth;
    return "layer " + std::to_string(l + 1) + (l < n ? " (encoder " + std::to_string(l + 1) + ")"
                                                     : " (decoder " + std::to_string(l - n + 1) + ")");
}

[[noreturn]] void nonfinite(const std::string& where, const std::string& what) {
    throw numeric_error("non-finite " + what + " during training (" + where + ")");
}

TrainingExample downsize(const TrainingExample& ex, int max_width) {
    if (ex.input.width() <= max_width) return ex;
    TrainingExample out;
    out.input = resize_to_width(ex.input, max_width);
    out.target = resize_to_width(ex.target, max_width);
    out.mask = resize_to_width(ex.mask, max_width);
    return out;
}

}  // namespace

TrainingExample sample_patch(const TrainingExample& scene, int patch, Rng& rng) {
    const auto [x, y] = patch_offset(scene.input.width(), scene.input.height(), patch, rng);
    TrainingExample ex;
    ex.input = crop(scene.input, x, y, patch, patch);
    ex.target = crop(scene.target, x, y, patch, patch);
    ex.mask = crop(scene.mask, x, y, patch, patch);
    ex.origin_x = x;
    ex.origin_y = y;
    return ex;
}

double evaluate_loss(const NetworkParameters<float>& params, const std::vector<TrainingExample>& examples) {
    if (examples.empty()) return 0.0;
    double total = 0.0;
    for (const auto& ex : examples) total += loss(run_padded(params, ex.input), ex.target, ex.mask);
    return total / static_cast<double>(examples.size());
}

TrainResult train(const std::vector<SceneBundle>& scenes, const ArchitectureConfig& arch, const TrainConfig& cfg,
                  const ProgressFn& progress) {
    arch.validate();
    cfg.validate(arch);
    if (scenes.empty()) throw input_error("training: no scenes");
    std::vector<TrainingExample> all;
    all.reserve(scenes.size());
    for (const auto& s : scenes) {
        all.push_back(downsize(make_example(s, arch, cfg.mask_weight), cfg.max_width));
        if (!all_finite(std::vector<float>(all.back().target.data().begin(), all.back().target.data().end()))) {
            nonfinite("scene " + s.name, "ground-truth value");
        }
    }
    std::size_t n_val = 0;
    if (cfg.validation_fraction > 0 && all.size() >= 2) {
        n_val = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(cfg.validation_fraction * all.size())), 1,
                                        all.size() - 1);
    }
    const std::vector<TrainingExample> val(all.end() - static_cast<std::ptrdiff_t>(n_val), all.end());
    all.resize(all.size() - n_val);
    for (std::size_t i = 0; i < all.size(); ++i) {
        Rng probe(0);
        patch_offset(all[i].input.width(), all[i].input.height(), cfg.patch_size, probe);
    }

    TrainResult result;
    result.params = NetworkParameters<float>::initialize(arch, cfg.seed);
    auto& params = result.params;
    AdamState<float> adam = make_adam_state(params);
    Rng rng(cfg.seed ^ 0x5EEDF00Dull);

    EpochLog initial{0, evaluate_loss(params, all), evaluate_loss(params, val)};
    result.log.push_back(initial);
    if (progress) progress(initial);

    std::vector<std::size_t> order;
    for (int e = 1; e <= cfg.epochs; ++e) {
        order.clear();
        for (std::size_t i = 0; i < all.size(); ++i)
            for (int k = 0; k < cfg.patches_per_scene; ++k) order.push_back(i);
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

        double sum = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<Image> in, tg, mk;
            for (std::size_t i = start; i < end; ++i) {
                TrainingExample p = sample_patch(all[order[i]], cfg.patch_size, rng);
                in.push_back(std::move(p.input));
                tg.push_back(std::move(p.target));
                mk.push_back(std::move(p.mask));
            }
            ForwardCache<float> cache;
            const Tensor<float> out = forward(params, to_tensor(in), Mode::Train, &cache);
            Tensor<float> grad;
            const double l = masked_mse(out, to_tensor(tg), to_tensor(mk), &grad);
            const std::string where = "epoch " + std::to_string(e) + ", batch " + std::to_string(batches + 1);
            if (!std::isfinite(l)) {
                for (std::size_t k = 0; k < cache.pre_activation.size(); ++k)
                    if (!all_finite(cache.pre_activation[k].data)) {
                        nonfinite(where + ", first in " + layer_name(arch, static_cast<int>(k)), "activation");
                    }
                nonfinite(where, "loss");
            }
            const Gradients<float> g = backward(params, cache, grad, cfg.l2_lambda);
            for (std::size_t k = 0; k < g.size(); ++k)
                if (!all_finite(g[k].weight) || !all_finite(g[k].bias) || !all_finite(g[k].gamma) ||
                    !all_finite(g[k].beta)) {
                    nonfinite(where + ", first in " + layer_name(arch, static_cast<int>(k)), "gradient");
                }
            adam_step(params, g, adam, cfg.adam);
            update_running_stats(params, cache);
            sum += l;
            ++batches;
        }
        EpochLog entry{e, batches ? sum / batches : 0.0, evaluate_loss(params, val)};
        if (!std::isfinite(entry.val_loss)) nonfinite("validation after epoch " + std::to_string(e), "loss");
        result.log.push_back(entry);
        if (progress) progress(entry);
    }
    return result;
}

std::string format_loss_csv(const std::vector<EpochLog>& log) {
    std::ostringstream os;
    os.precision(9);
    os << "epoch,train_loss,val_loss\n";
    for (const auto& e : log) os << e.epoch << ',' << e.train_loss << ',' << e.val_loss << '\n';
    return os.str();
}

Image infer(const NetworkParameters<float>& params, const Image& input, double tau) {
    if (input.channels() != params.arch.in_channels) {
        throw shape_error("infer: model expects " + std::to_string(params.arch.in_channels) + " input channels, got " +
                          std::to_string(input.channels()));
    }
    Image out = run_padded(params, input);
    if (params.arch.head == OutputHead::ContourDirection) {
        for (std::size_t i = 0; i < out.pixel_count(); ++i) {
            float* p = out.data().data() + 3 * i;
            const double n = std::hypot(p[1], p[2]);
            if (p[0] > tau && n > 0.0) {
                p[1] = static_cast<float>(p[1] / n);
                p[2] = static_cast<float>(p[2] / n);
            }
        }
    }
    return out;
}

Image infer(const NetworkParameters<float>& params, const SceneBundle& s, double tau) {
    return infer(params, make_network_input(s.color, s.disparity_est, s.normals_est, params.arch.disparity_scale), tau);
}

// ---------------------------------------------------------------------------
// Model file

namespace {

constexpr char kMagic[4] = {'D', 'C', 'U', 'T'};
constexpr std::uint32_t kModelVersion = 1;

class Writer {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void f32(float f) { u32(std::bit_cast<std::uint32_t>(f)); }
    void f64(double d) {
        const auto v = std::bit_cast<std::uint64_t>(d);
        u32(static_cast<std::uint32_t>(v));
        u32(static_cast<std::uint32_t>(v >> 32));
    }
    void tensor(const std::vector<float>& t) {
        u32(static_cast<std::uint32_t>(t.size()));
        for (float f : t) f32(f);
    }
    std::string out;
};

class Reader {
public:
    Reader(const std::string& bytes, std::string origin) : b_(bytes), origin_(std::move(origin)) {}

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
    double f64(const char* what) {
        const std::uint64_t lo = u32(what), hi = u32(what);
        return std::bit_cast<double>(lo | (hi << 32));
    }
    std::vector<float> tensor(const char* what, std::size_t expected) {
        const std::uint32_t n = u32(what);
        if (n != expected) {
            throw Error(ErrorKind::ConfigMismatch, origin_ + ": " + what + " holds " + std::to_string(n) +
                                                       " values, architecture needs " + std::to_string(expected));
        }
        need(4ull * n, what);
        std::vector<float> v(n);
        for (auto& f : v) f = f32(what);
        return v;
    }
    void need(std::size_t n, const char* what) {
        if (pos_ + n > b_.size()) throw parse_error(origin_ + ": truncated model file while reading " + what);
    }
    bool done() const { return pos_ == b_.size(); }
    std::size_t pos() const { return pos_; }
    const std::string& origin() const { return origin_; }

private:
    std::string b_;
    std::string origin_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string encode_model(const NetworkParameters<float>& params) {
    const auto& a = params.arch;
    Writer w;
    w.out.append(kMagic, 4);
    w.u32(kModelVersion);
    w.u32(static_cast<std::uint32_t>(a.encoder_depth));
    w.u32(static_cast<std::uint32_t>(a.in_channels));
    w.u32(static_cast<std::uint32_t>(a.kernel));
    w.u32(static_cast<std::uint32_t>(a.factor));
    w.u32(static_cast<std::uint32_t>(a.head));
    w.f64(a.leaky_slope);
    w.f64(a.disparity_scale);
    w.u32(static_cast<std::uint32_t>(a.widths.size()));
    for (int v : a.widths) w.u32(static_cast<std::uint32_t>(v));
    w.u32(static_cast<std::uint32_t>(a.batch_norm.size()));
    for (bool v : a.batch_norm) w.u32(v ? 1u : 0u);
    w.u32(static_cast<std::uint32_t>(params.layers.size()));
    for (const auto& l : params.layers) {
        w.tensor(l.weight);
        w.tensor(l.bias);
        w.tensor(l.gamma);
        w.tensor(l.beta);
        w.tensor(l.running_mean);
        w.tensor(l.running_var);
    }
    return std::move(w.out);
}

NetworkParameters<float> decode_model(const std::string& bytes, const std::string& origin) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw parse_error(origin + ": not a model file (missing DCUT magic)");
    }
    Reader r(bytes.substr(4), origin);
    const std::uint32_t version = r.u32("version");
    if (version != kModelVersion) {
        throw parse_error(origin + ": unsupported model version " + std::to_string(version));
    }
    ArchitectureConfig a;
    a.encoder_depth = static_cast<int>(r.u32("encoder_depth"));
    a.in_channels = static_cast<int>(r.u32("in_channels"));
    a.kernel = static_cast<int>(r.u32("kernel"));
    a.factor = static_cast<int>(r.u32("factor"));
    const std::uint32_t head = r.u32("head");
    if (head > 1) throw parse_error(origin + ": unknown output head " + std::to_string(head));
    a.head = static_cast<OutputHead>(head);
    a.leaky_slope = r.f64("leaky_slope");
    a.disparity_scale = r.f64("disparity_scale");
    const std::uint32_t nw = r.u32("width count");
    if (nw > 64) throw parse_error(origin + ": implausible width count " + std::to_string(nw));
    for (std::uint32_t i = 0; i < nw; ++i) a.widths.push_back(static_cast<int>(r.u32("widths")));
    const std::uint32_t nb = r.u32("batch-norm count");
    if (nb > 128) throw parse_error(origin + ": implausible batch-norm count " + std::to_string(nb));
    for (std::uint32_t i = 0; i < nb; ++i) a.batch_norm.push_back(r.u32("batch_norm") != 0);
    try {
        a.validate();
    } catch (const Error& e) {
        throw parse_error(origin + ": invalid architecture descriptor: " + e.what());
    }
    NetworkParameters<float> p = NetworkParameters<float>::initialize(a, 0);
    const std::uint32_t layers = r.u32("layer count");
    if (layers != p.layers.size()) throw parse_error(origin + ": layer count does not match the descriptor");
    for (auto& l : p.layers) {
        l.weight = r.tensor("weight", l.weight.size());
        l.bias = r.tensor("bias", l.bias.size());
        l.gamma = r.tensor("gamma", l.gamma.size());
        l.beta = r.tensor("beta", l.beta.size());
        l.running_mean = r.tensor("running_mean", l.running_mean.size());
        l.running_var = r.tensor("running_var", l.running_var.size());
        if (!all_finite(l.weight) || !all_finite(l.bias) || !all_finite(l.gamma) || !all_finite(l.beta) ||
            !all_finite(l.running_mean) || !all_finite(l.running_var)) {
            throw numeric_error(origin + ": model holds non-finite parameters");
        }
    }
    if (!r.done()) throw parse_error(origin + ": trailing bytes after the last layer");
    return p;
}

void save_model(const std::filesystem::path& path, const NetworkParameters<float>& params) {
    write_file_atomic(path, encode_model(params));
}

NetworkParameters<float> load_model(const std::filesystem::path& path) {
    return decode_model(read_file(path), path.string());
}

void require_same_architecture(const ArchitectureConfig& expected, const ArchitectureConfig& actual) {
    auto fail = [](const std::string& field, const std::string& e, const std::string& a) {
        throw Error(ErrorKind::ConfigMismatch,
                    "model architecture does not match the configuration: " + field + " is " + a + ", expected " + e);
    };
    auto list = [](const auto& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(static_cast<int>(v[i]));
        return s;
    };
    if (expected.encoder_depth != actual.encoder_depth)
        fail("encoder_depth", std::to_string(expected.encoder_depth), std::to_string(actual.encoder_depth));
    if (expected.in_channels != actual.in_channels)
        fail("in_channels", std::to_string(expected.in_channels), std::to_string(actual.in_channels));
    if (expected.kernel != actual.kernel) fail("kernel", std::to_string(expected.kernel), std::to_string(actual.kernel));
    if (expected.factor != actual.factor) fail("factor", std::to_string(expected.factor), std::to_string(actual.factor));
    if (expected.head != actual.head)
        fail("head", expected.head == OutputHead::Edge ? "edge" : "contour_direction",
             actual.head == OutputHead::Edge ? "edge" : "contour_direction");
    if (expected.widths != actual.widths) fail("widths", list(expected.widths), list(actual.widths));
    if (expected.batch_norm != actual.batch_norm) fail("batch_norm", list(expected.batch_norm), list(actual.batch_norm));
    if (expected.leaky_slope != actual.leaky_slope)
        fail("leaky_slope", std::to_string(expected.leaky_slope), std::to_string(actual.leaky_slope));
    if (expected.disparity_scale != actual.disparity_scale)
        fail("disparity_scale", std::to_string(expected.disparity_scale), std::to_string(actual.disparity_scale));
}

}  // namespace depthedge
