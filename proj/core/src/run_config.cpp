#include "depthedge/run_config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "depthedge/image_io.hpp"

namespace depthedge {

namespace {

// Parse failures inside a setter; the caller adds file and line.
struct BadValue : std::runtime_error {
    using std::runtime_error::runtime_error;
};

double to_double(const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size() || !std::isfinite(v)) throw BadValue("expected a finite number, got '" + s + "'");
    return v;
}

long long to_integer(const std::string& s) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) throw BadValue("expected an integer, got '" + s + "'");
    return v;
}

int to_int(const std::string& s) {
    const long long v = to_integer(s);
    if (v < -2147483647LL || v > 2147483647LL) throw BadValue("integer out of range: '" + s + "'");
    return static_cast<int>(v);
}

bool to_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw BadValue("expected true or false, got '" + s + "'");
}

std::string fmt(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

FilterKind to_filter(const std::string& s) {
    for (FilterKind k : {FilterKind::CentralDifference, FilterKind::DerivativeOfGaussian,
                         FilterKind::DifferenceOfGaussians, FilterKind::Gaussian, FilterKind::Laplacian5pt,
                         FilterKind::Median})
        if (to_string(k) == s) return k;
    throw BadValue("unknown filter '" + s + "' (central-difference, derivative-of-gaussian, difference-of-gaussians, "
                   "gaussian, laplacian-5pt, median)");
}

OutputHead to_head(const std::string& s) {
    if (s == "edge") return OutputHead::Edge;
    if (s == "contour_direction") return OutputHead::ContourDirection;
    throw BadValue("unknown head '" + s + "' (edge, contour_direction)");
}

std::string head_name(OutputHead h) { return h == OutputHead::Edge ? "edge" : "contour_direction"; }

StrengthenReading to_reading(const std::string& s) {
    if (s == "factor") return StrengthenReading::Factor;
    if (s == "replacement") return StrengthenReading::Replacement;
    throw BadValue("unknown strengthening reading '" + s + "' (factor, replacement)");
}

std::vector<int> to_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_int(item));
    if (out.empty()) throw BadValue("expected a comma-separated integer list, got '" + s + "'");
    return out;
}

std::string fmt_list(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

// Architecture keys are collected first: depth and head pick the default
// widths, explicit widths then override them.
struct ArchKeys {
    std::optional<int> depth;
    std::optional<OutputHead> head;
    std::optional<std::vector<int>> widths;
    std::optional<double> slope;
    std::optional<double> scale;
};

struct Entry {
    const char* key;
    std::function<void(RunConfig&, ArchKeys&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define DE_DOUBLE(name, field) \
    Entry { name, [](RunConfig& c, ArchKeys&, const std::string& v) { c.field = to_double(v); }, \
            [](const RunConfig& c) { return fmt(c.field); } }
#define DE_INT(name, field) \
    Entry { name, [](RunConfig& c, ArchKeys&, const std::string& v) { c.field = to_int(v); }, \
            [](const RunConfig& c) { return std::to_string(c.field); } }
#define DE_BOOL(name, field) \
    Entry { name, [](RunConfig& c, ArchKeys&, const std::string& v) { c.field = to_bool(v); }, \
            [](const RunConfig& c) { return fmt_bool(c.field); } }

const std::vector<Entry>& entries() {
    static const std::vector<Entry> table = {
        DE_INT("dataset.count", dataset.count),
        DE_INT("dataset.width", dataset.width),
        DE_INT("dataset.height", dataset.height),
        Entry{"dataset.seed",
              [](RunConfig& c, ArchKeys&, const std::string& v) {
                  const long long s = to_integer(v);
                  if (s < 0) throw BadValue("seed must be >= 0");
                  c.dataset.seed = static_cast<std::uint64_t>(s);
              },
              [](const RunConfig& c) { return std::to_string(c.dataset.seed); }},
        DE_DOUBLE("corruption.band_width", dataset.corruption.disparity.band_width),
        DE_DOUBLE("corruption.band_noise", dataset.corruption.disparity.band_noise),
        DE_DOUBLE("corruption.fattening", dataset.corruption.disparity.fattening),
        DE_DOUBLE("corruption.disparity_blur", dataset.corruption.disparity.blur_sigma),
        DE_DOUBLE("corruption.quantization", dataset.corruption.disparity.quantization),
        DE_DOUBLE("corruption.untextured_noise", dataset.corruption.disparity.untextured_noise),
        DE_DOUBLE("corruption.texture_leak", dataset.corruption.normals.texture_leak),
        DE_DOUBLE("corruption.normal_blur", dataset.corruption.normals.blur_sigma),
        DE_DOUBLE("corruption.normal_noise", dataset.corruption.normals.noise),
        DE_DOUBLE("corruption.texture_contrast", dataset.corruption.color.texture_contrast),
        DE_DOUBLE("corruption.shadow_strength", dataset.corruption.color.shadow_strength),
        DE_DOUBLE("corruption.ambient", dataset.corruption.color.ambient),
        DE_DOUBLE("truth.alpha", truth.alpha),
        DE_DOUBLE("truth.beta", truth.beta),
        Entry{"truth.contour_filter",
              [](RunConfig& c, ArchKeys&, const std::string& v) { c.truth.contour_filter.kind = to_filter(v); },
              [](const RunConfig& c) { return to_string(c.truth.contour_filter.kind); }},
        DE_DOUBLE("truth.contour_sigma", truth.contour_filter.sigma),
        DE_DOUBLE("truth.contour_sigma2", truth.contour_filter.sigma2),
        Entry{"truth.crease_filter",
              [](RunConfig& c, ArchKeys&, const std::string& v) { c.truth.crease_filter.kind = to_filter(v); },
              [](const RunConfig& c) { return to_string(c.truth.crease_filter.kind); }},
        DE_DOUBLE("truth.crease_sigma", truth.crease_filter.sigma),
        DE_INT("truth.normal_median_radius", truth.normal_median_radius),
        DE_DOUBLE("mask.weight", mask.weight),
        DE_DOUBLE("mask.color_percentile", mask.color_percentile),
        DE_DOUBLE("mask.edge_threshold", mask.edge_threshold),
        DE_INT("mask.coincide_radius", mask.coincide_radius),
        Entry{"arch.encoder_depth", [](RunConfig&, ArchKeys& a, const std::string& v) { a.depth = to_int(v); },
              [](const RunConfig& c) { return std::to_string(c.arch.encoder_depth); }},
        Entry{"arch.head", [](RunConfig&, ArchKeys& a, const std::string& v) { a.head = to_head(v); },
              [](const RunConfig& c) { return head_name(c.arch.head); }},
        Entry{"arch.widths", [](RunConfig&, ArchKeys& a, const std::string& v) { a.widths = to_int_list(v); },
              [](const RunConfig& c) { return fmt_list(c.arch.widths); }},
        Entry{"arch.leaky_slope", [](RunConfig&, ArchKeys& a, const std::string& v) { a.slope = to_double(v); },
              [](const RunConfig& c) { return fmt(c.arch.leaky_slope); }},
        Entry{"arch.disparity_scale", [](RunConfig&, ArchKeys& a, const std::string& v) { a.scale = to_double(v); },
              [](const RunConfig& c) { return fmt(c.arch.disparity_scale); }},
        DE_INT("train.patch_size", train.patch_size),
        DE_INT("train.batch_size", train.batch_size),
        DE_DOUBLE("train.learning_rate", train.adam.learning_rate),
        DE_DOUBLE("train.beta1", train.adam.beta1),
        DE_DOUBLE("train.beta2", train.adam.beta2),
        DE_DOUBLE("train.epsilon", train.adam.epsilon),
        DE_DOUBLE("train.l2_lambda", train.l2_lambda),
        DE_DOUBLE("train.mask_weight", train.mask_weight),
        DE_INT("train.epochs", train.epochs),
        DE_INT("train.patches_per_scene", train.patches_per_scene),
        DE_DOUBLE("train.validation_fraction", train.validation_fraction),
        DE_INT("train.max_width", train.max_width),
        Entry{"train.seed",
              [](RunConfig& c, ArchKeys&, const std::string& v) {
                  const long long s = to_integer(v);
                  if (s < 0) throw BadValue("seed must be >= 0");
                  c.train.seed = static_cast<std::uint64_t>(s);
              },
              [](const RunConfig& c) { return std::to_string(c.train.seed); }},
        DE_DOUBLE("infer.tau", infer_tau),
        DE_BOOL("segment.strengthen", segment.strengthen),
        Entry{"segment.reading",
              [](RunConfig& c, ArchKeys&, const std::string& v) { c.segment.strengthen_cfg.reading = to_reading(v); },
              [](const RunConfig& c) {
                  return std::string(c.segment.strengthen_cfg.reading == StrengthenReading::Factor ? "factor"
                                                                                                  : "replacement");
              }},
        DE_DOUBLE("segment.saturation", segment.strengthen_cfg.saturation),
        DE_DOUBLE("segment.sharpness", segment.strengthen_cfg.sharpness),
        DE_INT("segment.tangent_cracks", segment.strengthen_cfg.tangent_cracks),
        DE_DOUBLE("refine.mu", refine.mu),
        DE_INT("refine.levels", refine.levels),
        DE_INT("refine.factor", refine.factor),
        DE_INT("refine.window", refine.window),
        DE_DOUBLE("refine.c_sigma", refine.c_sigma),
        DE_BOOL("refine.constant_c", refine.constant_c),
        DE_DOUBLE("refine.c_value", refine.c_value),
        DE_DOUBLE("refine.min_edge", refine.min_edge),
        DE_INT("refine.max_iterations", refine.solver.max_iterations),
        DE_DOUBLE("refine.cg_tolerance", refine.solver.cg_tolerance),
        DE_INT("refine.cg_max_iterations", refine.solver.cg_max_iterations),
        DE_INT("eval.slack_radius", eval.slack_radius),
        DE_INT("eval.thresholds", eval.thresholds),
        DE_DOUBLE("eval.gt_threshold", eval.gt_threshold),
        DE_DOUBLE("eval.color_center", eval.baseline.color_center),
        DE_DOUBLE("eval.large_sigma", eval.baseline.large_sigma),
    };
    return table;
}

#undef DE_DOUBLE
#undef DE_INT
#undef DE_BOOL

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

void check(bool ok, const std::string& origin, const std::string& message) {
    if (!ok) throw input_error(origin + ": " + message);
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
    std::map<std::string, const Entry*> index;
    for (const auto& e : entries()) index[e.key] = &e;
    RunConfig cfg;
    ArchKeys arch;
    std::map<std::string, int> seen;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw parse_error(where + ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        const auto it = index.find(key);
        if (it == index.end()) throw parse_error(where + ": unknown key '" + key + "'");
        if (const auto prev = seen.find(key); prev != seen.end()) {
            throw parse_error(where + ": key '" + key + "' already set on line " + std::to_string(prev->second));
        }
        seen[key] = lineno;
        if (value.empty()) throw parse_error(where + ": key '" + key + "' has no value");
        try {
            it->second->set(cfg, arch, value);
        } catch (const BadValue& e) {
            throw parse_error(where + ": key '" + key + "': " + e.what());
        }
        if (key.rfind("arch.", 0) == 0) cfg.arch_given = true;
    }

    if (arch.depth || arch.head) {
        const int depth = arch.depth.value_or(cfg.arch.encoder_depth);
        check(depth >= 1 && depth <= 12, origin, "arch.encoder_depth must be in 1..12");
        cfg.arch = ArchitectureConfig::make_default(depth, arch.head.value_or(cfg.arch.head));
    }
    if (arch.widths) {
        check(static_cast<int>(arch.widths->size()) == cfg.arch.encoder_depth, origin,
              "arch.widths needs one entry per encoder layer (" + std::to_string(cfg.arch.encoder_depth) + ")");
        cfg.arch.widths = *arch.widths;
    }
    if (arch.slope) cfg.arch.leaky_slope = *arch.slope;
    if (arch.scale) cfg.arch.disparity_scale = *arch.scale;

    try {
        cfg.arch.validate();
        cfg.train.validate(cfg.arch);
        cfg.refine.validate();
        cfg.dataset.corruption.validate();
        cfg.truth.contour_filter.validate();
        cfg.truth.crease_filter.validate();
    } catch (const Error& e) {
        throw Error(e.kind(), origin + ": " + e.what());
    }
    check(cfg.dataset.count >= 1, origin, "dataset.count must be >= 1");
    check(cfg.dataset.width >= 2 && cfg.dataset.height >= 2, origin, "dataset canvas must be at least 2x2");
    check(cfg.infer_tau >= 0 && cfg.infer_tau <= 1, origin, "infer.tau must be in [0, 1]");
    check(cfg.eval.slack_radius >= 0, origin, "eval.slack_radius must be >= 0");
    check(cfg.eval.thresholds >= 1, origin, "eval.thresholds must be >= 1");
    check(cfg.segment.strengthen_cfg.tangent_cracks >= 1, origin, "segment.tangent_cracks must be >= 1");
    check(cfg.segment.strengthen_cfg.saturation > 0, origin, "segment.saturation must be > 0");
    check(cfg.mask.coincide_radius >= 0, origin, "mask.coincide_radius must be >= 0");
    check(cfg.mask.color_percentile >= 0 && cfg.mask.color_percentile <= 1, origin,
          "mask.color_percentile must be in [0, 1]");
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) { return parse_run_config(read_file(path), path.string()); }

std::string format_run_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& e : entries()) out += std::string(e.key) + " = " + e.get(cfg) + "\n";
    return out;
}

std::vector<std::string> run_config_keys() {
    std::vector<std::string> keys;
    for (const auto& e : entries()) keys.emplace_back(e.key);
    return keys;
}

}  // namespace depthedge
