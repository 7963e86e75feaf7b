#include "depthedge/edge_truth.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <sstream>

#include "depthedge/log.hpp"

namespace depthedge {

double logistic(double x, const LogisticParams& p) {
    if (!(p.center > 0.0)) throw input_error("logistic center must be positive");
    return 1.0 / (1.0 + std::exp(-p.sharpness * (x / p.center - 1.0)));
}

std::string to_string(FilterKind kind) {
    switch (kind) {
        case FilterKind::CentralDifference: return "central-difference";
        case FilterKind::DerivativeOfGaussian: return "derivative-of-gaussian";
        case FilterKind::DifferenceOfGaussians: return "difference-of-gaussians";
        case FilterKind::Gaussian: return "gaussian";
        case FilterKind::Laplacian5pt: return "laplacian-5pt";
        case FilterKind::Median: return "median";
    }
    return "unknown";
}

namespace {

Image map_logistic(const Image& response, double center) {
    const LogisticParams p{center};
    Image out(response.width(), response.height(), 1);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data()[i] = static_cast<float>(logistic(response.data()[i], p));
    }
    return out;
}

// Central difference that drops undefined (NaN) neighbours: one-sided next
// to a hole, zero when neither neighbour is usable.
double masked_diff(float minus, float center, float plus) {
    const bool m = !std::isnan(minus), p = !std::isnan(plus);
    if (std::isnan(center)) return 0.0;
    if (m && p) return 0.5 * (static_cast<double>(plus) - minus);
    if (p) return static_cast<double>(plus) - center;
    if (m) return static_cast<double>(center) - minus;
    return 0.0;
}

// Pixels outside the image count as undefined too, so the stencil turns
// one-sided at the border and planar ramps keep a constant slope up to the edge.
std::pair<Image, Image> masked_central_gradient(const Image& img) {
    const int w = img.width(), h = img.height();
    Image gx(w, h, 1), gy(w, h, 1);
    auto get = [&](int x, int y) {
        if (x < 0 || y < 0 || x >= w || y >= h) return std::numeric_limits<float>::quiet_NaN();
        return img.at(x, y);
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const float c = img.at(x, y);
            gx.at(x, y) = static_cast<float>(masked_diff(get(x - 1, y), c, get(x + 1, y)));
            gy.at(x, y) = static_cast<float>(masked_diff(get(x, y - 1), c, get(x, y + 1)));
        }
    }
    return {std::move(gx), std::move(gy)};
}

bool has_nan(const Image& img) {
    for (float v : img.data())
        if (std::isnan(v)) return true;
    return false;
}

}  // namespace

EdgeProbabilityMap depth_contour_prob(const Image& disparity, double alpha, const FilterSpec& spec) {
    require_single_channel(disparity, "depth_contour_prob");
    for (float v : disparity.data()) {
        if (!std::isfinite(v)) {
            throw input_error("depth_contour_prob: disparity contains non-finite samples; inpaint or mask first");
        }
    }
    if (!(alpha > 0.0)) throw input_error("depth_contour_prob: alpha must be positive");
    Image response;
    if (spec.kind == FilterKind::CentralDifference) {
        auto [gx, gy] = masked_central_gradient(disparity);
        response = laplacian(gradient_magnitude(gx, gy));
    } else if (spec.kind == FilterKind::DerivativeOfGaussian) {
        const Image mag = gradient_magnitude(disparity, spec);
        response = filter(mag, FilterSpec::difference_of_gaussians(spec.sigma, spec.sigma2));
    } else {
        throw input_error("depth_contour_prob: filter must be central-difference or derivative-of-Gaussian");
    }
    for (auto& v : response.data()) v = std::max(v, 0.0f);
    return {map_logistic(response, alpha), EdgeKind::Contour};
}

EdgeProbabilityMap depth_crease_prob(const Image& normals, double beta, const FilterSpec& spec) {
    if (normals.channels() != 3) throw shape_error("depth_crease_prob expects a 3-channel normal image");
    if (!(beta > 0.0)) throw input_error("depth_crease_prob: beta must be positive");
    Image n = normals;
    std::size_t fixed = 0;
    for (std::size_t i = 0; i < n.pixel_count(); ++i) {
        float* p = n.data().data() + 3 * i;
        if (std::isnan(p[0]) || std::isnan(p[1]) || std::isnan(p[2])) {
            p[0] = p[1] = p[2] = std::numeric_limits<float>::quiet_NaN();
            continue;
        }
        const double len = std::sqrt(double(p[0]) * p[0] + double(p[1]) * p[1] + double(p[2]) * p[2]);
        if (std::abs(len - 1.0) > 1e-3) {
            ++fixed;
            if (len > 0.0) {
                for (int c = 0; c < 3; ++c) p[c] = static_cast<float>(p[c] / len);
            } else {
                p[0] = p[1] = p[2] = std::numeric_limits<float>::quiet_NaN();
            }
        }
    }
    if (fixed > 0) {
        warn("depth_crease_prob: renormalized " + std::to_string(fixed) + " non-unit normals");
    }
    const bool holes = has_nan(n);
    if (holes && spec.kind != FilterKind::CentralDifference) {
        throw input_error("depth_crease_prob: undefined normals require the central-difference filter");
    }
    Image sum(n.width(), n.height(), 1, 0.0f);
    for (int c = 0; c < 3; ++c) {
        const Image comp = n.channel(c);
        Image mag;
        if (spec.kind == FilterKind::CentralDifference) {
            auto [gx, gy] = masked_central_gradient(comp);
            mag = gradient_magnitude(gx, gy);
        } else {
            mag = gradient_magnitude(comp, spec);
        }
        for (std::size_t i = 0; i < sum.size(); ++i) sum.data()[i] += mag.data()[i];
    }
    if (holes) {
        for (std::size_t i = 0; i < sum.size(); ++i)
            if (std::isnan(n.data()[3 * i])) sum.data()[i] = 0.0f;
    }
    return {map_logistic(sum, beta), EdgeKind::Crease};
}

EdgeProbabilityMap combine_edge_prob(const EdgeProbabilityMap& contour, const EdgeProbabilityMap& crease) {
    if (!contour.image.same_shape(crease.image)) throw shape_error("combine_edge_prob: shape mismatch");
    Image out(contour.image.width(), contour.image.height(), 1);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double c = contour.image.data()[i], r = crease.image.data()[i];
        out.data()[i] = static_cast<float>(1.0 - (1.0 - c) * (1.0 - r));
    }
    return {std::move(out), EdgeKind::Edge};
}

Image normals_from_disparity(const Image& disparity, const CameraIntrinsics& cam, int median_radius) {
    require_single_channel(disparity, "normals_from_disparity");
    if (!(cam.focal > 0.0)) throw input_error("camera focal length must be positive");
    const int w = disparity.width(), h = disparity.height();
    const Image d = median_radius > 0 ? filter(disparity, FilterSpec::median(median_radius)) : disparity;

    // Camera frame: X right, Y down, Z forward. Undefined where disparity <= 0.
    std::vector<std::array<double, 3>> pts(d.pixel_count());
    std::vector<char> valid(d.pixel_count(), 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const double disp = d.at(x, y);
            if (!(disp > 0.0) || !std::isfinite(disp)) continue;
            const double z = cam.disparity_scale / disp;
            pts[i] = {(x - cam.cx) * z / cam.focal, (y - cam.cy) * z / cam.focal, z};
            valid[i] = 1;
        }
    }
    auto tangent = [&](int x, int y, int dx, int dy) {
        const std::size_t c = static_cast<std::size_t>(y) * w + x;
        const int xm = x - dx, ym = y - dy, xp = x + dx, yp = y + dy;
        const bool okm = xm >= 0 && ym >= 0 && valid[static_cast<std::size_t>(ym) * w + xm];
        const bool okp = xp < w && yp < h && valid[static_cast<std::size_t>(yp) * w + xp];
        const auto& pc = pts[c];
        std::array<double, 3> t{0, 0, 0};
        if (okm && okp) {
            const auto& a = pts[static_cast<std::size_t>(ym) * w + xm];
            const auto& b = pts[static_cast<std::size_t>(yp) * w + xp];
            for (int k = 0; k < 3; ++k) t[k] = 0.5 * (b[k] - a[k]);
        } else if (okp) {
            const auto& b = pts[static_cast<std::size_t>(yp) * w + xp];
            for (int k = 0; k < 3; ++k) t[k] = b[k] - pc[k];
        } else if (okm) {
            const auto& a = pts[static_cast<std::size_t>(ym) * w + xm];
            for (int k = 0; k < 3; ++k) t[k] = pc[k] - a[k];
        }
        return t;
    };

    const float nan = std::numeric_limits<float>::quiet_NaN();
    Image normals(w, h, 3, nan);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!valid[static_cast<std::size_t>(y) * w + x]) continue;
            const auto tu = tangent(x, y, 1, 0);
            const auto tv = tangent(x, y, 0, 1);
            std::array<double, 3> n{tu[1] * tv[2] - tu[2] * tv[1], tu[2] * tv[0] - tu[0] * tv[2],
                                    tu[0] * tv[1] - tu[1] * tv[0]};
            const double len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
            if (!(len > 0.0)) continue;
            if (n[2] > 0.0) n = {-n[0], -n[1], -n[2]};
            // Camera-facing frame: flip depth axis so z points toward the viewer.
            normals.at(x, y, 0) = static_cast<float>(n[0] / len);
            normals.at(x, y, 1) = static_cast<float>(n[1] / len);
            normals.at(x, y, 2) = static_cast<float>(-n[2] / len);
        }
    }
    if (median_radius <= 0) return normals;

    // Median per component over defined pixels only, then renormalize.
    Image smoothed = normals;
    std::vector<float> window;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (std::isnan(normals.at(x, y, 0))) continue;
            double len2 = 0.0;
            std::array<float, 3> m{};
            for (int c = 0; c < 3; ++c) {
                window.clear();
                for (int dy = -median_radius; dy <= median_radius; ++dy) {
                    for (int dx = -median_radius; dx <= median_radius; ++dx) {
                        const int xx = x + dx, yy = y + dy;
                        if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
                        const float v = normals.at(xx, yy, c);
                        if (!std::isnan(v)) window.push_back(v);
                    }
                }
                auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
                std::nth_element(window.begin(), mid, window.end());
                m[c] = *mid;
                len2 += double(m[c]) * m[c];
            }
            const double len = std::sqrt(len2);
            if (len > 1e-6) {
                for (int c = 0; c < 3; ++c) smoothed.at(x, y, c) = static_cast<float>(m[c] / len);
            }
        }
    }
    return smoothed;
}

GroundTruth make_ground_truth(const Image& disparity, const Image& normals, const GroundTruthConfig& cfg) {
    if (!disparity.same_size(normals)) throw shape_error("make_ground_truth: disparity/normal size mismatch");
    GroundTruth gt;
    gt.contour = depth_contour_prob(disparity, cfg.alpha, cfg.contour_filter);
    gt.crease = depth_crease_prob(normals, cfg.beta, cfg.crease_filter);
    gt.edge = combine_edge_prob(gt.contour, gt.crease);
    return gt;
}

GroundTruth make_ground_truth(const Image& disparity, const CameraIntrinsics& cam, const GroundTruthConfig& cfg) {
    return make_ground_truth(disparity, normals_from_disparity(disparity, cam, cfg.normal_median_radius), cfg);
}

std::string ground_truth_sidecar(const GroundTruthConfig& cfg) {
    std::ostringstream s;
    s << "alpha = " << cfg.alpha << "\n"
      << "beta = " << cfg.beta << "\n"
      << "contour_filter = " << to_string(cfg.contour_filter.kind) << "\n"
      << "contour_sigma = " << cfg.contour_filter.sigma << "\n"
      << "contour_sigma2 = " << cfg.contour_filter.sigma2 << "\n"
      << "crease_filter = " << to_string(cfg.crease_filter.kind) << "\n"
      << "crease_sigma = " << cfg.crease_filter.sigma << "\n"
      << "normal_median_radius = " << cfg.normal_median_radius << "\n";
    return s.str();
}

}  // namespace depthedge
