#include "depthedge/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace depthedge {

double f1_score(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

void finish(BoundaryPR& pr) {
    pr.precision = pr.total_pred ? static_cast<double>(pr.matched_pred) / pr.total_pred : 1.0;
    pr.recall = pr.total_gt ? static_cast<double>(pr.matched_gt) / pr.total_gt : 1.0;
    pr.f1 = f1_score(pr.precision, pr.recall);
}

namespace {

std::vector<char> dilate(const Image& img, int radius) {
    const int w = img.width(), h = img.height();
    std::vector<std::pair<int, int>> disc;
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
            if (dx * dx + dy * dy <= radius * radius) disc.emplace_back(dx, dy);
    std::vector<char> out(img.pixel_count(), 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!(img.at(x, y) > 0.5f)) continue;
            for (auto [dx, dy] : disc) {
                const int u = x + dx, v = y + dy;
                if (u >= 0 && v >= 0 && u < w && v < h) out[static_cast<std::size_t>(v) * w + u] = 1;
            }
        }
    return out;
}

}  // namespace

BoundaryPR boundary_pr(const Image& pred, const Image& gt, int radius) {
    require_single_channel(pred, "boundary_pr");
    require_single_channel(gt, "boundary_pr");
    if (!pred.same_size(gt)) throw shape_error("boundary_pr: prediction and ground truth differ in size");
    if (radius < 0) throw input_error("boundary_pr: slack radius must be >= 0");
    const std::vector<char> gd = dilate(gt, radius), pd = dilate(pred, radius);
    BoundaryPR r;
    r.slack_radius = radius;
    for (std::size_t i = 0; i < pred.pixel_count(); ++i) {
        const bool p = pred.data()[i] > 0.5f, g = gt.data()[i] > 0.5f;
        r.total_pred += p;
        r.total_gt += g;
        r.matched_pred += p && gd[i];
        r.matched_gt += g && pd[i];
    }
    finish(r);
    return r;
}

std::vector<double> uniform_thresholds(int count) {
    if (count < 1) throw input_error("threshold count must be positive");
    std::vector<double> t(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) t[static_cast<std::size_t>(i)] = count == 1 ? 0.5 : static_cast<double>(i) / (count - 1);
    return t;
}

std::vector<BoundaryPR> pr_curve(const SegmentationHierarchy& h, const Image& gt, const std::vector<double>& thresholds,
                                 int radius) {
    if (gt.width() != h.width || gt.height() != h.height) throw shape_error("pr_curve: ground truth size differs");
    std::vector<BoundaryPR> out;
    out.reserve(thresholds.size());
    for (double t : thresholds) {
        const Image pred = boundary_map(threshold_segmentation(h, t), h.width, h.height);
        BoundaryPR r = boundary_pr(pred, gt, radius);
        r.threshold = t;
        out.push_back(r);
    }
    return out;
}

OdsOis ods_ois(const std::vector<std::vector<BoundaryPR>>& curves) {
    if (curves.empty()) throw input_error("ods_ois: no images");
    const std::size_t k = curves[0].size();
    if (k == 0) throw input_error("ods_ois: empty PR curve");
    for (const auto& c : curves)
        if (c.size() != k) throw shape_error("ods_ois: PR curves use different threshold sets");
    OdsOis s;
    s.ods = -1.0;
    for (std::size_t t = 0; t < k; ++t) {
        BoundaryPR agg;
        for (const auto& c : curves) {
            agg.matched_pred += c[t].matched_pred;
            agg.total_pred += c[t].total_pred;
            agg.matched_gt += c[t].matched_gt;
            agg.total_gt += c[t].total_gt;
        }
        finish(agg);
        if (agg.f1 > s.ods) {
            s.ods = agg.f1;
            s.ods_threshold = curves[0][t].threshold;
        }
    }
    double sum = 0.0;
    for (const auto& c : curves) {
        double best = 0.0;
        for (const auto& r : c) best = std::max(best, r.f1);
        sum += best;
    }
    s.ois = sum / static_cast<double>(curves.size());
    return s;
}

std::string format_pr_csv(const std::vector<BoundaryPR>& curve) {
    std::ostringstream os;
    os << "threshold,precision,recall,f1\n";
    char buf[128];
    for (const auto& r : curve) {
        std::snprintf(buf, sizeof buf, "%.6g,%.6f,%.6f,%.6f\n", r.threshold, r.precision, r.recall, r.f1);
        os << buf;
    }
    return os.str();
}

std::string format_summary_table(const std::vector<std::string>& methods, const std::vector<OdsOis>& scores) {
    std::size_t wide = 6;
    for (const auto& m : methods) wide = std::max(wide, m.size());
    std::ostringstream os;
    char buf[64];
    os << "method" << std::string(wide - 6 + 2, ' ') << "   ODS     OIS\n";
    for (std::size_t i = 0; i < methods.size(); ++i) {
        std::snprintf(buf, sizeof buf, "  %6.4f  %6.4f\n", scores[i].ods, scores[i].ois);
        os << methods[i] << std::string(wide - methods[i].size(), ' ') << buf;
    }
    return os.str();
}

Image baseline_single(BaselineChannel channel, const Image& color, const Image& disparity, const Image& normals,
                      const CameraIntrinsics& cam, const BaselineConfig& cfg) {
    switch (channel) {
        case BaselineChannel::Color: {
            const Image mag = gradient_magnitude(luminance(color));
            Image out(mag.width(), mag.height(), 1);
            const LogisticParams p{cfg.color_center};
            for (std::size_t i = 0; i < mag.size(); ++i) out.data()[i] = static_cast<float>(logistic(mag.data()[i], p));
            return out;
        }
        case BaselineChannel::Disparity:
            return make_ground_truth(disparity, cam, cfg.formulas).edge.image;
        case BaselineChannel::Normals:
            return depth_crease_prob(normals, cfg.formulas.beta, cfg.formulas.crease_filter).image;
    }
    throw input_error("unknown baseline channel");
}

Image baseline_data_agnostic(const Image& color, const Image& disparity, const Image& normals,
                             const BaselineConfig& cfg) {
    const FilterSpec dog = FilterSpec::derivative_of_gaussian(cfg.large_sigma);
    Image n = normals;
    for (auto& v : n.data())
        if (std::isnan(v)) v = 0.0f;
    const Image responses[3] = {
        gradient_magnitude(luminance(color), dog),
        gradient_magnitude(disparity, dog),
        [&] {
            Image sum(n.width(), n.height(), 1);
            for (int c = 0; c < 3; ++c) {
                const Image m = gradient_magnitude(n.channel(c), dog);
                for (std::size_t i = 0; i < m.size(); ++i) sum.data()[i] += m.data()[i];
            }
            return sum;
        }(),
    };
    Image out(color.width(), color.height(), 1);
    for (const Image& r : responses) {
        float top = 0.0f;
        for (float v : r.data()) top = std::max(top, v);
        if (!(top > 0.0f)) continue;
        for (std::size_t i = 0; i < r.size(); ++i) out.data()[i] += r.data()[i] / top / 3.0f;
    }
    return out;
}

Image binarize(const Image& prob, double threshold) {
    Image out(prob.width(), prob.height(), 1);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = prob.data()[i] > threshold ? 1.0f : 0.0f;
    return out;
}

}  // namespace depthedge
