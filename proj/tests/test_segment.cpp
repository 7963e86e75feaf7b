#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <vector>

#include "depthedge/evaluate.hpp"
#include "depthedge/rng.hpp"
#include "depthedge/segment.hpp"
#include "oracles.hpp"

namespace depthedge {
namespace {

Image random_edges(Rng& rng, int w, int h, int levels) {
    Image img(w, h, 1);
    for (auto& v : img.data()) v = static_cast<float>(rng.below(static_cast<std::uint64_t>(levels))) / (levels - 1);
    return img;
}

// Ring of value v with inner radius r0 and outer radius r1 around the centre.
void draw_ring(Image& img, double r0, double r1, float v) {
    const double cx = (img.width() - 1) / 2.0, cy = (img.height() - 1) / 2.0;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            const double r = std::hypot(x - cx, y - cy);
            if (r >= r0 && r <= r1) img.at(x, y) = v;
        }
}

int count_labels(const std::vector<int>& labels) { return static_cast<int>(std::set<int>(labels.begin(), labels.end()).size()); }

// Compact relabel of an oracle partition in raster order of first appearance.
std::vector<int> canonical(const std::vector<int>& labels) {
    std::map<int, int> ids;
    std::vector<int> out;
    for (int l : labels) out.push_back(ids.emplace(l, static_cast<int>(ids.size())).first->second);
    return out;
}

TEST(Watershed, MatchesFloodingOracle) {
    Rng rng(17);
    for (int trial = 0; trial < 60; ++trial) {
        const int w = 2 + static_cast<int>(rng.below(15)), h = 2 + static_cast<int>(rng.below(15));
        const Image e = random_edges(rng, w, h, trial % 2 ? 6 : 1000);
        const WatershedResult ws = watershed(e);
        int regions = 0;
        const std::vector<int> expected = oracle::watershed_labels(e, regions);
        ASSERT_EQ(ws.region_count, regions) << "trial " << trial;
        ASSERT_EQ(ws.labels, expected) << "trial " << trial;
    }
}

TEST(Watershed, ArcsMatchBruteForce) {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const int w = 3 + static_cast<int>(rng.below(14)), h = 3 + static_cast<int>(rng.below(14));
        const Image e = random_edges(rng, w, h, 8);
        const WatershedResult ws = watershed(e);
        std::map<std::pair<int, int>, std::pair<int, double>> expect;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (auto [u, v] : {std::pair{x + 1, y}, std::pair{x, y + 1}}) {
                    if (u >= w || v >= h) continue;
                    const int p = ws.labels[static_cast<std::size_t>(y * w + x)], q = ws.labels[static_cast<std::size_t>(v * w + u)];
                    if (p == q) continue;
                    auto& slot = expect[{std::min(p, q), std::max(p, q)}];
                    slot.first += 1;
                    slot.second += std::max(e.at(x, y), e.at(u, v));
                }
        ASSERT_EQ(ws.arcs.size(), expect.size());
        for (const auto& arc : ws.arcs) {
            const auto& s = expect.at({arc.a, arc.b});
            EXPECT_EQ(arc.length(), s.first);
            EXPECT_NEAR(arc.strength, s.second / s.first, 1e-9);
        }
        // Every region is 4-connected.
        for (int r = 0; r < ws.region_count; ++r) {
            std::vector<int> stack, seen(static_cast<std::size_t>(w * h), 0);
            int total = 0, reached = 0;
            for (int i = 0; i < w * h; ++i)
                if (ws.labels[static_cast<std::size_t>(i)] == r) {
                    ++total;
                    if (stack.empty() && reached == 0) {
                        stack.push_back(i);
                        seen[static_cast<std::size_t>(i)] = 1;
                    }
                }
            while (!stack.empty()) {
                const int i = stack.back();
                stack.pop_back();
                ++reached;
                const int x = i % w, y = i / w;
                for (auto [u, v] : {std::pair{x - 1, y}, std::pair{x + 1, y}, std::pair{x, y - 1}, std::pair{x, y + 1}}) {
                    if (u < 0 || v < 0 || u >= w || v >= h) continue;
                    const int j = v * w + u;
                    if (!seen[static_cast<std::size_t>(j)] && ws.labels[static_cast<std::size_t>(j)] == r) {
                        seen[static_cast<std::size_t>(j)] = 1;
                        stack.push_back(j);
                    }
                }
            }
            EXPECT_EQ(reached, total);
        }
    }
}

TEST(Segment, RingSplitsInsideFromOutside) {
    Image e(32, 32, 1);
    draw_ring(e, 8, 10, 0.9f);
    SegmenterConfig cfg;
    cfg.strengthen = false;
    const SegmentationHierarchy h = segment(e, cfg);
    ASSERT_EQ(h.region_count, 2);
    ASSERT_EQ(h.merges.size(), 1u);
    EXPECT_NEAR(h.merges[0].strength, 0.9, 1e-6);
    EXPECT_EQ(count_labels(threshold_segmentation(h, 0.5)), 2);
    EXPECT_EQ(count_labels(threshold_segmentation(h, 0.95)), 1);
    // A lone arc has nothing to strengthen it.
    EXPECT_NEAR(segment(e).merges[0].strength, 0.9, 1e-6);
}

TEST(Segment, NestedRingsMergeInOrder) {
    Image e(48, 48, 1);
    draw_ring(e, 18, 20, 0.4f);
    draw_ring(e, 7, 9, 0.8f);
    SegmenterConfig cfg;
    cfg.strengthen = false;
    const SegmentationHierarchy h = segment(e, cfg);
    ASSERT_EQ(h.region_count, 3);
    ASSERT_EQ(h.merges.size(), 2u);
    EXPECT_NEAR(h.merges[0].strength, 0.4, 1e-6);
    EXPECT_NEAR(h.merges[1].strength, 0.8, 1e-6);
    EXPECT_EQ(count_labels(threshold_segmentation(h, 0.3)), 3);
    EXPECT_EQ(count_labels(threshold_segmentation(h, 0.6)), 2);
    EXPECT_EQ(count_labels(threshold_segmentation(h, 0.9)), 1);
    const int centre = h.base_labels[static_cast<std::size_t>(24 * 48 + 24)], corner = h.base_labels[0];
    EXPECT_NEAR(h.cophenetic(centre, corner), 0.8, 1e-6);
}

TEST(Segment, StrengthenFactorCases) {
    const double width = 100.0;
    // A stronger, aligned, long neighbour at twice the strength doubles the arc.
    EXPECT_NEAR(strengthen_factor(0.4, 500, {0.8}, {500}, {1.0}, width), 2.0, 1e-6);
    // Much stronger neighbour: 1 + 0.5 * 5 * (saturated lengths).
    EXPECT_NEAR(strengthen_factor(0.2, 500, {1.0}, {500}, {1.0}, width), 3.5, 1e-6);
    // Weaker or perpendicular neighbours leave it alone.
    EXPECT_DOUBLE_EQ(strengthen_factor(0.8, 500, {0.4}, {500}, {1.0}, width), 1.0);
    EXPECT_DOUBLE_EQ(strengthen_factor(0.4, 500, {0.8}, {500}, {0.0}, width), 1.0);
    EXPECT_DOUBLE_EQ(strengthen_factor(0.4, 10, {}, {}, {}, width), 1.0);
}

TEST(Segment, ArcTangentFollowsStraightArc) {
    BoundaryArc arc;
    for (int y = 0; y < 8; ++y) arc.cracks.push_back({3, y, false});  // vertical line of cracks at x = 4
    const auto [tx, ty] = arc_tangent(arc, 4, 0);
    EXPECT_NEAR(std::abs(ty), 1.0, 1e-9);
    EXPECT_NEAR(tx, 0.0, 1e-9);
}

// Label of the cluster containing each base region after merges below t, by
// repeated relabelling.
std::vector<int> naive_threshold(const SegmentationHierarchy& h, double t) {
    std::vector<int> cluster(static_cast<std::size_t>(h.region_count));
    for (int i = 0; i < h.region_count; ++i) cluster[static_cast<std::size_t>(i)] = i;
    std::vector<int> id_of(static_cast<std::size_t>(h.region_count) + h.merges.size());
    for (int i = 0; i < h.region_count; ++i) id_of[static_cast<std::size_t>(i)] = i;
    for (std::size_t k = 0; k < h.merges.size(); ++k) {
        const Merge& m = h.merges[k];
        const int a = id_of[static_cast<std::size_t>(m.a)], b = id_of[static_cast<std::size_t>(m.b)];
        id_of[static_cast<std::size_t>(h.region_count) + k] = a;
        if (!(m.strength < t)) continue;
        for (auto& c : cluster)
            if (c == b) c = a;
    }
    std::vector<int> pix(h.base_labels.size());
    for (std::size_t i = 0; i < pix.size(); ++i) pix[i] = cluster[static_cast<std::size_t>(h.base_labels[i])];
    return canonical(pix);
}

TEST(Hierarchy, UltrametricNestedAndReconstructible) {
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        const int w = 6 + static_cast<int>(rng.below(11)), h = 6 + static_cast<int>(rng.below(11));
        Image e = random_edges(rng, w, h, 1000);
        SegmenterConfig cfg;
        cfg.strengthen = trial % 2 == 0;
        const SegmentationHierarchy hier = segment(e, cfg);
        const int r = hier.region_count;
        for (std::size_t k = 1; k < hier.merges.size(); ++k)
            ASSERT_GE(hier.merges[k].strength, hier.merges[k - 1].strength);
        const int probe = std::min(r, 12);
        for (int a = 0; a < probe; ++a)
            for (int b = 0; b < probe; ++b)
                for (int c = 0; c < probe; ++c)
                    ASSERT_LE(hier.cophenetic(a, c), std::max(hier.cophenetic(a, b), hier.cophenetic(b, c)) + 1e-12);
        std::vector<double> ts;
        for (int k = 0; k < 5; ++k) ts.push_back(rng.uniform());
        std::sort(ts.begin(), ts.end());
        const Image ucm = ucm_raster(hier);
        ASSERT_EQ(ucm.width(), 2 * w - 1);
        std::vector<int> prev;
        for (double t : ts) {
            const std::vector<int> part = threshold_segmentation(hier, t);
            EXPECT_EQ(part, naive_threshold(hier, t));
            EXPECT_EQ(part, partition_from_ucm(ucm, t)) << "trial " << trial << " t " << t;
            if (!prev.empty()) {
                // Coarser with t: every finer region sits inside one coarser region.
                std::map<int, int> parent;
                for (std::size_t i = 0; i < part.size(); ++i) {
                    auto [it, fresh] = parent.emplace(prev[i], part[i]);
                    EXPECT_EQ(it->second, part[i]);
                }
            }
            prev = part;
        }
    }
}

TEST(Hierarchy, FileRoundTrip) {
    Rng rng(3);
    const Image e = random_edges(rng, 20, 14, 50);
    const SegmentationHierarchy h = segment(e);
    const auto dir = std::filesystem::temp_directory_path() / "depthedge_test_hier";
    std::filesystem::create_directories(dir);
    write_hierarchy(dir / "tree.txt", dir / "labels.pgm", h);
    const SegmentationHierarchy back = read_hierarchy(dir / "tree.txt", dir / "labels.pgm", &e);
    EXPECT_EQ(back.base_labels, h.base_labels);
    ASSERT_EQ(back.merges.size(), h.merges.size());
    for (std::size_t k = 0; k < h.merges.size(); ++k) {
        EXPECT_EQ(back.merges[k].a, h.merges[k].a);
        EXPECT_NEAR(back.merges[k].strength, h.merges[k].strength, 1e-8);
    }
    EXPECT_EQ(format_merge_tree(back), format_merge_tree(h));
    std::filesystem::remove_all(dir);
}

TEST(BoundaryPr, MatchesExhaustiveOracle) {
    Rng rng(31);
    for (int trial = 0; trial < 60; ++trial) {
        const int w = 1 + static_cast<int>(rng.below(16)), h = 1 + static_cast<int>(rng.below(16));
        Image pred(w, h, 1), gt(w, h, 1);
        const double density = rng.uniform(0.0, 0.3);
        for (auto& v : pred.data()) v = rng.uniform() < density ? 1.0f : 0.0f;
        for (auto& v : gt.data()) v = rng.uniform() < density ? 1.0f : 0.0f;
        const int radius = static_cast<int>(rng.below(4));
        const BoundaryPR r = boundary_pr(pred, gt, radius);
        const oracle::PrCounts c = oracle::boundary_counts(pred, gt, radius);
        EXPECT_EQ(r.matched_pred, c.matched_pred);
        EXPECT_EQ(r.total_pred, c.total_pred);
        EXPECT_EQ(r.matched_gt, c.matched_gt);
        EXPECT_EQ(r.total_gt, c.total_gt);
    }
}

TEST(BoundaryPr, SlackRadiusOnFiveByFive) {
    Image pred(5, 5, 1), gt(5, 5, 1);
    for (int y = 0; y < 5; ++y) {
        gt.at(1, y) = 1.0f;
        pred.at(3, y) = 1.0f;  // 2 px away
    }
    pred.at(4, 4) = 1.0f;  // 3 px away
    const BoundaryPR r2 = boundary_pr(pred, gt, 2);
    EXPECT_DOUBLE_EQ(r2.precision, 5.0 / 6.0);
    EXPECT_DOUBLE_EQ(r2.recall, 1.0);
    EXPECT_DOUBLE_EQ(r2.f1, 2 * (5.0 / 6.0) / (5.0 / 6.0 + 1.0));
    const BoundaryPR r1 = boundary_pr(pred, gt, 1);
    EXPECT_DOUBLE_EQ(r1.precision, 0.0);
    EXPECT_DOUBLE_EQ(r1.recall, 0.0);
    EXPECT_DOUBLE_EQ(r1.f1, 0.0);
}

TEST(BoundaryPr, SymmetryAndEmptyMaps) {
    Rng rng(8);
    Image a(12, 9, 1), b(12, 9, 1);
    for (auto& v : a.data()) v = rng.uniform() < 0.2 ? 1.0f : 0.0f;
    for (auto& v : b.data()) v = rng.uniform() < 0.2 ? 1.0f : 0.0f;
    const BoundaryPR ab = boundary_pr(a, b), ba = boundary_pr(b, a);
    EXPECT_DOUBLE_EQ(ab.precision, ba.recall);
    EXPECT_DOUBLE_EQ(ab.recall, ba.precision);
    EXPECT_DOUBLE_EQ(ab.f1, ba.f1);
    const BoundaryPR none = boundary_pr(Image(12, 9, 1), b);
    EXPECT_DOUBLE_EQ(none.precision, 1.0);
    EXPECT_DOUBLE_EQ(none.recall, 0.0);
    const BoundaryPR nogt = boundary_pr(a, Image(12, 9, 1));
    EXPECT_DOUBLE_EQ(nogt.recall, 1.0);
    EXPECT_THROW(boundary_pr(a, Image(11, 9, 1)), Error);
}

TEST(OdsOis, TwoImageEnumeration) {
    // Hand-made curves over thresholds {0, 0.5, 1}.
    auto pr = [](long mp, long tp, long mg, long tg, double t) {
        BoundaryPR r;
        r.matched_pred = mp;
        r.total_pred = tp;
        r.matched_gt = mg;
        r.total_gt = tg;
        r.threshold = t;
        finish(r);
        return r;
    };
    const std::vector<std::vector<BoundaryPR>> curves{
        {pr(10, 40, 10, 10, 0), pr(8, 10, 8, 10, 0.5), pr(2, 2, 2, 10, 1)},
        {pr(5, 30, 5, 5, 0), pr(1, 10, 1, 5, 0.5), pr(3, 3, 3, 5, 1)},
    };
    // Enumerate the aggregated f1 at every shared threshold.
    double best = -1, best_t = 0;
    for (std::size_t t = 0; t < 3; ++t) {
        long mp = 0, tp = 0, mg = 0, tg = 0;
        for (const auto& c : curves) {
            mp += c[t].matched_pred;
            tp += c[t].total_pred;
            mg += c[t].matched_gt;
            tg += c[t].total_gt;
        }
        const double p = static_cast<double>(mp) / tp, r = static_cast<double>(mg) / tg;
        const double f = 2 * p * r / (p + r);
        if (f > best) {
            best = f;
            best_t = curves[0][t].threshold;
        }
    }
    double ois = 0;
    for (const auto& c : curves) {
        double m = 0;
        for (const auto& r : c) m = std::max(m, 2 * r.precision * r.recall / (r.precision + r.recall));
        ois += m / 2;
    }
    const OdsOis s = ods_ois(curves);
    EXPECT_NEAR(s.ods, best, 1e-12);
    EXPECT_DOUBLE_EQ(s.ods_threshold, best_t);
    EXPECT_NEAR(s.ois, ois, 1e-12);
    EXPECT_GE(s.ois, s.ods);
}

TEST(OdsOis, OisNeverBelowOdsOnSegmentations) {
    Rng rng(12);
    std::vector<std::vector<BoundaryPR>> curves;
    for (int i = 0; i < 4; ++i) {
        Image e(24, 24, 1), gt(24, 24, 1);
        draw_ring(e, 4 + i, 6 + i, 0.7f);
        for (auto& v : e.data()) v = std::clamp(v + static_cast<float>(rng.uniform(0.0, 0.3)), 0.0f, 1.0f);
        for (int y = 0; y < 24; ++y) gt.at(12, y) = 1.0f;
        curves.push_back(pr_curve(segment(e), gt, uniform_thresholds(9)));
    }
    const OdsOis s = ods_ois(curves);
    EXPECT_GE(s.ois + 1e-12, s.ods);
    EXPECT_EQ(format_pr_csv(curves[0]).substr(0, 27), "threshold,precision,recall,");
}

TEST(Evaluate, BaselinesHaveSceneShape) {
    Image color(20, 16, 3), disp(20, 16, 1, 10.0f), normals(20, 16, 3);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 20; ++x) {
            normals.at(x, y, 2) = 1.0f;
            if (x >= 10) {
                disp.at(x, y) = 30.0f;
                for (int k = 0; k < 3; ++k) color.at(x, y, k) = 1.0f;
            }
        }
    const CameraIntrinsics cam;
    for (auto ch : {BaselineChannel::Color, BaselineChannel::Disparity, BaselineChannel::Normals}) {
        const Image b = baseline_single(ch, color, disp, normals, cam);
        EXPECT_EQ(b.width(), 20);
        EXPECT_EQ(b.channels(), 1);
        for (float v : b.data()) {
            EXPECT_GE(v, 0.0f);
            EXPECT_LE(v, 1.0f);
        }
    }
    const Image col = baseline_single(BaselineChannel::Color, color, disp, normals, cam);
    EXPECT_GT(col.at(10, 8), col.at(3, 8));
    const Image ag = baseline_data_agnostic(color, disp, normals);
    EXPECT_GT(ag.at(10, 8), ag.at(2, 8));
    float top = 0.0f;
    for (float v : ag.data()) top = std::max(top, v);
    EXPECT_LE(top, 1.0f + 1e-6f);
}

}  // namespace
}  // namespace depthedge
