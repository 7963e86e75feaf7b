#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "depthedge/image.hpp"

namespace depthedge {

/// Boundary element between 4-neighbours (x, y) and (x + 1, y) when
/// `down` is false, or (x, y) and (x, y + 1) when it is true.
struct Crack {
    int x = 0;
    int y = 0;
    bool down = false;
};

/// All cracks separating one pair of base regions (a < b).
struct BoundaryArc {
    int a = 0;
    int b = 0;
    std::vector<Crack> cracks;
    double strength = 0.0;  // mean over cracks of the larger P_e of the two sides

    int length() const { return static_cast<int>(cracks.size()); }
};

struct Merge {
    int a = 0;  // cluster ids: base regions are 0..R-1, merge k creates R + k
    int b = 0;
    double strength = 0.0;
};

struct SegmentationHierarchy {
    int width = 0;
    int height = 0;
    std::vector<int> base_labels;  // row-major, 0..region_count-1
    int region_count = 0;
    std::vector<BoundaryArc> arcs;
    std::vector<Merge> merges;     // non-decreasing strength

    /// Strength of the merge that first joins base regions a and b (0 if a == b).
    double cophenetic(int a, int b) const;
};

struct WatershedResult {
    int width = 0;
    int height = 0;
    std::vector<int> labels;
    int region_count = 0;
    std::vector<BoundaryArc> arcs;  // sorted by (a, b)
};

/// Meyer flooding from the regional minima (4-connected plateaus without a
/// lower neighbour). Every pixel joins a basin; ties in the flooding order
/// go to the earlier queued pixel. Region ids follow raster order of the
/// first pixel of each minimum.
WatershedResult watershed(const Image& edge_prob);

/// Greedy agglomeration by ascending arc strength. A merged region's arc to a
/// neighbour takes the crack-count weighted mean of the arcs it replaces;
/// merge strengths are kept non-decreasing by a running maximum.
SegmentationHierarchy build_ucm(const WatershedResult& base);

enum class StrengthenReading {
    Factor,       // w_i <- w_i * w'_i
    Replacement,  // w_i <- w'_i
};

struct StrengthenConfig {
    StrengthenReading reading = StrengthenReading::Factor;
    double saturation = 0.7;   // arc-length logistic centre, fraction of the image width
    double sharpness = 10.0;
    int tangent_cracks = 5;    // terminal cracks used for the endpoint tangent fit
};

/// Strengthening factor 1 + max_j |cos a_ij| * max(1, 0.5 (w_j / w_i) sqrt(s(l_i) s(l_j)))
/// over connected arcs j with w_j > w_i; 1 when there is none.
double strengthen_factor(double w_i, double l_i, const std::vector<double>& w_j, const std::vector<double>& l_j,
                         const std::vector<double>& cos_ij, double image_width, const StrengthenConfig& cfg = {});

/// Visit base arcs from strongest to weakest, rescale each by its factor
/// against the already visited stronger arcs it touches, divide all
/// strengths by max(1, largest) and rebuild the merge tree.
SegmentationHierarchy strengthen_contours(const SegmentationHierarchy& h, const StrengthenConfig& cfg = {});

/// Endpoint tangent of an arc near a lattice corner (cx, cy): principal axis
/// of the corner points of the `count` cracks closest to it. Unit length.
std::pair<double, double> arc_tangent(const BoundaryArc& arc, int cx, int cy, int count = 5);

/// Labels (compact, raster order) after all merges with strength < t.
std::vector<int> threshold_segmentation(const SegmentationHierarchy& h, double t);

/// UCM on the doubled grid: (2w - 1) x (2h - 1); pixel (x, y) sits at
/// (2x, 2y) with value 0, cracks between pixels carry the cophenetic
/// strength and lattice corners the maximum of their cracks.
Image ucm_raster(const SegmentationHierarchy& h);

/// Regions of the doubled-grid UCM: pixels joined through cracks below t.
std::vector<int> partition_from_ucm(const Image& ucm, double t);

/// 1 on pixels whose right or lower neighbour carries another label.
Image boundary_map(const std::vector<int>& labels, int width, int height);

/// Pixel-resolution boundary strength: max over a pixel's right/lower cracks.
Image ucm_pixel_strength(const SegmentationHierarchy& h);

struct SegmenterConfig {
    bool strengthen = true;
    StrengthenConfig strengthen_cfg;
};

/// watershed -> build_ucm -> optional strengthen_contours.
SegmentationHierarchy segment(const Image& edge_prob, const SegmenterConfig& cfg = {});

/// Text merge tree: "merge a b strength" per line, after a size header.
std::string format_merge_tree(const SegmentationHierarchy& h);
/// Reads the merge tree written next to a 16-bit PGM label map; arcs are
/// rebuilt from the labels and `edge_prob` when given.
SegmentationHierarchy read_hierarchy(const std::filesystem::path& merge_tree, const std::filesystem::path& labels,
                                     const Image* edge_prob = nullptr);
void write_hierarchy(const std::filesystem::path& merge_tree, const std::filesystem::path& labels,
                     const SegmentationHierarchy& h);

/// Gray rendering of `background` with boundary pixels painted red, the
/// red intensity following the pixel UCM strength.
Image ucm_overlay(const Image& background, const SegmentationHierarchy& h);

/// Arcs between differing labels of an arbitrary partition.
std::vector<BoundaryArc> extract_arcs(const std::vector<int>& labels, int width, int height, const Image* edge_prob);

}  // namespace depthedge
