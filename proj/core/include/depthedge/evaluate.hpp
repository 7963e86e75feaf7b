#pragma once

#include <string>
#include <vector>

#include "depthedge/edge_truth.hpp"
#include "depthedge/image.hpp"
#include "depthedge/segment.hpp"

namespace depthedge {

struct BoundaryPR {
    double precision = 1.0;
    double recall = 1.0;
    double f1 = 0.0;
    double threshold = 0.0;
    int slack_radius = 2;
    // Counts behind the ratios, summed across images for the dataset-wide score.
    long matched_pred = 0;
    long total_pred = 0;
    long matched_gt = 0;
    long total_gt = 0;
};

/// 2PR / (P + R), or 0 when both vanish.
double f1_score(double precision, double recall);

/// Fills precision, recall and f1 from the four counts. An empty prediction
/// has precision 1; an empty ground truth has recall 1.
void finish(BoundaryPR& pr);

/// Binary maps (> 0.5 is boundary). Precision: fraction of predicted pixels
/// within the disc of `radius` around a ground-truth pixel; recall the other way.
BoundaryPR boundary_pr(const Image& pred, const Image& gt, int radius = 2);

/// `count` thresholds spread uniformly over [0, 1].
std::vector<double> uniform_thresholds(int count = 33);

/// Boundary of threshold_segmentation(h, t) against `gt` for every t.
std::vector<BoundaryPR> pr_curve(const SegmentationHierarchy& h, const Image& gt, const std::vector<double>& thresholds,
                                 int radius = 2);

struct OdsOis {
    double ods = 0.0;
    double ods_threshold = 0.0;
    double ois = 0.0;
};

/// ODS: best f1 of the dataset-aggregated counts at one shared threshold.
/// OIS: mean over images of each image's best f1. Curves must share thresholds.
OdsOis ods_ois(const std::vector<std::vector<BoundaryPR>>& curves);

std::string format_pr_csv(const std::vector<BoundaryPR>& curve);
/// Aligned rows of method, ODS, OIS.
std::string format_summary_table(const std::vector<std::string>& methods, const std::vector<OdsOis>& scores);

enum class BaselineChannel { Color, Disparity, Normals };

struct BaselineConfig {
    double color_center = 0.1;     // logistic centre for the luma gradient magnitude
    double large_sigma = 2.0;      // derivative-of-Gaussian scale of the data-agnostic fusion
    GroundTruthConfig formulas;    // alpha, beta and filters for the single-channel edges
};

/// Single-channel edges: the P_e formulas on the corrupted disparity (with
/// normals reconstructed from it), P_r on the corrupted normals, or a logistic
/// of the luma gradient magnitude for color.
Image baseline_single(BaselineChannel channel, const Image& color, const Image& disparity, const Image& normals,
                      const CameraIntrinsics& cam, const BaselineConfig& cfg = {});

/// Data-agnostic fusion: per channel, large-kernel gradient magnitude divided
/// by its image maximum; the channel responses are averaged.
Image baseline_data_agnostic(const Image& color, const Image& disparity, const Image& normals,
                             const BaselineConfig& cfg = {});

/// Ground-truth boundary pixels: P_e > threshold.
Image binarize(const Image& prob, double threshold = 0.5);

}  // namespace depthedge
