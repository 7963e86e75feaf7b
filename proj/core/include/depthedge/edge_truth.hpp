#pragma once

#include <string>

#include "depthedge/image.hpp"

namespace depthedge {

enum class EdgeKind { Contour, Crease, Edge, NetworkOutput };

/// Single-channel probability raster with every sample in [0,1].
struct EdgeProbabilityMap {
    Image image;
    EdgeKind kind = EdgeKind::Edge;
};

/// sigma_center(x) = 1 / (1 + exp(-sharpness * (x / center - 1))).
struct LogisticParams {
    double center = 1.0;
    double sharpness = 10.0;
};

double logistic(double x, const LogisticParams& p);

/// Pinhole camera. Depth Z = disparity_scale / disparity (disparity_scale is
/// focal length times baseline, in pixel-metres).
struct CameraIntrinsics {
    double focal = 100.0;
    double cx = 0.0;
    double cy = 0.0;
    double disparity_scale = 100.0;
};

/// Normal images are 3-channel with x along +u, y along +v and z pointing
/// toward the camera, so visible surfaces have N_z > 0. Undefined pixels are NaN.

/// P_c = sigma_alpha((Laplacian of |grad D|)^+). With a central-difference spec
/// the gradient turns one-sided at the image border and the Laplacian is the
/// 5-point stencil; with derivative-of-Gaussian the
/// gradient uses spec.sigma and the Laplacian a difference of Gaussians with
/// (spec.sigma, spec.sigma2).
EdgeProbabilityMap depth_contour_prob(const Image& disparity, double alpha = 1.0,
                                      const FilterSpec& spec = FilterSpec::central_difference());

/// P_r = sigma_beta(|grad N_x| + |grad N_y| + |grad N_z|). Undefined normals
/// and out-of-image pixels are skipped by the central-difference stencils.
EdgeProbabilityMap depth_crease_prob(const Image& normals, double beta = 0.5,
                                     const FilterSpec& spec = FilterSpec::central_difference());

/// Noisy-or: 1 - (1 - P_c)(1 - P_r).
EdgeProbabilityMap combine_edge_prob(const EdgeProbabilityMap& contour, const EdgeProbabilityMap& crease);

/// Reconstruct the point cloud, take central-difference tangents and their
/// cross product. A median of the given radius (0 disables) is applied to the
/// disparity before and to the normals after.
Image normals_from_disparity(const Image& disparity, const CameraIntrinsics& cam, int median_radius = 7);

struct GroundTruthConfig {
    double alpha = 1.0;
    double beta = 0.5;
    FilterSpec contour_filter = FilterSpec::central_difference();
    FilterSpec crease_filter = FilterSpec::central_difference();
    int normal_median_radius = 7;
};

struct GroundTruth {
    EdgeProbabilityMap contour;
    EdgeProbabilityMap crease;
    EdgeProbabilityMap edge;
};

GroundTruth make_ground_truth(const Image& disparity, const Image& normals, const GroundTruthConfig& cfg = {});
GroundTruth make_ground_truth(const Image& disparity, const CameraIntrinsics& cam,
                              const GroundTruthConfig& cfg = {});

/// key = value sidecar recording the parameters that produced a bundle.
std::string ground_truth_sidecar(const GroundTruthConfig& cfg);

std::string to_string(FilterKind kind);

}  // namespace depthedge
