#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "depthedge/edge_truth.hpp"
#include "depthedge/image.hpp"
#include "depthedge/scene.hpp"

namespace depthedge {

struct MaskConfig {
    double weight = 10.0;
    double color_percentile = 0.9;  // color edges: luma gradient magnitude above this quantile
    double edge_threshold = 0.5;    // ground-truth P_e above this counts as a depth edge
    int coincide_radius = 2;        // a color edge coincides with a depth edge within this distance
};

/// M = weight at color edges with no depth edge within coincide_radius, 1 elsewhere.
Image make_mask(const Image& color, const Image& edge_truth, const MaskConfig& cfg = {});

/// Occlusion steps located on the pixel whose forward difference (right or
/// down) crosses them: 1 at such pixels, 0 elsewhere. A step is a forward
/// difference of at least min_jump that is the largest along its axis within
/// +-1 pixel and lies within 2 px of a contour (P_c > 0.5).
Image straddle_contours(const Image& disparity, const Image& contour_prob, double min_jump = 1.0);

/// Unit forward-difference direction of the clean disparity at straddle
/// pixels, zero elsewhere. 2 channels (d_u, d_v).
Image contour_directions(const Image& disparity, const Image& straddle);

/// Accepts the 3-channel file form (d_u, d_v, 0) or a 2-channel image.
Image directions_from_pfm(const Image& img);

/// Everything one scene directory holds. Estimates and truth are aligned.
struct SceneBundle {
    std::string name;
    CameraIntrinsics camera;
    Image color;
    Image disparity_gt;
    Image normals_gt;
    Image disparity_est;
    Image normals_est;
    // Written by the ground-truth stage.
    Image edges_gt;
    Image contour_gt;
    Image crease_gt;
    Image straddle_gt;
    Image directions_gt;
    Image mask;

    bool has_truth() const { return !edges_gt.empty(); }
};

struct DatasetConfig {
    int count = 64;
    int width = 128;
    int height = 128;
    std::uint64_t seed = 1;
    CorruptionSpec corruption;
};

/// Seed of scene `index`: cfg.seed * 1000003 + index.
std::uint64_t scene_seed(const DatasetConfig& cfg, int index);

/// Generate one scene: render, quantize color to 8 bit (what the files
/// hold), corrupt.
SceneBundle generate_scene(const DatasetConfig& cfg, int index);

/// Fill the ground-truth fields from the clean channels.
void compute_truth(SceneBundle& scene, const GroundTruthConfig& gt = {}, const MaskConfig& mask = {});

/// Directory layout: <root>/manifest.txt ("scene <dir> <seed>" lines) and one scene_NNNN/ per scene with
/// color.ppm, disp_gt.pfm, normals_gt.pfm, disp_est.pfm, normals_est.pfm,
/// camera.txt and, after the truth stage, edges_gt.pfm, contour_gt.pfm,
/// crease_gt.pfm, straddle_gt.pfm, directions_gt.pfm, mask.pfm.
struct Manifest {
    std::filesystem::path root;
    std::vector<std::string> scenes;
    std::vector<std::uint64_t> seeds;  // per scene, or empty when unknown
};

std::filesystem::path manifest_path(const std::filesystem::path& root);
void write_manifest(const Manifest& m);
/// Accepts the manifest file or its directory.
Manifest read_manifest(const std::filesystem::path& path);

void write_scene(const std::filesystem::path& dir, const SceneBundle& scene);
/// Truth fields are left empty when the files are absent.
SceneBundle read_scene(const std::filesystem::path& dir);
void write_truth(const std::filesystem::path& dir, const SceneBundle& scene);

std::string format_camera(const CameraIntrinsics& cam);
CameraIntrinsics parse_camera(const std::string& text, const std::string& origin);

}  // namespace depthedge
