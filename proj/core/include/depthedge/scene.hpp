#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "depthedge/edge_truth.hpp"
#include "depthedge/image.hpp"

namespace depthedge {

using Vec3 = std::array<double, 3>;

enum class TextureKind { Flat, Checker, Stripes };

struct Texture {
    TextureKind kind = TextureKind::Flat;
    Vec3 color{0.7, 0.7, 0.7};
    Vec3 color2{0.3, 0.3, 0.3};
    double period = 0.25;  // world units
    double angle = 0.0;    // stripe orientation, radians
};

enum class PrimitiveKind { Plane, Box, Sphere, Rectangle };

/// Geometry is expressed in the camera frame (X right, Y down, Z forward).
/// Plane: infinite, through `center`, facing `normal`. Rectangle: finite patch
/// with half sizes in `half_extent[0..1]`. Box: oriented by yaw/pitch/roll
/// with half sizes `half_extent`. Sphere: `radius`.
struct Primitive {
    PrimitiveKind kind = PrimitiveKind::Plane;
    Vec3 center{0, 0, 10};
    Vec3 normal{0, 0, -1};
    Vec3 half_extent{1, 1, 1};
    Vec3 rotation{0, 0, 0};  // yaw (about Y), pitch (about X), roll (about Z)
    double radius = 1.0;
    Texture texture;
};

struct ColorModel {
    double texture_contrast = 1.0;  // scales the color difference of patterned textures
    double shadow_strength = 0.6;   // fraction of direct light removed in cast shadows
    double ambient = 0.35;
};

struct SceneSpec {
    int width = 128;
    int height = 128;
    CameraIntrinsics camera{128.0, 63.5, 63.5, 200.0};
    std::vector<Primitive> primitives;
    Vec3 light_dir{-0.4, -0.6, -0.7};  // toward the light, camera frame
    ColorModel color;
    std::uint64_t seed = 0;
};

/// Exact per-pixel rendering. `object_id` is the primitive index (-1 for no
/// hit) and `face_id` distinguishes box faces.
struct SceneRender {
    Image color;       // 3 channels in [0,1]
    Image disparity;   // 1 channel, > 0 where hit
    Image normals;     // 3 channels, camera-facing convention of edge_truth.hpp
    Image contour_mask;
    Image crease_mask;
    std::vector<int> object_id;
    std::vector<int> face_id;
};

/// Ray-cast the first visible surface at every pixel centre. Contour mask
/// marks the near-side pixel of every occlusion step; crease mask marks box
/// face junctions and depth-continuous junctions between primitives.
SceneRender render(const SceneSpec& spec);

/// Random desk-scale scene: textured background plane plus 2-5 objects.
SceneSpec random_scene(std::uint64_t seed, int width, int height, const ColorModel& color = {});

struct DisparityCorruption {
    double band_width = 6.0;        // disocclusion band, px
    double band_noise = 2.0;        // noise sigma inside the band, px
    double fattening = 0.6;         // max fraction of the band taken by foreground fattening
    double blur_sigma = 1.0;
    double quantization = 0.25;     // px; 0 disables
    double untextured_noise = 0.6;  // amplitude of smooth noise in flat-colored regions
};

struct NormalCorruption {
    double texture_leak = 2.0;  // gain of the color-gradient perturbation
    double blur_sigma = 1.5;
    double noise = 0.05;        // smooth perturbation amplitude
};

struct CorruptionSpec {
    DisparityCorruption disparity;
    NormalCorruption normals;
    ColorModel color;

    /// Every magnitude zero: corrupt() returns the truth unchanged.
    static CorruptionSpec identity();
    void validate() const;
};

struct ChannelEstimates {
    Image disparity;
    Image normals;
};

ChannelEstimates corrupt(const SceneRender& truth, const CorruptionSpec& spec, std::uint64_t seed);

/// Pixels within band_width to the left of an occluding step, i.e. the side a
/// left-reference stereo matcher cannot see.
std::vector<char> disocclusion_band(const Image& disparity, double band_width);

}  // namespace depthedge
