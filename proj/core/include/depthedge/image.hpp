#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "depthedge/error.hpp"

namespace depthedge {

/// Dense float raster, row-major with interleaved channels:
/// sample (x, y, c) lives at data[(y * width + x) * channels + c].
/// Samples are stored as f32; reductions inside the operators accumulate in f64.
class Image {
public:
    Image() = default;
    Image(int width, int height, int channels, float fill = 0.0f);
    Image(int width, int height, int channels, std::vector<float> data);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int channels() const noexcept { return channels_; }
    std::size_t pixel_count() const noexcept {
        return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
    }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    float& at(int x, int y, int c = 0) noexcept {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    float at(int x, int y, int c = 0) const noexcept {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    /// Edge-replicated read: coordinates are clamped into the image.
    float clamped(int x, int y, int c = 0) const noexcept;

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }
    std::vector<float>& storage() noexcept { return data_; }

    bool same_shape(const Image& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
    }
    bool same_size(const Image& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

    Image channel(int c) const;
    void set_channel(int c, const Image& plane);

    friend bool operator==(const Image&, const Image&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<float> data_;
};

/// Stack single- or multi-channel images of equal size along the channel axis.
Image concat_channels(std::span<const Image> parts);

enum class FilterKind {
    CentralDifference,
    DerivativeOfGaussian,
    DifferenceOfGaussians,
    Gaussian,
    Laplacian5pt,
    Median,
};

struct FilterSpec {
    FilterKind kind = FilterKind::CentralDifference;
    double sigma = 1.5;   // gaussian / derivative-of-gaussian / inner DoG sigma
    double sigma2 = 2.4;  // outer DoG sigma
    int radius = 7;       // median half-width

    static FilterSpec central_difference() { return {FilterKind::CentralDifference}; }
    static FilterSpec derivative_of_gaussian(double sigma) {
        return {FilterKind::DerivativeOfGaussian, sigma};
    }
    static FilterSpec difference_of_gaussians(double s1, double s2) {
        return {FilterKind::DifferenceOfGaussians, s1, s2};
    }
    static FilterSpec gaussian(double sigma) { return {FilterKind::Gaussian, sigma}; }
    static FilterSpec laplacian_5pt() { return {FilterKind::Laplacian5pt}; }
    static FilterSpec median(int radius) { return {FilterKind::Median, 1.5, 2.4, radius}; }

    /// Throws Input on nonpositive sigma or median radius < 1.
    void validate() const;
};

/// Normalized 1-D Gaussian taps, radius ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

/// Image-axis derivative (gx along +x, gy along +y), edge-replicated borders.
std::pair<Image, Image> gradient(const Image& img, const FilterSpec& spec = {});

Image gradient_magnitude(const Image& img, const FilterSpec& spec = {});
Image gradient_magnitude(const Image& gx, const Image& gy);

/// 5-point Laplacian with edge replication.
Image laplacian(const Image& img);

/// Gaussian, difference-of-Gaussians (scaled to approximate the Laplacian at
/// that scale), 5-point Laplacian, or per-channel median.
Image filter(const Image& img, const FilterSpec& spec);

/// Separable correlation of every channel with a centered 1-D kernel along x then y.
Image separable_filter(const Image& img, std::span<const double> kx, std::span<const double> ky);

enum class ResampleDirection { Down, Up };

/// Factor-2 stride subsampling (keeps even indices) or nearest-neighbour upsampling.
Image resample(const Image& img, ResampleDirection direction);

/// Bilinear downsizing to target_width, aspect preserved. Returns a copy if
/// the image is not wider than the target.
Image resize_to_width(const Image& img, int target_width);

/// Bilinear sample with edge clamping; coordinates in pixel units.
double sample_bilinear(const Image& img, double x, double y, int c = 0);

/// Rec. 601 luma of a 3-channel image; single-channel images pass through.
Image luminance(const Image& rgb);

void require_single_channel(const Image& img, const char* what);

}  // namespace depthedge
