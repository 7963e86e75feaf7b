#include "depthedge/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace depthedge {

Image::Image(int width, int height, int channels, float fill)
    : width_(width), height_(height), channels_(channels) {
    if (width < 1 || height < 1 || channels < 1) {
        throw shape_error("image dimensions must be positive, got " + std::to_string(width) + "x" +
                          std::to_string(height) + "x" + std::to_string(channels));
    }
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

Image::Image(int width, int height, int channels, std::vector<float> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    if (width < 1 || height < 1 || channels < 1) {
        throw shape_error("image dimensions must be positive");
    }
    if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
        throw shape_error("image data length " + std::to_string(data_.size()) +
                          " does not match " + std::to_string(width) + "x" +
                          std::to_string(height) + "x" + std::to_string(channels));
    }
}

float Image::clamped(int x, int y, int c) const noexcept {
    x = std::clamp(x, 0, width_ - 1);
    y = std::clamp(y, 0, height_ - 1);
    return at(x, y, c);
}

Image Image::channel(int c) const {
    if (c < 0 || c >= channels_) throw shape_error("channel index out of range");
    Image out(width_, height_, 1);
    for (std::size_t i = 0; i < pixel_count(); ++i) out.data_[i] = data_[i * channels_ + c];
    return out;
}

void Image::set_channel(int c, const Image& plane) {
    if (c < 0 || c >= channels_) throw shape_error("channel index out of range");
    if (!same_size(plane) || plane.channels() != 1) {
        throw shape_error("set_channel expects a single-channel plane of equal size");
    }
    for (std::size_t i = 0; i < pixel_count(); ++i) data_[i * channels_ + c] = plane.data_[i];
}

Image concat_channels(std::span<const Image> parts) {
    if (parts.empty()) throw shape_error("concat_channels needs at least one image");
    int total = 0;
    for (const auto& p : parts) {
        if (!p.same_size(parts[0])) throw shape_error("concat_channels: size mismatch");
        total += p.channels();
    }
    Image out(parts[0].width(), parts[0].height(), total);
    auto dst = out.data();
    const std::size_t n = out.pixel_count();
    int offset = 0;
    for (const auto& p : parts) {
        auto src = p.data();
        const int pc = p.channels();
        for (std::size_t i = 0; i < n; ++i) {
            for (int c = 0; c < pc; ++c) dst[i * total + offset + c] = src[i * pc + c];
        }
        offset += pc;
    }
    return out;
}

void FilterSpec::validate() const {
    switch (kind) {
        case FilterKind::DerivativeOfGaussian:
        case FilterKind::Gaussian:
            if (!(sigma > 0.0)) throw input_error("filter sigma must be positive");
            break;
        case FilterKind::DifferenceOfGaussians:
            if (!(sigma > 0.0) || !(sigma2 > 0.0) || sigma == sigma2) {
                throw input_error("difference-of-Gaussians needs two distinct positive sigmas");
            }
            break;
        case FilterKind::Median:
            if (radius < 1) throw input_error("median radius must be >= 1");
            break;
        default:
            break;
    }
}

void require_single_channel(const Image& img, const char* what) {
    if (img.channels() != 1) {
        throw shape_error(std::string(what) + " expects a single-channel image, got " +
                          std::to_string(img.channels()) + " channels");
    }
}

std::vector<double> gaussian_kernel(double sigma) {
    const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * r + 1);
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + r];
    }
    for (auto& v : k) v /= sum;
    return k;
}

namespace {

// Derivative taps normalized so a unit ramp maps to exactly 1.
std::vector<double> gaussian_derivative_kernel(double sigma) {
    auto g = gaussian_kernel(sigma);
    const int r = static_cast<int>(g.size() / 2);
    std::vector<double> k(g.size());
    double moment = 0.0;
    for (int i = -r; i <= r; ++i) {
        k[i + r] = i * g[i + r];
        moment += static_cast<double>(i) * i * g[i + r];
    }
    for (auto& v : k) v /= moment;
    return k;
}

Image correlate_axis(const Image& img, std::span<const double> k, bool along_x) {
    const int r = static_cast<int>(k.size() / 2);
    const int w = img.width(), h = img.height(), ch = img.channels();
    Image out(w, h, ch);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                auto at = [&](int i) { return along_x ? img.clamped(x + i, y, c) : img.clamped(x, y + i, c); };
                // Taps are paired around the centre so antisymmetric kernels cancel exactly on flat input.
                double acc = k[r] * at(0);
                for (int i = 1; i <= r; ++i) acc += k[r + i] * at(i) + k[r - i] * at(-i);
                out.at(x, y, c) = static_cast<float>(acc);
            }
        }
    }
    return out;
}

Image median_filter(const Image& img, int radius) {
    const int w = img.width(), h = img.height(), ch = img.channels();
    Image out(w, h, ch);
    std::vector<float> window;
    window.reserve(static_cast<std::size_t>(2 * radius + 1) * (2 * radius + 1));
    for (int c = 0; c < ch; ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                window.clear();
                for (int dy = -radius; dy <= radius; ++dy) {
                    for (int dx = -radius; dx <= radius; ++dx) {
                        window.push_back(img.clamped(x + dx, y + dy, c));
                    }
                }
                auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
                std::nth_element(window.begin(), mid, window.end());
                out.at(x, y, c) = *mid;
            }
        }
    }
    return out;
}

}  // namespace

Image separable_filter(const Image& img, std::span<const double> kx, std::span<const double> ky) {
    return correlate_axis(correlate_axis(img, kx, true), ky, false);
}

std::pair<Image, Image> gradient(const Image& img, const FilterSpec& spec) {
    require_single_channel(img, "gradient");
    spec.validate();
    if (spec.kind == FilterKind::CentralDifference) {
        const int w = img.width(), h = img.height();
        Image gx(w, h, 1), gy(w, h, 1);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                gx.at(x, y) = static_cast<float>(
                    0.5 * (static_cast<double>(img.clamped(x + 1, y)) - img.clamped(x - 1, y)));
                gy.at(x, y) = static_cast<float>(
                    0.5 * (static_cast<double>(img.clamped(x, y + 1)) - img.clamped(x, y - 1)));
            }
        }
        return {std::move(gx), std::move(gy)};
    }
    if (spec.kind == FilterKind::DerivativeOfGaussian) {
        const auto g = gaussian_kernel(spec.sigma);
        const auto d = gaussian_derivative_kernel(spec.sigma);
        return {separable_filter(img, d, g), separable_filter(img, g, d)};
    }
    throw input_error("gradient supports central-difference or derivative-of-Gaussian filters");
}

Image gradient_magnitude(const Image& gx, const Image& gy) {
    if (!gx.same_shape(gy)) throw shape_error("gradient_magnitude: component shape mismatch");
    Image out(gx.width(), gx.height(), gx.channels());
    auto a = gx.data();
    auto b = gy.data();
    auto o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i) {
        const double u = a[i], v = b[i];
        o[i] = static_cast<float>(std::sqrt(u * u + v * v));
    }
    return out;
}

Image gradient_magnitude(const Image& img, const FilterSpec& spec) {
    auto [gx, gy] = gradient(img, spec);
    return gradient_magnitude(gx, gy);
}

Image laplacian(const Image& img) {
    require_single_channel(img, "laplacian");
    const int w = img.width(), h = img.height();
    Image out(w, h, 1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double s = static_cast<double>(img.clamped(x + 1, y)) + img.clamped(x - 1, y) +
                             img.clamped(x, y + 1) + img.clamped(x, y - 1);
            out.at(x, y) = static_cast<float>(s - 4.0 * img.at(x, y));
        }
    }
    return out;
}

Image filter(const Image& img, const FilterSpec& spec) {
    spec.validate();
    switch (spec.kind) {
        case FilterKind::Gaussian: {
            const auto g = gaussian_kernel(spec.sigma);
            return separable_filter(img, g, g);
        }
        case FilterKind::DifferenceOfGaussians: {
            // d/d(s^2) G_s = 0.5 * Laplacian(G_s), so this difference approximates the Laplacian.
            const auto g1 = gaussian_kernel(spec.sigma);
            const auto g2 = gaussian_kernel(spec.sigma2);
            const Image a = separable_filter(img, g1, g1);
            const Image b = separable_filter(img, g2, g2);
            const double scale = 2.0 / (spec.sigma2 * spec.sigma2 - spec.sigma * spec.sigma);
            Image out(img.width(), img.height(), img.channels());
            for (std::size_t i = 0; i < out.size(); ++i) {
                out.data()[i] = static_cast<float>(
                    scale * (static_cast<double>(b.data()[i]) - a.data()[i]));
            }
            return out;
        }
        case FilterKind::Laplacian5pt:
            return laplacian(img);
        case FilterKind::Median:
            return median_filter(img, spec.radius);
        default:
            throw input_error("filter: kind must be gaussian, difference-of-Gaussians, laplacian or median");
    }
}

Image resample(const Image& img, ResampleDirection direction) {
    const int w = img.width(), h = img.height(), ch = img.channels();
    if (direction == ResampleDirection::Down) {
        if (w < 2 || h < 2) throw shape_error("cannot subsample an image with a 1-pixel dimension");
        Image out((w + 1) / 2, (h + 1) / 2, ch);
        for (int y = 0; y < out.height(); ++y)
            for (int x = 0; x < out.width(); ++x)
                for (int c = 0; c < ch; ++c) out.at(x, y, c) = img.at(2 * x, 2 * y, c);
        return out;
    }
    Image out(2 * w, 2 * h, ch);
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x)
            for (int c = 0; c < ch; ++c) out.at(x, y, c) = img.at(x / 2, y / 2, c);
    return out;
}

double sample_bilinear(const Image& img, double x, double y, int c) {
    x = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
    y = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0, fy = y - y0;
    const double a = img.clamped(x0, y0, c), b = img.clamped(x0 + 1, y0, c);
    const double d = img.clamped(x0, y0 + 1, c), e = img.clamped(x0 + 1, y0 + 1, c);
    return (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * d + fx * e);
}

Image resize_to_width(const Image& img, int target_width) {
    if (target_width >= img.width()) return img;
    if (target_width < 1) throw shape_error("resize_to_width: target width must be positive");
    const double scale = static_cast<double>(img.width()) / target_width;
    const int target_height =
        std::max(1, static_cast<int>(std::lround(img.height() / scale)));
    const double sy = static_cast<double>(img.height()) / target_height;
    Image out(target_width, target_height, img.channels());
    for (int y = 0; y < target_height; ++y) {
        const double srcy = (y + 0.5) * sy - 0.5;
        for (int x = 0; x < target_width; ++x) {
            const double srcx = (x + 0.5) * scale - 0.5;
            for (int c = 0; c < img.channels(); ++c) {
                out.at(x, y, c) = static_cast<float>(sample_bilinear(img, srcx, srcy, c));
            }
        }
    }
    return out;
}

Image luminance(const Image& rgb) {
    if (rgb.channels() == 1) return rgb;
    if (rgb.channels() != 3) throw shape_error("luminance expects 1 or 3 channels");
    Image out(rgb.width(), rgb.height(), 1);
    for (std::size_t i = 0; i < out.pixel_count(); ++i) {
        const double r = rgb.data()[3 * i], g = rgb.data()[3 * i + 1], b = rgb.data()[3 * i + 2];
        out.data()[i] = static_cast<float>(0.299 * r + 0.587 * g + 0.114 * b);
    }
    return out;
}

}  // namespace depthedge
