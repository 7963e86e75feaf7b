#include "depthedge/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "depthedge/rng.hpp"

namespace depthedge {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kContourJump = 0.5;  // disparity px separating a step from a surface junction

Vec3 add(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 scale(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
Vec3 normalized(const Vec3& a) {
    const double n = std::sqrt(dot(a, a));
    return n > 0 ? scale(a, 1.0 / n) : a;
}

struct Mat3 {
    std::array<Vec3, 3> col;  // columns are the rotated local axes
    Vec3 apply(const Vec3& v) const { return add(add(scale(col[0], v[0]), scale(col[1], v[1])), scale(col[2], v[2])); }
    Vec3 apply_transpose(const Vec3& v) const { return {dot(col[0], v), dot(col[1], v), dot(col[2], v)}; }
};

Mat3 rotation(const Vec3& ypr) {
    const double cy = std::cos(ypr[0]), sy = std::sin(ypr[0]);
    const double cp = std::cos(ypr[1]), sp = std::sin(ypr[1]);
    const double cr = std::cos(ypr[2]), sr = std::sin(ypr[2]);
    // R = Ry(yaw) * Rx(pitch) * Rz(roll)
    const double r[3][3] = {
        {cy * cr + sy * sp * sr, -cy * sr + sy * sp * cr, sy * cp},
        {cp * sr, cp * cr, -sp},
        {-sy * cr + cy * sp * sr, sy * sr + cy * sp * cr, cy * cp},
    };
    Mat3 m;
    for (int c = 0; c < 3; ++c) m.col[c] = {r[0][c], r[1][c], r[2][c]};
    return m;
}

struct Hit {
    double t = kInf;
    Vec3 normal{0, 0, -1};
    double s = 0, u = 0;  // texture coordinates
    int face = 0;
};

void plane_basis(const Vec3& n, Vec3& a, Vec3& b) {
    const Vec3 helper = std::abs(n[1]) < 0.9 ? Vec3{0, 1, 0} : Vec3{1, 0, 0};
    a = normalized(cross(helper, n));
    b = cross(n, a);
}

bool intersect(const Primitive& p, const Vec3& origin, const Vec3& dir, Hit& hit) {
    switch (p.kind) {
        case PrimitiveKind::Plane: {
            const Vec3 n = normalized(p.normal);
            const double denom = dot(n, dir);
            if (std::abs(denom) < 1e-12) return false;
            const double t = dot(n, sub(p.center, origin)) / denom;
            if (t <= 1e-9) return false;
            const Vec3 q = sub(add(origin, scale(dir, t)), p.center);
            Vec3 a, b;
            plane_basis(n, a, b);
            hit = {t, n, dot(q, a), dot(q, b), 0};
            return true;
        }
        case PrimitiveKind::Rectangle: {
            const Mat3 r = rotation(p.rotation);
            const Vec3 n = scale(r.col[2], -1.0);
            const double denom = dot(n, dir);
            if (std::abs(denom) < 1e-12) return false;
            const double t = dot(n, sub(p.center, origin)) / denom;
            if (t <= 1e-9) return false;
            const Vec3 q = sub(add(origin, scale(dir, t)), p.center);
            const double s = dot(q, r.col[0]), u = dot(q, r.col[1]);
            if (std::abs(s) > p.half_extent[0] || std::abs(u) > p.half_extent[1]) return false;
            hit = {t, n, s, u, 0};
            return true;
        }
        case PrimitiveKind::Sphere: {
            const Vec3 oc = sub(origin, p.center);
            const double a = dot(dir, dir);
            const double b = 2.0 * dot(oc, dir);
            const double c = dot(oc, oc) - p.radius * p.radius;
            const double disc = b * b - 4 * a * c;
            if (disc < 0) return false;
            const double sq = std::sqrt(disc);
            double t = (-b - sq) / (2 * a);
            if (t <= 1e-9) t = (-b + sq) / (2 * a);
            if (t <= 1e-9) return false;
            const Vec3 q = sub(add(origin, scale(dir, t)), p.center);
            const Vec3 n = scale(q, 1.0 / p.radius);
            const double lon = std::atan2(n[0], -n[2]);
            const double lat = std::asin(std::clamp(n[1], -1.0, 1.0));
            hit = {t, n, lon * p.radius, lat * p.radius, 0};
            return true;
        }
        case PrimitiveKind::Box: {
            const Mat3 r = rotation(p.rotation);
            const Vec3 lo = r.apply_transpose(sub(origin, p.center));
            const Vec3 ld = r.apply_transpose(dir);
            double tmin = -kInf, tmax = kInf;
            int axis_in = -1;
            double sign_in = 0;
            for (int k = 0; k < 3; ++k) {
                if (std::abs(ld[k]) < 1e-15) {
                    if (std::abs(lo[k]) > p.half_extent[k]) return false;
                    continue;
                }
                double t1 = (-p.half_extent[k] - lo[k]) / ld[k];
                double t2 = (p.half_extent[k] - lo[k]) / ld[k];
                double s1 = -1.0;
                if (t1 > t2) {
                    std::swap(t1, t2);
                    s1 = 1.0;
                }
                if (t1 > tmin) {
                    tmin = t1;
                    axis_in = k;
                    sign_in = s1;
                }
                tmax = std::min(tmax, t2);
            }
            if (tmin > tmax || tmin <= 1e-9 || axis_in < 0) return false;
            Vec3 ln{0, 0, 0};
            ln[axis_in] = sign_in;
            const Vec3 lq = add(lo, scale(ld, tmin));
            const int a = (axis_in + 1) % 3, b = (axis_in + 2) % 3;
            hit = {tmin, r.apply(ln), lq[a], lq[b], axis_in * 2 + (sign_in > 0 ? 1 : 0)};
            return true;
        }
    }
    return false;
}

Vec3 albedo(const Texture& tex, double s, double u, double contrast) {
    const Vec3 second = add(tex.color, scale(sub(tex.color2, tex.color), contrast));
    switch (tex.kind) {
        case TextureKind::Flat:
            return tex.color;
        case TextureKind::Checker: {
            const long i = static_cast<long>(std::floor(s / tex.period));
            const long j = static_cast<long>(std::floor(u / tex.period));
            return ((i + j) & 1) ? second : tex.color;
        }
        case TextureKind::Stripes: {
            const double proj = s * std::cos(tex.angle) + u * std::sin(tex.angle);
            return (static_cast<long>(std::floor(proj / tex.period)) & 1) ? second : tex.color;
        }
    }
    return tex.color;
}

}  // namespace

SceneRender render(const SceneSpec& spec) {
    if (spec.primitives.empty()) throw input_error("render: scene has no primitives");
    const int w = spec.width, h = spec.height;
    const auto& cam = spec.camera;
    if (!(cam.focal > 0.0)) throw input_error("render: focal length must be positive");
    SceneRender out{Image(w, h, 3), Image(w, h, 1), Image(w, h, 3), Image(w, h, 1), Image(w, h, 1),
                    std::vector<int>(static_cast<std::size_t>(w) * h, -1),
                    std::vector<int>(static_cast<std::size_t>(w) * h, 0)};
    const Vec3 light = normalized(spec.light_dir);
    const Vec3 origin{0, 0, 0};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Vec3 dir{(x - cam.cx) / cam.focal, (y - cam.cy) / cam.focal, 1.0};
            Hit best;
            int best_id = -1;
            for (std::size_t k = 0; k < spec.primitives.size(); ++k) {
                Hit hit;
                if (intersect(spec.primitives[k], origin, dir, hit) && hit.t < best.t) {
                    best = hit;
                    best_id = static_cast<int>(k);
                }
            }
            const std::size_t idx = static_cast<std::size_t>(y) * w + x;
            if (best_id < 0) {
                throw input_error("render: pixel (" + std::to_string(x) + "," + std::to_string(y) +
                                  ") sees no surface; add a background primitive");
            }
            Vec3 n = normalized(best.normal);
            if (dot(n, dir) > 0) n = scale(n, -1.0);
            const double depth = best.t;  // dir has unit Z, so t is the Z depth
            out.disparity.at(x, y) = static_cast<float>(cam.disparity_scale / depth);
            out.normals.at(x, y, 0) = static_cast<float>(n[0]);
            out.normals.at(x, y, 1) = static_cast<float>(n[1]);
            out.normals.at(x, y, 2) = static_cast<float>(-n[2]);
            out.object_id[idx] = best_id;
            out.face_id[idx] = best.face;

            const auto& prim = spec.primitives[static_cast<std::size_t>(best_id)];
            const Vec3 a = albedo(prim.texture, best.s, best.u, spec.color.texture_contrast);
            double direct = std::max(0.0, dot(n, light));
            if (direct > 0.0 && spec.color.shadow_strength > 0.0) {
                const Vec3 p = add(scale(dir, best.t), scale(n, 1e-6 * best.t));
                for (std::size_t k = 0; k < spec.primitives.size(); ++k) {
                    Hit hit;
                    if (static_cast<int>(k) != best_id && intersect(spec.primitives[k], p, light, hit)) {
                        direct *= 1.0 - spec.color.shadow_strength;
                        break;
                    }
                }
            }
            const double shade = spec.color.ambient + (1.0 - spec.color.ambient) * direct;
            for (int c = 0; c < 3; ++c) {
                out.color.at(x, y, c) = static_cast<float>(std::clamp(a[c] * shade, 0.0, 1.0));
            }
        }
    }

    // Masks from 4-neighbour relations.
    const int dxs[4] = {1, -1, 0, 0}, dys[4] = {0, 0, 1, -1};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const double dp = out.disparity.at(x, y);
            for (int k = 0; k < 4; ++k) {
                const int xx = x + dxs[k], yy = y + dys[k];
                if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
                const std::size_t j = static_cast<std::size_t>(yy) * w + xx;
                const double dq = out.disparity.at(xx, yy);
                const bool forward = k == 0 || k == 2;
                if (out.object_id[i] != out.object_id[j]) {
                    if (dp > dq + kContourJump) out.contour_mask.at(x, y) = 1.0f;
                    else if (forward && std::abs(dp - dq) <= kContourJump) out.crease_mask.at(x, y) = 1.0f;
                } else if (out.face_id[i] != out.face_id[j] && forward) {
                    out.crease_mask.at(x, y) = 1.0f;
                }
            }
        }
    }
    return out;
}

SceneSpec random_scene(std::uint64_t seed, int width, int height, const ColorModel& color) {
    Rng rng(seed * 0x9E3779B97F4A7C15ull + 0x1234567ull);
    SceneSpec spec;
    spec.width = width;
    spec.height = height;
    spec.camera = {static_cast<double>(width), 0.5 * (width - 1), 0.5 * (height - 1), 200.0};
    spec.color = color;
    spec.seed = seed;

    auto random_texture = [&]() {
        Texture t;
        const double pick = rng.uniform();
        t.kind = pick < 0.3 ? TextureKind::Flat : (pick < 0.65 ? TextureKind::Checker : TextureKind::Stripes);
        for (int c = 0; c < 3; ++c) t.color[c] = rng.uniform(0.25, 0.95);
        for (int c = 0; c < 3; ++c) t.color2[c] = rng.uniform(0.05, 0.75);
        t.period = rng.uniform(0.12, 0.4);
        t.angle = rng.uniform(0.0, M_PI);
        return t;
    };

    Primitive bg;
    bg.kind = PrimitiveKind::Plane;
    bg.center = {0, 0, rng.uniform(9.0, 12.0)};
    bg.normal = normalized({rng.uniform(-0.25, 0.25), rng.uniform(-0.35, 0.1), -1.0});
    bg.texture = random_texture();
    bg.texture.period *= 2.0;
    spec.primitives.push_back(bg);

    const int objects = 2 + static_cast<int>(rng.below(4));
    const double f = spec.camera.focal;
    for (int k = 0; k < objects; ++k) {
        Primitive p;
        const double pick = rng.uniform();
        p.kind = pick < 0.4 ? PrimitiveKind::Box : (pick < 0.7 ? PrimitiveKind::Sphere : PrimitiveKind::Rectangle);
        const double z = rng.uniform(3.5, 7.5);
        const double u = rng.uniform(0.15, 0.85) * width;
        const double v = rng.uniform(0.15, 0.85) * height;
        p.center = {(u - spec.camera.cx) * z / f, (v - spec.camera.cy) * z / f, z};
        const double size = z / 5.0;
        p.texture = random_texture();
        switch (p.kind) {
            case PrimitiveKind::Box:
                p.half_extent = {rng.uniform(0.35, 0.9) * size, rng.uniform(0.35, 0.9) * size,
                                 rng.uniform(0.35, 0.9) * size};
                p.rotation = {rng.uniform(-0.9, 0.9), rng.uniform(-0.7, 0.7), rng.uniform(-0.5, 0.5)};
                break;
            case PrimitiveKind::Sphere:
                p.radius = rng.uniform(0.4, 0.9) * size;
                break;
            case PrimitiveKind::Rectangle:
                p.half_extent = {rng.uniform(0.4, 1.1) * size, rng.uniform(0.4, 1.1) * size, 0.0};
                p.rotation = {rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.6, 0.6)};
                break;
            case PrimitiveKind::Plane:
                break;
        }
        spec.primitives.push_back(p);
    }
    spec.light_dir = normalized({rng.uniform(-0.6, 0.6), rng.uniform(-0.8, -0.2), -rng.uniform(0.5, 1.0)});
    return spec;
}

CorruptionSpec CorruptionSpec::identity() {
    CorruptionSpec s;
    s.disparity = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    s.normals = {0.0, 0.0, 0.0};
    return s;
}

void CorruptionSpec::validate() const {
    const auto& d = disparity;
    const auto& n = normals;
    if (d.band_width < 0 || d.band_noise < 0 || d.fattening < 0 || d.blur_sigma < 0 || d.quantization < 0 ||
        d.untextured_noise < 0 || n.texture_leak < 0 || n.blur_sigma < 0 || n.noise < 0) {
        throw input_error("corruption magnitudes must be nonnegative");
    }
    if (d.fattening > 1.0) throw input_error("disparity fattening fraction must be <= 1");
}

std::vector<char> disocclusion_band(const Image& disparity, double band_width) {
    const int w = disparity.width(), h = disparity.height();
    std::vector<char> band(disparity.pixel_count(), 0);
    const int reach = static_cast<int>(std::ceil(band_width));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x + 1 < w; ++x) {
            if (disparity.at(x + 1, y) > disparity.at(x, y) + kContourJump) {
                for (int k = 0; k < reach && x - k >= 0; ++k) band[static_cast<std::size_t>(y) * w + x - k] = 1;
            }
        }
    }
    return band;
}

namespace {

// Zero-mean, unit-variance smooth random field.
Image smooth_field(int w, int h, double sigma, Rng& rng) {
    Image white(w, h, 1);
    for (auto& v : white.data()) v = static_cast<float>(rng.normal());
    Image field = filter(white, FilterSpec::gaussian(sigma));
    double mean = 0, var = 0;
    for (float v : field.data()) mean += v;
    mean /= static_cast<double>(field.size());
    for (float v : field.data()) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(field.size()));
    for (auto& v : field.data()) v = static_cast<float>((v - mean) / (sd > 0 ? sd : 1.0));
    return field;
}

}  // namespace

ChannelEstimates corrupt(const SceneRender& truth, const CorruptionSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed ^ 0xC0FFEE1234ull);
    const Image& d = truth.disparity;
    const int w = d.width(), h = d.height();
    const auto& dm = spec.disparity;

    Image disp = dm.blur_sigma > 0 ? filter(d, FilterSpec::gaussian(dm.blur_sigma)) : d;

    if (dm.band_width > 0) {
        const int reach = static_cast<int>(std::ceil(dm.band_width));
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x + 1 < w; ++x) {
                const float fg = d.at(x + 1, y);
                if (!(fg > d.at(x, y) + kContourJump)) continue;
                const double extent = rng.uniform(0.0, dm.fattening * dm.band_width);
                for (int k = 0; k < reach && x - k >= 0; ++k) {
                    float& v = disp.at(x - k, y);
                    if (k < extent) {
                        v = fg;
                    } else if (dm.band_noise > 0) {
                        v = static_cast<float>(v + dm.band_noise * rng.normal());
                    }
                }
            }
        }
    }

    const Image gray = luminance(truth.color);
    if (dm.untextured_noise > 0) {
        const Image energy = filter(gradient_magnitude(gray), FilterSpec::gaussian(3.0));
        const Image field = smooth_field(w, h, 6.0, rng);
        for (std::size_t i = 0; i < disp.size(); ++i) {
            const double flat = 1.0 - std::min(1.0, energy.data()[i] / 0.02);
            disp.data()[i] = static_cast<float>(disp.data()[i] + dm.untextured_noise * flat * field.data()[i]);
        }
    }
    if (dm.quantization > 0) {
        for (auto& v : disp.data()) v = static_cast<float>(std::round(v / dm.quantization) * dm.quantization);
    }
    for (auto& v : disp.data()) v = std::max(v, 0.1f);

    const auto& nm = spec.normals;
    Image normals = truth.normals;
    const bool perturb = nm.blur_sigma > 0 || nm.texture_leak > 0 || nm.noise > 0;
    if (perturb) {
        if (nm.blur_sigma > 0) normals = filter(normals, FilterSpec::gaussian(nm.blur_sigma));
        auto [gx, gy] = gradient(gray);
        std::array<Image, 3> noise;
        if (nm.noise > 0) {
            for (auto& f : noise) f = smooth_field(w, h, 4.0, rng);
        }
        for (std::size_t i = 0; i < normals.pixel_count(); ++i) {
            double n[3] = {normals.data()[3 * i], normals.data()[3 * i + 1], normals.data()[3 * i + 2]};
            n[0] += nm.texture_leak * gx.data()[i];
            n[1] += nm.texture_leak * gy.data()[i];
            if (nm.noise > 0) {
                for (int c = 0; c < 3; ++c) n[c] += nm.noise * noise[static_cast<std::size_t>(c)].data()[i];
            }
            n[2] = std::max(n[2], 0.05);
            const double len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
            for (int c = 0; c < 3; ++c) normals.data()[3 * i + c] = static_cast<float>(n[c] / len);
        }
    }
    return {std::move(disp), std::move(normals)};
}

}  // namespace depthedge
