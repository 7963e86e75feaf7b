#include "depthedge/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "depthedge/image_io.hpp"

namespace depthedge {

namespace fs = std::filesystem;

Image make_mask(const Image& color, const Image& edge_truth, const MaskConfig& cfg) {
    require_single_channel(edge_truth, "make_mask");
    if (!color.same_size(edge_truth)) throw shape_error("make_mask: color and edge map differ in size");
    const int w = color.width(), h = color.height();
    const Image mag = gradient_magnitude(luminance(color));
    std::vector<float> sorted(mag.data().begin(), mag.data().end());
    const std::size_t k = std::min(sorted.size() - 1, static_cast<std::size_t>(cfg.color_percentile * sorted.size()));
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end());
    const float thr = std::max(sorted[k], 1e-6f);

    const int r = cfg.coincide_radius;
    Image mask(w, h, 1, 1.0f);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!(mag.at(x, y) > thr)) continue;
            bool depth = false;
            for (int dy = -r; dy <= r && !depth; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const int u = x + dx, v = y + dy;
                    if (dx * dx + dy * dy > r * r || u < 0 || v < 0 || u >= w || v >= h) continue;
                    if (edge_truth.at(u, v) > cfg.edge_threshold) {
                        depth = true;
                        break;
                    }
                }
            if (!depth) mask.at(x, y) = static_cast<float>(cfg.weight);
        }
    return mask;
}

Image straddle_contours(const Image& disparity, const Image& contour_prob, double min_jump) {
    require_single_channel(disparity, "straddle_contours");
    if (!disparity.same_shape(contour_prob)) throw shape_error("straddle_contours: disparity and contour differ in shape");
    const int w = disparity.width(), h = disparity.height();
    auto near_contour = [&](int x, int y) {
        for (int v = std::max(0, y - 2); v <= std::min(h - 1, y + 2); ++v)
            for (int u = std::max(0, x - 2); u <= std::min(w - 1, x + 2); ++u)
                if (contour_prob.at(u, v) > 0.5f) return true;
        return false;
    };
    // |forward difference| along one axis, 0 outside the image.
    auto jump = [&](int x, int y, int dx, int dy) -> double {
        if (x < 0 || y < 0 || x + dx >= w || y + dy >= h) return 0.0;
        return std::abs(static_cast<double>(disparity.at(x + dx, y + dy)) - disparity.at(x, y));
    };
    Image out(w, h, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            bool hit = false;
            for (auto [dx, dy] : {std::pair{1, 0}, std::pair{0, 1}}) {
                const double j = jump(x, y, dx, dy);
                if (j < min_jump || std::isnan(j)) continue;
                if (j >= jump(x - dx, y - dy, dx, dy) && j > jump(x + dx, y + dy, dx, dy)) hit = true;
            }
            if (hit && near_contour(x, y)) out.at(x, y) = 1.0f;
        }
    return out;
}

Image contour_directions(const Image& disparity, const Image& straddle) {
    require_single_channel(disparity, "contour_directions");
    if (!disparity.same_shape(straddle)) throw shape_error("contour_directions: inputs differ in shape");
    const int w = disparity.width(), h = disparity.height();
    Image out(w, h, 2);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (straddle.at(x, y) < 0.5f) continue;
            const double gu = x + 1 < w ? static_cast<double>(disparity.at(x + 1, y)) - disparity.at(x, y) : 0.0;
            const double gv = y + 1 < h ? static_cast<double>(disparity.at(x, y + 1)) - disparity.at(x, y) : 0.0;
            const double n = std::hypot(gu, gv);
            if (!(n > 0.0)) continue;
            out.at(x, y, 0) = static_cast<float>(gu / n);
            out.at(x, y, 1) = static_cast<float>(gv / n);
        }
    return out;
}

std::uint64_t scene_seed(const DatasetConfig& cfg, int index) {
    return cfg.seed * 1000003ull + static_cast<std::uint64_t>(index);
}

SceneBundle generate_scene(const DatasetConfig& cfg, int index) {
    const std::uint64_t seed = scene_seed(cfg, index);
    const SceneSpec spec = random_scene(seed, cfg.width, cfg.height, cfg.corruption.color);
    SceneRender r = render(spec);
    for (auto& v : r.color.data()) v = std::clamp(std::round(v * 255.0f), 0.0f, 255.0f) / 255.0f;
    const ChannelEstimates est = corrupt(r, cfg.corruption, seed + 7);
    SceneBundle s;
    char name[32];
    std::snprintf(name, sizeof name, "scene_%04d", index);
    s.name = name;
    s.camera = spec.camera;
    s.color = std::move(r.color);
    s.disparity_gt = std::move(r.disparity);
    s.normals_gt = std::move(r.normals);
    s.disparity_est = est.disparity;
    s.normals_est = est.normals;
    return s;
}

void compute_truth(SceneBundle& s, const GroundTruthConfig& gt, const MaskConfig& mask) {
    const GroundTruth t = make_ground_truth(s.disparity_gt, s.normals_gt, gt);
    s.edges_gt = t.edge.image;
    s.contour_gt = t.contour.image;
    s.crease_gt = t.crease.image;
    s.straddle_gt = straddle_contours(s.disparity_gt, s.contour_gt);
    s.directions_gt = contour_directions(s.disparity_gt, s.straddle_gt);
    s.mask = make_mask(s.color, s.edges_gt, mask);
}

fs::path manifest_path(const fs::path& root) { return root / "manifest.txt"; }

void write_manifest(const Manifest& m) {
    std::ostringstream os;
    os << "depthedge-manifest 1\n";
    if (!m.seeds.empty() && m.seeds.size() != m.scenes.size()) {
        throw input_error("manifest: " + std::to_string(m.seeds.size()) + " seeds for " +
                          std::to_string(m.scenes.size()) + " scenes");
    }
    for (std::size_t i = 0; i < m.scenes.size(); ++i) {
        os << "scene " << m.scenes[i];
        if (!m.seeds.empty()) os << " " << m.seeds[i];
        os << "\n";
    }
    write_file_atomic(manifest_path(m.root), os.str());
}

Manifest read_manifest(const fs::path& path) {
    const fs::path file = fs::is_directory(path) ? manifest_path(path) : path;
    std::istringstream is(read_file(file));
    Manifest m;
    m.root = file.parent_path();
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string key, value, seed, extra;
        ls >> key >> value >> seed;
        if (lineno == 1) {
            if (key != "depthedge-manifest" || value != "1") {
                throw parse_error(file.string() + ":1: expected 'depthedge-manifest 1'");
            }
            continue;
        }
        if (key != "scene" || value.empty() || (ls >> extra)) {
            throw parse_error(file.string() + ":" + std::to_string(lineno) + ": expected 'scene <dir> [seed]'");
        }
        m.scenes.push_back(value);
        if (!seed.empty()) {
            std::size_t used = 0;
            std::uint64_t v = 0;
            try {
                v = std::stoull(seed, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != seed.size()) {
                throw parse_error(file.string() + ":" + std::to_string(lineno) + ": seed '" + seed + "' is not an integer");
            }
            m.seeds.push_back(v);
        }
    }
    if (lineno == 0) throw parse_error(file.string() + ": empty manifest");
    if (!m.seeds.empty() && m.seeds.size() != m.scenes.size()) {
        throw parse_error(file.string() + ": seeds given for some scenes only");
    }
    return m;
}

std::string format_camera(const CameraIntrinsics& c) {
    std::ostringstream os;
    os.precision(17);
    os << "focal " << c.focal << "\ncx " << c.cx << "\ncy " << c.cy << "\ndisparity_scale " << c.disparity_scale
       << "\n";
    return os.str();
}

CameraIntrinsics parse_camera(const std::string& text, const std::string& origin) {
    CameraIntrinsics c;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string key;
        double v = 0;
        if (!(ls >> key >> v)) throw parse_error(origin + ":" + std::to_string(lineno) + ": expected '<key> <number>'");
        if (key == "focal") c.focal = v;
        else if (key == "cx") c.cx = v;
        else if (key == "cy") c.cy = v;
        else if (key == "disparity_scale") c.disparity_scale = v;
        else throw parse_error(origin + ":" + std::to_string(lineno) + ": unknown camera key '" + key + "'");
    }
    return c;
}

void write_scene(const fs::path& dir, const SceneBundle& s) {
    fs::create_directories(dir);
    write_ppm(dir / "color.ppm", s.color);
    write_pfm(dir / "disp_gt.pfm", s.disparity_gt);
    write_pfm(dir / "normals_gt.pfm", s.normals_gt);
    write_pfm(dir / "disp_est.pfm", s.disparity_est);
    write_pfm(dir / "normals_est.pfm", s.normals_est);
    write_file_atomic(dir / "camera.txt", format_camera(s.camera));
    if (s.has_truth()) write_truth(dir, s);
}

namespace {

// PFM has no 2-channel variant; direction fields travel as (d_u, d_v, 0).
Image pad_to_three(const Image& two) {
    Image out(two.width(), two.height(), 3);
    for (std::size_t i = 0; i < two.pixel_count(); ++i) {
        out.data()[3 * i] = two.data()[2 * i];
        out.data()[3 * i + 1] = two.data()[2 * i + 1];
    }
    return out;
}

}  // namespace

Image directions_from_pfm(const Image& img) {
    if (img.channels() == 2) return img;
    if (img.channels() != 3) throw shape_error("direction map must have 2 or 3 channels");
    Image out(img.width(), img.height(), 2);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        out.data()[2 * i] = img.data()[3 * i];
        out.data()[2 * i + 1] = img.data()[3 * i + 1];
    }
    return out;
}

void write_truth(const fs::path& dir, const SceneBundle& s) {
    write_pfm(dir / "edges_gt.pfm", s.edges_gt);
    write_pfm(dir / "contour_gt.pfm", s.contour_gt);
    write_pfm(dir / "crease_gt.pfm", s.crease_gt);
    write_pfm(dir / "straddle_gt.pfm", s.straddle_gt);
    write_pfm(dir / "directions_gt.pfm", pad_to_three(s.directions_gt));
    write_pfm(dir / "mask.pfm", s.mask);
}

SceneBundle read_scene(const fs::path& dir) {
    SceneBundle s;
    s.name = dir.filename().string();
    s.color = read_pnm(dir / "color.ppm");
    s.disparity_gt = read_pfm(dir / "disp_gt.pfm");
    s.normals_gt = read_pfm(dir / "normals_gt.pfm");
    s.disparity_est = read_pfm(dir / "disp_est.pfm");
    s.normals_est = read_pfm(dir / "normals_est.pfm");
    s.camera = parse_camera(read_file(dir / "camera.txt"), (dir / "camera.txt").string());
    if (fs::exists(dir / "edges_gt.pfm")) {
        s.edges_gt = read_pfm(dir / "edges_gt.pfm");
        s.contour_gt = read_pfm(dir / "contour_gt.pfm");
        s.crease_gt = read_pfm(dir / "crease_gt.pfm");
        s.straddle_gt = read_pfm(dir / "straddle_gt.pfm");
        s.directions_gt = directions_from_pfm(read_pfm(dir / "directions_gt.pfm"));
        s.mask = read_pfm(dir / "mask.pfm");
    }
    const Image* parts[] = {&s.disparity_gt, &s.normals_gt, &s.disparity_est, &s.normals_est};
    for (const Image* p : parts)
        if (!p->same_size(s.color)) throw shape_error(dir.string() + ": scene channels differ in size");
    return s;
}

}  // namespace depthedge
