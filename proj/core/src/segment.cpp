#include "depthedge/segment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <sstream>
#include <tuple>

#include "depthedge/image_io.hpp"

namespace depthedge {

namespace {

struct Dsu {
    explicit Dsu(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    }
    std::vector<int> parent;
};

std::vector<int> compact(const std::vector<int>& raw) {
    std::vector<int> out(raw.size());
    std::map<int, int> ids;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        auto [it, fresh] = ids.emplace(raw[i], static_cast<int>(ids.size()));
        out[i] = it->second;
    }
    return out;
}

float prob(const Image& p, int x, int y) {
    const float v = p.at(x, y);
    return std::isnan(v) ? 1.0f : v;
}

}  // namespace

std::vector<BoundaryArc> extract_arcs(const std::vector<int>& labels, int w, int h, const Image* edge_prob) {
    std::map<std::pair<int, int>, BoundaryArc> arcs;
    auto add = [&](int x, int y, bool down) {
        const int p = labels[static_cast<std::size_t>(y) * w + x];
        const int q = down ? labels[static_cast<std::size_t>(y + 1) * w + x] : labels[static_cast<std::size_t>(y) * w + x + 1];
        if (p == q) return;
        auto& arc = arcs[{std::min(p, q), std::max(p, q)}];
        arc.a = std::min(p, q);
        arc.b = std::max(p, q);
        arc.cracks.push_back({x, y, down});
        if (edge_prob) {
            arc.strength += std::max(prob(*edge_prob, x, y), down ? prob(*edge_prob, x, y + 1) : prob(*edge_prob, x + 1, y));
        }
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (x + 1 < w) add(x, y, false);
            if (y + 1 < h) add(x, y, true);
        }
    std::vector<BoundaryArc> out;
    out.reserve(arcs.size());
    for (auto& [key, arc] : arcs) {
        arc.strength /= static_cast<double>(arc.cracks.size());
        out.push_back(std::move(arc));
    }
    return out;
}

WatershedResult watershed(const Image& edge_prob) {
    require_single_channel(edge_prob, "watershed");
    const int w = edge_prob.width(), h = edge_prob.height();
    const std::size_t n = edge_prob.pixel_count();
    WatershedResult res;
    res.width = w;
    res.height = h;
    res.labels.assign(n, -1);
    const int dx[4] = {-1, 1, 0, 0}, dy[4] = {0, 0, -1, 1};

    // Regional minima: flood each plateau and keep it if nothing around it is lower.
    std::vector<int> plateau(n, -1);
    std::vector<int> stack, members;
    int next = 0;
    for (int y0 = 0; y0 < h; ++y0)
        for (int x0 = 0; x0 < w; ++x0) {
            const std::size_t i0 = static_cast<std::size_t>(y0) * w + x0;
            if (plateau[i0] >= 0) continue;
            const float v = prob(edge_prob, x0, y0);
            bool minimum = true;
            members.clear();
            stack.assign(1, static_cast<int>(i0));
            plateau[i0] = 1;
            while (!stack.empty()) {
                const int i = stack.back();
                stack.pop_back();
                members.push_back(i);
                const int x = i % w, y = i / w;
                for (int k = 0; k < 4; ++k) {
                    const int u = x + dx[k], t = y + dy[k];
                    if (u < 0 || t < 0 || u >= w || t >= h) continue;
                    const float nv = prob(edge_prob, u, t);
                    const std::size_t j = static_cast<std::size_t>(t) * w + u;
                    if (nv < v) minimum = false;
                    if (nv == v && plateau[j] < 0) {
                        plateau[j] = 1;
                        stack.push_back(static_cast<int>(j));
                    }
                }
            }
            if (minimum) {
                for (int i : members) res.labels[static_cast<std::size_t>(i)] = next;
                ++next;
            }
        }
    res.region_count = next;

    using Entry = std::tuple<float, std::uint64_t, int, int>;  // value, order, pixel, label
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
    std::uint64_t order = 0;
    auto push_neighbours = [&](int i) {
        const int x = i % w, y = i / w;
        for (int k = 0; k < 4; ++k) {
            const int u = x + dx[k], t = y + dy[k];
            if (u < 0 || t < 0 || u >= w || t >= h) continue;
            const std::size_t j = static_cast<std::size_t>(t) * w + u;
            if (res.labels[j] < 0) queue.emplace(prob(edge_prob, u, t), order++, static_cast<int>(j), res.labels[static_cast<std::size_t>(i)]);
        }
    };
    for (std::size_t i = 0; i < n; ++i)
        if (res.labels[i] >= 0) push_neighbours(static_cast<int>(i));
    while (!queue.empty()) {
        const auto [v, o, i, label] = queue.top();
        queue.pop();
        if (res.labels[static_cast<std::size_t>(i)] >= 0) continue;
        res.labels[static_cast<std::size_t>(i)] = label;
        push_neighbours(i);
    }
    res.arcs = extract_arcs(res.labels, w, h, &edge_prob);
    return res;
}

SegmentationHierarchy build_ucm(const WatershedResult& base) {
    SegmentationHierarchy hier;
    hier.width = base.width;
    hier.height = base.height;
    hier.base_labels = base.labels;
    hier.region_count = base.region_count;
    hier.arcs = base.arcs;

    const int r = base.region_count;
    struct Link {
        double sum = 0.0;
        double count = 0.0;
        std::uint64_t stamp = 0;
        double strength() const { return sum / count; }
    };
    std::vector<std::map<int, Link>> adj(static_cast<std::size_t>(std::max(1, 2 * r - 1)));
    std::vector<char> alive(adj.size(), 0);
    std::fill(alive.begin(), alive.begin() + r, 1);
    using Entry = std::tuple<double, int, int, std::uint64_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
    std::uint64_t stamp = 0;
    auto link = [&](int a, int b, double sum, double count) {
        const std::uint64_t s = ++stamp;
        adj[static_cast<std::size_t>(a)][b] = {sum, count, s};
        adj[static_cast<std::size_t>(b)][a] = {sum, count, s};
        queue.emplace(sum / count, std::min(a, b), std::max(a, b), s);
    };
    for (const auto& arc : base.arcs) link(arc.a, arc.b, arc.strength * arc.length(), arc.length());

    double level = 0.0;
    int next = r;
    while (!queue.empty()) {
        const auto [s, a, b, st] = queue.top();
        queue.pop();
        if (!alive[static_cast<std::size_t>(a)] || !alive[static_cast<std::size_t>(b)]) continue;
        const auto it = adj[static_cast<std::size_t>(a)].find(b);
        if (it == adj[static_cast<std::size_t>(a)].end() || it->second.stamp != st) continue;
        level = std::max(level, s);
        hier.merges.push_back({a, b, level});
        const int c = next++;
        alive[static_cast<std::size_t>(a)] = alive[static_cast<std::size_t>(b)] = 0;
        alive[static_cast<std::size_t>(c)] = 1;
        std::map<int, Link> merged;
        for (int src : {a, b})
            for (const auto& [nb, l] : adj[static_cast<std::size_t>(src)]) {
                if (nb == a || nb == b) continue;
                merged[nb].sum += l.sum;
                merged[nb].count += l.count;
                adj[static_cast<std::size_t>(nb)].erase(src);
            }
        adj[static_cast<std::size_t>(a)].clear();
        adj[static_cast<std::size_t>(b)].clear();
        for (const auto& [nb, l] : merged) link(c, nb, l.sum, l.count);
    }
    return hier;
}

double SegmentationHierarchy::cophenetic(int a, int b) const {
    if (a == b) return 0.0;
    const int r = region_count;
    std::vector<int> parent(static_cast<std::size_t>(r) + merges.size(), -1);
    for (std::size_t k = 0; k < merges.size(); ++k) {
        parent[static_cast<std::size_t>(merges[k].a)] = r + static_cast<int>(k);
        parent[static_cast<std::size_t>(merges[k].b)] = r + static_cast<int>(k);
    }
    std::vector<char> seen(parent.size(), 0);
    for (int x = a; x >= 0; x = parent[static_cast<std::size_t>(x)]) seen[static_cast<std::size_t>(x)] = 1;
    for (int x = b; x >= 0; x = parent[static_cast<std::size_t>(x)])
        if (seen[static_cast<std::size_t>(x)]) return merges[static_cast<std::size_t>(x - r)].strength;
    return std::numeric_limits<double>::infinity();
}

namespace {

// Cophenetic strength of every base arc by replaying the merges.
std::vector<double> arc_levels(const SegmentationHierarchy& h) {
    const int r = h.region_count;
    std::vector<double> level(h.arcs.size(), std::numeric_limits<double>::infinity());
    std::vector<std::vector<int>> lists(static_cast<std::size_t>(r) + h.merges.size());
    for (std::size_t i = 0; i < h.arcs.size(); ++i) {
        lists[static_cast<std::size_t>(h.arcs[i].a)].push_back(static_cast<int>(i));
        lists[static_cast<std::size_t>(h.arcs[i].b)].push_back(static_cast<int>(i));
    }
    Dsu dsu(static_cast<std::size_t>(r));
    std::vector<int> rep(lists.size(), -1);  // cluster id -> a base region inside it
    for (int i = 0; i < r; ++i) rep[static_cast<std::size_t>(i)] = i;
    for (std::size_t k = 0; k < h.merges.size(); ++k) {
        const auto& m = h.merges[k];
        auto& la = lists[static_cast<std::size_t>(m.a)];
        auto& lb = lists[static_cast<std::size_t>(m.b)];
        const int ra = dsu.find(rep[static_cast<std::size_t>(m.a)]), rb = dsu.find(rep[static_cast<std::size_t>(m.b)]);
        const auto& small = la.size() <= lb.size() ? la : lb;
        for (int idx : small) {
            const auto& arc = h.arcs[static_cast<std::size_t>(idx)];
            const int x = dsu.find(arc.a), y = dsu.find(arc.b);
            if ((x == ra && y == rb) || (x == rb && y == ra)) level[static_cast<std::size_t>(idx)] = m.strength;
        }
        dsu.parent[static_cast<std::size_t>(rb)] = ra;
        const std::size_t c = static_cast<std::size_t>(r) + k;
        rep[c] = ra;
        auto& lc = lists[c];
        lc.reserve(la.size() + lb.size());
        lc.insert(lc.end(), la.begin(), la.end());
        lc.insert(lc.end(), lb.begin(), lb.end());
        std::vector<int>().swap(la);
        std::vector<int>().swap(lb);
    }
    return level;
}

}  // namespace

std::vector<int> threshold_segmentation(const SegmentationHierarchy& h, double t) {
    const int r = h.region_count;
    Dsu dsu(static_cast<std::size_t>(std::max(r, 1)));
    std::vector<int> rep(static_cast<std::size_t>(r) + h.merges.size());
    for (int i = 0; i < r; ++i) rep[static_cast<std::size_t>(i)] = i;
    for (std::size_t k = 0; k < h.merges.size(); ++k) {
        const auto& m = h.merges[k];
        const int ra = dsu.find(rep[static_cast<std::size_t>(m.a)]);
        rep[static_cast<std::size_t>(r) + k] = ra;
        if (!(m.strength < t)) continue;
        dsu.parent[static_cast<std::size_t>(dsu.find(rep[static_cast<std::size_t>(m.b)]))] = ra;
    }
    std::vector<int> raw(h.base_labels.size());
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = dsu.find(h.base_labels[i]);
    return compact(raw);
}

Image ucm_raster(const SegmentationHierarchy& h) {
    const int w = h.width, hh = h.height;
    const int uw = 2 * w - 1, uh = 2 * hh - 1;
    Image ucm(uw, uh, 1);
    const std::vector<double> levels = arc_levels(h);
    for (std::size_t i = 0; i < h.arcs.size(); ++i)
        for (const Crack& c : h.arcs[i].cracks) {
            const int ux = c.down ? 2 * c.x : 2 * c.x + 1, uy = c.down ? 2 * c.y + 1 : 2 * c.y;
            ucm.at(ux, uy) = static_cast<float>(levels[i]);
        }
    for (int y = 1; y < uh; y += 2)
        for (int x = 1; x < uw; x += 2)
            ucm.at(x, y) = std::max({ucm.at(x - 1, y), ucm.at(x + 1, y), ucm.at(x, y - 1), ucm.at(x, y + 1)});
    return ucm;
}

std::vector<int> partition_from_ucm(const Image& ucm, double t) {
    const int w = (ucm.width() + 1) / 2, h = (ucm.height() + 1) / 2;
    std::vector<int> labels(static_cast<std::size_t>(w) * h, -1);
    std::vector<int> stack;
    int next = 0;
    for (std::size_t s = 0; s < labels.size(); ++s) {
        if (labels[s] >= 0) continue;
        labels[s] = next;
        stack.assign(1, static_cast<int>(s));
        while (!stack.empty()) {
            const int i = stack.back();
            stack.pop_back();
            const int x = i % w, y = i / w;
            auto visit = [&](int u, int v, int cx, int cy) {
                if (u < 0 || v < 0 || u >= w || v >= h) return;
                const std::size_t j = static_cast<std::size_t>(v) * w + u;
                if (labels[j] >= 0 || !(ucm.at(cx, cy) < t)) return;
                labels[j] = next;
                stack.push_back(static_cast<int>(j));
            };
            visit(x + 1, y, 2 * x + 1, 2 * y);
            visit(x - 1, y, 2 * x - 1, 2 * y);
            visit(x, y + 1, 2 * x, 2 * y + 1);
            visit(x, y - 1, 2 * x, 2 * y - 1);
        }
        ++next;
    }
    return labels;
}

Image boundary_map(const std::vector<int>& labels, int w, int h) {
    Image out(w, h, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int l = labels[static_cast<std::size_t>(y) * w + x];
            if ((x + 1 < w && labels[static_cast<std::size_t>(y) * w + x + 1] != l) ||
                (y + 1 < h && labels[static_cast<std::size_t>(y + 1) * w + x] != l)) {
                out.at(x, y) = 1.0f;
            }
        }
    return out;
}

Image ucm_pixel_strength(const SegmentationHierarchy& h) {
    Image out(h.width, h.height, 1);
    const std::vector<double> levels = arc_levels(h);
    for (std::size_t i = 0; i < h.arcs.size(); ++i)
        for (const Crack& c : h.arcs[i].cracks) out.at(c.x, c.y) = std::max(out.at(c.x, c.y), static_cast<float>(levels[i]));
    return out;
}

// ---------------------------------------------------------------------------
// Strengthening

double strengthen_factor(double w_i, double l_i, const std::vector<double>& w_j, const std::vector<double>& l_j,
                         const std::vector<double>& cos_ij, double image_width, const StrengthenConfig& cfg) {
    const double centre = cfg.saturation * image_width;
    auto sat = [&](double l) { return 1.0 / (1.0 + std::exp(-cfg.sharpness * (l / centre - 1.0))); };
    double best = 0.0;
    for (std::size_t j = 0; j < w_j.size(); ++j) {
        if (!(w_j[j] > w_i)) continue;
        const double ratio = w_i > 0 ? w_j[j] / w_i : std::numeric_limits<double>::infinity();
        const double term = std::abs(cos_ij[j]) * std::max(1.0, 0.5 * ratio * std::sqrt(sat(l_i) * sat(l_j[j])));
        best = std::max(best, term);
    }
    return 1.0 + best;
}

std::pair<double, double> arc_tangent(const BoundaryArc& arc, int cx, int cy, int count) {
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(arc.cracks.size());
    for (std::size_t i = 0; i < arc.cracks.size(); ++i) {
        const Crack& c = arc.cracks[i];
        // Crack midpoint in lattice-corner coordinates.
        const double mx = c.down ? c.x + 0.5 : c.x + 1.0, my = c.down ? c.y + 1.0 : c.y + 0.5;
        dist.emplace_back((mx - cx) * (mx - cx) + (my - cy) * (my - cy), i);
    }
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(std::max(count, 1)), dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < k; ++i) {
        const Crack& c = arc.cracks[dist[i].second];
        if (c.down) {
            pts.emplace_back(c.x, c.y + 1.0);
            pts.emplace_back(c.x + 1.0, c.y + 1.0);
        } else {
            pts.emplace_back(c.x + 1.0, c.y);
            pts.emplace_back(c.x + 1.0, c.y + 1.0);
        }
    }
    double mx = 0, my = 0;
    for (auto [x, y] : pts) {
        mx += x;
        my += y;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double sxx = 0, sxy = 0, syy = 0;
    for (auto [x, y] : pts) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    // Principal axis of the 2x2 scatter matrix.
    const double angle = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
    return {std::cos(angle), std::sin(angle)};
}

SegmentationHierarchy strengthen_contours(const SegmentationHierarchy& h, const StrengthenConfig& cfg) {
    const int w = h.width;
    const std::size_t n = h.arcs.size();
    std::map<int, std::vector<int>> corners;
    std::vector<std::vector<int>> arc_corners(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (const Crack& c : h.arcs[i].cracks) {
            const int k0 = c.down ? (c.y + 1) * (w + 1) + c.x : c.y * (w + 1) + c.x + 1;
            const int k1 = (c.y + 1) * (w + 1) + c.x + 1;
            for (int k : {k0, k1}) arc_corners[i].push_back(k);
        }
        auto& ac = arc_corners[i];
        std::sort(ac.begin(), ac.end());
        ac.erase(std::unique(ac.begin(), ac.end()), ac.end());
        for (int k : ac) corners[k].push_back(static_cast<int>(i));
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return h.arcs[a].strength > h.arcs[b].strength; });
    std::vector<double> updated(n);
    for (std::size_t i = 0; i < n; ++i) updated[i] = h.arcs[i].strength;
    std::vector<char> visited(n, 0);
    for (std::size_t i : order) {
        const double wi = h.arcs[i].strength;
        std::vector<double> wj, lj, cj;
        for (int k : arc_corners[i]) {
            const auto& touching = corners[k];
            if (touching.size() < 2) continue;
            const int cx = k % (w + 1), cy = k / (w + 1);
            std::pair<double, double> ti{0, 0};
            bool have = false;
            for (int j : touching) {
                const auto sj = static_cast<std::size_t>(j);
                if (sj == i || !visited[sj] || !(h.arcs[sj].strength > wi)) continue;
                if (!have) {
                    ti = arc_tangent(h.arcs[i], cx, cy, cfg.tangent_cracks);
                    have = true;
                }
                const auto tj = arc_tangent(h.arcs[sj], cx, cy, cfg.tangent_cracks);
                wj.push_back(updated[sj]);
                lj.push_back(h.arcs[sj].length());
                cj.push_back(ti.first * tj.first + ti.second * tj.second);
            }
        }
        // Stronger is judged on the updated strengths of the visited arcs.
        const double f = strengthen_factor(wi, h.arcs[i].length(), wj, lj, cj, w, cfg);
        updated[i] = cfg.reading == StrengthenReading::Factor ? wi * f : f;
        visited[i] = 1;
    }
    const double top = n ? *std::max_element(updated.begin(), updated.end()) : 0.0;
    const double scale = std::max(1.0, top);
    WatershedResult base;
    base.width = h.width;
    base.height = h.height;
    base.labels = h.base_labels;
    base.region_count = h.region_count;
    base.arcs = h.arcs;
    for (std::size_t i = 0; i < n; ++i) base.arcs[i].strength = updated[i] / scale;
    return build_ucm(base);
}

SegmentationHierarchy segment(const Image& edge_prob, const SegmenterConfig& cfg) {
    SegmentationHierarchy h = build_ucm(watershed(edge_prob));
    return cfg.strengthen ? strengthen_contours(h, cfg.strengthen_cfg) : h;
}

// ---------------------------------------------------------------------------
// Files

std::string format_merge_tree(const SegmentationHierarchy& h) {
    std::ostringstream os;
    os << "depthedge-hierarchy 1 " << h.width << ' ' << h.height << ' ' << h.region_count << '\n';
    char buf[96];
    for (const auto& m : h.merges) {
        std::snprintf(buf, sizeof buf, "merge %d %d %.9g\n", m.a, m.b, m.strength);
        os << buf;
    }
    return os.str();
}

void write_hierarchy(const std::filesystem::path& merge_tree, const std::filesystem::path& labels,
                     const SegmentationHierarchy& h) {
    if (h.region_count > 65536) throw shape_error("too many base regions for a 16-bit label map");
    std::vector<std::uint16_t> v(h.base_labels.begin(), h.base_labels.end());
    write_pgm16(labels, h.width, h.height, v);
    write_file_atomic(merge_tree, format_merge_tree(h));
}

SegmentationHierarchy read_hierarchy(const std::filesystem::path& merge_tree, const std::filesystem::path& labels,
                                     const Image* edge_prob) {
    SegmentationHierarchy h;
    int w = 0, hh = 0;
    const auto raw = read_pgm16(labels, w, hh);
    h.width = w;
    h.height = hh;
    h.base_labels.assign(raw.begin(), raw.end());
    std::istringstream is(read_file(merge_tree));
    const std::string origin = merge_tree.string();
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (lineno == 1) {
            int version = 0, fw = 0, fh = 0;
            if (key != "depthedge-hierarchy" || !(ls >> version >> fw >> fh >> h.region_count) || version != 1) {
                throw parse_error(origin + ":1: expected 'depthedge-hierarchy 1 <width> <height> <regions>'");
            }
            if (fw != w || fh != hh) throw shape_error(origin + ": size differs from label map " + labels.string());
            continue;
        }
        if (key.empty()) continue;
        Merge m;
        if (key != "merge" || !(ls >> m.a >> m.b >> m.strength)) {
            throw parse_error(origin + ":" + std::to_string(lineno) + ": expected 'merge <a> <b> <strength>'");
        }
        const int limit = h.region_count + static_cast<int>(h.merges.size());
        if (m.a < 0 || m.b < 0 || m.a >= limit || m.b >= limit) {
            throw parse_error(origin + ":" + std::to_string(lineno) + ": region id out of range");
        }
        h.merges.push_back(m);
    }
    if (lineno == 0) throw parse_error(origin + ": empty merge tree");
    for (int l : h.base_labels)
        if (l >= h.region_count) throw parse_error(labels.string() + ": label exceeds the region count");
    if (edge_prob && !(edge_prob->width() == w && edge_prob->height() == hh)) {
        throw shape_error("edge map size differs from label map " + labels.string());
    }
    h.arcs = extract_arcs(h.base_labels, w, hh, edge_prob);
    return h;
}

Image ucm_overlay(const Image& background, const SegmentationHierarchy& h) {
    const Image gray = background.channels() == 3 ? luminance(background) : background;
    if (gray.width() != h.width || gray.height() != h.height) throw shape_error("overlay background size differs");
    const Image s = ucm_pixel_strength(h);
    float top = 0.0f;
    for (float v : s.data()) top = std::max(top, v);
    Image out(h.width, h.height, 3);
    for (int y = 0; y < h.height; ++y)
        for (int x = 0; x < h.width; ++x) {
            const float g = std::clamp(gray.at(x, y), 0.0f, 1.0f) * 0.8f;
            const float a = top > 0 ? s.at(x, y) / top : 0.0f;
            out.at(x, y, 0) = g * (1 - a) + a;
            out.at(x, y, 1) = g * (1 - a);
            out.at(x, y, 2) = g * (1 - a);
        }
    return out;
}

}  // namespace depthedge
