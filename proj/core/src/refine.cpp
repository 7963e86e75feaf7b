#include "depthedge/refine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "depthedge/log.hpp"

namespace depthedge {

std::vector<double> SparseMatrix::apply(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != cols) throw shape_error("sparse apply: vector length mismatch");
    std::vector<double> y(static_cast<std::size_t>(rows), 0.0);
    for (int r = 0; r < rows; ++r)
        for (int k = row_start[static_cast<std::size_t>(r)]; k < row_start[static_cast<std::size_t>(r) + 1]; ++k)
            y[static_cast<std::size_t>(r)] += value[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(col[static_cast<std::size_t>(k)])];
    return y;
}

std::vector<double> SparseMatrix::apply_transpose(const std::vector<double>& y) const {
    if (static_cast<int>(y.size()) != rows) throw shape_error("sparse apply_transpose: vector length mismatch");
    std::vector<double> x(static_cast<std::size_t>(cols), 0.0);
    for (int r = 0; r < rows; ++r)
        for (int k = row_start[static_cast<std::size_t>(r)]; k < row_start[static_cast<std::size_t>(r) + 1]; ++k)
            x[static_cast<std::size_t>(col[static_cast<std::size_t>(k)])] += value[static_cast<std::size_t>(k)] * y[static_cast<std::size_t>(r)];
    return x;
}

std::pair<SparseMatrix, SparseMatrix> build_gradient_operators(int w, int h) {
    if (w < 1 || h < 1 || (w < 2 && h < 2)) {
        throw shape_error("gradient operators need at least 2 pixels along one axis, got " + std::to_string(w) + "x" +
                          std::to_string(h));
    }
    const int n = w * h;
    SparseMatrix gu{n, n, {0}, {}, {}}, gv{n, n, {0}, {}, {}};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int p = y * w + x;
            if (x + 1 < w) {
                gu.col.insert(gu.col.end(), {p, p + 1});
                gu.value.insert(gu.value.end(), {-1.0, 1.0});
            }
            gu.row_start.push_back(static_cast<int>(gu.col.size()));
            if (y + 1 < h) {
                gv.col.insert(gv.col.end(), {p, p + w});
                gv.value.insert(gv.value.end(), {-1.0, 1.0});
            }
            gv.row_start.push_back(static_cast<int>(gv.col.size()));
        }
    return {std::move(gu), std::move(gv)};
}

void RefinementProblem::validate() const {
    const std::size_t n = static_cast<std::size_t>(width) * height;
    if (width < 1 || height < 1 || n < 2) throw shape_error("refinement problem needs at least 2 pixels");
    if (x0.size() != n || edge.size() != n || du.size() != n || dv.size() != n || c.size() != n) {
        throw shape_error("refinement problem vectors must all hold width*height values");
    }
    if (!(mu > 0)) throw input_error("refinement mu must be positive");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(x0[i]) || !std::isfinite(edge[i]) || !std::isfinite(du[i]) || !std::isfinite(dv[i]) ||
            !std::isfinite(c[i])) {
            throw numeric_error("refinement input holds a non-finite value at pixel " + std::to_string(i % width) +
                                "," + std::to_string(i / width));
        }
        if (c[i] < 0) throw input_error("refinement c must be >= 0");
    }
}

namespace {

struct Grad {
    std::vector<double> u, v;
};

Grad grad(const RefinementProblem& p, const std::vector<double>& x) {
    const int w = p.width, h = p.height;
    Grad g{std::vector<double>(x.size(), 0.0), std::vector<double>(x.size(), 0.0)};
    for (int y = 0; y < h; ++y)
        for (int i = 0; i < w; ++i) {
            const std::size_t k = static_cast<std::size_t>(y) * w + i;
            if (i + 1 < w) g.u[k] = x[k + 1] - x[k];
            if (y + 1 < h) g.v[k] = x[k + static_cast<std::size_t>(w)] - x[k];
        }
    return g;
}

// out += G_u^T s + G_v^T t
void add_transpose(const RefinementProblem& p, const std::vector<double>& s, const std::vector<double>& t,
                   std::vector<double>& out) {
    const int w = p.width, h = p.height;
    for (int y = 0; y < h; ++y)
        for (int i = 0; i < w; ++i) {
            const std::size_t k = static_cast<std::size_t>(y) * w + i;
            if (i + 1 < w) {
                out[k + 1] += s[k];
                out[k] -= s[k];
            }
            if (y + 1 < h) {
                out[k + static_cast<std::size_t>(w)] += t[k];
                out[k] -= t[k];
            }
        }
}

bool in_hinge(const RefinementProblem& p, std::size_t k) { return p.edge[k] >= p.min_edge; }

std::vector<char> active_set(const RefinementProblem& p, const std::vector<double>& x) {
    const Grad g = grad(p, x);
    std::vector<char> a(x.size(), 0);
    for (std::size_t k = 0; k < x.size(); ++k)
        a[k] = in_hinge(p, k) && p.du[k] * g.u[k] + p.dv[k] * g.v[k] < p.c[k];
    return a;
}

// H z for the quadratic model with a fixed active set.
std::vector<double> apply_h(const RefinementProblem& p, const std::vector<char>& active, const std::vector<double>& z) {
    const Grad g = grad(p, z);
    std::vector<double> s(z.size()), t(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) {
        const double q = (1 - p.edge[k]) * (1 - p.edge[k]);
        s[k] = q * g.u[k];
        t[k] = q * g.v[k];
        if (active[k]) {
            const double hk = p.edge[k] * p.edge[k] * (p.du[k] * g.u[k] + p.dv[k] * g.v[k]);
            s[k] += p.du[k] * hk;
            t[k] += p.dv[k] * hk;
        }
    }
    std::vector<double> out(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) out[k] = p.mu * z[k];
    add_transpose(p, s, t, out);
    return out;
}

std::vector<double> rhs(const RefinementProblem& p, const std::vector<char>& active) {
    std::vector<double> s(p.x0.size(), 0.0), t(p.x0.size(), 0.0);
    for (std::size_t k = 0; k < s.size(); ++k)
        if (active[k]) {
            const double hk = p.edge[k] * p.edge[k] * p.c[k];
            s[k] = p.du[k] * hk;
            t[k] = p.dv[k] * hk;
        }
    std::vector<double> out(p.x0.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = p.mu * p.x0[k];
    add_transpose(p, s, t, out);
    return out;
}

std::vector<double> diagonal(const RefinementProblem& p, const std::vector<char>& active) {
    const int w = p.width, h = p.height;
    std::vector<double> d(p.x0.size(), p.mu);
    for (int y = 0; y < h; ++y)
        for (int i = 0; i < w; ++i) {
            const std::size_t k = static_cast<std::size_t>(y) * w + i;
            const double q = (1 - p.edge[k]) * (1 - p.edge[k]);
            const double cu = i + 1 < w ? 1.0 : 0.0, cv = y + 1 < h ? 1.0 : 0.0;
            d[k] += q * (cu + cv);
            if (cu > 0) d[k + 1] += q;
            if (cv > 0) d[k + static_cast<std::size_t>(w)] += q;
            if (active[k]) {
                const double e2 = p.edge[k] * p.edge[k];
                const double a = p.du[k] * cu, b = p.dv[k] * cv;
                d[k] += e2 * (a + b) * (a + b);
                if (cu > 0) d[k + 1] += e2 * a * a;
                if (cv > 0) d[k + static_cast<std::size_t>(w)] += e2 * b * b;
            }
        }
    return d;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Jacobi-preconditioned conjugate gradients from the initial guess x.
void pcg(const RefinementProblem& p, const std::vector<char>& active, const std::vector<double>& b,
         std::vector<double>& x, const SolverOptions& opt) {
    const std::vector<double> diag = diagonal(p, active);
    std::vector<double> r = apply_h(p, active, x);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
    const double bnorm = std::sqrt(dot(b, b));
    const double stop = opt.cg_tolerance * (bnorm > 0 ? bnorm : 1.0);
    if (std::sqrt(dot(r, r)) <= stop) return;
    std::vector<double> z(r.size()), d(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) d[i] = z[i] = r[i] / diag[i];
    double rz = dot(r, z);
    for (int it = 0; it < opt.cg_max_iterations; ++it) {
        const std::vector<double> hd = apply_h(p, active, d);
        const double alpha = rz / dot(d, hd);
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] += alpha * d[i];
            r[i] -= alpha * hd[i];
        }
        if (std::sqrt(dot(r, r)) <= stop) return;
        for (std::size_t i = 0; i < r.size(); ++i) z[i] = r[i] / diag[i];
        const double rz_next = dot(r, z);
        const double beta = rz_next / rz;
        rz = rz_next;
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = z[i] + beta * d[i];
    }
}

}  // namespace

double objective(const RefinementProblem& p, const std::vector<double>& x) {
    const Grad g = grad(p, x);
    double f = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (in_hinge(p, k)) {
            const double r = std::min(0.0, p.du[k] * g.u[k] + p.dv[k] * g.v[k] - p.c[k]);
            f += p.edge[k] * p.edge[k] * r * r;
        }
        const double q = (1 - p.edge[k]) * (1 - p.edge[k]);
        f += q * (g.u[k] * g.u[k] + g.v[k] * g.v[k]);
        f += p.mu * (x[k] - p.x0[k]) * (x[k] - p.x0[k]);
    }
    return f;
}

RefineResult refine(const RefinementProblem& p, const SolverOptions& opt, const std::vector<double>* initial) {
    p.validate();
    RefineResult res;
    res.x = initial ? *initial : p.x0;
    if (res.x.size() != p.x0.size()) throw shape_error("refine: initial iterate has the wrong length");
    double f = objective(p, res.x);
    res.objective_history.push_back(f);
    std::vector<char> active = active_set(p, res.x);
    for (int it = 0; it < opt.max_iterations; ++it) {
        std::vector<double> target = res.x;
        pcg(p, active, rhs(p, active), target, opt);
        // Backtrack along the Gauss-Newton step until the objective does not grow.
        double step = 1.0;
        std::vector<double> trial(res.x.size());
        double ft = f;
        for (int k = 0; k < 60; ++k, step *= 0.5) {
            for (std::size_t i = 0; i < trial.size(); ++i) trial[i] = res.x[i] + step * (target[i] - res.x[i]);
            ft = objective(p, trial);
            if (ft <= f) break;
        }
        ++res.iterations;
        if (ft > f) {
            res.objective_history.push_back(f);
            break;
        }
        res.x = std::move(trial);
        const double previous = f;
        f = ft;
        res.objective_history.push_back(f);
        std::vector<char> next = active_set(p, res.x);
        const bool settled = next == active && step == 1.0;
        active = std::move(next);
        if (settled || previous - f <= 1e-15 * std::max(1.0, std::abs(previous))) {
            res.converged = true;
            break;
        }
    }
    return res;
}

Image choose_c(const Image& x0, const Image& directions, int window, double sigma) {
    require_single_channel(x0, "choose_c");
    if (directions.channels() < 2 || !directions.same_size(x0)) {
        throw shape_error("choose_c: direction field must have 2 channels and the disparity's size");
    }
    if (window < 1) throw input_error("choose_c: window must be >= 1");
    const Image xs = sigma > 0 ? filter(x0, FilterSpec::gaussian(sigma)) : x0;
    const double half = 0.5 * window;
    Image c(x0.width(), x0.height(), 1);
    for (int y = 0; y < x0.height(); ++y)
        for (int x = 0; x < x0.width(); ++x) {
            const double du = directions.at(x, y, 0), dv = directions.at(x, y, 1);
            if (!(std::hypot(du, dv) > 1e-6)) continue;
            // Centre on the forward difference, i.e. half a step along d.
            const double cx = x + 0.5 * du, cy = y + 0.5 * dv;
            const double v = sample_bilinear(xs, cx + half * du, cy + half * dv) -
                             sample_bilinear(xs, cx - half * du, cy - half * dv);
            c.at(x, y) = static_cast<float>(std::max(0.0, v));
        }
    return c;
}

void RefineConfig::validate() const {
    if (!(mu > 0)) throw input_error("refine: mu must be positive");
    if (levels < 1) throw input_error("refine: levels must be >= 1");
    if (factor < 2) throw input_error("refine: pyramid factor must be >= 2");
    if (window < 1) throw input_error("refine: window must be >= 1");
    if (c_sigma < 0 || (constant_c && c_value < 0)) throw input_error("refine: c settings must be >= 0");
    if (solver.max_iterations < 1 || !(solver.cg_tolerance > 0) || solver.cg_max_iterations < 1) {
        throw input_error("refine: invalid solver settings");
    }
}

namespace {

struct Level {
    Image x0, contour, directions;
};

Level downsample(const Level& in, int f) {
    const int w = (in.x0.width() + f - 1) / f, h = (in.x0.height() + f - 1) / f;
    Level out{Image(w, h, 1), Image(w, h, 1), Image(w, h, 2)};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double sum = 0.0;
            int n = 0, bx = -1, by = -1;
            float best = -1.0f;
            for (int j = y * f; j < std::min(in.x0.height(), (y + 1) * f); ++j)
                for (int i = x * f; i < std::min(in.x0.width(), (x + 1) * f); ++i) {
                    sum += in.x0.at(i, j);
                    ++n;
                    if (in.contour.at(i, j) > best) {
                        best = in.contour.at(i, j);
                        bx = i;
                        by = j;
                    }
                }
            out.x0.at(x, y) = static_cast<float>(sum / n / f);
            out.contour.at(x, y) = best;
            out.directions.at(x, y, 0) = in.directions.at(bx, by, 0);
            out.directions.at(x, y, 1) = in.directions.at(bx, by, 1);
        }
    return out;
}

std::vector<double> to_vec(const Image& img, int channel = 0) {
    std::vector<double> v(img.pixel_count());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = img.data()[i * static_cast<std::size_t>(img.channels()) + channel];
    return v;
}

}  // namespace

MultiscaleResult multiscale_refine(const Image& x0, const Image& contour, const Image& directions,
                                   const RefineConfig& cfg) {
    cfg.validate();
    require_single_channel(x0, "multiscale_refine");
    require_single_channel(contour, "multiscale_refine contour");
    if (!x0.same_size(contour) || !x0.same_size(directions) || directions.channels() < 2) {
        throw shape_error("multiscale_refine: disparity, contour and 2-channel direction field must share a size");
    }
    Image dir2(x0.width(), x0.height(), 2);
    for (std::size_t i = 0; i < x0.pixel_count(); ++i) {
        dir2.data()[2 * i] = directions.data()[i * static_cast<std::size_t>(directions.channels())];
        dir2.data()[2 * i + 1] = directions.data()[i * static_cast<std::size_t>(directions.channels()) + 1];
    }
    std::vector<Level> pyramid{{x0, contour, dir2}};
    while (static_cast<int>(pyramid.size()) < cfg.levels) {
        const Level& top = pyramid.back();
        if (top.x0.width() < 2 * cfg.factor || top.x0.height() < 2 * cfg.factor) break;
        pyramid.push_back(downsample(top, cfg.factor));
    }

    MultiscaleResult out;
    std::vector<double> guess;
    for (int l = static_cast<int>(pyramid.size()) - 1; l >= 0; --l) {
        const Level& lv = pyramid[static_cast<std::size_t>(l)];
        RefinementProblem p;
        p.width = lv.x0.width();
        p.height = lv.x0.height();
        p.x0 = to_vec(lv.x0);
        p.edge = to_vec(lv.contour);
        for (auto& e : p.edge) e = std::clamp(e, 0.0, 1.0);
        p.du = to_vec(lv.directions, 0);
        p.dv = to_vec(lv.directions, 1);
        p.c = cfg.constant_c ? std::vector<double>(p.x0.size(), cfg.c_value)
                             : to_vec(choose_c(lv.x0, lv.directions, cfg.window, cfg.c_sigma));
        p.mu = cfg.mu * std::pow(static_cast<double>(cfg.factor), 2 * l);
        p.min_edge = cfg.min_edge;
        if (!guess.empty()) {
            // Nearest-neighbour upsampling of the coarser solution, disparities scaled up.
            const Level& coarse = pyramid[static_cast<std::size_t>(l) + 1];
            std::vector<double> init(p.x0.size());
            for (int y = 0; y < p.height; ++y)
                for (int x = 0; x < p.width; ++x)
                    init[static_cast<std::size_t>(y) * p.width + x] =
                        guess[static_cast<std::size_t>(y / cfg.factor) * coarse.x0.width() + x / cfg.factor] * cfg.factor;
            guess = std::move(init);
        }
        RefineResult r = refine(p, cfg.solver, guess.empty() ? nullptr : &guess);
        LevelReport rep{l, p.width, p.height, r.objective_history.front(), r.objective_history.back(), r.iterations,
                        r.converged};
        out.levels.push_back(rep);
        out.converged = out.converged && r.converged;
        guess = std::move(r.x);
    }
    if (!out.converged) warn("refine: Gauss-Newton budget exhausted before the active set settled; returning the best iterate");
    out.disparity = Image(x0.width(), x0.height(), 1);
    for (std::size_t i = 0; i < guess.size(); ++i) out.disparity.data()[i] = static_cast<float>(guess[i]);
    return out;
}

std::string format_refine_report(const MultiscaleResult& r) {
    std::ostringstream os;
    char buf[160];
    for (const auto& l : r.levels) {
        std::snprintf(buf, sizeof buf, "level %d %dx%d objective %.9g -> %.9g iterations %d %s\n", l.level, l.width,
                      l.height, l.initial_objective, l.final_objective, l.iterations,
                      l.converged ? "converged" : "budget-exhausted");
        os << buf;
    }
    return os.str();
}

}  // namespace depthedge
