#pragma once

#include <string>
#include <utility>
#include <vector>

#include "depthedge/image.hpp"

namespace depthedge {

/// Compressed sparse rows, double values.
struct SparseMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<int> row_start;  // rows + 1 entries
    std::vector<int> col;
    std::vector<double> value;

    std::vector<double> apply(const std::vector<double>& x) const;
    std::vector<double> apply_transpose(const std::vector<double>& y) const;
};

/// Forward differences on a row-major w x h grid: (G_u x)_p = x_{p+1} - x_p,
/// (G_v x)_p = x_{p+w} - x_p, with zero rows on the last column / last row.
std::pair<SparseMatrix, SparseMatrix> build_gradient_operators(int width, int height);

/// Flattened single-scale problem. `edge` is the contour probability; the
/// hinge term uses pixels with edge >= min_edge only.
struct RefinementProblem {
    int width = 0;
    int height = 0;
    std::vector<double> x0;
    std::vector<double> edge;
    std::vector<double> du;
    std::vector<double> dv;
    std::vector<double> c;
    double mu = 0.5;
    double min_edge = 0.1;

    void validate() const;
};

/// sum P^2 min(0, d.Gx - c)^2 + sum (1-P)^2 ((G_u x)^2 + (G_v x)^2) + mu |x - x0|^2,
/// i.e. the constrained form with the slack set to its optimum max(0, d.Gx - c).
double objective(const RefinementProblem& p, const std::vector<double>& x);

struct SolverOptions {
    int max_iterations = 15;  // Gauss-Newton steps
    double cg_tolerance = 1e-8;
    int cg_max_iterations = 5000;
};

struct RefineResult {
    std::vector<double> x;
    std::vector<double> objective_history;  // before the first step and after every step
    int iterations = 0;
    bool converged = false;  // the active set stopped changing within the budget
};

/// Gauss-Newton on the active set of the hinge, preconditioned CG for the
/// inner solves, halving the step until the objective does not increase.
RefineResult refine(const RefinementProblem& p, const SolverOptions& opt = {},
                    const std::vector<double>* initial = nullptr);

/// c = xs(p + 3d) - xs(p - 2d) clamped at 0, with xs the Gaussian-smoothed
/// x0: the change across a window of `window` px centred on the forward
/// difference at p. Zero where the direction vanishes.
Image choose_c(const Image& x0, const Image& directions, int window = 5, double sigma = 1.0);

struct RefineConfig {
    double mu = 0.5;
    int levels = 3;
    int factor = 2;
    int window = 5;
    double c_sigma = 1.0;
    bool constant_c = false;
    double c_value = 1.0;  // used when constant_c
    double min_edge = 0.1;
    SolverOptions solver;

    void validate() const;
};

struct LevelReport {
    int level = 0;  // 0 is full resolution
    int width = 0;
    int height = 0;
    double initial_objective = 0.0;
    double final_objective = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct MultiscaleResult {
    Image disparity;
    std::vector<LevelReport> levels;  // coarse to fine
    bool converged = true;
};

/// Coarse-to-fine solve. Downsampling averages disparity over 2x2 blocks and
/// divides it by the factor, takes the block maximum of the contour map and
/// the direction of that maximum; each finer level starts from the coarser
/// solution upsampled (nearest) and multiplied by the factor. Level l uses
/// mu * factor^(2l), which keeps the smoothing length fixed in full-resolution pixels.
MultiscaleResult multiscale_refine(const Image& x0, const Image& contour, const Image& directions,
                                   const RefineConfig& cfg = {});

/// One line per level: level, size, initial and final objective, iterations, status.
std::string format_refine_report(const MultiscaleResult& r);

}  // namespace depthedge
