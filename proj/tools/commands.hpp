#pragma once

#include <filesystem>
#include <string>

#include "depthedge/run_config.hpp"

namespace depthedge::cli {

namespace fs = std::filesystem;

struct Common {
    int jobs = 1;
    std::string config;  // RunConfig file, empty for defaults
    bool quiet = false;

    RunConfig load() const;
};

struct GenArgs {
    std::string out;
    int count = -1;
    int width = -1;
    int height = -1;
    long long seed = -1;
};

struct GtArgs {
    std::string dataset;
    std::string disparity;
    std::string normals;
    std::string camera;
    std::string out;
};

struct TrainArgs {
    std::string dataset;
    std::string out;
    std::string loss;
    int epochs = -1;
};

struct InferArgs {
    std::string model;
    std::string scene;
    std::string dataset;
    std::string out;
};

struct SegmentArgs {
    std::string edges;
    std::string predictions;
    std::string background;
    std::string dataset;
    std::string out;
};

struct RefineArgs {
    std::string disparity;
    std::string contour;
    std::string directions;
    std::string out;
    std::string report;
};

struct EvalArgs {
    std::string hierarchies;
    std::string dataset;
    std::string out;
    std::string method = "fusion";
    bool baselines = false;
};

void run_gen(const Common& c, const GenArgs& a);
void run_gt(const Common& c, const GtArgs& a);
void run_train(const Common& c, const TrainArgs& a);
void run_infer(const Common& c, const InferArgs& a);
void run_segment(const Common& c, const SegmentArgs& a);
void run_refine(const Common& c, const RefineArgs& a);
void run_eval(const Common& c, const EvalArgs& a);

// File names inside a prediction / hierarchy directory.
inline constexpr const char* kEdgesPred = "edges_pred.pfm";
inline constexpr const char* kContourPred = "contour_pred.pfm";
inline constexpr const char* kDirectionsPred = "directions_pred.pfm";
inline constexpr const char* kMergeTree = "tree.txt";
inline constexpr const char* kLabels = "labels.pgm";
inline constexpr const char* kUcm = "ucm.pfm";
inline constexpr const char* kOverlay = "overlay.ppm";

}  // namespace depthedge::cli
