#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "depthedge/dataset.hpp"
#include "depthedge/evaluate.hpp"
#include "depthedge/refine.hpp"
#include "depthedge/segment.hpp"
#include "depthedge/train.hpp"

namespace depthedge {

struct EvalConfig {
    int slack_radius = 2;
    int thresholds = 33;
    double gt_threshold = 0.5;  // P_e above this is a ground-truth boundary pixel
    BaselineConfig baseline;
};

/// Every knob of the pipeline in one place. Text form: one `key = value` per
/// line, `#` comments, unknown or repeated keys rejected with the line number.
struct RunConfig {
    DatasetConfig dataset;
    GroundTruthConfig truth;
    MaskConfig mask;
    ArchitectureConfig arch = ArchitectureConfig::make_default(5);
    bool arch_given = false;  // some arch.* key was set explicitly
    TrainConfig train;
    double infer_tau = 0.5;
    SegmenterConfig segment;
    RefineConfig refine;
    EvalConfig eval;
};

RunConfig parse_run_config(const std::string& text, const std::string& origin = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

/// All keys with their current values, one per line; parses back to `cfg`.
std::string format_run_config(const RunConfig& cfg);

/// Key names in file order, for help output.
std::vector<std::string> run_config_keys();

}  // namespace depthedge
