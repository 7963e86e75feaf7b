#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "depthedge/dataset.hpp"
#include "depthedge/net.hpp"
#include "depthedge/rng.hpp"

namespace depthedge {

struct TrainConfig {
    int patch_size = 256;
    int batch_size = 5;
    AdamConfig adam;
    double l2_lambda = 1e-5;
    double mask_weight = 10.0;
    int epochs = 30;
    int patches_per_scene = 1;        // per epoch
    double validation_fraction = 0.2;
    int max_width = 800;              // wider scenes are downsized first
    std::uint64_t seed = 1;

    void validate(const ArchitectureConfig& arch) const;
};

/// Aligned network input, target and per-element loss weight for one scene or patch.
struct TrainingExample {
    Image input;   // 7 channels
    Image target;  // head channels
    Image mask;    // head channels
    int origin_x = 0;
    int origin_y = 0;
};

/// Edge head: target P_e, mask M. Contour+direction head: target (straddle
/// contour, d_u, d_v); channel 0 uses M, the direction channels are weighted
/// 1 on contour pixels and 0 elsewhere. The mask values above 1 are replaced
/// by mask_weight.
TrainingExample make_example(const SceneBundle& scene, const ArchitectureConfig& arch, double mask_weight = 10.0);

/// Top-left offset drawn uniformly from all placements that fit.
std::pair<int, int> patch_offset(int width, int height, int patch, Rng& rng);

/// Aligned crop of input, target and mask.
TrainingExample sample_patch(const TrainingExample& scene, int patch, Rng& rng);

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    NetworkParameters<float> params;
    std::vector<EpochLog> log;  // epoch 0 holds the losses before training
};

using ProgressFn = std::function<void(const EpochLog&)>;

/// Adam on random patches. Validation scenes are the trailing
/// validation_fraction of `scenes`, scored on full frames in infer mode.
/// Throws a Numeric error naming the layer of the first non-finite value.
TrainResult train(const std::vector<SceneBundle>& scenes, const ArchitectureConfig& arch, const TrainConfig& cfg,
                  const ProgressFn& progress = {});

/// Mean loss of full scenes in infer mode.
double evaluate_loss(const NetworkParameters<float>& params, const std::vector<TrainingExample>& examples);

std::string format_loss_csv(const std::vector<EpochLog>& log);

/// Pads by edge replication to the next multiple of 2^n_enc, runs the network
/// in infer mode and crops back. Direction components are renormalized to
/// unit length where the contour channel exceeds tau.
Image infer(const NetworkParameters<float>& params, const Image& input, double tau = 0.5);
Image infer(const NetworkParameters<float>& params, const SceneBundle& scene, double tau = 0.5);

/// Model file: "DCUT", u32 version, architecture descriptor, then per layer
/// weight, bias, gamma, beta, running mean, running variance as u32 count +
/// little-endian f32 values.
std::string encode_model(const NetworkParameters<float>& params);
NetworkParameters<float> decode_model(const std::string& bytes, const std::string& origin = "<memory>");
void save_model(const std::filesystem::path& path, const NetworkParameters<float>& params);
NetworkParameters<float> load_model(const std::filesystem::path& path);

/// Throws ConfigMismatch listing the first differing field.
void require_same_architecture(const ArchitectureConfig& expected, const ArchitectureConfig& actual);

}  // namespace depthedge
