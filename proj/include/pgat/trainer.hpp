#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pgat/agnn.hpp"
#include "pgat/config_file.hpp"
#include "pgat/objective.hpp"
#include "pgat/pose_graph.hpp"
#include "pgat/rng.hpp"

namespace pgat {

struct TrainConfig {
    double learning_rate = 1e-4;
    int batch_size = 256;
    int epochs = 1500;
    double positive_rate = 0.30;
    double d_pos = 10.0;           // meters, positive band
    double d_neg = 50.0;           // meters, negative band start
    double distance_threshold = 200.0;
    int descriptor_dim = 256;      // E
    int layers = 9;                // L
    int heads = 4;
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    bool normalize_loss = true;    // mean over active pairs (sum otherwise)
    std::string precision = "f64"; // only f64 kernels are built
    int threads = 1;
    bool deterministic = false;    // zeroes wall-clock fields in outputs

    void validate() const;
    static TrainConfig from_config(ConfigMap& cfg);
    static TrainConfig from_file(const std::string& path);
};

// Subgraphs of all training runs plus the index of subgraph pairs sharing at
// least one positive keynode pair.
struct SubgraphDataset {
    std::vector<Subgraph> subgraphs;
    PositionLookup positions;
    std::vector<std::pair<int, int>> positive_pairs; // indices, first < second
    int descriptor_dim = 0;

    static SubgraphDataset build(const std::vector<Trajectory>& runs, double distance_threshold,
                                 double d_pos);
};

struct SampledPair {
    const Subgraph* a = nullptr;
    const Subgraph* b = nullptr;
    bool forced_positive = false;
};

SampledPair sample_pair(const SubgraphDataset& dataset, double positive_rate, Rng& rng);

struct PairBatch {
    std::vector<SubgraphTensor> a;
    std::vector<SubgraphTensor> b;
    std::vector<PairLabels> labels; // padded shapes, omega = 0 at padding
    int padded_nodes = 0;
};

PairBatch make_batch(const std::vector<std::pair<const Subgraph*, const Subgraph*>>& pairs,
                     const PositionLookup& positions, double d_pos, double d_neg);

// Forward (and optionally backward) over one padded pair; gradients are
// accumulated into `grads` scaled by grad_scale.
BceResult pair_loss(const ModelParams& model, const SubgraphTensor& a, const SubgraphTensor& b,
                    const PairLabels& labels, double grad_scale = 1.0,
                    ModelParams* grads = nullptr, Matrix* d_desc_a = nullptr,
                    Matrix* d_desc_b = nullptr, Matrix* d_pos_a = nullptr,
                    Matrix* d_pos_b = nullptr);

// Summed batch loss; when grads is non-null the accumulated gradients are
// scaled by 1/active_pairs if cfg.normalize_loss is set. Worker partials are
// reduced in a fixed order, so results are reproducible for a given thread
// count.
BceResult batch_loss(const ModelParams& model, const PairBatch& batch, const TrainConfig& cfg,
                     ModelParams* grads);

struct AdamState {
    ModelParams m;
    ModelParams v;
    long step = 0;

    static AdamState create(const ModelParams& model);
};

// Standard bias-corrected Adam update; throws TrainingError naming the first
// tensor with a non-finite gradient.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               const TrainConfig& cfg);

struct EpochLogRow {
    int epoch = 0;
    long step = 0; // cumulative optimizer steps
    double mean_active_loss = 0.0;
    long active_pairs = 0;
    double wall_time_s = 0.0;
};

struct TrainResult {
    ModelParams model;
    std::vector<EpochLogRow> log;
    double best_mean_loss = 0.0;
};

void write_metrics_csv(const std::string& path, const std::vector<EpochLogRow>& log);

// Runs the full training protocol: per epoch, ceil(#subgraphs / batch_size)
// batches of sampled pairs; writes checkpoint_init/last/best plus metrics.csv
// into out_dir (pass "" to skip all file output).
TrainResult train(const TrainConfig& cfg, const SubgraphDataset& dataset,
                  const std::string& out_dir, bool verbose = false);

} // namespace pgat
