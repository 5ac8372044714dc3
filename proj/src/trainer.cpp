#include "pgat/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <limits>

#include "pgat/checkpoint.hpp"
#include "pgat/parallel.hpp"

namespace pgat {

void TrainConfig::validate() const {
    if (learning_rate < 0.0) throw ConfigError("learning_rate must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (positive_rate < 0.0 || positive_rate > 1.0) {
        throw ConfigError("positive_rate must be in [0, 1]");
    }
    if (d_pos > d_neg) throw ConfigError("d_pos_m must not exceed d_neg_m");
    if (distance_threshold <= 0.0) throw ConfigError("distance_threshold_m must be positive");
    if (descriptor_dim < 1 || layers < 0 || heads < 1) {
        throw ConfigError("descriptor_dim/layers/heads out of range");
    }
    if (descriptor_dim % heads != 0) {
        throw ConfigError("descriptor_dim must be divisible by heads");
    }
    if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0 ||
        adam_eps <= 0.0) {
        throw ConfigError("adam parameters out of range");
    }
    if (precision != "f64") {
        throw ConfigError("precision '" + precision + "' not supported; this build is f64-only");
    }
    if (threads < 1) throw ConfigError("threads must be >= 1");
}

TrainConfig TrainConfig::from_config(ConfigMap& cfg) {
    TrainConfig c;
    c.learning_rate = cfg.get_double("learning_rate", c.learning_rate);
    c.batch_size = static_cast<int>(cfg.get_int("batch_size", c.batch_size));
    c.epochs = static_cast<int>(cfg.get_int("epochs", c.epochs));
    c.positive_rate = cfg.get_double("positive_rate", c.positive_rate);
    c.d_pos = cfg.get_double("d_pos_m", c.d_pos);
    c.d_neg = cfg.get_double("d_neg_m", c.d_neg);
    c.distance_threshold = cfg.get_double("distance_threshold_m", c.distance_threshold);
    c.descriptor_dim = static_cast<int>(cfg.get_int("descriptor_dim", c.descriptor_dim));
    c.layers = static_cast<int>(cfg.get_int("layers", c.layers));
    c.heads = static_cast<int>(cfg.get_int("heads", c.heads));
    c.seed = cfg.get_uint("seed", c.seed);
    c.adam_beta1 = cfg.get_double("adam_beta1", c.adam_beta1);
    c.adam_beta2 = cfg.get_double("adam_beta2", c.adam_beta2);
    c.adam_eps = cfg.get_double("adam_eps", c.adam_eps);
    c.normalize_loss = cfg.get_bool("normalize_loss", c.normalize_loss);
    c.precision = cfg.get_string("precision", c.precision);
    c.threads = static_cast<int>(cfg.get_int("threads", c.threads));
    c.deterministic = cfg.get_bool("deterministic", c.deterministic);
    cfg.reject_unknown_keys();
    c.validate();
    return c;
}

TrainConfig TrainConfig::from_file(const std::string& path) {
    ConfigMap cfg = ConfigMap::parse_file(path);
    return from_config(cfg);
}

SubgraphDataset SubgraphDataset::build(const std::vector<Trajectory>& runs,
                                       double distance_threshold, double d_pos) {
    if (runs.empty()) throw DatasetError("no training runs given");
    SubgraphDataset ds;
    ds.positions = PositionLookup(runs);
    for (const Trajectory& run : runs) {
        if (run.nodes.empty()) continue;
        const int dim = run.descriptor_dim();
        if (ds.descriptor_dim == 0) {
            ds.descriptor_dim = dim;
        } else if (dim != ds.descriptor_dim) {
            throw DatasetError("descriptor dim mismatch across runs: " +
                               std::to_string(ds.descriptor_dim) + " vs " + std::to_string(dim));
        }
        std::vector<Subgraph> sgs = build_subgraphs(run, distance_threshold);
        for (Subgraph& sg : sgs) ds.subgraphs.push_back(std::move(sg));
    }

    const int n = static_cast<int>(ds.subgraphs.size());
    for (int i = 0; i < n; ++i) {
        const Subgraph& a = ds.subgraphs[i];
        for (int j = i + 1; j < n; ++j) {
            const Subgraph& b = ds.subgraphs[j];
            bool positive = false;
            for (std::size_t u = 0; u < a.global_positions.size() && !positive; ++u) {
                for (std::size_t v = 0; v < b.global_positions.size(); ++v) {
                    if (distance(a.global_positions[u], b.global_positions[v]) < d_pos) {
                        positive = true;
                        break;
                    }
                }
            }
            if (positive) ds.positive_pairs.emplace_back(i, j);
        }
    }
    return ds;
}

SampledPair sample_pair(const SubgraphDataset& dataset, double positive_rate, Rng& rng) {
    if (dataset.subgraphs.empty()) throw SamplingError("cannot sample from an empty dataset");
    const std::uint64_t n = dataset.subgraphs.size();
    if (rng.bernoulli(positive_rate)) {
        if (dataset.positive_pairs.empty()) {
            throw SamplingError("positive draw requested but the positive-pair index is empty");
        }
        const auto& [i, j] =
            dataset.positive_pairs[rng.uniform_index(dataset.positive_pairs.size())];
        return {&dataset.subgraphs[i], &dataset.subgraphs[j], true};
    }
    const Subgraph* a = &dataset.subgraphs[rng.uniform_index(n)];
    const Subgraph* b = &dataset.subgraphs[rng.uniform_index(n)];
    return {a, b, false};
}

namespace {

PairLabels pad_labels(const PairLabels& labels, int rows, int cols) {
    PairLabels out;
    out.y = Matrix(rows, cols);
    out.omega = Matrix(rows, cols);
    for (int i = 0; i < labels.y.rows(); ++i) {
        for (int j = 0; j < labels.y.cols(); ++j) {
            out.y(i, j) = labels.y(i, j);
            out.omega(i, j) = labels.omega(i, j);
        }
    }
    return out;
}

} // namespace

PairBatch make_batch(const std::vector<std::pair<const Subgraph*, const Subgraph*>>& pairs,
                     const PositionLookup& positions, double d_pos, double d_neg) {
    if (pairs.empty()) throw InputError("make_batch: no pairs given");
    int max_nodes = 0;
    int dim = -1;
    for (const auto& [a, b] : pairs) {
        for (const Subgraph* sg : {a, b}) {
            max_nodes = std::max(max_nodes, sg->size());
            const int d = static_cast<int>(sg->descriptors[0]->size());
            if (dim < 0) {
                dim = d;
            } else if (d != dim) {
                throw DatasetError("make_batch: descriptor dim mismatch within batch");
            }
        }
    }
    PairBatch batch;
    batch.padded_nodes = max_nodes;
    batch.a.reserve(pairs.size());
    batch.b.reserve(pairs.size());
    batch.labels.reserve(pairs.size());
    for (const auto& [a, b] : pairs) {
        batch.a.push_back(make_subgraph_tensor(*a, max_nodes));
        batch.b.push_back(make_subgraph_tensor(*b, max_nodes));
        batch.labels.push_back(
            pad_labels(pair_labels(*a, *b, positions, d_pos, d_neg), max_nodes, max_nodes));
    }
    return batch;
}

BceResult pair_loss(const ModelParams& model, const SubgraphTensor& a, const SubgraphTensor& b,
                    const PairLabels& labels, double grad_scale, ModelParams* grads,
                    Matrix* d_desc_a, Matrix* d_desc_b, Matrix* d_pos_a, Matrix* d_pos_b) {
    PosEncoderCache enc_a, enc_b;
    Matrix xa = encode_and_fuse(a.x, a.pos, a.mask, model, grads ? &enc_a : nullptr);
    Matrix xb = encode_and_fuse(b.x, b.pos, b.mask, model, grads ? &enc_b : nullptr);
    PgatCache cache;
    auto [fa, fb] = pgat_forward(xa, a.mask, xb, b.mask, model, grads ? &cache : nullptr);

    if (!grads) {
        return pair_objective(fa, a.mask, fb, b.mask, labels);
    }

    Matrix d_fa(fa.rows(), fa.cols());
    Matrix d_fb(fb.rows(), fb.cols());
    const BceResult res = pair_objective(fa, a.mask, fb, b.mask, labels, grad_scale, &d_fa, &d_fb);

    Matrix d_xa(xa.rows(), xa.cols());
    Matrix d_xb(xb.rows(), xb.cols());
    pgat_backward(d_fa, d_fb, model, cache, *grads, d_xa, d_xb);

    // Fusion: X = D + enc(P); masked columns carry zero gradient already.
    if (d_desc_a) d_desc_a->add_scaled(d_xa, 1.0);
    if (d_desc_b) d_desc_b->add_scaled(d_xb, 1.0);
    Matrix dpa = encode_positions_backward(model, enc_a, d_xa, *grads);
    Matrix dpb = encode_positions_backward(model, enc_b, d_xb, *grads);
    if (d_pos_a) d_pos_a->add_scaled(dpa, 1.0);
    if (d_pos_b) d_pos_b->add_scaled(dpb, 1.0);
    return res;
}

namespace {

void axpy_params(ModelParams& dst, const ModelParams& src, double scale) {
    auto dst_refs = dst.tensor_refs();
    auto src_refs = const_cast<ModelParams&>(src).tensor_refs();
    for (std::size_t t = 0; t < dst_refs.size(); ++t) {
        for (std::size_t i = 0; i < dst_refs[t].size; ++i) {
            dst_refs[t].data[i] += scale * src_refs[t].data[i];
        }
    }
}

void zero_params(ModelParams& p) {
    for (TensorRef& r : p.tensor_refs()) {
        std::fill(r.data, r.data + r.size, 0.0);
    }
}

} // namespace

BceResult batch_loss(const ModelParams& model, const PairBatch& batch, const TrainConfig& cfg,
                     ModelParams* grads) {
    const int n = static_cast<int>(batch.a.size());
    if (n == 0) throw InputError("batch_loss: empty batch");
    const int workers = std::max(1, std::min(cfg.threads, n));

    std::vector<BceResult> per_pair(n);
    std::vector<ModelParams> worker_grads;
    if (grads) {
        worker_grads.reserve(workers);
        for (int w = 0; w < workers; ++w) worker_grads.push_back(zeros_like(model));
    }
    parallel_chunks(n, workers, [&](int w, int begin, int end) {
        for (int i = begin; i < end; ++i) {
            per_pair[i] = pair_loss(model, batch.a[i], batch.b[i], batch.labels[i], 1.0,
                                    grads ? &worker_grads[w] : nullptr);
        }
    });

    BceResult total;
    for (const BceResult& r : per_pair) {
        total.loss_sum += r.loss_sum;
        total.active_pairs += r.active_pairs;
    }
    if (grads) {
        const double scale =
            (cfg.normalize_loss && total.active_pairs > 0) ? 1.0 / total.active_pairs : 1.0;
        for (const ModelParams& wg : worker_grads) axpy_params(*grads, wg, scale);
    }
    return total;
}

AdamState AdamState::create(const ModelParams& model) {
    return AdamState{zeros_like(model), zeros_like(model), 0};
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               const TrainConfig& cfg) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.step));

    auto p_refs = params.tensor_refs();
    auto g_refs = const_cast<ModelParams&>(grads).tensor_refs();
    auto m_refs = state.m.tensor_refs();
    auto v_refs = state.v.tensor_refs();
    for (std::size_t t = 0; t < p_refs.size(); ++t) {
        double* p = p_refs[t].data;
        const double* g = g_refs[t].data;
        double* m = m_refs[t].data;
        double* v = v_refs[t].data;
        for (std::size_t i = 0; i < p_refs[t].size; ++i) {
            if (!std::isfinite(g[i])) {
                throw TrainingError("non-finite gradient in tensor " + p_refs[t].name);
            }
            m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
            v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
        }
    }
}

void write_metrics_csv(const std::string& path, const std::vector<EpochLogRow>& log) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write metrics file '" + path + "'");
    out << "epoch,step,mean_active_loss,active_pairs,wall_time_s\n";
    char buf[160];
    for (const EpochLogRow& row : log) {
        std::snprintf(buf, sizeof(buf), "%d,%ld,%.9f,%ld,%.3f\n", row.epoch, row.step,
                      row.mean_active_loss, row.active_pairs, row.wall_time_s);
        out << buf;
    }
    if (!out) throw IoError("failed writing metrics file '" + path + "'");
}

TrainResult train(const TrainConfig& cfg, const SubgraphDataset& dataset,
                  const std::string& out_dir, bool verbose) {
    cfg.validate();
    if (dataset.subgraphs.empty()) {
        throw DatasetError("training dataset contains no subgraphs");
    }
    if (dataset.descriptor_dim != cfg.descriptor_dim) {
        throw DatasetError("dataset descriptor dim " + std::to_string(dataset.descriptor_dim) +
                           " does not match configured descriptor_dim " +
                           std::to_string(cfg.descriptor_dim));
    }

    ModelParams model =
        ModelParams::create(ModelDims{cfg.descriptor_dim, cfg.layers, cfg.heads});
    init_model(model, cfg.seed);

    const auto t0 = std::chrono::steady_clock::now();
    const auto now_stamp = [&]() -> double {
        return cfg.deterministic ? 0.0 : static_cast<double>(std::time(nullptr));
    };
    const auto elapsed = [&]() -> double {
        if (cfg.deterministic) return 0.0;
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    if (!out_dir.empty()) {
        save_checkpoint(out_dir + "/checkpoint_init.pgat", model, now_stamp());
        write_manifest(out_dir + "/checkpoint_init.pgat.manifest.txt", model);
    }

    AdamState state = AdamState::create(model);
    ModelParams grads = zeros_like(model);
    const long pairs_per_epoch = static_cast<long>(dataset.subgraphs.size());
    const long batches_per_epoch = (pairs_per_epoch + cfg.batch_size - 1) / cfg.batch_size;

    TrainResult result{std::move(model), {}, std::numeric_limits<double>::infinity()};
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng rng(derive_stream(cfg.seed, static_cast<std::uint64_t>(epoch)));
        double loss_sum = 0.0;
        long active = 0;
        for (long bi = 0; bi < batches_per_epoch; ++bi) {
            std::vector<std::pair<const Subgraph*, const Subgraph*>> drawn;
            drawn.reserve(cfg.batch_size);
            for (int k = 0; k < cfg.batch_size; ++k) {
                const SampledPair sp = sample_pair(dataset, cfg.positive_rate, rng);
                drawn.emplace_back(sp.a, sp.b);
            }
            const PairBatch batch = make_batch(drawn, dataset.positions, cfg.d_pos, cfg.d_neg);
            zero_params(grads);
            const BceResult r = batch_loss(result.model, batch, cfg, &grads);
            adam_step(result.model, grads, state, cfg);
            loss_sum += r.loss_sum;
            active += r.active_pairs;
        }
        EpochLogRow row;
        row.epoch = epoch;
        row.step = state.step;
        row.mean_active_loss = active > 0 ? loss_sum / active : 0.0;
        row.active_pairs = active;
        row.wall_time_s = elapsed();
        result.log.push_back(row);
        if (verbose) {
            std::fprintf(stderr, "epoch %d/%d  step %ld  mean_active_loss %.6f  active %ld\n",
                         epoch, cfg.epochs, row.step, row.mean_active_loss, row.active_pairs);
        }
        if (!out_dir.empty()) {
            save_checkpoint(out_dir + "/checkpoint_last.pgat", result.model, now_stamp());
            if (row.mean_active_loss < result.best_mean_loss) {
                save_checkpoint(out_dir + "/checkpoint_best.pgat", result.model, now_stamp());
            }
            write_metrics_csv(out_dir + "/metrics.csv", result.log);
        }
        result.best_mean_loss = std::min(result.best_mean_loss, row.mean_active_loss);
    }
    if (!out_dir.empty()) {
        save_checkpoint(out_dir + "/checkpoint_last.pgat", result.model, now_stamp());
        write_manifest(out_dir + "/checkpoint_last.pgat.manifest.txt", result.model);
        if (cfg.epochs == 0) {
            // No epochs: the best checkpoint is the initial model.
            save_checkpoint(out_dir + "/checkpoint_best.pgat", result.model, now_stamp());
        }
        write_metrics_csv(out_dir + "/metrics.csv", result.log);
    }
    return result;
}

} // namespace pgat
