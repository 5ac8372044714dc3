#pragma once

#include <cstdint>
#include <vector>

#include "pgat/config_file.hpp"
#include "pgat/pose_graph.hpp"
#include "pgat/rng.hpp"

namespace pgat {

// Synthetic revisit courses: every run traverses the same closed 2D loop,
// sampled every spacing_m along arc length, so places recur across loops and
// runs. Descriptors come from a smooth random-Fourier place embedding plus
// isotropic observation noise.
struct SynthConfig {
    double spacing_m = 20.0;
    int num_loops = 2;
    double loop_length_m = 600.0;
    int num_runs = 3; // runs 0..n-2 are database runs, the last is the query run
    int descriptor_dim = 32;
    int place_feature_count = 32;
    double descriptor_noise_sigma = 0.16;
    double viewpoint_drift_sigma = 1.0;
    std::uint64_t seed = 1;

    void validate() const;
    static SynthConfig from_config(ConfigMap& cfg);
    static SynthConfig from_file(const std::string& path);
};

// Positions only (descriptors left empty); global ids dense and increasing
// across runs. Child streams are derived from `rng`, one per run.
std::vector<Trajectory> gen_trajectory(const SynthConfig& cfg, Rng& rng);

// Place embeddings for a set of positions. The Fourier frequencies, phases
// and the mixing map are drawn once from `rng`, so one call must cover every
// node that should share the same place->descriptor mapping.
std::vector<Vector> gen_descriptors(const std::vector<Vec3>& positions, const SynthConfig& cfg,
                                    Rng& rng);

// gen_trajectory + gen_descriptors wired together from cfg.seed.
std::vector<Trajectory> generate_dataset(const SynthConfig& cfg);

} // namespace pgat
