#include "pgat/synthdata.hpp"

#include <algorithm>
#include <cmath>

namespace pgat {

void SynthConfig::validate() const {
    if (spacing_m <= 0.0) throw ConfigError("spacing_m must be positive");
    if (num_loops < 1) throw ConfigError("num_loops must be >= 1");
    if (loop_length_m < 4.0 * spacing_m) {
        throw ConfigError("loop_length_m must be at least 4 * spacing_m");
    }
    if (num_runs < 2) throw ConfigError("num_runs must be >= 2 (database runs + query run)");
    if (descriptor_dim < 4) throw ConfigError("descriptor_dim must be >= 4");
    if (place_feature_count < 1) throw ConfigError("place_feature_count must be >= 1");
    if (descriptor_noise_sigma < 0.0 || viewpoint_drift_sigma < 0.0) {
        throw ConfigError("noise sigmas must be >= 0");
    }
}

SynthConfig SynthConfig::from_config(ConfigMap& cfg) {
    SynthConfig c;
    c.spacing_m = cfg.get_double("spacing_m", c.spacing_m);
    c.num_loops = static_cast<int>(cfg.get_int("num_loops", c.num_loops));
    c.loop_length_m = cfg.get_double("loop_length_m", c.loop_length_m);
    c.num_runs = static_cast<int>(cfg.get_int("num_runs", c.num_runs));
    c.descriptor_dim = static_cast<int>(cfg.get_int("descriptor_dim", c.descriptor_dim));
    c.place_feature_count =
        static_cast<int>(cfg.get_int("place_feature_count", c.place_feature_count));
    c.descriptor_noise_sigma =
        cfg.get_double("descriptor_noise_sigma", c.descriptor_noise_sigma);
    c.viewpoint_drift_sigma = cfg.get_double("viewpoint_drift_sigma", c.viewpoint_drift_sigma);
    c.seed = cfg.get_uint("seed", c.seed);
    cfg.reject_unknown_keys();
    c.validate();
    return c;
}

SynthConfig SynthConfig::from_file(const std::string& path) {
    ConfigMap cfg = ConfigMap::parse_file(path);
    return from_config(cfg);
}

namespace {

// Closed course: a circle with a few low-order radial harmonics, rescaled so
// the polyline circumference equals loop_length_m exactly.
class LoopCourse {
public:
    LoopCourse(double loop_length, Rng& rng) {
        double amp[3], phase[3];
        for (int k = 0; k < 3; ++k) {
            amp[k] = rng.uniform(0.02, 0.06);
            phase[k] = rng.uniform(0.0, 2.0 * kPi);
        }
        const double r0 = loop_length / (2.0 * kPi);

        const int segments = 8192;
        xs_.resize(segments + 1);
        ys_.resize(segments + 1);
        arc_.resize(segments + 1, 0.0);
        for (int i = 0; i <= segments; ++i) {
            const double theta = 2.0 * kPi * i / segments;
            double r = 1.0;
            for (int k = 0; k < 3; ++k) r += amp[k] * std::cos((k + 2) * theta + phase[k]);
            xs_[i] = r0 * r * std::cos(theta);
            ys_[i] = r0 * r * std::sin(theta);
        }
        xs_[segments] = xs_[0];
        ys_[segments] = ys_[0];
        for (int i = 1; i <= segments; ++i) {
            const double dx = xs_[i] - xs_[i - 1];
            const double dy = ys_[i] - ys_[i - 1];
            arc_[i] = arc_[i - 1] + std::sqrt(dx * dx + dy * dy);
        }
        const double scale = loop_length / arc_.back();
        for (double& x : xs_) x *= scale;
        for (double& y : ys_) y *= scale;
        for (double& a : arc_) a *= scale;
        length_ = arc_.back();
    }

    // Point and unit normal at arc length s (wrapped).
    void at(double s, double& x, double& y, double& nx, double& ny) const {
        s = std::fmod(s, length_);
        if (s < 0.0) s += length_;
        const auto it = std::upper_bound(arc_.begin(), arc_.end(), s);
        std::size_t hi = std::min<std::size_t>(it - arc_.begin(), arc_.size() - 1);
        if (hi == 0) hi = 1;
        const std::size_t lo = hi - 1;
        const double seg = arc_[hi] - arc_[lo];
        const double t = seg > 0.0 ? (s - arc_[lo]) / seg : 0.0;
        x = xs_[lo] + t * (xs_[hi] - xs_[lo]);
        y = ys_[lo] + t * (ys_[hi] - ys_[lo]);
        const double tx = xs_[hi] - xs_[lo];
        const double ty = ys_[hi] - ys_[lo];
        const double tn = std::sqrt(tx * tx + ty * ty);
        nx = -ty / tn;
        ny = tx / tn;
    }

private:
    static constexpr double kPi = 3.14159265358979323846;
    std::vector<double> xs_, ys_, arc_;
    double length_ = 0.0;
};

} // namespace

std::vector<Trajectory> gen_trajectory(const SynthConfig& cfg, Rng& rng) {
    cfg.validate();
    Rng course_rng(rng.next_u64());
    const LoopCourse course(cfg.loop_length_m, course_rng);

    const int nodes_per_loop = static_cast<int>(cfg.loop_length_m / cfg.spacing_m + 1e-9);
    const int nodes_per_run = nodes_per_loop * cfg.num_loops;

    std::vector<Trajectory> runs;
    runs.reserve(cfg.num_runs);
    std::int64_t next_id = 0;
    for (int r = 0; r < cfg.num_runs; ++r) {
        Rng jitter_rng(rng.next_u64());
        Trajectory traj;
        traj.run_id = r;
        traj.nodes.reserve(nodes_per_run);
        for (int k = 0; k < nodes_per_run; ++k) {
            double x, y, nx, ny;
            course.at(k * cfg.spacing_m, x, y, nx, ny);
            const double offset = cfg.viewpoint_drift_sigma > 0.0
                                      ? jitter_rng.gaussian(0.0, cfg.viewpoint_drift_sigma)
                                      : 0.0;
            Keynode kn;
            kn.global_id = next_id++;
            kn.run_id = r;
            kn.t = {x + offset * nx, y + offset * ny, 0.0};
            traj.nodes.push_back(std::move(kn));
        }
        runs.push_back(std::move(traj));
    }
    return runs;
}

std::vector<Vector> gen_descriptors(const std::vector<Vec3>& positions, const SynthConfig& cfg,
                                    Rng& rng) {
    cfg.validate();
    const int m = cfg.place_feature_count;
    const int dim = cfg.descriptor_dim;
    const double lengthscale = cfg.loop_length_m / 12.0;

    Rng feature_rng(rng.next_u64());
    std::vector<double> wx(m), wy(m), phase(m);
    for (int i = 0; i < m; ++i) {
        wx[i] = feature_rng.gaussian(0.0, 1.0 / lengthscale);
        wy[i] = feature_rng.gaussian(0.0, 1.0 / lengthscale);
        phase[i] = feature_rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    }
    // Fixed random mixing from feature space to descriptor space.
    std::vector<double> mix(static_cast<std::size_t>(dim) * m);
    for (double& v : mix) v = feature_rng.gaussian(0.0, 1.0);

    Rng noise_rng(rng.next_u64());
    const double feat_scale = std::sqrt(2.0 / m);

    std::vector<Vector> out;
    out.reserve(positions.size());
    std::vector<double> phi(m);
    for (const Vec3& t : positions) {
        for (int i = 0; i < m; ++i) {
            phi[i] = feat_scale * std::cos(wx[i] * t[0] + wy[i] * t[1] + phase[i]);
        }
        Vector d(dim, 0.0);
        for (int r = 0; r < dim; ++r) {
            const double* row = mix.data() + static_cast<std::size_t>(r) * m;
            double acc = 0.0;
            for (int i = 0; i < m; ++i) acc += row[i] * phi[i];
            d[r] = acc;
        }
        double norm = 0.0;
        for (double v : d) norm += v * v;
        norm = std::sqrt(norm);
        if (norm > 0.0) {
            for (double& v : d) v /= norm;
        }
        if (cfg.descriptor_noise_sigma > 0.0) {
            for (double& v : d) v += noise_rng.gaussian(0.0, cfg.descriptor_noise_sigma);
            norm = 0.0;
            for (double v : d) norm += v * v;
            norm = std::sqrt(norm);
            if (norm > 0.0) {
                for (double& v : d) v /= norm;
            }
        }
        out.push_back(std::move(d));
    }
    return out;
}

std::vector<Trajectory> generate_dataset(const SynthConfig& cfg) {
    Rng rng(derive_stream(cfg.seed, 0x5d7a));
    std::vector<Trajectory> runs = gen_trajectory(cfg, rng);

    std::vector<Vec3> all_positions;
    for (const Trajectory& traj : runs) {
        for (const Keynode& kn : traj.nodes) all_positions.push_back(kn.t);
    }
    std::vector<Vector> descriptors = gen_descriptors(all_positions, cfg, rng);
    std::size_t idx = 0;
    for (Trajectory& traj : runs) {
        for (Keynode& kn : traj.nodes) kn.d = std::move(descriptors[idx++]);
    }
    return runs;
}

} // namespace pgat
