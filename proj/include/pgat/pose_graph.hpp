#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "pgat/matrix.hpp"

namespace pgat {

using Vec3 = std::array<double, 3>;

double distance(const Vec3& a, const Vec3& b);

// One selected robot pose with its point-cloud descriptor; the unit of
// retrieval.
struct Keynode {
    std::int64_t global_id = 0;
    int run_id = 0;
    Vec3 t{0.0, 0.0, 0.0}; // global position, meters
    Vector d;              // descriptor, length E
};

struct Trajectory {
    int run_id = 0;
    std::vector<Keynode> nodes; // temporal order

    int descriptor_dim() const { return nodes.empty() ? 0 : static_cast<int>(nodes[0].d.size()); }
};

// Contiguous stride-1 window of a trajectory. Positions p are normalized per
// subgraph: p_i = (t_i - centroid) / sigma.
struct Subgraph {
    int subgraph_index = 0; // start index in the stride-1 sequence
    int run_id = 0;
    std::vector<std::int64_t> keynode_ids;
    std::vector<Vec3> global_positions;
    std::vector<Vec3> p; // normalized positions
    std::vector<const Vector*> descriptors;
    Vec3 centroid{0.0, 0.0, 0.0};
    double sigma = 1.0;

    int size() const { return static_cast<int>(keynode_ids.size()); }
};

// Supervision for one subgraph pair: Y holds positive labels, Omega gates
// which pairs enter the loss (0 inside the ignore band).
struct PairLabels {
    Matrix y;
    Matrix omega;
};

struct NormalizedPositions {
    std::vector<Vec3> p;
    Vec3 centroid;
    double sigma;
};

NormalizedPositions normalize_positions(const std::vector<Vec3>& positions);

// Cuts a trajectory into overlapping windows: window l starts at node l and
// keeps appending nodes while the cumulative along-path distance stays within
// distance_threshold. Windows shorter than 2 nodes are dropped.
std::vector<Subgraph> build_subgraphs(const Trajectory& traj, double distance_threshold);

// Global-id keyed position lookup spanning one or more runs.
class PositionLookup {
public:
    PositionLookup() = default;
    explicit PositionLookup(const std::vector<Trajectory>& runs);

    void add(std::int64_t global_id, const Vec3& t);
    const Vec3& at(std::int64_t global_id) const;
    bool contains(std::int64_t global_id) const;
    std::size_t size() const { return positions_.size(); }

private:
    std::unordered_map<std::int64_t, Vec3> positions_;
};

PairLabels pair_labels(const Subgraph& a, const Subgraph& b, const PositionLookup& positions,
                       double d_pos, double d_neg);

// Keynode CSV: header `global_id,run_id,x,y,z,d0,...,d{E-1}`, one row per
// keynode, positions in meters. A file may hold several runs; rows of one run
// must be contiguous with strictly increasing global ids.
std::vector<Trajectory> load_keynode_csv(const std::string& path);
void save_keynode_csv(const std::string& path, const std::vector<Trajectory>& runs);

// Ground-truth positions CSV (`global_id,run_id,x,y,z`) spanning every run of
// a dataset; descriptor-free companion to the keynode files.
struct PositionsTable {
    std::vector<std::int64_t> ids;
    std::vector<int> run_ids;
    PositionLookup lookup;

    std::vector<std::int64_t> ids_of_other_runs(const std::set<int>& excluded_runs) const;
    std::set<int> runs() const;
};

void save_positions_csv(const std::string& path, const std::vector<Trajectory>& runs);
PositionsTable load_positions_csv(const std::string& path);

} // namespace pgat
