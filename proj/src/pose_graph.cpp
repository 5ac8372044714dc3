#include "pgat/pose_graph.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pgat {

double distance(const Vec3& a, const Vec3& b) {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    const double dz = a[2] - b[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

NormalizedPositions normalize_positions(const std::vector<Vec3>& positions) {
    if (positions.empty()) {
        throw InputError("normalize_positions: no positions given");
    }
    Vec3 c{0.0, 0.0, 0.0};
    for (const Vec3& t : positions) {
        c[0] += t[0];
        c[1] += t[1];
        c[2] += t[2];
    }
    const double inv_n = 1.0 / static_cast<double>(positions.size());
    c[0] *= inv_n;
    c[1] *= inv_n;
    c[2] *= inv_n;

    double mean_sq = 0.0;
    for (const Vec3& t : positions) {
        const double d = distance(t, c);
        mean_sq += d * d;
    }
    mean_sq *= inv_n;
    double sigma = std::sqrt(mean_sq);
    if (sigma < 1e-9) sigma = 1.0;

    NormalizedPositions out;
    out.centroid = c;
    out.sigma = sigma;
    out.p.reserve(positions.size());
    const double inv_sigma = 1.0 / sigma;
    for (const Vec3& t : positions) {
        out.p.push_back({(t[0] - c[0]) * inv_sigma, (t[1] - c[1]) * inv_sigma,
                         (t[2] - c[2]) * inv_sigma});
    }
    return out;
}

std::vector<Subgraph> build_subgraphs(const Trajectory& traj, double distance_threshold) {
    if (traj.nodes.empty()) {
        throw InputError("build_subgraphs: trajectory is empty");
    }
    if (distance_threshold <= 0.0) {
        throw InputError("build_subgraphs: distance threshold must be positive");
    }

    const int n = static_cast<int>(traj.nodes.size());
    std::vector<Subgraph> out;
    for (int start = 0; start < n; ++start) {
        int end = start; // inclusive
        double travelled = 0.0;
        while (end + 1 < n) {
            const double step = distance(traj.nodes[end].t, traj.nodes[end + 1].t);
            if (travelled + step > distance_threshold) break;
            travelled += step;
            ++end;
        }
        const int count = end - start + 1;
        if (count < 2) continue;

        Subgraph sg;
        sg.subgraph_index = start;
        sg.run_id = traj.run_id;
        sg.keynode_ids.reserve(count);
        sg.global_positions.reserve(count);
        sg.descriptors.reserve(count);
        for (int i = start; i <= end; ++i) {
            const Keynode& kn = traj.nodes[i];
            sg.keynode_ids.push_back(kn.global_id);
            sg.global_positions.push_back(kn.t);
            sg.descriptors.push_back(&kn.d);
        }
        NormalizedPositions norm = normalize_positions(sg.global_positions);
        sg.p = std::move(norm.p);
        sg.centroid = norm.centroid;
        sg.sigma = norm.sigma;
        out.push_back(std::move(sg));
    }
    return out;
}

PositionLookup::PositionLookup(const std::vector<Trajectory>& runs) {
    for (const Trajectory& traj : runs) {
        for (const Keynode& kn : traj.nodes) add(kn.global_id, kn.t);
    }
}

void PositionLookup::add(std::int64_t global_id, const Vec3& t) { positions_[global_id] = t; }

const Vec3& PositionLookup::at(std::int64_t global_id) const {
    auto it = positions_.find(global_id);
    if (it == positions_.end()) {
        throw LookupError("unknown keynode global_id " + std::to_string(global_id));
    }
    return it->second;
}

bool PositionLookup::contains(std::int64_t global_id) const {
    return positions_.find(global_id) != positions_.end();
}

PairLabels pair_labels(const Subgraph& a, const Subgraph& b, const PositionLookup& positions,
                       double d_pos, double d_neg) {
    if (d_pos > d_neg) {
        throw InputError("pair_labels: d_pos must not exceed d_neg");
    }
    PairLabels labels;
    labels.y = Matrix(a.size(), b.size());
    labels.omega = Matrix(a.size(), b.size());
    for (int i = 0; i < a.size(); ++i) {
        const Vec3& ti = positions.at(a.keynode_ids[i]);
        for (int j = 0; j < b.size(); ++j) {
            if (a.keynode_ids[i] == b.keynode_ids[j]) {
                labels.y(i, j) = 1.0;
                labels.omega(i, j) = 1.0;
                continue;
            }
            const double dist = distance(ti, positions.at(b.keynode_ids[j]));
            if (dist < d_pos) {
                labels.y(i, j) = 1.0;
                labels.omega(i, j) = 1.0;
            } else if (dist >= d_neg) {
                labels.omega(i, j) = 1.0;
            }
            // otherwise: ignore band, omega stays 0
        }
    }
    return labels;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_double_field(const std::string& s, const std::string& path, int line_no) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": bad numeric field '" + s + "'");
    }
}

std::int64_t parse_int_field(const std::string& s, const std::string& path, int line_no) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": bad integer field '" + s + "'");
    }
}

} // namespace

std::vector<Trajectory> load_keynode_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open keynode file '" + path + "'");
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError(path + ":1: missing header row");
    }
    std::vector<std::string> header = split_csv_line(line);
    if (header.size() < 6 || header[0] != "global_id" || header[1] != "run_id" ||
        header[2] != "x" || header[3] != "y" || header[4] != "z" || header[5] != "d0") {
        throw ParseError(path + ":1: expected header global_id,run_id,x,y,z,d0,...");
    }
    const int dim = static_cast<int>(header.size()) - 5;

    std::vector<Trajectory> runs;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields = split_csv_line(line);
        if (static_cast<int>(fields.size()) != 5 + dim) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(5 + dim) + " fields, got " +
                             std::to_string(fields.size()));
        }
        Keynode kn;
        kn.global_id = parse_int_field(fields[0], path, line_no);
        kn.run_id = static_cast<int>(parse_int_field(fields[1], path, line_no));
        kn.t = {parse_double_field(fields[2], path, line_no),
                parse_double_field(fields[3], path, line_no),
                parse_double_field(fields[4], path, line_no)};
        kn.d.resize(dim);
        for (int i = 0; i < dim; ++i) kn.d[i] = parse_double_field(fields[5 + i], path, line_no);

        if (runs.empty() || runs.back().run_id != kn.run_id) {
            runs.push_back(Trajectory{kn.run_id, {}});
        } else if (runs.back().nodes.back().global_id >= kn.global_id) {
            throw ParseError(path + ":" + std::to_string(line_no) +
                             ": non-monotonic global_id within run " + std::to_string(kn.run_id));
        }
        runs.back().nodes.push_back(std::move(kn));
    }
    return runs;
}

void save_keynode_csv(const std::string& path, const std::vector<Trajectory>& runs) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write keynode file '" + path + "'");
    }
    int dim = 0;
    for (const Trajectory& traj : runs) {
        if (!traj.nodes.empty()) {
            dim = static_cast<int>(traj.nodes[0].d.size());
            break;
        }
    }
    out << "global_id,run_id,x,y,z";
    for (int i = 0; i < dim; ++i) out << ",d" << i;
    out << "\n";

    char buf[64];
    for (const Trajectory& traj : runs) {
        for (const Keynode& kn : traj.nodes) {
            out << kn.global_id << "," << kn.run_id;
            for (double v : kn.t) {
                std::snprintf(buf, sizeof(buf), ",%.9f", v);
                out << buf;
            }
            for (double v : kn.d) {
                std::snprintf(buf, sizeof(buf), ",%.12g", v);
                out << buf;
            }
            out << "\n";
        }
    }
    if (!out) {
        throw IoError("failed writing keynode file '" + path + "'");
    }
}

std::vector<std::int64_t> PositionsTable::ids_of_other_runs(
    const std::set<int>& excluded_runs) const {
    std::vector<std::int64_t> out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!excluded_runs.count(run_ids[i])) out.push_back(ids[i]);
    }
    return out;
}

std::set<int> PositionsTable::runs() const {
    return std::set<int>(run_ids.begin(), run_ids.end());
}

void save_positions_csv(const std::string& path, const std::vector<Trajectory>& runs) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write positions file '" + path + "'");
    out << "global_id,run_id,x,y,z\n";
    char buf[64];
    for (const Trajectory& traj : runs) {
        for (const Keynode& kn : traj.nodes) {
            out << kn.global_id << "," << kn.run_id;
            for (double v : kn.t) {
                std::snprintf(buf, sizeof(buf), ",%.9f", v);
                out << buf;
            }
            out << "\n";
        }
    }
    if (!out) throw IoError("failed writing positions file '" + path + "'");
}

PositionsTable load_positions_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open positions file '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "global_id,run_id,x,y,z") {
        throw ParseError(path + ":1: expected header global_id,run_id,x,y,z");
    }
    PositionsTable table;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != 5) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected 5 fields, got " +
                             std::to_string(fields.size()));
        }
        const std::int64_t id = parse_int_field(fields[0], path, line_no);
        const int run = static_cast<int>(parse_int_field(fields[1], path, line_no));
        const Vec3 t{parse_double_field(fields[2], path, line_no),
                     parse_double_field(fields[3], path, line_no),
                     parse_double_field(fields[4], path, line_no)};
        if (table.lookup.contains(id)) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": duplicate global_id " +
                             std::to_string(id));
        }
        table.ids.push_back(id);
        table.run_ids.push_back(run);
        table.lookup.add(id, t);
    }
    return table;
}

} // namespace pgat
