#include "pgat/inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "pgat/objective.hpp"
#include "pgat/parallel.hpp"

namespace pgat {

double AveragedSimilarity::score(std::int64_t query_id, std::int64_t db_id) const {
    auto qi = query_index.find(query_id);
    auto di = db_index.find(db_id);
    if (qi == query_index.end() || di == db_index.end()) {
        throw LookupError("no averaged score for query " + std::to_string(query_id) +
                          " / database " + std::to_string(db_id));
    }
    return scores(qi->second, di->second);
}

double AveragedSimilarity::count(std::int64_t query_id, std::int64_t db_id) const {
    auto qi = query_index.find(query_id);
    auto di = db_index.find(db_id);
    if (qi == query_index.end() || di == db_index.end()) {
        throw LookupError("no count for query " + std::to_string(query_id) + " / database " +
                          std::to_string(db_id));
    }
    return counts(qi->second, di->second);
}

namespace {

// Collects the distinct keynode ids of a subgraph list and verifies that an
// id never appears under two different run ids.
std::vector<std::int64_t> collect_ids(const std::vector<Subgraph>& subgraphs, const char* side) {
    std::map<std::int64_t, int> id_to_run;
    for (const Subgraph& sg : subgraphs) {
        for (std::int64_t id : sg.keynode_ids) {
            auto [it, inserted] = id_to_run.emplace(id, sg.run_id);
            if (!inserted && it->second != sg.run_id) {
                throw DatasetError(std::string(side) + " keynode id " + std::to_string(id) +
                                   " appears in runs " + std::to_string(it->second) + " and " +
                                   std::to_string(sg.run_id));
            }
        }
    }
    std::vector<std::int64_t> ids;
    ids.reserve(id_to_run.size());
    for (const auto& [id, run] : id_to_run) ids.push_back(id);
    return ids;
}

} // namespace

AveragedSimilarity average_scheme(const std::vector<Subgraph>& query_subgraphs,
                                  const std::vector<Subgraph>& db_subgraphs,
                                  const PairScoreFn& score_fn, int threads) {
    if (query_subgraphs.empty() || db_subgraphs.empty()) {
        throw InputError("average_scheme: query and database subgraph lists must be non-empty");
    }
    AveragedSimilarity avg;
    avg.query_ids = collect_ids(query_subgraphs, "query");
    avg.db_ids = collect_ids(db_subgraphs, "database");
    for (std::size_t i = 0; i < avg.query_ids.size(); ++i) {
        if (std::binary_search(avg.db_ids.begin(), avg.db_ids.end(), avg.query_ids[i])) {
            throw DatasetError("keynode id " + std::to_string(avg.query_ids[i]) +
                               " appears on both the query and database side");
        }
        avg.query_index[avg.query_ids[i]] = static_cast<int>(i);
    }
    for (std::size_t j = 0; j < avg.db_ids.size(); ++j) {
        avg.db_index[avg.db_ids[j]] = static_cast<int>(j);
    }

    const int m = static_cast<int>(avg.query_ids.size());
    const int n = static_cast<int>(avg.db_ids.size());
    const int pair_count = static_cast<int>(query_subgraphs.size() * db_subgraphs.size());
    const int workers = std::max(1, std::min(threads, pair_count));

    std::vector<Matrix> partial_scores(workers, Matrix(m, n));
    std::vector<Matrix> partial_counts(workers, Matrix(m, n));

    parallel_chunks(pair_count, workers, [&](int w, int begin, int end) {
        Matrix& s_acc = partial_scores[w];
        Matrix& c_acc = partial_counts[w];
        for (int p = begin; p < end; ++p) {
            const Subgraph& q = query_subgraphs[p / db_subgraphs.size()];
            const Subgraph& d = db_subgraphs[p % db_subgraphs.size()];
            const Matrix s = score_fn(q, d);
            if (s.rows() != q.size() || s.cols() != d.size()) {
                throw DimensionError("average_scheme: score matrix shape does not match pair");
            }
            for (int i = 0; i < s.rows(); ++i) {
                const int qi = avg.query_index.at(q.keynode_ids[i]);
                for (int j = 0; j < s.cols(); ++j) {
                    const int dj = avg.db_index.at(d.keynode_ids[j]);
                    s_acc(qi, dj) += s(i, j);
                    c_acc(qi, dj) += 1.0;
                }
            }
        }
    });

    avg.scores = Matrix(m, n);
    avg.counts = Matrix(m, n);
    for (int w = 0; w < workers; ++w) {
        avg.scores.add_scaled(partial_scores[w], 1.0);
        avg.counts.add_scaled(partial_counts[w], 1.0);
    }
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            if (avg.counts(i, j) > 0.0) avg.scores(i, j) /= avg.counts(i, j);
        }
    }
    return avg;
}

AveragedSimilarity average_scheme(const std::vector<Subgraph>& query_subgraphs,
                                  const std::vector<Subgraph>& db_subgraphs,
                                  const ModelParams& model, int threads) {
    PairScoreFn fn = [&model](const Subgraph& q, const Subgraph& d) {
        const SubgraphTensor tq = make_subgraph_tensor(q);
        const SubgraphTensor td = make_subgraph_tensor(d);
        auto [fq, fd] = pgat_apply(tq, td, model);
        return similarity_matrix(fq, fd);
    };
    return average_scheme(query_subgraphs, db_subgraphs, fn, threads);
}

std::vector<std::pair<std::int64_t, double>> top_k(const AveragedSimilarity& avg,
                                                   std::int64_t query_id, int k) {
    if (k < 1) throw InputError("top_k: K must be >= 1");
    auto qi = avg.query_index.find(query_id);
    if (qi == avg.query_index.end()) {
        throw LookupError("top_k: unknown query id " + std::to_string(query_id));
    }
    const int row = qi->second;
    std::vector<std::pair<std::int64_t, double>> ranked;
    ranked.reserve(avg.db_ids.size());
    for (std::size_t j = 0; j < avg.db_ids.size(); ++j) {
        if (avg.counts(row, static_cast<int>(j)) > 0.0) {
            ranked.emplace_back(avg.db_ids[j], avg.scores(row, static_cast<int>(j)));
        }
    }
    const auto by_score_then_id = [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    };
    const std::size_t keep = std::min<std::size_t>(k, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + keep, ranked.end(), by_score_then_id);
    ranked.resize(keep);
    return ranked;
}

RetrievalReport make_report(const AveragedSimilarity& avg, const PositionLookup& positions,
                            int k, double radius_m) {
    RetrievalReport report;
    report.radius_m = radius_m;
    report.queries.reserve(avg.query_ids.size());
    for (std::int64_t qid : avg.query_ids) {
        QueryResult qr;
        qr.query_id = qid;
        const Vec3& qpos = positions.at(qid);
        for (const auto& [cid, score] : top_k(avg, qid, k)) {
            Candidate c;
            c.id = cid;
            c.score = score;
            c.distance_m = distance(qpos, positions.at(cid));
            c.hit = c.distance_m <= radius_m;
            qr.candidates.push_back(c);
        }
        report.queries.push_back(std::move(qr));
    }
    return report;
}

void save_report_csv(const std::string& path, const RetrievalReport& report) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report '" + path + "'");
    out << "query_id,rank,candidate_id,score,distance_m,hit\n";
    char buf[160];
    for (const QueryResult& qr : report.queries) {
        for (std::size_t r = 0; r < qr.candidates.size(); ++r) {
            const Candidate& c = qr.candidates[r];
            std::snprintf(buf, sizeof(buf), "%lld,%zu,%lld,%.12g,%.6f,%d\n",
                          static_cast<long long>(qr.query_id), r + 1,
                          static_cast<long long>(c.id), c.score, c.distance_m, c.hit ? 1 : 0);
            out << buf;
        }
    }
    if (!out) throw IoError("failed writing report '" + path + "'");
}

RetrievalReport load_report_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open report '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "query_id,rank,candidate_id,score,distance_m,hit") {
        throw ParseError(path + ":1: bad report header");
    }
    RetrievalReport report;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 6) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected 6 fields");
        }
        try {
            const std::int64_t qid = std::stoll(fields[0]);
            Candidate c;
            c.id = std::stoll(fields[2]);
            c.score = std::stod(fields[3]);
            c.distance_m = std::stod(fields[4]);
            c.hit = std::stoi(fields[5]) != 0;
            if (report.queries.empty() || report.queries.back().query_id != qid) {
                report.queries.push_back(QueryResult{qid, {}});
            }
            report.queries.back().candidates.push_back(c);
        } catch (const CategorizedError&) {
            throw;
        } catch (const std::exception&) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": malformed row");
        }
    }
    return report;
}

namespace {

bool query_is_eligible(const Vec3& qpos, const PositionLookup& positions,
                       const std::vector<std::int64_t>& db_ids, double radius_m) {
    for (std::int64_t id : db_ids) {
        if (distance(qpos, positions.at(id)) <= radius_m) return true;
    }
    return false;
}

} // namespace

double recall_at_n(const RetrievalReport& report, const PositionLookup& positions,
                   const std::vector<std::int64_t>& db_ids, double radius_m, int n) {
    if (radius_m <= 0.0) throw InputError("recall_at_n: radius must be positive");
    if (n < 1) throw InputError("recall_at_n: N must be >= 1");
    long eligible = 0;
    long hits = 0;
    for (const QueryResult& qr : report.queries) {
        const Vec3& qpos = positions.at(qr.query_id);
        if (!query_is_eligible(qpos, positions, db_ids, radius_m)) continue;
        ++eligible;
        const int limit = std::min<int>(n, static_cast<int>(qr.candidates.size()));
        for (int r = 0; r < limit; ++r) {
            if (distance(qpos, positions.at(qr.candidates[r].id)) <= radius_m) {
                ++hits;
                break;
            }
        }
    }
    return eligible > 0 ? static_cast<double>(hits) / eligible : 0.0;
}

RecallSummary evaluate_report(const RetrievalReport& report, const PositionLookup& positions,
                              const std::vector<std::int64_t>& db_ids, double radius_m,
                              int max_curve_n) {
    RecallSummary summary;
    summary.radius_m = radius_m;
    summary.queries = static_cast<long>(report.queries.size());
    for (const QueryResult& qr : report.queries) {
        if (query_is_eligible(positions.at(qr.query_id), positions, db_ids, radius_m)) {
            ++summary.eligible_queries;
        }
    }
    summary.n_1pct = std::max(
        1, static_cast<int>(std::ceil(0.01 * static_cast<double>(db_ids.size()))));
    summary.ar_at_1 = recall_at_n(report, positions, db_ids, radius_m, 1);
    summary.ar_at_1pct = recall_at_n(report, positions, db_ids, radius_m, summary.n_1pct);
    for (int n = 1; n <= max_curve_n; ++n) {
        summary.curve.emplace_back(n, recall_at_n(report, positions, db_ids, radius_m, n));
    }
    return summary;
}

} // namespace pgat
