#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pgat/agnn.hpp"
#include "pgat/matrix.hpp"
#include "pgat/pose_graph.hpp"

namespace pgat {

// Running-sum / count accumulator keyed by (query global_id, database
// global_id); O(M x N) memory regardless of how many subgraph pairs feed it.
struct AveragedSimilarity {
    std::vector<std::int64_t> query_ids; // ascending
    std::vector<std::int64_t> db_ids;    // ascending
    std::unordered_map<std::int64_t, int> query_index;
    std::unordered_map<std::int64_t, int> db_index;
    Matrix scores; // averaged where counts > 0
    Matrix counts;

    double score(std::int64_t query_id, std::int64_t db_id) const;
    double count(std::int64_t query_id, std::int64_t db_id) const;
};

// Scores one (query subgraph, database subgraph) pair; rows index query
// keynodes, columns database keynodes.
using PairScoreFn = std::function<Matrix(const Subgraph&, const Subgraph&)>;

// Scores every (query, database) subgraph pair, accumulates per keynode-id
// cell and divides by the counts. Worker partials are merged in a fixed
// order.
AveragedSimilarity average_scheme(const std::vector<Subgraph>& query_subgraphs,
                                  const std::vector<Subgraph>& db_subgraphs,
                                  const PairScoreFn& score_fn, int threads = 1);

// Model-backed variant: P-GAT forward + cosine similarity per pair.
AveragedSimilarity average_scheme(const std::vector<Subgraph>& query_subgraphs,
                                  const std::vector<Subgraph>& db_subgraphs,
                                  const ModelParams& model, int threads = 1);

// Top-K candidates for one query keynode, descending score; ties broken by
// ascending global id. Returns all candidates when K exceeds the count.
std::vector<std::pair<std::int64_t, double>> top_k(const AveragedSimilarity& avg,
                                                   std::int64_t query_id, int k);

struct Candidate {
    std::int64_t id = 0;
    double score = 0.0;
    double distance_m = 0.0;
    bool hit = false;
};

struct QueryResult {
    std::int64_t query_id = 0;
    std::vector<Candidate> candidates; // rank order
};

struct RetrievalReport {
    std::vector<QueryResult> queries;
    double radius_m = 25.0;
};

RetrievalReport make_report(const AveragedSimilarity& avg, const PositionLookup& positions,
                            int k, double radius_m);

// CSV: query_id,rank,candidate_id,score,distance_m,hit
void save_report_csv(const std::string& path, const RetrievalReport& report);
RetrievalReport load_report_csv(const std::string& path);

// Fraction of queries whose top-N candidates contain a database keynode
// within radius_m of the query position. Queries with no true match anywhere
// in db_ids are excluded from the denominator.
double recall_at_n(const RetrievalReport& report, const PositionLookup& positions,
                   const std::vector<std::int64_t>& db_ids, double radius_m, int n);

struct RecallSummary {
    double ar_at_1 = 0.0;
    double ar_at_1pct = 0.0;
    int n_1pct = 0;
    long queries = 0;
    long eligible_queries = 0;
    double radius_m = 25.0;
    std::vector<std::pair<int, double>> curve; // (N, recall)
};

RecallSummary evaluate_report(const RetrievalReport& report, const PositionLookup& positions,
                              const std::vector<std::int64_t>& db_ids, double radius_m,
                              int max_curve_n);

} // namespace pgat
