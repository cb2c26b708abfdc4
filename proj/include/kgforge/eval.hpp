#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kgforge/embeddings.hpp"
#include "kgforge/graph.hpp"
#include "kgforge/trans.hpp"

namespace kgforge {

enum class Slot { Head, Tail };
enum class Setting { Raw, Filtered };

std::string_view to_string(Slot s);
std::string_view to_string(Setting s);

// Lower score = more plausible.
using Scorer = std::function<double(const Triple&)>;

Scorer make_scorer(const TranslationalModel& model);

// 1 + number of single-slot corruptions scoring at most the true triple's
// score (ties count against the true triple). Filtered: corruptions that are
// triples of `g` are skipped.
std::size_t rank_triple(const Scorer& scorer, const KnowledgeGraph& g, const Triple& t, Slot slot, Setting setting);

struct Metrics {
    double mean_rank = 0.0;
    std::vector<std::pair<std::size_t, double>> hits;  // (k, Hits@k) in the order requested

    double hits_at(std::size_t k) const;
};

Metrics aggregate_metrics(std::span<const std::size_t> ranks, std::span<const std::size_t> ks);

struct EvalReport {
    Setting setting = Setting::Raw;
    std::size_t triples = 0;
    Metrics head;
    Metrics tail;
    Metrics combined;
};

struct TripleRanks {
    Triple triple;
    std::size_t raw_head = 0, raw_tail = 0, filtered_head = 0, filtered_tail = 0;
};

struct LinkPredictionResult {
    std::vector<TripleRanks> ranks;  // in test order
    EvalReport raw;
    EvalReport filtered;
};

struct EvalOptions {
    std::vector<std::size_t> ks{1, 3, 10};
    std::size_t workers = 1;
};

// Ranks every test triple in both slots and settings. `known` holds every
// true triple used for filtering and must contain the test ids.
LinkPredictionResult evaluate_link_prediction(const Scorer& scorer, const KnowledgeGraph& known,
                                              std::span<const Triple> test, const EvalOptions& options = {});

// `key = value` lines, e.g. `filtered.tail.hits@10 = 0.8`.
void write_report_text(std::ostream& out, const LinkPredictionResult& r);
// {"triples": n, "metrics": [{"metric", "slot", "setting", "value"}, ...]}
void write_report_json(std::ostream& out, const LinkPredictionResult& r);
// head, relation, tail, raw_head, raw_tail, filtered_head, filtered_tail
void write_ranks_tsv(std::ostream& out, const KnowledgeGraph& g, const LinkPredictionResult& r);

enum class Metric { Cosine, Euclidean };

std::string_view to_string(Metric m);
Metric parse_metric(std::string_view s);

// Top-k tokens other than the query: highest cosine or smallest distance
// first, lower id first on ties. Throws std::out_of_range for an unknown query.
std::vector<std::pair<std::string, double>> nearest_neighbors(const TokenEmbeddings& emb, std::string_view query,
                                                              std::size_t k, Metric metric);

struct Split {
    std::vector<Triple> train, valid, test;
};

// Seeded shuffle of g's triples cut by the given fractions: train and test
// positive, valid nonnegative, summing to 1.
Split split_triples(const KnowledgeGraph& g, double train, double valid, double test, std::uint64_t seed);

}  // namespace kgforge
