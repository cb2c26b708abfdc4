#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kgforge/embeddings.hpp"
#include "kgforge/graph.hpp"
#include "kgforge/matrix.hpp"

namespace kgforge {

enum class EdgeWeighting { Uniform, PredicateFrequency, InversePredicateFrequency };

std::string_view to_string(EdgeWeighting w);
// Accepts "uniform", "predicate-frequency" / "pf", "inverse-predicate-frequency" / "ipf".
EdgeWeighting parse_edge_weighting(std::string_view s);

struct WeightedEdge {
    RelationId relation;
    EntityId target;
    double weight;
};

// Transition weights over the out-edges of every vertex; each non-empty
// out-list sums to 1.
struct WeightedGraph {
    std::vector<std::vector<WeightedEdge>> out;

    std::size_t size() const noexcept { return out.size(); }
    bool dangling(EntityId v) const { return out.at(v).empty(); }
};

WeightedGraph weigh_edges(const KnowledgeGraph& g, EdgeWeighting strategy);

// Personalized PageRank with restart probability alpha to `focus`; mass at
// vertices without out-edges also returns to the focus. Power iteration
// until the L1 change drops below 1e-12.
std::vector<double> exact_ppr(const WeightedGraph& wg, EntityId focus, double alpha);

struct PaintResult {
    std::vector<std::pair<EntityId, double>> scores;  // by ascending id, all > 0
    double discarded = 0.0;  // paint that reached a vertex without out-edges
    double residual = 0.0;   // pending paint left below the threshold

    double total() const;
};

// Paint propagation: a unit of paint starts at the focus; the vertex with the
// largest pending paint keeps alpha of it and passes the rest along its
// weighted out-edges (or discards it at a dangling vertex). Stops once every
// pending parcel is at most epsilon. The initial unit is always processed.
PaintResult approx_ppr(const WeightedGraph& wg, EntityId focus, double alpha, double epsilon);

struct CooccurrenceEntry {
    std::uint32_t focus;
    std::uint32_t context;
    double weight;

    friend bool operator==(const CooccurrenceEntry&, const CooccurrenceEntry&) = default;
};

// Row-stochastic co-occurrence counts over entity tokens.
struct SparseCooccurrence {
    std::vector<std::string> tokens;
    std::vector<CooccurrenceEntry> entries;  // sorted by (focus, context)

    std::size_t size() const noexcept { return tokens.size(); }
    std::size_t nnz() const noexcept { return entries.size(); }
    std::optional<double> at(std::uint32_t focus, std::uint32_t context) const;

    friend bool operator==(const SparseCooccurrence&, const SparseCooccurrence&) = default;
};

struct CooccurrenceParams {
    EdgeWeighting weighting = EdgeWeighting::Uniform;
    double alpha = 0.15;
    double epsilon = 1e-4;
    std::size_t workers = 1;

    void validate() const;
};

// Row i: paint scores from i on the forward graph plus those on the reversed
// graph, each pass divided by (1 - discarded); the diagonal is zeroed, the row
// normalized to sum 1, and dropped if empty.
SparseCooccurrence build_cooccurrence(const KnowledgeGraph& g, const CooccurrenceParams& params);
// Same assembly with exact_ppr in place of the paint approximation.
SparseCooccurrence build_cooccurrence_exact(const KnowledgeGraph& g, const CooccurrenceParams& params);

// Little-endian: u64 token count, u64 nnz, then (u32 focus, u32 context, f64 weight).
void write_cooccurrence_binary(std::ostream& out, const SparseCooccurrence& x);
SparseCooccurrence read_cooccurrence_binary(std::istream& in, std::vector<std::string> tokens);
// `focus<TAB>context<TAB>weight` per entry, using token labels.
void write_cooccurrence_text(std::ostream& out, const SparseCooccurrence& x);

// min(1, (x / x_max)^exponent)
double glove_weight(double x, double x_max, double exponent);

struct GloveParams {
    Matrix w;          // focus vectors
    Matrix w_context;  // context vectors
    std::vector<double> b;
    std::vector<double> b_context;

    friend bool operator==(const GloveParams&, const GloveParams&) = default;
};

// J = sum over stored entries of f(X_ij) (w_i . w~_j + b_i + b~_j - log X_ij)^2.
// When `grad` is given (shaped like params, zeroed by the caller) the
// gradient of J is added to it.
double glove_cost(const SparseCooccurrence& x, const GloveParams& params, double x_max, double exponent,
                  GloveParams* grad = nullptr);

struct GloveConfig {
    std::size_t dim = 50;
    std::optional<double> x_max;  // nullopt: 95th percentile of stored weights
    double exponent = 0.75;
    std::size_t epochs = 25;
    double learning_rate = 0.05;
    std::uint64_t seed = 0;

    void validate() const;
};

double default_x_max(const SparseCooccurrence& x);
GloveParams init_glove(std::size_t tokens, const GloveConfig& config);

struct GloveResult {
    TokenEmbeddings embeddings;  // vector = w + w~
    GloveParams params;
    double x_max = 0.0;
    std::vector<double> epoch_cost;  // J after each epoch
};

// AdaGrad over the stored entries in a seeded order per epoch.
// Single-threaded; output is a pure function of (x, config).
GloveResult train_glove(const SparseCooccurrence& x, const GloveConfig& config);

}  // namespace kgforge
