#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kgforge/graph.hpp"
#include "kgforge/rng.hpp"

namespace kgforge {

// Alternating ids: root entity, relation, entity, relation, entity, ...
using Walk = std::vector<std::uint32_t>;

// Number of maximal walks from `root`: walks of exactly `depth` edge steps,
// or shorter ones that end at a vertex without out-edges. Saturates at
// UINT64_MAX.
std::uint64_t count_walks(const KnowledgeGraph& g, EntityId root, std::size_t depth);

// All maximal walks in lexicographic edge order, or, with a cap smaller than
// the walk count, a uniform sample (without replacement) of `cap` of them in
// the same order. Throws std::out_of_range for an unknown root and
// std::overflow_error when sampling from a saturated walk count.
std::vector<Walk> enumerate_walks(const KnowledgeGraph& g, EntityId root, std::size_t depth,
                                  std::optional<std::size_t> cap, Rng& rng);

// labels[i][v] is the label of vertex v after i relabeling rounds.
struct WLLabeling {
    std::vector<std::vector<std::string>> labels;

    std::size_t iterations() const { return labels.empty() ? 0 : labels.size() - 1; }
};

// Directed Weisfeiler-Lehman relabeling over out-edges. A vertex whose
// sorted (relation, neighbor label) multiset is unchanged since the previous
// round keeps its label; otherwise it gets a digest of its previous label and
// that multiset, tagged with the round number.
WLLabeling wl_relabel(const KnowledgeGraph& g, std::size_t iterations);
WLLabeling wl_relabel(const KnowledgeGraph& g, std::size_t iterations, std::vector<std::string> initial);

enum class CorpusMode { Walks, WL };

std::string_view to_string(CorpusMode m);
CorpusMode parse_corpus_mode(std::string_view s);

struct CorpusParams {
    CorpusMode mode = CorpusMode::Walks;
    std::size_t depth = 2;
    std::optional<std::size_t> walks_per_entity;  // nullopt = exhaustive
    std::size_t wl_iterations = 2;
    std::uint64_t seed = 0;
    std::size_t workers = 1;

    void validate() const;
};

struct WalkCorpus {
    Vocabulary vocabulary;
    std::vector<std::uint64_t> counts;  // per vocabulary id
    std::vector<std::vector<std::uint32_t>> sequences;
    CorpusMode mode = CorpusMode::Walks;
    std::size_t depth = 0;
    std::size_t wl_iterations = 0;

    void add_sequence(const std::vector<std::string_view>& tokens);
    std::vector<std::string> sequence_tokens(std::size_t i) const;
    std::size_t token_count() const;
};

// Walks mode: union of the walks from every entity. WL mode: for every round
// 0..h and every vertex, walks over the relabeled graph whose first token is
// the vertex's original label. Identical sequences are kept once.
WalkCorpus build_corpus(const KnowledgeGraph& g, const CorpusParams& params);

// One sequence per line, tokens separated by single spaces.
void write_corpus(std::ostream& out, const WalkCorpus& corpus);
WalkCorpus read_corpus(std::istream& in);

}  // namespace kgforge
