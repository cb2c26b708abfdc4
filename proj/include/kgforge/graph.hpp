#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace kgforge {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
    EntityId head = 0;
    RelationId relation = 0;
    EntityId tail = 0;

    friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
    std::size_t operator()(const Triple& t) const noexcept {
        std::uint64_t h = (std::uint64_t{t.head} << 32) | t.tail;
        h ^= std::uint64_t{t.relation} * 0x9E3779B97F4A7C15ULL;
        h ^= h >> 29;
        h *= 0xBF58476D1CE4E5B9ULL;
        return static_cast<std::size_t>(h ^ (h >> 32));
    }
};

using TripleSet = std::unordered_set<Triple, TripleHash>;

// Dense ids in first-seen order.
class Vocabulary {
public:
    std::uint32_t intern(std::string_view label);
    std::optional<std::uint32_t> find(std::string_view label) const;
    const std::string& label(std::uint32_t id) const { return labels_.at(id); }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    std::size_t size() const noexcept { return labels_.size(); }

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.labels_ == b.labels_; }

private:
    struct Hash {
        using is_transparent = void;
        std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
    };
    std::vector<std::string> labels_;
    std::unordered_map<std::string, std::uint32_t, Hash, std::equal_to<>> ids_;
};

struct Edge {
    RelationId relation;
    EntityId target;
};

// Directed labeled multigraph with set semantics on triples.
class KnowledgeGraph {
public:
    KnowledgeGraph() = default;

    // Empty triple set over the same entity/relation vocabularies as `other`.
    static KnowledgeGraph with_vocabulary_of(const KnowledgeGraph& other);

    EntityId add_entity(std::string_view label);
    RelationId add_relation(std::string_view label);

    // Returns false when the triple was already present.
    bool add_triple(Triple t);
    bool add_triple(std::string_view head, std::string_view relation, std::string_view tail);

    const Vocabulary& entities() const noexcept { return entities_; }
    const Vocabulary& relations() const noexcept { return relations_; }
    std::size_t entity_count() const noexcept { return entities_.size(); }
    std::size_t relation_count() const noexcept { return relations_.size(); }

    // Insertion order.
    const std::vector<Triple>& triples() const noexcept { return triples_; }
    std::size_t triple_count() const noexcept { return triples_.size(); }
    bool contains(const Triple& t) const { return index_.contains(t); }

    std::span<const Edge> out_edges(EntityId v) const { return out_[v]; }
    std::span<const Edge> in_edges(EntityId v) const { return in_[v]; }
    std::size_t out_degree(EntityId v) const { return out_[v].size(); }
    std::size_t in_degree(EntityId v) const { return in_[v].size(); }

    std::string describe(const Triple& t) const;

private:
    Vocabulary entities_;
    Vocabulary relations_;
    std::vector<Triple> triples_;
    TripleSet index_;
    std::vector<std::vector<Edge>> out_;
    std::vector<std::vector<Edge>> in_;
};

enum class GraphFormat { Tsv, NTriples };

GraphFormat parse_graph_format(std::string_view name);

struct LoadResult {
    KnowledgeGraph graph;
    std::size_t skipped_literals = 0;
    std::size_t duplicate_triples = 0;
};

// Throws ParseError (with 1-based line number) on malformed input.
LoadResult load_graph(std::istream& in, GraphFormat format);
LoadResult load_graph_file(const std::string& path, GraphFormat format);

// Adds the triples of a TSV stream to `g`, interning only into existing
// vocabularies; triples mentioning unknown labels are counted, not added.
struct MergeResult {
    std::size_t added = 0;
    std::size_t unknown = 0;
};
MergeResult merge_known_triples(std::istream& in, KnowledgeGraph& g);

void write_tsv(std::ostream& out, const KnowledgeGraph& g);
// `id<TAB>label` lines.
void write_vocabulary(std::ostream& out, const Vocabulary& vocab);

KnowledgeGraph reverse_graph(const KnowledgeGraph& g);

struct CardinalityStats {
    double tails_per_head = 0.0;
    double heads_per_tail = 0.0;
};

// Throws std::invalid_argument when r has no triple.
CardinalityStats relation_stats(const KnowledgeGraph& g, RelationId r);

// Stats for every relation; unused relations get {0, 0}.
std::vector<CardinalityStats> all_relation_stats(const KnowledgeGraph& g);

}  // namespace kgforge
