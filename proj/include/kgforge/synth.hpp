#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "kgforge/graph.hpp"
#include "kgforge/matrix.hpp"

namespace kgforge {

struct PlantedConfig {
    std::size_t entities = 1000;
    std::size_t relations = 10;
    std::size_t dim = 20;
    std::size_t triples_per_relation = 450;
    double noise = 0.05;
    std::uint64_t seed = 0;

    void validate() const;
};

struct PlantedKG {
    KnowledgeGraph graph;
    Matrix entity_vectors;    // ground truth, entities x dim
    Matrix relation_vectors;  // ground truth, relations x dim
};

// Entities (labels e0, e1, ...) are distinct vertices of the hypercube
// {-a, +a}^m, m = ceil(log2 entities), a = 1/sqrt(m), embedded isometrically
// into `dim` dimensions by a seeded orthonormal basis. Relation r < m
// (labels r0, r1, ...) sets bit r, relation m + b clears bit b. Each entity
// vector carries Gaussian noise clipped to norm noise/2, so every emitted
// triple satisfies |h + r - t| <= noise. Heads are drawn per relation without
// replacement among those whose target vertex is an entity. Throws
// std::invalid_argument when more triples are requested than exist.
PlantedKG generate_planted_kg(const PlantedConfig& config);

struct OneToManyConfig {
    std::size_t groups = 20;
    std::size_t tails_per_head = 8;
    double test_fraction = 0.2;
    std::uint64_t seed = 0;
};

struct OneToManyDataset {
    KnowledgeGraph graph;        // every triple
    std::vector<Triple> train;
    std::vector<Triple> test;    // held-out `has` triples
    RelationId relation;         // the one-to-many relation under test
};

// Group i has a head h_i linked by `has` to tails t_i_0 .. t_i_{m-1} and a
// twin head linked to the same tails by `owns`; hub j is linked by `slot` to
// the j-th tail of every group. Entity vectors that satisfy every triple
// under a pure translation would collapse all tails together, while one
// hyperplane per relation separates them. A seeded fraction of `has` triples
// is held out.
OneToManyDataset generate_one_to_many(const OneToManyConfig& config);

enum class FailureKind { Node, Edge, Subgraph, Graph };

std::string_view to_string(FailureKind k);

struct FailureAnnotation {
    FailureKind kind;
    std::vector<std::string> elements;  // entity labels, or "head relation tail" for edges
};

struct FactoryConfig {
    std::size_t machines = 20;
    std::size_t sensors_per_machine = 4;
    double node_fraction = 0.3;
    double edge_fraction = 0.0;
    double subgraph_fraction = 0.0;
    double graph_fraction = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct FailureLabeledGraph {
    KnowledgeGraph graph;
    std::vector<EntityId> status_nodes;
    std::vector<bool> failed;  // parallel to status_nodes
    std::vector<FailureAnnotation> failures;
};

// Machines m<i> form a looped production line (`feeds`); sensors s<i>_<j>
// `measures` their machine and `feeds` a reading-status node st<i>_<j>, which has a
// `status` edge to a value entity (value:normal, value:high, value:low,
// value:fault, value:offline). Failure modes are assigned to disjoint
// machines by fraction: node flips one reading to value:fault; edge garbles
// the machine's outgoing line edge; subgraph sets readings 0 and 1 to the
// high/low pair that never co-occurs on healthy machines; graph takes every
// reading of the machine offline and records one whole-graph annotation.
FailureLabeledGraph generate_factory_graph(const FactoryConfig& config);

struct ClassifierReport {
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    double accuracy = 0.0;
    double balanced_accuracy = 0.0;
};

// Projects rows onto the difference of class means over a seeded training
// split, picks the threshold with the best training accuracy, and scores the
// held-out rows.
ClassifierReport threshold_classifier(const Matrix& features, const std::vector<bool>& labels, double train_fraction,
                                      std::uint64_t seed);

}  // namespace kgforge
