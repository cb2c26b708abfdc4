#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgforge/graph.hpp"
#include "kgforge/matrix.hpp"
#include "kgforge/rng.hpp"

namespace kgforge {

enum class Variant { TransE, TransH, TransR };
enum class Norm { L1, L2 };
enum class Corruption { Uniform, Bernoulli };

std::string_view to_string(Variant v);
std::string_view to_string(Norm n);
std::string_view to_string(Corruption c);
Variant parse_variant(std::string_view s);
Norm parse_norm(std::string_view s);
Corruption parse_corruption(std::string_view s);

// ---------------------------------------------------------------------------
// Scores. Lower is more plausible.

// ||h + l - t|| under L1 or L2 (not squared).
double transe_score(std::span<const double> h, std::span<const double> l, std::span<const double> t, Norm norm);

// e - (w.e) w; w must have unit L2 norm (within 1e-6).
std::vector<double> hyperplane_project(std::span<const double> e, std::span<const double> w);

// ||(h - w.h w) + d - (t - w.t w)||^2
double transh_score(std::span<const double> h, std::span<const double> t, std::span<const double> w,
                    std::span<const double> d);

// ||M h + r - M t||^2 with M a row-major (r.size() x h.size()) matrix.
double transr_score(std::span<const double> h, std::span<const double> t, std::span<const double> r,
                    std::span<const double> m);

// max(0, pos + margin - neg)
double margin_loss(double pos, double neg, double margin);

// ---------------------------------------------------------------------------
// Gradients. Each function returns the score and adds `scale` times the
// partial derivative with respect to every argument into the matching
// output span (outputs are accumulated, not overwritten).

double transe_backward(std::span<const double> h, std::span<const double> l, std::span<const double> t, Norm norm,
                       double scale, std::span<double> gh, std::span<double> gl, std::span<double> gt);

double transh_backward(std::span<const double> h, std::span<const double> t, std::span<const double> w,
                       std::span<const double> d, double scale, std::span<double> gh, std::span<double> gt,
                       std::span<double> gw, std::span<double> gd);

double transr_backward(std::span<const double> h, std::span<const double> t, std::span<const double> r,
                       std::span<const double> m, double scale, std::span<double> gh, std::span<double> gt,
                       std::span<double> gr, std::span<double> gm);

// ---------------------------------------------------------------------------

struct TranslationalModel {
    Variant variant = Variant::TransE;
    Norm norm = Norm::L2;  // TransE only
    std::size_t dim = 0;           // entity space
    std::size_t relation_dim = 0;  // relation space (== dim except TransR)
    std::vector<std::string> entity_labels;
    std::vector<std::string> relation_labels;
    Matrix entities;     // |E| x dim
    Matrix relations;    // |R| x relation_dim (translation l, d_r or r)
    Matrix normals;      // |R| x dim, TransH only
    Matrix projections;  // |R| x (relation_dim * dim), TransR only

    double score(const Triple& t) const;

    friend bool operator==(const TranslationalModel&, const TranslationalModel&) = default;
};

// Sum of the two TransH soft-constraint terms (not multiplied by C).
// Throws std::invalid_argument for non-TransH models.
double transh_constraint_penalty(const TranslationalModel& model, double epsilon);

// Renormalizes TransE entities and TransH normals to unit norm and clips
// TransH/TransR entity rows to norm <= 1. Rows already within 1e-12 of
// feasibility are left bit-for-bit unchanged, so the operation is idempotent.
// Zero rows that need renormalizing are redrawn from `rng`; the number of
// redrawn rows is returned.
std::size_t enforce_norm_constraints(TranslationalModel& model, Rng& rng);

struct TrainConfig {
    std::size_t dim = 50;
    std::size_t relation_dim = 50;  // TransR only
    double margin = 1.0;
    double learning_rate = 0.01;
    std::size_t epochs = 100;
    std::size_t batch_size = 100;
    Corruption corruption = Corruption::Uniform;
    Norm norm = Norm::L2;
    double soft_weight = 0.25;  // C
    double epsilon = 0.1;
    std::uint64_t seed = 0;
    std::size_t workers = 1;

    // Throws std::invalid_argument naming the offending field.
    void validate() const;
};

// Seeded initialization: entries uniform in [-6/sqrt(k), 6/sqrt(k)], entity
// and relation rows then normalized; TransH normals normalized; TransR
// projection matrices start at the identity.
TranslationalModel init_translational(const KnowledgeGraph& g, Variant variant, const TrainConfig& config);

// Head-or-tail corruption. Bernoulli picks the head with probability
// tph / (tph + hpt) of the triple's relation.
class Corrupter {
public:
    Corrupter(const KnowledgeGraph& g, Corruption strategy);

    Triple operator()(const Triple& t, Rng& rng) const;
    double head_probability(RelationId r) const;

private:
    std::size_t entity_count_;
    Corruption strategy_;
    std::vector<double> head_probability_;
};

Triple corrupt_triple(const KnowledgeGraph& g, const Triple& t, Corruption strategy, Rng& rng);

struct EpochReport {
    std::size_t epoch = 0;  // 1-based
    double mean_loss = 0.0;  // mean margin loss over the epoch's positives
    double penalty = 0.0;    // TransH soft-constraint sum after the epoch
};

using EpochCallback = std::function<void(const EpochReport&, const TranslationalModel&)>;

struct TrainResult {
    TranslationalModel model;
    std::vector<double> epoch_loss;
    std::size_t reinitialized_rows = 0;
};

// Minibatch subgradient descent on the margin ranking loss, one corruption
// per positive per epoch. Corruption draws are keyed by (seed, epoch,
// position), and per-batch gradients are merged in a fixed order, so the
// result depends only on (graph, variant, config) for any worker count.
TrainResult train_translational(const KnowledgeGraph& g, Variant variant, const TrainConfig& config,
                                const EpochCallback& on_epoch = {});

}  // namespace kgforge
