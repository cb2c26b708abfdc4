#include "kgforge/trans.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "kgforge/parallel.hpp"

namespace kgforge {

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::TransE: return "transe";
        case Variant::TransH: return "transh";
        case Variant::TransR: return "transr";
    }
    return "?";
}

std::string_view to_string(Norm n) { return n == Norm::L1 ? "l1" : "l2"; }

std::string_view to_string(Corruption c) { return c == Corruption::Uniform ? "uniform" : "bernoulli"; }

Variant parse_variant(std::string_view s) {
    if (s == "transe") return Variant::TransE;
    if (s == "transh") return Variant::TransH;
    if (s == "transr") return Variant::TransR;
    throw std::invalid_argument("unknown translational variant '" + std::string(s) + "'");
}

Norm parse_norm(std::string_view s) {
    if (s == "l1" || s == "L1") return Norm::L1;
    if (s == "l2" || s == "L2") return Norm::L2;
    throw std::invalid_argument("unknown norm '" + std::string(s) + "' (expected l1 or l2)");
}

Corruption parse_corruption(std::string_view s) {
    if (s == "uniform") return Corruption::Uniform;
    if (s == "bernoulli") return Corruption::Bernoulli;
    throw std::invalid_argument("unknown corruption strategy '" + std::string(s) + "'");
}

namespace {

void require_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw std::invalid_argument(std::string("dimension mismatch: ") + what);
}

void require_unit(std::span<const double> w) {
    if (std::abs(l2_norm(w) - 1.0) > 1e-6) throw std::invalid_argument("hyperplane normal must have unit L2 norm");
}

}  // namespace

double transe_score(std::span<const double> h, std::span<const double> l, std::span<const double> t, Norm norm) {
    require_same_size(h.size(), l.size(), "head/relation");
    require_same_size(h.size(), t.size(), "head/tail");
    double s = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double u = h[i] + l[i] - t[i];
        s += norm == Norm::L1 ? std::abs(u) : u * u;
    }
    return norm == Norm::L1 ? s : std::sqrt(s);
}

std::vector<double> hyperplane_project(std::span<const double> e, std::span<const double> w) {
    require_same_size(e.size(), w.size(), "vector/normal");
    require_unit(w);
    const double c = dot(w, e);
    std::vector<double> out(e.begin(), e.end());
    axpy(-c, w, out);
    return out;
}

double transh_score(std::span<const double> h, std::span<const double> t, std::span<const double> w,
                    std::span<const double> d) {
    require_same_size(h.size(), t.size(), "head/tail");
    require_same_size(h.size(), w.size(), "head/normal");
    require_same_size(h.size(), d.size(), "head/translation");
    double wx = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) wx += w[i] * (h[i] - t[i]);
    double s = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double u = (h[i] - t[i]) - wx * w[i] + d[i];
        s += u * u;
    }
    return s;
}

double transr_score(std::span<const double> h, std::span<const double> t, std::span<const double> r,
                    std::span<const double> m) {
    require_same_size(h.size(), t.size(), "head/tail");
    require_same_size(m.size(), r.size() * h.size(), "projection matrix");
    const std::size_t k = h.size();
    double s = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        double u = r[i];
        for (std::size_t j = 0; j < k; ++j) u += m[i * k + j] * (h[j] - t[j]);
        s += u * u;
    }
    return s;
}

double margin_loss(double pos, double neg, double margin) { return std::max(0.0, pos + margin - neg); }

double transe_backward(std::span<const double> h, std::span<const double> l, std::span<const double> t, Norm norm,
                       double scale, std::span<double> gh, std::span<double> gl, std::span<double> gt) {
    const double score = transe_score(h, l, t, norm);
    if (norm == Norm::L2 && score == 0.0) return score;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double u = h[i] + l[i] - t[i];
        double g;
        if (norm == Norm::L1)
            g = u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0);
        else
            g = u / score;
        gh[i] += scale * g;
        gl[i] += scale * g;
        gt[i] -= scale * g;
    }
    return score;
}

double transh_backward(std::span<const double> h, std::span<const double> t, std::span<const double> w,
                       std::span<const double> d, double scale, std::span<double> gh, std::span<double> gt,
                       std::span<double> gw, std::span<double> gd) {
    const std::size_t k = h.size();
    require_same_size(k, t.size(), "head/tail");
    require_same_size(k, w.size(), "head/normal");
    require_same_size(k, d.size(), "head/translation");
    // x = h - t, u = x - (w.x) w + d, f = |u|^2
    double wx = 0.0;
    for (std::size_t i = 0; i < k; ++i) wx += w[i] * (h[i] - t[i]);
    std::vector<double> u(k);
    double score = 0.0, wu = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        u[i] = (h[i] - t[i]) - wx * w[i] + d[i];
        score += u[i] * u[i];
        wu += w[i] * u[i];
    }
    for (std::size_t i = 0; i < k; ++i) {
        const double gx = 2.0 * (u[i] - wu * w[i]);
        gh[i] += scale * gx;
        gt[i] -= scale * gx;
        gd[i] += scale * 2.0 * u[i];
        gw[i] -= scale * 2.0 * (wu * (h[i] - t[i]) + wx * u[i]);
    }
    return score;
}

double transr_backward(std::span<const double> h, std::span<const double> t, std::span<const double> r,
                       std::span<const double> m, double scale, std::span<double> gh, std::span<double> gt,
                       std::span<double> gr, std::span<double> gm) {
    const std::size_t k = h.size();
    const std::size_t d = r.size();
    require_same_size(k, t.size(), "head/tail");
    require_same_size(m.size(), d * k, "projection matrix");
    // u = M (h - t) + r, f = |u|^2
    std::vector<double> u(d);
    double score = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        double v = r[i];
        for (std::size_t j = 0; j < k; ++j) v += m[i * k + j] * (h[j] - t[j]);
        u[i] = v;
        score += v * v;
    }
    for (std::size_t i = 0; i < d; ++i) {
        gr[i] += scale * 2.0 * u[i];
        for (std::size_t j = 0; j < k; ++j) {
            const double mu = 2.0 * m[i * k + j] * u[i];
            gh[j] += scale * mu;
            gt[j] -= scale * mu;
            gm[i * k + j] += scale * 2.0 * u[i] * (h[j] - t[j]);
        }
    }
    return score;
}

double TranslationalModel::score(const Triple& t) const {
    const auto h = entities.row(t.head);
    const auto tl = entities.row(t.tail);
    switch (variant) {
        case Variant::TransE: return transe_score(h, relations.row(t.relation), tl, norm);
        case Variant::TransH: return transh_score(h, tl, normals.row(t.relation), relations.row(t.relation));
        case Variant::TransR:
            return transr_score(h, tl, relations.row(t.relation), projections.row(t.relation));
    }
    return 0.0;
}

double transh_constraint_penalty(const TranslationalModel& model, double epsilon) {
    if (model.variant != Variant::TransH) throw std::invalid_argument("constraint penalty is defined for TransH only");
    double total = 0.0;
    for (std::size_t e = 0; e < model.entities.rows(); ++e)
        total += std::max(0.0, squared_norm(model.entities.row(e)) - 1.0);
    for (std::size_t r = 0; r < model.relations.rows(); ++r) {
        const auto d = model.relations.row(r);
        const double dd = squared_norm(d);
        if (dd == 0.0) continue;
        const double wd = dot(model.normals.row(r), d);
        total += std::max(0.0, wd * wd / dd - epsilon * epsilon);
    }
    return total;
}

namespace {

constexpr double kFeasibleTol = 1e-12;

void fill_uniform(std::span<double> row, double bound, Rng& rng) {
    for (auto& x : row) x = rng.uniform(-bound, bound);
}

void scale_row(std::span<double> row, double s) {
    for (auto& x : row) x *= s;
}

// Returns true when the row had to be redrawn.
bool make_unit(std::span<double> row, Rng& rng) {
    double n = l2_norm(row);
    if (std::abs(n - 1.0) <= kFeasibleTol) return false;
    bool redrawn = false;
    while (n == 0.0) {
        fill_uniform(row, 6.0 / std::sqrt(static_cast<double>(row.size())), rng);
        n = l2_norm(row);
        redrawn = true;
    }
    scale_row(row, 1.0 / n);
    return redrawn;
}

void clip_unit_ball(std::span<double> row) {
    const double n = l2_norm(row);
    if (n > 1.0 + kFeasibleTol) scale_row(row, 1.0 / n);
}

// ||M e|| <= 1 by shrinking e.
void clip_projected(std::span<double> e, std::span<const double> m, std::size_t d) {
    const std::size_t k = e.size();
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        double v = 0.0;
        for (std::size_t j = 0; j < k; ++j) v += m[i * k + j] * e[j];
        s += v * v;
    }
    const double n = std::sqrt(s);
    if (n > 1.0 + kFeasibleTol) scale_row(e, 1.0 / n);
}

}  // namespace

std::size_t enforce_norm_constraints(TranslationalModel& model, Rng& rng) {
    std::size_t redrawn = 0;
    for (std::size_t e = 0; e < model.entities.rows(); ++e) {
        if (model.variant == Variant::TransE)
            redrawn += make_unit(model.entities.row(e), rng);
        else
            clip_unit_ball(model.entities.row(e));
    }
    if (model.variant == Variant::TransH)
        for (std::size_t r = 0; r < model.normals.rows(); ++r) redrawn += make_unit(model.normals.row(r), rng);
    return redrawn;
}

void TrainConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument(what); };
    if (dim == 0) fail("dim must be positive");
    if (relation_dim == 0) fail("relation_dim must be positive");
    if (!(margin > 0.0)) fail("margin must be positive");
    if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
    if (batch_size == 0) fail("batch_size must be positive");
    if (!(soft_weight >= 0.0)) fail("soft_weight must be nonnegative");
    if (!(epsilon > 0.0)) fail("epsilon must be positive");
    if (workers == 0) fail("workers must be positive");
}

TranslationalModel init_translational(const KnowledgeGraph& g, Variant variant, const TrainConfig& config) {
    config.validate();
    TranslationalModel m;
    m.variant = variant;
    m.norm = config.norm;
    m.dim = config.dim;
    m.relation_dim = variant == Variant::TransR ? config.relation_dim : config.dim;
    m.entity_labels = g.entities().labels();
    m.relation_labels = g.relations().labels();
    const std::size_t ne = g.entity_count(), nr = g.relation_count();
    Rng rng(mix_seed(config.seed, 0x1417));
    const double ebound = 6.0 / std::sqrt(static_cast<double>(m.dim));
    const double rbound = 6.0 / std::sqrt(static_cast<double>(m.relation_dim));

    m.entities = Matrix(ne, m.dim);
    for (std::size_t i = 0; i < ne; ++i) {
        fill_uniform(m.entities.row(i), ebound, rng);
        make_unit(m.entities.row(i), rng);
    }
    m.relations = Matrix(nr, m.relation_dim);
    for (std::size_t i = 0; i < nr; ++i) {
        fill_uniform(m.relations.row(i), rbound, rng);
        make_unit(m.relations.row(i), rng);
    }
    if (variant == Variant::TransH) {
        m.normals = Matrix(nr, m.dim);
        for (std::size_t i = 0; i < nr; ++i) {
            fill_uniform(m.normals.row(i), ebound, rng);
            make_unit(m.normals.row(i), rng);
        }
    }
    if (variant == Variant::TransR) {
        m.projections = Matrix(nr, m.relation_dim * m.dim);
        for (std::size_t i = 0; i < nr; ++i)
            for (std::size_t j = 0; j < std::min(m.dim, m.relation_dim); ++j) m.projections(i, j * m.dim + j) = 1.0;
    }
    return m;
}

Corrupter::Corrupter(const KnowledgeGraph& g, Corruption strategy)
    : entity_count_(g.entity_count()), strategy_(strategy), head_probability_(g.relation_count(), 0.5) {
    if (entity_count_ < 2) throw std::invalid_argument("corruption needs at least two entities");
    if (strategy == Corruption::Bernoulli) {
        const auto stats = all_relation_stats(g);
        for (std::size_t r = 0; r < stats.size(); ++r) {
            const double sum = stats[r].tails_per_head + stats[r].heads_per_tail;
            if (sum > 0.0) head_probability_[r] = stats[r].tails_per_head / sum;
        }
    }
}

double Corrupter::head_probability(RelationId r) const { return head_probability_.at(r); }

Triple Corrupter::operator()(const Triple& t, Rng& rng) const {
    Triple out = t;
    const bool head = rng.uniform() < head_probability_[t.relation];
    EntityId& slot = head ? out.head : out.tail;
    const EntityId original = slot;
    // Draw from the other |E|-1 entities directly instead of rejecting.
    auto pick = static_cast<EntityId>(rng.below(entity_count_ - 1));
    slot = pick >= original ? pick + 1 : pick;
    return out;
}

Triple corrupt_triple(const KnowledgeGraph& g, const Triple& t, Corruption strategy, Rng& rng) {
    return Corrupter(g, strategy)(t, rng);
}

namespace {

enum class Table : std::uint64_t { Entity = 0, Relation = 1, Normal = 2, Projection = 3 };

// Row-sparse gradient accumulator.
class SparseGrad {
public:
    std::span<double> row(Table table, std::size_t r, std::size_t width) {
        const std::uint64_t key = (static_cast<std::uint64_t>(table) << 32) | r;
        auto [it, inserted] = offset_.try_emplace(key, buf_.size());
        if (inserted) {
            keys_.push_back(key);
            buf_.resize(buf_.size() + width, 0.0);
        }
        return {buf_.data() + it->second, width};
    }

    void merge(const SparseGrad& other, const TranslationalModel& m) {
        for (const auto key : other.keys_) {
            const auto [table, r] = split(key);
            const auto width = row_width(m, table);
            auto dst = row(table, r, width);
            const double* src = other.buf_.data() + other.offset_.at(key);
            for (std::size_t i = 0; i < width; ++i) dst[i] += src[i];
        }
        pairs_.insert(pairs_.end(), other.pairs_.begin(), other.pairs_.end());
    }

    template <class Fn>
    void for_each(const TranslationalModel& m, Fn&& fn) {
        for (const auto key : keys_) {
            const auto [table, r] = split(key);
            fn(table, r, std::span<const double>(buf_.data() + offset_.at(key), row_width(m, table)));
        }
    }

    void note_pair(EntityId e, RelationId r) { pairs_.emplace_back(e, r); }
    const std::vector<std::pair<EntityId, RelationId>>& pairs() const { return pairs_; }

    void clear() {
        offset_.clear();
        keys_.clear();
        buf_.clear();
        pairs_.clear();
    }

    static std::size_t row_width(const TranslationalModel& m, Table table) {
        switch (table) {
            case Table::Entity: return m.dim;
            case Table::Relation: return m.relation_dim;
            case Table::Normal: return m.dim;
            case Table::Projection: return m.dim * m.relation_dim;
        }
        return 0;
    }

private:
    static std::pair<Table, std::size_t> split(std::uint64_t key) {
        return {static_cast<Table>(key >> 32), static_cast<std::size_t>(key & 0xFFFFFFFFULL)};
    }

    std::unordered_map<std::uint64_t, std::size_t> offset_;
    std::vector<std::uint64_t> keys_;
    std::vector<double> buf_;
    std::vector<std::pair<EntityId, RelationId>> pairs_;
};

// Adds scale * d(score)/d(params) of triple t into grad.
void backward(const TranslationalModel& m, const Triple& t, double scale, SparseGrad& grad) {
    // Insert every row first: spans into the accumulator are invalidated by
    // later insertions.
    grad.row(Table::Entity, t.head, m.dim);
    grad.row(Table::Entity, t.tail, m.dim);
    grad.row(Table::Relation, t.relation, m.relation_dim);
    if (m.variant == Variant::TransH) grad.row(Table::Normal, t.relation, m.dim);
    if (m.variant == Variant::TransR) grad.row(Table::Projection, t.relation, m.dim * m.relation_dim);

    const auto h = m.entities.row(t.head);
    const auto tl = m.entities.row(t.tail);
    auto gh = grad.row(Table::Entity, t.head, m.dim);
    auto gt = grad.row(Table::Entity, t.tail, m.dim);
    auto gr = grad.row(Table::Relation, t.relation, m.relation_dim);
    switch (m.variant) {
        case Variant::TransE: transe_backward(h, m.relations.row(t.relation), tl, m.norm, scale, gh, gr, gt); break;
        case Variant::TransH:
            transh_backward(h, tl, m.normals.row(t.relation), m.relations.row(t.relation), scale, gh, gt,
                            grad.row(Table::Normal, t.relation, m.dim), gr);
            break;
        case Variant::TransR:
            transr_backward(h, tl, m.relations.row(t.relation), m.projections.row(t.relation), scale, gh, gt, gr,
                            grad.row(Table::Projection, t.relation, m.dim * m.relation_dim));
            grad.note_pair(t.head, t.relation);
            grad.note_pair(t.tail, t.relation);
            break;
    }
}

// Gradient of C * (soft constraints) restricted to the rows in the batch.
void add_penalty_gradient(const TranslationalModel& m, double weight, double epsilon, SparseGrad& grad) {
    std::vector<std::size_t> entity_rows, relation_rows;
    grad.for_each(m, [&](Table table, std::size_t r, std::span<const double>) {
        if (table == Table::Entity) entity_rows.push_back(r);
        if (table == Table::Relation) relation_rows.push_back(r);
    });
    for (const auto e : entity_rows) {
        const auto v = m.entities.row(e);
        if (squared_norm(v) <= 1.0) continue;
        axpy(2.0 * weight, v, grad.row(Table::Entity, e, m.dim));
    }
    for (const auto r : relation_rows) {
        const auto w = m.normals.row(r);
        const auto d = m.relations.row(r);
        const double dd = squared_norm(d);
        if (dd == 0.0) continue;
        const double wd = dot(w, d);
        if (wd * wd / dd <= epsilon * epsilon) continue;
        // d/dw = 2 (w.d) d / |d|^2 ; d/dd = 2 (w.d) w / |d|^2 - 2 (w.d)^2 d / |d|^4
        axpy(weight * 2.0 * wd / dd, d, grad.row(Table::Normal, r, m.dim));
        auto gd = grad.row(Table::Relation, r, m.relation_dim);
        axpy(weight * 2.0 * wd / dd, w, gd);
        axpy(-weight * 2.0 * wd * wd / (dd * dd), d, gd);
    }
}

std::span<double> param_row(TranslationalModel& m, Table table, std::size_t r) {
    switch (table) {
        case Table::Entity: return m.entities.row(r);
        case Table::Relation: return m.relations.row(r);
        case Table::Normal: return m.normals.row(r);
        case Table::Projection: return m.projections.row(r);
    }
    return {};
}

}  // namespace

TrainResult train_translational(const KnowledgeGraph& g, Variant variant, const TrainConfig& config,
                                const EpochCallback& on_epoch) {
    config.validate();
    if (g.triple_count() == 0) throw std::invalid_argument("cannot train on an empty graph");
    TrainResult result{init_translational(g, variant, config), {}, 0};
    auto& m = result.model;
    const Corrupter corrupt(g, config.corruption);
    const auto& triples = g.triples();
    const std::size_t n = triples.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    std::vector<SparseGrad> grads(std::max<std::size_t>(1, config.workers));
    std::vector<double> worker_loss(grads.size());

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const std::uint64_t epoch_seed = mix_seed(config.seed, epoch);
        Rng(epoch_seed).shuffle(order.begin(), order.end());
        double epoch_loss = 0.0;

        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t len = std::min(config.batch_size, n - start);
            for (auto& gr : grads) gr.clear();
            std::fill(worker_loss.begin(), worker_loss.end(), 0.0);

            parallel_chunks(len, config.workers, [&](std::size_t w, std::size_t b, std::size_t e) {
                for (std::size_t i = b; i < e; ++i) {
                    const std::size_t pos = start + i;
                    const Triple& positive = triples[order[pos]];
                    Rng rng(mix_seed(epoch_seed, pos + 1));
                    const Triple negative = corrupt(positive, rng);
                    const double sp = m.score(positive);
                    const double sn = m.score(negative);
                    const double slack = sp + config.margin - sn;
                    if (slack <= 0.0) continue;  // zero subgradient at and past the hinge
                    worker_loss[w] += slack;
                    backward(m, positive, 1.0, grads[w]);
                    backward(m, negative, -1.0, grads[w]);
                }
            });
            for (std::size_t w = 1; w < grads.size(); ++w) grads[0].merge(grads[w], m);
            for (const double l : worker_loss) epoch_loss += l;

            SparseGrad& grad = grads[0];
            if (variant == Variant::TransH && config.soft_weight > 0.0)
                add_penalty_gradient(m, config.soft_weight, config.epsilon, grad);

            std::vector<std::pair<Table, std::size_t>> touched;
            grad.for_each(m, [&](Table table, std::size_t r, std::span<const double> gv) {
                axpy(-config.learning_rate, gv, param_row(m, table, r));
                touched.emplace_back(table, r);
            });

            Rng fix_rng(mix_seed(epoch_seed, 0xC0FFEE + start));
            for (const auto& [table, r] : touched) {
                if (table == Table::Entity) {
                    if (variant == Variant::TransE)
                        result.reinitialized_rows += make_unit(m.entities.row(r), fix_rng);
                    else
                        clip_unit_ball(m.entities.row(r));
                } else if (table == Table::Normal) {
                    result.reinitialized_rows += make_unit(m.normals.row(r), fix_rng);
                }
            }
            if (variant == Variant::TransR)
                for (const auto& [e, r] : grad.pairs())
                    clip_projected(m.entities.row(e), m.projections.row(r), m.relation_dim);
        }

        const double mean = epoch_loss / static_cast<double>(n);
        result.epoch_loss.push_back(mean);
        if (on_epoch) {
            EpochReport report{epoch, mean, 0.0};
            if (variant == Variant::TransH) report.penalty = transh_constraint_penalty(m, config.epsilon);
            on_epoch(report, m);
        }
    }
    return result;
}

}  // namespace kgforge
