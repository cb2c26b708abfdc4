#include "kgforge/kglove.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>

#include "kgforge/embeddings.hpp"
#include "kgforge/error.hpp"
#include "kgforge/parallel.hpp"
#include "kgforge/rng.hpp"

namespace kgforge {

std::string_view to_string(EdgeWeighting w) {
    switch (w) {
        case EdgeWeighting::Uniform: return "uniform";
        case EdgeWeighting::PredicateFrequency: return "predicate-frequency";
        case EdgeWeighting::InversePredicateFrequency: return "inverse-predicate-frequency";
    }
    return "uniform";
}

EdgeWeighting parse_edge_weighting(std::string_view s) {
    if (s == "uniform") return EdgeWeighting::Uniform;
    if (s == "predicate-frequency" || s == "pf") return EdgeWeighting::PredicateFrequency;
    if (s == "inverse-predicate-frequency" || s == "ipf") return EdgeWeighting::InversePredicateFrequency;
    throw std::invalid_argument("unknown edge weighting '" + std::string(s) +
                                "' (expected uniform, predicate-frequency or inverse-predicate-frequency)");
}

WeightedGraph weigh_edges(const KnowledgeGraph& g, EdgeWeighting strategy) {
    std::vector<std::size_t> frequency(g.relation_count(), 0);
    for (const auto& t : g.triples()) ++frequency[t.relation];

    WeightedGraph wg;
    wg.out.resize(g.entity_count());
    for (EntityId v = 0; v < g.entity_count(); ++v) {
        auto& row = wg.out[v];
        double total = 0.0;
        for (const auto& e : g.out_edges(v)) {
            const double f = static_cast<double>(frequency[e.relation]);
            double raw = 1.0;
            if (strategy == EdgeWeighting::PredicateFrequency) raw = f;
            if (strategy == EdgeWeighting::InversePredicateFrequency) raw = 1.0 / f;
            row.push_back({e.relation, e.target, raw});
            total += raw;
        }
        for (auto& e : row) e.weight /= total;
    }
    return wg;
}

namespace {

void check_ppr_args(const WeightedGraph& wg, EntityId focus, double alpha) {
    if (focus >= wg.size()) throw std::out_of_range("unknown focus entity");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
}

}  // namespace

std::vector<double> exact_ppr(const WeightedGraph& wg, EntityId focus, double alpha) {
    check_ppr_args(wg, focus, alpha);
    const std::size_t n = wg.size();
    std::vector<double> p(n, 0.0), next(n);
    p[focus] = 1.0;
    for (int iter = 0; iter < 100000; ++iter) {
        std::fill(next.begin(), next.end(), 0.0);
        double returned = alpha;
        for (EntityId v = 0; v < n; ++v) {
            if (p[v] == 0.0) continue;
            if (wg.out[v].empty()) {
                returned += (1.0 - alpha) * p[v];
                continue;
            }
            for (const auto& e : wg.out[v]) next[e.target] += (1.0 - alpha) * p[v] * e.weight;
        }
        next[focus] += returned;
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) change += std::abs(next[i] - p[i]);
        p.swap(next);
        if (change < 1e-12) break;
    }
    return p;
}

double PaintResult::total() const {
    double s = discarded + residual;
    for (const auto& [_, v] : scores) s += v;
    return s;
}

PaintResult approx_ppr(const WeightedGraph& wg, EntityId focus, double alpha, double epsilon) {
    check_ppr_args(wg, focus, alpha);
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");

    std::map<EntityId, double> pending;
    std::set<std::pair<double, EntityId>> queue;  // (-paint, node): largest parcel first
    std::map<EntityId, double> score;
    PaintResult result;

    auto add_paint = [&](EntityId v, double amount) {
        auto [it, fresh] = pending.try_emplace(v, 0.0);
        if (!fresh) queue.erase({-it->second, v});
        it->second += amount;
        queue.insert({-it->second, v});
    };

    add_paint(focus, 1.0);
    bool first = true;
    while (!queue.empty()) {
        const auto [neg, v] = *queue.begin();
        const double paint = -neg;
        if (!first && paint <= epsilon) break;
        first = false;
        queue.erase(queue.begin());
        pending.erase(v);
        score[v] += alpha * paint;
        const double passed = (1.0 - alpha) * paint;
        if (wg.out[v].empty()) {
            result.discarded += passed;
            continue;
        }
        for (const auto& e : wg.out[v]) add_paint(e.target, passed * e.weight);
    }
    for (const auto& [_, p] : pending) result.residual += p;
    for (const auto& [v, s] : score)
        if (s > 0.0) result.scores.emplace_back(v, s);
    return result;
}

std::optional<double> SparseCooccurrence::at(std::uint32_t focus, std::uint32_t context) const {
    const auto it = std::lower_bound(entries.begin(), entries.end(), std::pair{focus, context},
                                     [](const CooccurrenceEntry& e, const std::pair<std::uint32_t, std::uint32_t>& k) {
                                         return std::pair{e.focus, e.context} < k;
                                     });
    if (it == entries.end() || it->focus != focus || it->context != context) return std::nullopt;
    return it->weight;
}

void CooccurrenceParams::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    if (workers == 0) throw std::invalid_argument("workers must be positive");
}

namespace {

// Dense scores for one focus from one direction, normalized to a distribution.
using PprFn = std::vector<double> (*)(const WeightedGraph&, EntityId, const CooccurrenceParams&);

std::vector<double> paint_scores(const WeightedGraph& wg, EntityId focus, const CooccurrenceParams& p) {
    const auto r = approx_ppr(wg, focus, p.alpha, p.epsilon);
    std::vector<double> dense(wg.size(), 0.0);
    const double keep = 1.0 - r.discarded;
    for (const auto& [v, s] : r.scores) dense[v] = keep > 0.0 ? s / keep : 0.0;
    return dense;
}

std::vector<double> exact_scores(const WeightedGraph& wg, EntityId focus, const CooccurrenceParams& p) {
    return exact_ppr(wg, focus, p.alpha);
}

SparseCooccurrence assemble(const KnowledgeGraph& g, const CooccurrenceParams& params, PprFn ppr) {
    params.validate();
    const auto forward = weigh_edges(g, params.weighting);
    const auto backward = weigh_edges(reverse_graph(g), params.weighting);
    const std::size_t n = g.entity_count();

    std::vector<std::vector<CooccurrenceEntry>> rows(n);
    parallel_chunks(n, params.workers, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const auto focus = static_cast<EntityId>(i);
            auto dense = ppr(forward, focus, params);
            const auto rev = ppr(backward, focus, params);
            for (std::size_t j = 0; j < n; ++j) dense[j] += rev[j];
            dense[i] = 0.0;
            double total = 0.0;
            for (const auto x : dense) total += x;
            if (!(total > 0.0)) continue;
            for (std::uint32_t j = 0; j < n; ++j)
                if (dense[j] > 0.0) rows[i].push_back({focus, j, dense[j] / total});
        }
    });

    SparseCooccurrence x;
    x.tokens = g.entities().labels();
    for (auto& r : rows) x.entries.insert(x.entries.end(), r.begin(), r.end());
    return x;
}

void put_u32(std::ostream& out, std::uint32_t v) {
    const char b[4] = {char(v & 0xFF), char((v >> 8) & 0xFF), char((v >> 16) & 0xFF), char((v >> 24) & 0xFF)};
    out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    put_u32(out, static_cast<std::uint32_t>(v));
    put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw ParseError(0, "co-occurrence: truncated file");
    return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) | (std::uint32_t{b[3]} << 24);
}

std::uint64_t get_u64(std::istream& in) {
    const std::uint64_t lo = get_u32(in);
    return lo | (std::uint64_t{get_u32(in)} << 32);
}

}  // namespace

SparseCooccurrence build_cooccurrence(const KnowledgeGraph& g, const CooccurrenceParams& params) {
    return assemble(g, params, paint_scores);
}

SparseCooccurrence build_cooccurrence_exact(const KnowledgeGraph& g, const CooccurrenceParams& params) {
    return assemble(g, params, exact_scores);
}

void write_cooccurrence_binary(std::ostream& out, const SparseCooccurrence& x) {
    put_u64(out, x.size());
    put_u64(out, x.nnz());
    for (const auto& e : x.entries) {
        put_u32(out, e.focus);
        put_u32(out, e.context);
        put_u64(out, std::bit_cast<std::uint64_t>(e.weight));
    }
}

SparseCooccurrence read_cooccurrence_binary(std::istream& in, std::vector<std::string> tokens) {
    SparseCooccurrence x;
    const auto n = get_u64(in);
    const auto nnz = get_u64(in);
    if (n != tokens.size()) throw ParseError(0, "co-occurrence: token count does not match vocabulary");
    x.tokens = std::move(tokens);
    for (std::uint64_t i = 0; i < nnz; ++i) {
        CooccurrenceEntry e{};
        e.focus = get_u32(in);
        e.context = get_u32(in);
        e.weight = std::bit_cast<double>(get_u64(in));
        if (e.focus >= n || e.context >= n) throw ParseError(0, "co-occurrence: token id out of range");
        if (!(e.weight > 0.0) || !std::isfinite(e.weight)) throw ParseError(0, "co-occurrence: nonpositive weight");
        x.entries.push_back(e);
    }
    return x;
}

void write_cooccurrence_text(std::ostream& out, const SparseCooccurrence& x) {
    for (const auto& e : x.entries)
        out << x.tokens[e.focus] << '\t' << x.tokens[e.context] << '\t' << format_double(e.weight) << '\n';
}

double glove_weight(double x, double x_max, double exponent) {
    return x >= x_max ? 1.0 : std::pow(x / x_max, exponent);
}

double glove_cost(const SparseCooccurrence& x, const GloveParams& params, double x_max, double exponent,
                  GloveParams* grad) {
    double j = 0.0;
    for (const auto& e : x.entries) {
        const auto wi = params.w.row(e.focus);
        const auto wj = params.w_context.row(e.context);
        const double diff = dot(wi, wj) + params.b[e.focus] + params.b_context[e.context] - std::log(e.weight);
        const double f = glove_weight(e.weight, x_max, exponent);
        j += f * diff * diff;
        if (grad) {
            const double g = 2.0 * f * diff;
            axpy(g, wj, grad->w.row(e.focus));
            axpy(g, wi, grad->w_context.row(e.context));
            grad->b[e.focus] += g;
            grad->b_context[e.context] += g;
        }
    }
    return j;
}

void GloveConfig::validate() const {
    if (dim == 0) throw std::invalid_argument("dim must be positive");
    if (x_max && !(*x_max > 0.0)) throw std::invalid_argument("x_max must be positive");
    if (!(exponent > 0.0)) throw std::invalid_argument("exponent must be positive");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
}

double default_x_max(const SparseCooccurrence& x) {
    if (x.entries.empty()) return 1.0;
    std::vector<double> w;
    w.reserve(x.nnz());
    for (const auto& e : x.entries) w.push_back(e.weight);
    std::sort(w.begin(), w.end());
    const auto idx = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(w.size()))) - 1;
    return w[std::min(idx, w.size() - 1)];
}

GloveParams init_glove(std::size_t tokens, const GloveConfig& config) {
    GloveParams p{Matrix(tokens, config.dim), Matrix(tokens, config.dim), std::vector<double>(tokens),
                  std::vector<double>(tokens)};
    Rng rng(mix_seed(config.seed, 0x6107E));
    const double bound = 0.5 / static_cast<double>(config.dim);
    for (auto& v : p.w.data()) v = rng.uniform(-bound, bound);
    for (auto& v : p.w_context.data()) v = rng.uniform(-bound, bound);
    for (auto& v : p.b) v = rng.uniform(-bound, bound);
    for (auto& v : p.b_context) v = rng.uniform(-bound, bound);
    return p;
}

namespace {

void adagrad_step(std::span<double> param, std::span<const double> grad, std::span<double> accum, double lr) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        param[i] -= lr * grad[i] / std::sqrt(accum[i]);
        accum[i] += grad[i] * grad[i];
    }
}

}  // namespace

GloveResult train_glove(const SparseCooccurrence& x, const GloveConfig& config) {
    config.validate();
    for (const auto& e : x.entries) {
        if (!(e.weight > 0.0) || !std::isfinite(e.weight))
            throw std::invalid_argument("co-occurrence entries must be positive and finite");
        if (e.focus >= x.size() || e.context >= x.size()) throw std::invalid_argument("co-occurrence id out of range");
    }
    const std::size_t n = x.size();
    const std::size_t k = config.dim;
    GloveResult result;
    result.x_max = config.x_max ? *config.x_max : default_x_max(x);
    result.params = init_glove(n, config);
    auto& p = result.params;

    Matrix acc_w(n, k), acc_wc(n, k);
    std::fill(acc_w.data().begin(), acc_w.data().end(), 1.0);
    std::fill(acc_wc.data().begin(), acc_wc.data().end(), 1.0);
    std::vector<double> acc_b(n, 1.0), acc_bc(n, 1.0);
    std::vector<double> gw(k), gwc(k);

    std::vector<std::size_t> order(x.nnz());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        Rng rng(mix_seed(config.seed, epoch));
        rng.shuffle(order.begin(), order.end());
        for (const auto idx : order) {
            const auto& e = x.entries[idx];
            auto wi = p.w.row(e.focus);
            auto wj = p.w_context.row(e.context);
            const double diff = dot(wi, wj) + p.b[e.focus] + p.b_context[e.context] - std::log(e.weight);
            const double g = 2.0 * glove_weight(e.weight, result.x_max, config.exponent) * diff;
            for (std::size_t d = 0; d < k; ++d) {
                gw[d] = g * wj[d];
                gwc[d] = g * wi[d];
            }
            adagrad_step(wi, gw, acc_w.row(e.focus), config.learning_rate);
            adagrad_step(wj, gwc, acc_wc.row(e.context), config.learning_rate);
            const double gb[1] = {g};
            adagrad_step(std::span(&p.b[e.focus], 1), gb, std::span(&acc_b[e.focus], 1), config.learning_rate);
            adagrad_step(std::span(&p.b_context[e.context], 1), gb, std::span(&acc_bc[e.context], 1),
                         config.learning_rate);
        }
        result.epoch_cost.push_back(glove_cost(x, p, result.x_max, config.exponent));
    }

    result.embeddings.tokens = x.tokens;
    result.embeddings.vectors = p.w;
    for (std::size_t i = 0; i < p.w.data().size(); ++i) result.embeddings.vectors.data()[i] += p.w_context.data()[i];
    return result;
}

}  // namespace kgforge
