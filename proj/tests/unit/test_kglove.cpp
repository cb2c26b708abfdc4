#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "kgforge/error.hpp"
#include "kgforge/kglove.hpp"
#include "test_support.hpp"

using namespace kgforge;
using kgforge::testing::graph_from_tsv;
using kgforge::testing::numeric_gradient;
using kgforge::testing::random_graph;
using kgforge::testing::relative_error;

namespace {

double weight_to(const WeightedGraph& wg, EntityId from, RelationId rel, EntityId to) {
    for (const auto& e : wg.out[from])
        if (e.relation == rel && e.target == to) return e.weight;
    return -1.0;
}

std::vector<double> dense(const PaintResult& r, std::size_t n) {
    std::vector<double> d(n, 0.0);
    for (const auto& [v, s] : r.scores) d[v] = s;
    return d;
}

std::vector<double> flatten(const GloveParams& p) {
    std::vector<double> v(p.w.data().begin(), p.w.data().end());
    v.insert(v.end(), p.w_context.data().begin(), p.w_context.data().end());
    v.insert(v.end(), p.b.begin(), p.b.end());
    v.insert(v.end(), p.b_context.begin(), p.b_context.end());
    return v;
}

GloveParams unflatten(const std::vector<double>& v, std::size_t n, std::size_t k) {
    GloveParams p{Matrix(n, k), Matrix(n, k), std::vector<double>(n), std::vector<double>(n)};
    std::size_t i = 0;
    for (auto& x : p.w.data()) x = v[i++];
    for (auto& x : p.w_context.data()) x = v[i++];
    for (auto& x : p.b) x = v[i++];
    for (auto& x : p.b_context) x = v[i++];
    return p;
}

SparseCooccurrence random_matrix(Rng& rng, std::size_t n, double density) {
    SparseCooccurrence x;
    for (std::size_t i = 0; i < n; ++i) x.tokens.push_back("t" + std::to_string(i));
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = 0; j < n; ++j)
            if (rng.uniform() < density) x.entries.push_back({i, j, rng.uniform(0.01, 5.0)});
    return x;
}

}  // namespace

TEST_CASE("weigh_edges examples") {
    const auto star = graph_from_tsv("v\tr\ta\nv\tr\tb\nv\tr\tc\nv\tr\td\n");
    const auto u = weigh_edges(star, EdgeWeighting::Uniform);
    REQUIRE(u.out[0].size() == 4);
    for (const auto& e : u.out[0]) CHECK(e.weight == 0.25);
    CHECK(u.dangling(1));

    // p is used three times globally, q once.
    const auto g = graph_from_tsv("v\tp\ta\nv\tq\tb\nx\tp\ty\nz\tp\ty\n");
    const auto p = *g.relations().find("p");
    const auto q = *g.relations().find("q");
    const auto a = *g.entities().find("a");
    const auto b = *g.entities().find("b");
    const auto pf = weigh_edges(g, EdgeWeighting::PredicateFrequency);
    CHECK(weight_to(pf, 0, p, a) == doctest::Approx(0.75));
    CHECK(weight_to(pf, 0, q, b) == doctest::Approx(0.25));
    const auto ipf = weigh_edges(g, EdgeWeighting::InversePredicateFrequency);
    CHECK(weight_to(ipf, 0, p, a) == doctest::Approx(0.25));
    CHECK(weight_to(ipf, 0, q, b) == doctest::Approx(0.75));

    CHECK_THROWS_AS(parse_edge_weighting("pagerank"), std::invalid_argument);
    CHECK(parse_edge_weighting("ipf") == EdgeWeighting::InversePredicateFrequency);
}

TEST_CASE("weights are normalized and positive on random graphs") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const auto g = random_graph(rng, 1 + rng.below(12), 1 + rng.below(4), rng.below(40));
        for (const auto s : {EdgeWeighting::Uniform, EdgeWeighting::PredicateFrequency,
                             EdgeWeighting::InversePredicateFrequency}) {
            const auto wg = weigh_edges(g, s);
            for (const auto& row : wg.out) {
                if (row.empty()) continue;
                double total = 0.0;
                for (const auto& e : row) {
                    CHECK(e.weight > 0.0);
                    total += e.weight;
                }
                CHECK(std::abs(total - 1.0) <= 1e-9);
            }
        }
    }
}

TEST_CASE("exact_ppr examples") {
    KnowledgeGraph single;
    single.add_entity("a");
    const auto s = exact_ppr(weigh_edges(single, EdgeWeighting::Uniform), 0, 0.15);
    CHECK(s == std::vector<double>{1.0});

    // Closed form: p(a) = a + (1-a) p(b), p(b) = (1-a) p(a).
    const auto cycle = weigh_edges(graph_from_tsv("a\tr\tb\nb\tr\ta\n"), EdgeWeighting::Uniform);
    const auto p = exact_ppr(cycle, 0, 0.5);
    CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    CHECK_THROWS_AS(exact_ppr(cycle, 5, 0.5), std::out_of_range);
    CHECK_THROWS_AS(exact_ppr(cycle, 0, 1.0), std::invalid_argument);

    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const auto g = random_graph(rng, 1 + rng.below(12), 2, rng.below(30));
        const auto d = exact_ppr(weigh_edges(g, EdgeWeighting::Uniform), 0, 0.2);
        double total = 0.0;
        for (const auto x : d) {
            CHECK(x >= 0.0);
            total += x;
        }
        CHECK(std::abs(total - 1.0) <= 1e-9);
    }
}

TEST_CASE("approx_ppr examples") {
    KnowledgeGraph single;
    single.add_entity("a");
    const auto r = approx_ppr(weigh_edges(single, EdgeWeighting::Uniform), 0, 0.15, 1e-6);
    REQUIRE(r.scores.size() == 1);
    CHECK(r.scores[0].first == 0);
    CHECK(r.scores[0].second == doctest::Approx(0.15));
    CHECK(r.discarded == doctest::Approx(0.85));

    const auto cycle = weigh_edges(graph_from_tsv("a\tr\tb\nb\tr\ta\n"), EdgeWeighting::Uniform);
    const auto c = dense(approx_ppr(cycle, 0, 0.5, 1e-9), 2);
    CHECK(std::abs(c[0] - 2.0 / 3.0) <= 1e-6);
    CHECK(std::abs(c[1] - 1.0 / 3.0) <= 1e-6);

    const auto g = graph_from_tsv("a\tr\tb\na\tr\tc\nb\tr\tc\nc\tr\ta\n");
    const auto wg = weigh_edges(g, EdgeWeighting::Uniform);
    for (const double eps : {0.85, 0.9, 0.99}) {
        const auto only = approx_ppr(wg, 0, 0.15, eps);
        REQUIRE(only.scores.size() == 1);
        CHECK(only.scores[0].first == 0);
    }
}

TEST_CASE("approx_ppr conservation, monotonicity and agreement with exact_ppr") {
    Rng rng(2718);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.below(12);
        const auto g = random_graph(rng, n, 1 + rng.below(3), rng.below(3 * n));
        const auto wg = weigh_edges(g, static_cast<EdgeWeighting>(rng.below(3)));
        const auto focus = static_cast<EntityId>(rng.below(n));
        const double alpha = rng.uniform(0.05, 0.9);

        std::set<EntityId> previous;
        for (const double eps : {0.5, 0.1, 1e-2, 1e-3, 1e-4, 1e-6}) {
            const auto r = approx_ppr(wg, focus, alpha, eps);
            CHECK(std::abs(r.total() - 1.0) <= 1e-9);
            std::set<EntityId> now;
            for (const auto& [v, s] : r.scores) {
                CHECK(s > 0.0);
                now.insert(v);
            }
            CHECK(std::includes(now.begin(), now.end(), previous.begin(), previous.end()));
            previous = now;
        }

        const auto r = approx_ppr(wg, focus, alpha, 1e-9);
        const auto exact = exact_ppr(wg, focus, alpha);
        double l1 = 0.0;
        const auto d = dense(r, n);
        for (std::size_t i = 0; i < n; ++i) l1 += std::abs(d[i] / (1.0 - r.discarded) - exact[i]);
        CHECK(l1 <= 1e-3);
    }
}

TEST_CASE("build_cooccurrence examples") {
    CHECK(build_cooccurrence(KnowledgeGraph{}, {}).entries.empty());

    const auto g = graph_from_tsv("a\tp\tb\n");
    const auto x = build_cooccurrence(g, {});
    CHECK(x.at(0, 1).has_value());
    CHECK(x.at(1, 0).has_value());
    CHECK(!x.at(0, 0).has_value());
    CHECK(!x.at(1, 1).has_value());
    CHECK(*x.at(0, 1) == doctest::Approx(1.0));

    const auto five = graph_from_tsv("a\tp\tb\nb\tp\tc\nc\tq\ta\nc\tp\td\nd\tq\te\na\tq\te\nb\tq\td\n");
    for (const auto w : {EdgeWeighting::Uniform, EdgeWeighting::PredicateFrequency,
                         EdgeWeighting::InversePredicateFrequency}) {
        CooccurrenceParams params;
        params.weighting = w;
        params.epsilon = 1e-9;
        const auto approx = build_cooccurrence(five, params);
        const auto exact = build_cooccurrence_exact(five, params);
        REQUIRE(approx.nnz() == exact.nnz());
        for (std::size_t i = 0; i < approx.nnz(); ++i) {
            CHECK(approx.entries[i].focus == exact.entries[i].focus);
            CHECK(approx.entries[i].context == exact.entries[i].context);
            CHECK(std::abs(approx.entries[i].weight - exact.entries[i].weight) <= 1e-5);
        }
    }
}

TEST_CASE("co-occurrence rows are stochastic and deterministic across workers") {
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        const auto g = random_graph(rng, 2 + rng.below(15), 2, rng.below(40));
        CooccurrenceParams params;
        params.epsilon = 1e-3;
        const auto x = build_cooccurrence(g, params);
        std::vector<double> sums(x.size(), 0.0);
        for (const auto& e : x.entries) {
            CHECK(e.weight > 0.0);
            CHECK(e.focus != e.context);
            sums[e.focus] += e.weight;
        }
        for (const auto s : sums) CHECK((s == 0.0 || std::abs(s - 1.0) <= 1e-9));
        CHECK(std::is_sorted(x.entries.begin(), x.entries.end(), [](const auto& a, const auto& b) {
            return std::pair{a.focus, a.context} < std::pair{b.focus, b.context};
        }));
        params.workers = 4;
        CHECK(build_cooccurrence(g, params) == x);
    }
}

TEST_CASE("co-occurrence file formats") {
    const auto g = graph_from_tsv("a\tp\tb\nb\tq\tc\n");
    const auto x = build_cooccurrence(g, {});
    std::stringstream bin;
    write_cooccurrence_binary(bin, x);
    CHECK(bin.str().size() == 16 + 16 * x.nnz());
    CHECK(read_cooccurrence_binary(bin, x.tokens) == x);

    std::stringstream bad(bin.str().substr(0, 20));
    CHECK_THROWS_AS(read_cooccurrence_binary(bad, x.tokens), ParseError);

    std::ostringstream text;
    write_cooccurrence_text(text, x);
    CHECK(text.str().find("a\tb\t") != std::string::npos);
}

TEST_CASE("glove weighting function") {
    CHECK(glove_weight(10.0, 10.0, 0.75) == 1.0);
    CHECK(glove_weight(50.0, 10.0, 0.75) == 1.0);
    CHECK(glove_weight(5.0, 10.0, 0.75) == doctest::Approx(0.5946).epsilon(1e-4));
}

TEST_CASE("glove gradient matches finite differences") {
    Rng rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng.below(4);
        const std::size_t k = 1 + rng.below(5);
        const auto x = random_matrix(rng, n, 0.6);
        GloveConfig cfg;
        cfg.dim = k;
        cfg.seed = trial;
        auto params = init_glove(n, cfg);
        for (auto& v : params.w.data()) v = rng.uniform(-1, 1);
        for (auto& v : params.w_context.data()) v = rng.uniform(-1, 1);
        const double x_max = rng.uniform(0.5, 3.0);

        GloveParams grad{Matrix(n, k), Matrix(n, k), std::vector<double>(n), std::vector<double>(n)};
        glove_cost(x, params, x_max, 0.75, &grad);
        const auto numeric = numeric_gradient(
            [&](const std::vector<double>& v) { return glove_cost(x, unflatten(v, n, k), x_max, 0.75); },
            flatten(params));
        CHECK(relative_error(flatten(grad), numeric) <= 1e-4);
    }
}

TEST_CASE("glove single entry is solved exactly") {
    SparseCooccurrence x{{"a"}, {{0, 0, 1.0}}};
    GloveConfig cfg;
    cfg.dim = 4;
    cfg.epochs = 500;
    const auto r = train_glove(x, cfg);
    CHECK(r.epoch_cost.back() < 1e-6);
    CHECK(r.x_max == 1.0);
}

TEST_CASE("glove cost is non-increasing on a frozen 20x20 matrix") {
    Rng rng(5);
    const auto x = random_matrix(rng, 20, 0.3);
    int monotone = 0;
    for (const std::uint64_t seed : {1, 2, 3}) {
        GloveConfig cfg;
        cfg.dim = 8;
        cfg.epochs = 50;
        cfg.seed = seed;
        const auto r = train_glove(x, cfg);
        bool ok = r.epoch_cost.back() < r.epoch_cost.front();
        for (std::size_t i = 1; i < r.epoch_cost.size(); ++i) ok = ok && r.epoch_cost[i] <= r.epoch_cost[i - 1];
        monotone += ok;
    }
    CHECK(monotone >= 2);
}

TEST_CASE("glove zero epochs, determinism and errors") {
    Rng rng(8);
    const auto x = random_matrix(rng, 6, 0.5);
    GloveConfig cfg;
    cfg.dim = 3;
    cfg.epochs = 0;
    cfg.seed = 4;
    const auto init = init_glove(6, cfg);
    const auto r0 = train_glove(x, cfg);
    CHECK(r0.params == init);
    cfg.epochs = 5;
    CHECK(train_glove(x, cfg).embeddings == train_glove(x, cfg).embeddings);
    const auto r = train_glove(x, cfg);
    for (std::size_t i = 0; i < r.params.w.data().size(); ++i)
        CHECK(r.embeddings.vectors.data()[i] == r.params.w.data()[i] + r.params.w_context.data()[i]);

    auto bad = x;
    bad.entries.push_back({0, 1, 0.0});
    CHECK_THROWS_AS(train_glove(bad, cfg), std::invalid_argument);
    CHECK(default_x_max(SparseCooccurrence{{"a", "b"}, {{0, 1, 2.0}}}) == 2.0);
}
