#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "kgforge/eval.hpp"
#include "kgforge/synth.hpp"
#include "test_support.hpp"

using namespace kgforge;
using kgforge::testing::graph_from_tsv;
using kgforge::testing::random_graph;

namespace {

// Independent ranking: collect all candidate scores, sort, locate the truth.
std::size_t brute_rank(const Scorer& f, const KnowledgeGraph& g, const Triple& t, Slot slot, Setting setting) {
    std::vector<double> scores;
    for (EntityId e = 0; e < g.entity_count(); ++e) {
        Triple c = t;
        (slot == Slot::Head ? c.head : c.tail) = e;
        if (c == t) continue;
        if (setting == Setting::Filtered && std::find(g.triples().begin(), g.triples().end(), c) != g.triples().end())
            continue;
        scores.push_back(f(c));
    }
    std::sort(scores.begin(), scores.end());
    const auto beaten = std::upper_bound(scores.begin(), scores.end(), f(t)) - scores.begin();
    return 1 + static_cast<std::size_t>(beaten);
}

}  // namespace

TEST_CASE("rank_triple examples") {
    const auto g = graph_from_tsv("a\tr\tb\nb\tr\tc\n");
    const Triple t{0, 0, 1};
    const Scorer best = [&](const Triple& x) { return x == t ? 0.0 : 1.0; };
    for (const auto slot : {Slot::Head, Slot::Tail})
        for (const auto setting : {Setting::Raw, Setting::Filtered}) CHECK(rank_triple(best, g, t, slot, setting) == 1);

    const Scorer constant = [](const Triple&) { return 0.5; };
    CHECK(rank_triple(constant, g, t, Slot::Tail, Setting::Raw) == g.entity_count());
    CHECK(rank_triple(constant, g, t, Slot::Head, Setting::Raw) == g.entity_count());
    CHECK_THROWS_AS(rank_triple(constant, g, Triple{0, 0, 9}, Slot::Tail, Setting::Raw), std::out_of_range);

    // Hand-set TransE vectors on three entities.
    TranslationalModel m;
    m.variant = Variant::TransE;
    m.norm = Norm::L2;
    m.dim = 2;
    m.relation_dim = 2;
    m.entities = Matrix(3, 2);
    m.relations = Matrix(1, 2);
    const double e[3][2] = {{0, 0}, {1, 0}, {3, 0}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) m.entities(i, j) = e[i][j];
    m.relations(0, 0) = 1.0;
    const auto scorer = make_scorer(m);
    // (a, r, ?): distances to a+r=(1,0) are b:0, a:1, c:2.
    CHECK(rank_triple(scorer, g, Triple{0, 0, 1}, Slot::Tail, Setting::Raw) == 1);
    CHECK(rank_triple(scorer, g, Triple{0, 0, 2}, Slot::Tail, Setting::Raw) == 3);
    CHECK(rank_triple(scorer, g, Triple{0, 0, 0}, Slot::Tail, Setting::Raw) == 2);
    CHECK(rank_triple(scorer, g, Triple{0, 0, 2}, Slot::Tail, Setting::Filtered) == 2);
    for (EntityId h = 0; h < 3; ++h)
        for (EntityId t2 = 0; t2 < 3; ++t2)
            for (const auto slot : {Slot::Head, Slot::Tail})
                for (const auto setting : {Setting::Raw, Setting::Filtered})
                    CHECK(rank_triple(scorer, g, {h, 0, t2}, slot, setting) ==
                          brute_rank(scorer, g, {h, 0, t2}, slot, setting));
}

TEST_CASE("rank_triple matches brute force on random cases") {
    Rng rng(31337);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.below(49);
        auto g = random_graph(rng, n, 1 + rng.below(4), rng.below(4 * n));
        const Triple t{static_cast<EntityId>(rng.below(n)), static_cast<RelationId>(rng.below(g.relation_count())),
                       static_cast<EntityId>(rng.below(n))};
        // Coarse random scores so ties occur.
        const std::uint64_t salt = rng.next();
        const Scorer f = [salt](const Triple& x) {
            return static_cast<double>(mix_seed(salt, (std::uint64_t{x.head} << 40) ^ (std::uint64_t{x.relation} << 20) ^
                                                          x.tail) %
                                       7);
        };
        for (const auto slot : {Slot::Head, Slot::Tail}) {
            const auto raw = rank_triple(f, g, t, slot, Setting::Raw);
            const auto filtered = rank_triple(f, g, t, slot, Setting::Filtered);
            CHECK(raw == brute_rank(f, g, t, slot, Setting::Raw));
            CHECK(filtered == brute_rank(f, g, t, slot, Setting::Filtered));
            CHECK(filtered <= raw);
            CHECK(raw >= 1);
            CHECK(raw <= n);
        }
    }
}

TEST_CASE("aggregate_metrics examples") {
    const std::vector<std::size_t> k10{10};
    const std::vector<std::size_t> ones{1, 1, 1};
    auto m = aggregate_metrics(ones, k10);
    CHECK(m.mean_rank == 1.0);
    CHECK(m.hits_at(10) == 1.0);

    const std::vector<std::size_t> mixed{1, 3, 11};
    m = aggregate_metrics(mixed, k10);
    CHECK(m.mean_rank == 5.0);
    CHECK(m.hits_at(10) == doctest::Approx(2.0 / 3.0));

    const std::vector<std::size_t> five{5}, k1{1};
    CHECK(aggregate_metrics(five, k1).hits_at(1) == 0.0);
    CHECK_THROWS_AS(aggregate_metrics(std::vector<std::size_t>{}, k10), std::invalid_argument);
    CHECK_THROWS_AS(m.hits_at(3), std::out_of_range);
}

TEST_CASE("aggregate_metrics equals direct recomputation") {
    Rng rng(2);
    const std::vector<std::size_t> ks{1, 2, 5, 10, 1000000};
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::size_t> ranks(1 + rng.below(50));
        for (auto& r : ranks) r = 1 + rng.below(30);
        const auto m = aggregate_metrics(ranks, ks);
        double sum = 0;
        for (const auto r : ranks) sum += r;
        CHECK(m.mean_rank == doctest::Approx(sum / ranks.size()));
        CHECK(m.mean_rank >= 1.0);
        double prev = 0.0;
        for (const auto k : ks) {
            const double direct =
                static_cast<double>(std::count_if(ranks.begin(), ranks.end(), [k](auto r) { return r <= k; })) /
                ranks.size();
            CHECK(m.hits_at(k) == direct);
            CHECK(m.hits_at(k) >= prev);
            prev = m.hits_at(k);
        }
        CHECK(m.hits_at(1000000) == 1.0);
    }
}

TEST_CASE("evaluate_link_prediction and reports") {
    Rng rng(4);
    const auto g = random_graph(rng, 12, 2, 30);
    const std::vector<Triple> test(g.triples().begin(), g.triples().begin() + 5);
    const Scorer f = [](const Triple& x) { return std::abs(static_cast<double>(x.head) - x.tail); };
    const auto r1 = evaluate_link_prediction(f, g, test);
    EvalOptions opts;
    opts.workers = 3;
    const auto r2 = evaluate_link_prediction(f, g, test, opts);
    REQUIRE(r1.ranks.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(r1.ranks[i].raw_tail == r2.ranks[i].raw_tail);
        CHECK(r1.ranks[i].filtered_head == rank_triple(f, g, test[i], Slot::Head, Setting::Filtered));
        CHECK(r1.ranks[i].filtered_tail <= r1.ranks[i].raw_tail);
    }
    CHECK(r1.filtered.combined.mean_rank ==
          doctest::Approx((r1.filtered.head.mean_rank + r1.filtered.tail.mean_rank) / 2));

    std::ostringstream text, json, tsv, text2;
    write_report_text(text, r1);
    write_report_text(text2, r2);
    CHECK(text.str() == text2.str());
    CHECK(text.str().find("filtered.tail.hits@10 = ") != std::string::npos);
    CHECK(text.str().rfind("triples = 5\n", 0) == 0);
    write_report_json(json, r1);
    const auto doc = nlohmann::json::parse(json.str());
    CHECK(doc["triples"] == 5);
    CHECK(doc["metrics"].size() == 2 * 3 * 4);
    for (const auto& m : doc["metrics"]) {
        CHECK(m.contains("metric"));
        CHECK(m.contains("slot"));
        CHECK(m.contains("setting"));
        CHECK(m["value"].is_number());
    }
    write_ranks_tsv(tsv, g, r1);
    const auto rows = tsv.str();
    CHECK(std::count(rows.begin(), rows.end(), '\n') == 6);
    CHECK_THROWS_AS(evaluate_link_prediction(f, g, std::vector<Triple>{}), std::invalid_argument);
}

TEST_CASE("nearest_neighbors examples") {
    TokenEmbeddings e;
    e.tokens = {"q", "a", "z", "b"};
    e.vectors = Matrix(4, 2);
    const double v[4][2] = {{1, 2}, {0, 1}, {1, 2}, {-1, 0}};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 2; ++j) e.vectors(i, j) = v[i][j];
    const auto nn = nearest_neighbors(e, "q", 10, Metric::Cosine);
    REQUIRE(nn.size() == 3);
    CHECK(nn[0].first == "z");
    CHECK(nn[0].second == doctest::Approx(1.0));
    CHECK(nearest_neighbors(e, "q", 1, Metric::Euclidean)[0] == std::pair<std::string, double>{"z", 0.0});
    CHECK_THROWS_AS(nearest_neighbors(e, "nope", 1, Metric::Cosine), std::out_of_range);

    TokenEmbeddings ortho;
    ortho.tokens = {"x", "y", "w"};
    ortho.vectors = Matrix(3, 3);
    for (int i = 0; i < 3; ++i) ortho.vectors(i, i) = 1.0;
    const auto o = nearest_neighbors(ortho, "x", 5, Metric::Cosine);
    REQUIRE(o.size() == 2);
    for (const auto& [_, s] : o) CHECK(s == 0.0);
    CHECK(o[0].first == "y");  // id tiebreak
}

TEST_CASE("nearest_neighbors matches an exhaustive scan") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        TokenEmbeddings e;
        e.vectors = Matrix(20, 5);
        for (int i = 0; i < 20; ++i) e.tokens.push_back("t" + std::to_string(i));
        for (auto& x : e.vectors.data()) x = rng.uniform(-1, 1);
        for (const auto metric : {Metric::Cosine, Metric::Euclidean}) {
            std::vector<std::pair<double, int>> all;
            for (int i = 1; i < 20; ++i) {
                const auto a = e.vectors.row(0), b = e.vectors.row(i);
                double s;
                if (metric == Metric::Cosine) {
                    s = -dot(a, b) / (l2_norm(a) * l2_norm(b));
                } else {
                    s = 0;
                    for (int j = 0; j < 5; ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
                }
                all.emplace_back(s, i);
            }
            std::sort(all.begin(), all.end());
            const auto nn = nearest_neighbors(e, "t0", 7, metric);
            REQUIRE(nn.size() == 7);
            for (int i = 0; i < 7; ++i) CHECK(nn[i].first == "t" + std::to_string(all[i].second));
        }
    }
}

TEST_CASE("split_triples") {
    Rng rng(6);
    const auto g = random_graph(rng, 30, 3, 100);
    const auto s = split_triples(g, 0.8, 0.1, 0.1, 3);
    CHECK(s.train.size() + s.valid.size() + s.test.size() == g.triple_count());
    std::set<Triple> all(s.train.begin(), s.train.end());
    all.insert(s.valid.begin(), s.valid.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == g.triple_count());
    CHECK(split_triples(g, 0.8, 0.1, 0.1, 3).test == s.test);
    CHECK(split_triples(g, 0.9, 0.0, 0.1, 3).valid.empty());
    CHECK_THROWS_AS(split_triples(g, 0.8, 0.1, 0.2, 3), std::invalid_argument);
    CHECK_THROWS_AS(split_triples(g, 1.0, 0.0, 0.0, 3), std::invalid_argument);
}

TEST_CASE("planted graph") {
    PlantedConfig cfg;
    cfg.entities = 25;
    cfg.relations = 1;
    cfg.dim = 6;
    cfg.triples_per_relation = 6;
    cfg.noise = 0.0;
    const auto p = generate_planted_kg(cfg);
    CHECK(p.graph.triple_count() == 6);
    for (std::size_t i = 0; i < 25; ++i) CHECK(l2_norm(p.entity_vectors.row(i)) == doctest::Approx(1.0));
    for (const auto& t : p.graph.triples()) {
        std::vector<double> d(6);
        axpy(1.0, p.entity_vectors.row(t.head), d);
        axpy(1.0, p.relation_vectors.row(t.relation), d);
        axpy(-1.0, p.entity_vectors.row(t.tail), d);
        CHECK(l2_norm(d) <= 1e-12);
    }

    cfg.noise = 0.3;
    cfg.relations = 6;
    const auto noisy = generate_planted_kg(cfg);
    for (const auto& t : noisy.graph.triples()) {
        std::vector<double> d(6);
        axpy(1.0, noisy.entity_vectors.row(t.head), d);
        axpy(1.0, noisy.relation_vectors.row(t.relation), d);
        axpy(-1.0, noisy.entity_vectors.row(t.tail), d);
        CHECK(l2_norm(d) <= 0.3 + 1e-12);
    }
    CHECK(generate_planted_kg(cfg).graph.triples() == noisy.graph.triples());
    CHECK(generate_planted_kg(cfg).entity_vectors == noisy.entity_vectors);

    std::set<std::set<Triple>> seen;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        cfg.seed = seed;
        const auto t = generate_planted_kg(cfg).graph.triples();
        seen.insert(std::set<Triple>(t.begin(), t.end()));
    }
    CHECK(seen.size() == 100);

    cfg.triples_per_relation = 13;
    CHECK_THROWS_AS(generate_planted_kg(cfg), std::invalid_argument);
    cfg.triples_per_relation = 1;
    cfg.relations = 11;
    CHECK_THROWS_AS(generate_planted_kg(cfg), std::invalid_argument);
    PlantedConfig def;
    CHECK(generate_planted_kg(def).graph.triple_count() == 4500);
}

TEST_CASE("one-to-many dataset") {
    OneToManyConfig cfg;
    cfg.groups = 5;
    const auto d = generate_one_to_many(cfg);
    CHECK(d.graph.triple_count() == 5 * 8 * 3);
    CHECK(d.test.size() == 8);
    CHECK(d.train.size() + d.test.size() == d.graph.triple_count());
    for (const auto& t : d.test) CHECK(t.relation == d.relation);
    const auto s = relation_stats(d.graph, d.relation);
    CHECK(s.tails_per_head == 8.0);
}

TEST_CASE("factory graph") {
    FactoryConfig cfg;
    cfg.machines = 10;
    cfg.node_fraction = 0.0;
    const auto healthy = generate_factory_graph(cfg);
    CHECK(healthy.failures.empty());
    CHECK(std::none_of(healthy.failed.begin(), healthy.failed.end(), [](bool b) { return b; }));
    CHECK(healthy.status_nodes.size() == 40);

    cfg.node_fraction = 1.0;
    const auto all = generate_factory_graph(cfg);
    CHECK(all.failures.size() == 10);
    CHECK(std::count(all.failed.begin(), all.failed.end(), true) == 10);

    cfg.node_fraction = 0.2;
    cfg.edge_fraction = 0.2;
    cfg.subgraph_fraction = 0.3;
    cfg.graph_fraction = 0.2;
    const auto mixed = generate_factory_graph(cfg);
    for (const auto& f : mixed.failures) {
        if (f.kind == FailureKind::Subgraph) CHECK(f.elements.size() >= 2);
        for (const auto& el : f.elements) {
            if (f.kind == FailureKind::Edge) {
                std::istringstream ss(el);
                std::string h, r, t;
                ss >> h >> r >> t;
                CHECK(mixed.graph.contains({*mixed.graph.entities().find(h), *mixed.graph.relations().find(r),
                                            *mixed.graph.entities().find(t)}));
            } else {
                CHECK(mixed.graph.entities().find(el).has_value());
            }
        }
    }
    CHECK(generate_factory_graph(cfg).graph.triples() == mixed.graph.triples());
    cfg.node_fraction = 0.5;
    CHECK_THROWS_AS(generate_factory_graph(cfg), std::invalid_argument);
}

TEST_CASE("threshold classifier") {
    Rng rng(10);
    Matrix x(200, 3);
    std::vector<bool> y(200);
    for (std::size_t i = 0; i < 200; ++i) {
        y[i] = i % 4 == 0;
        for (std::size_t j = 0; j < 3; ++j) x(i, j) = rng.normal() * 0.1 + (y[i] ? 1.0 : 0.0);
    }
    const auto r = threshold_classifier(x, y, 0.7, 1);
    CHECK(r.train_size == 140);
    CHECK(r.test_size == 60);
    CHECK(r.accuracy == 1.0);
    CHECK(r.balanced_accuracy == 1.0);
}
