#include <cmath>
#include <vector>

#include "doctest.h"
#include "kgforge/trans.hpp"
#include "test_support.hpp"

using namespace kgforge;
using kgforge::testing::graph_from_tsv;
using kgforge::testing::numeric_gradient;
using kgforge::testing::random_vector;
using kgforge::testing::relative_error;
using V = std::vector<double>;

TEST_CASE("transe_score") {
    CHECK(transe_score(V{0, 0}, V{0, 0}, V{0, 0}, Norm::L2) == 0.0);
    CHECK(transe_score(V{1, 0}, V{0, 1}, V{1, 1}, Norm::L2) == 0.0);
    CHECK(transe_score(V{1, 0}, V{0, 0}, V{0, 1}, Norm::L1) == 2.0);
    CHECK(transe_score(V{1, 0}, V{0, 0}, V{0, 1}, Norm::L2) == doctest::Approx(std::sqrt(2.0)));
    CHECK_THROWS_AS(transe_score(V{1, 0}, V{0}, V{0, 1}, Norm::L2), std::invalid_argument);
}

TEST_CASE("hyperplane_project") {
    CHECK(hyperplane_project(V{0, 1}, V{1, 0}) == V{0, 1});
    CHECK(hyperplane_project(V{1, 0}, V{1, 0}) == V{0, 0});
    CHECK(hyperplane_project(V{1, 1}, V{1, 0}) == V{0, 1});
    CHECK_THROWS_AS(hyperplane_project(V{1, 1}, V{2, 0}), std::invalid_argument);

    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        auto w = random_vector(rng, 6);
        const double n = l2_norm(w);
        for (auto& x : w) x /= n;
        const auto p = hyperplane_project(random_vector(rng, 6, -3, 3), w);
        CHECK(std::abs(dot(p, w)) <= 1e-6);
    }
}

TEST_CASE("transh_score") {
    CHECK(transh_score(V{0.3, 0.4}, V{0.3, 0.4}, V{1, 0}, V{0, 0}) == 0.0);
    CHECK(transh_score(V{1, 0}, V{0, 0}, V{0, 1}, V{0.5, 0}) == doctest::Approx(2.25));

    SUBCASE("matches an explicit projection-matrix evaluation") {
        Rng rng(17);
        for (int i = 0; i < 100; ++i) {
            const auto h = random_vector(rng, 4), t = random_vector(rng, 4), d = random_vector(rng, 4);
            auto w = random_vector(rng, 4);
            const double n = l2_norm(w);
            for (auto& x : w) x /= n;
            // P = I - w w^T applied as a dense 4x4 matrix.
            double expected = 0.0;
            for (int r = 0; r < 4; ++r) {
                double ph = 0.0, pt = 0.0;
                for (int c = 0; c < 4; ++c) {
                    const double p = (r == c ? 1.0 : 0.0) - w[r] * w[c];
                    ph += p * h[c];
                    pt += p * t[c];
                }
                const double u = ph + d[r] - pt;
                expected += u * u;
            }
            CHECK(transh_score(h, t, w, d) == doctest::Approx(expected).epsilon(1e-12));
        }
    }

    SUBCASE("exact translation on the hyperplane scores zero") {
        Rng rng(19);
        for (int i = 0; i < 50; ++i) {
            auto w = random_vector(rng, 5);
            const double n = l2_norm(w);
            for (auto& x : w) x /= n;
            const auto h = hyperplane_project(random_vector(rng, 5), w);
            const auto t = hyperplane_project(random_vector(rng, 5), w);
            V d(5);
            for (int k = 0; k < 5; ++k) d[k] = t[k] - h[k];
            CHECK(transh_score(h, t, w, d) <= 1e-20);
        }
    }
}

TEST_CASE("transr_score") {
    CHECK(transr_score(V{0.2, 0.7}, V{0.2, 0.7}, V{0, 0}, V{1, 0, 0, 1}) == 0.0);
    CHECK(transr_score(V{1, 0}, V{0, 1}, V{1, -1}, V{0, 1, 1, 0}) == 0.0);
    CHECK(transr_score(V{0.3, -0.2}, V{0.9, 0.1}, V{1, 2}, V{0, 0, 0, 0}) == doctest::Approx(5.0));
    // d=3, k=2
    CHECK(transr_score(V{1, 0}, V{0, 0}, V{0, 0, 0}, V{1, 0, 0, 1, 1, 1}) == doctest::Approx(2.0));
    CHECK_THROWS_AS(transr_score(V{1, 0}, V{0, 0}, V{0, 0}, V{1, 0, 0}), std::invalid_argument);
}

TEST_CASE("margin_loss") {
    CHECK(margin_loss(0, 2, 1) == 0.0);
    CHECK(margin_loss(1, 1, 1) == 1.0);
    CHECK(margin_loss(2, 0.5, 0.5) == 2.0);
    Rng rng(2);
    for (int i = 0; i < 1000; ++i) {
        const double pos = rng.uniform(0, 3), neg = rng.uniform(0, 3), g = rng.uniform(0.01, 2);
        CHECK(margin_loss(pos, neg, g) >= 0.0);
        if (neg >= pos + g) CHECK(margin_loss(pos, neg, g) == 0.0);
    }
}

TEST_CASE("score gradients match central finite differences") {
    Rng rng(101);
    for (int point = 0; point < 100; ++point) {
        const std::size_t k = 1 + rng.below(8);
        const std::size_t d = 1 + rng.below(8);

        // TransE, both norms; x = [h | l | t]
        for (const Norm norm : {Norm::L1, Norm::L2}) {
            const auto x = random_vector(rng, 3 * k);
            auto f = [&](const V& p) {
                return transe_score({p.data(), k}, {p.data() + k, k}, {p.data() + 2 * k, k}, norm);
            };
            V g(3 * k, 0.0);
            transe_backward({x.data(), k}, {x.data() + k, k}, {x.data() + 2 * k, k}, norm, 1.0, {g.data(), k},
                            {g.data() + k, k}, {g.data() + 2 * k, k});
            CHECK(relative_error(g, numeric_gradient(f, x)) <= 1e-4);
        }

        {  // TransH; x = [h | t | w | d]
            const auto x = random_vector(rng, 4 * k);
            auto f = [&](const V& p) {
                return transh_score({p.data(), k}, {p.data() + k, k}, {p.data() + 2 * k, k}, {p.data() + 3 * k, k});
            };
            V g(4 * k, 0.0);
            transh_backward({x.data(), k}, {x.data() + k, k}, {x.data() + 2 * k, k}, {x.data() + 3 * k, k}, 1.0,
                            {g.data(), k}, {g.data() + k, k}, {g.data() + 2 * k, k}, {g.data() + 3 * k, k});
            CHECK(relative_error(g, numeric_gradient(f, x)) <= 1e-4);
        }

        {  // TransR; x = [h | t | r | M]
            const std::size_t n = 2 * k + d + d * k;
            const auto x = random_vector(rng, n);
            auto f = [&](const V& p) {
                return transr_score({p.data(), k}, {p.data() + k, k}, {p.data() + 2 * k, d},
                                    {p.data() + 2 * k + d, d * k});
            };
            V g(n, 0.0);
            transr_backward({x.data(), k}, {x.data() + k, k}, {x.data() + 2 * k, d}, {x.data() + 2 * k + d, d * k},
                            1.0, {g.data(), k}, {g.data() + k, k}, {g.data() + 2 * k, d},
                            {g.data() + 2 * k + d, d * k});
            CHECK(relative_error(g, numeric_gradient(f, x)) <= 1e-4);
        }
    }
}

TEST_CASE("transh_constraint_penalty") {
    TranslationalModel m;
    m.variant = Variant::TransH;
    m.dim = m.relation_dim = 2;
    m.entities = Matrix(3, 2);
    m.entities.data() = {0.6, 0.8, 0.1, 0.2, 0.0, 0.0};
    m.relations = Matrix(1, 2);
    m.relations.data() = {0.0, 1.0};
    m.normals = Matrix(1, 2);
    m.normals.data() = {1.0, 0.0};
    CHECK(transh_constraint_penalty(m, 0.1) == 0.0);

    m.entities(2, 0) = 1.0;
    m.entities(2, 1) = 1.0;  // |e|^2 = 2
    CHECK(transh_constraint_penalty(m, 0.1) == doctest::Approx(1.0));

    m.entities(2, 0) = m.entities(2, 1) = 0.0;
    m.relations.data() = {1.0, 0.0};  // parallel to w
    CHECK(transh_constraint_penalty(m, 0.1) == doctest::Approx(0.99));

    m.variant = Variant::TransE;
    CHECK_THROWS_AS(transh_constraint_penalty(m, 0.1), std::invalid_argument);
}

TEST_CASE("enforce_norm_constraints") {
    Rng rng(1);
    TranslationalModel m;
    m.variant = Variant::TransE;
    m.dim = m.relation_dim = 2;
    m.entities = Matrix(2, 2);
    m.entities.data() = {3.0, 4.0, 0.0, 1.0};
    m.relations = Matrix(1, 2);
    m.relations.data() = {5.0, 5.0};

    CHECK(enforce_norm_constraints(m, rng) == 0);
    CHECK(m.entities(0, 0) == doctest::Approx(0.6));
    CHECK(m.entities(0, 1) == doctest::Approx(0.8));
    CHECK(m.entities(1, 1) == 1.0);
    CHECK(m.relations(0, 0) == 5.0);  // relations unconstrained

    const auto once = m;
    enforce_norm_constraints(m, rng);
    CHECK(m == once);

    SUBCASE("zero rows are redrawn and counted") {
        m.entities(1, 0) = m.entities(1, 1) = 0.0;
        CHECK(enforce_norm_constraints(m, rng) == 1);
        CHECK(l2_norm(m.entities.row(1)) == doctest::Approx(1.0));
    }

    SUBCASE("TransH clips entities and renormalizes normals") {
        m.variant = Variant::TransH;
        m.entities.data() = {3.0, 4.0, 0.1, 0.1};
        m.normals = Matrix(1, 2);
        m.normals.data() = {0.0, 2.0};
        enforce_norm_constraints(m, rng);
        CHECK(l2_norm(m.entities.row(0)) == doctest::Approx(1.0));
        CHECK(m.entities(1, 0) == 0.1);
        CHECK(m.normals(0, 1) == 1.0);
        const auto h = m;
        enforce_norm_constraints(m, rng);
        CHECK(m == h);
    }
}

TEST_CASE("corrupt_triple") {
    SUBCASE("exactly one slot differs and the relation is preserved") {
        Rng grng(9);
        const auto g = kgforge::testing::random_graph(grng, 20, 3, 60);
        Rng rng(10);
        for (const auto strategy : {Corruption::Uniform, Corruption::Bernoulli}) {
            const Corrupter c(g, strategy);
            for (int i = 0; i < 10000; ++i) {
                const auto& t = g.triples()[rng.below(g.triple_count())];
                const auto x = c(t, rng);
                CHECK(x.relation == t.relation);
                CHECK(((x.head != t.head) + (x.tail != t.tail)) == 1);
            }
        }
    }

    SUBCASE("two entities leave a single choice per slot") {
        const auto g = graph_from_tsv("a\tp\tb\n");
        Rng rng(4);
        int heads = 0;
        for (int i = 0; i < 1000; ++i) {
            const auto x = corrupt_triple(g, g.triples()[0], Corruption::Uniform, rng);
            CHECK((x == Triple{1, 0, 1} || x == Triple{0, 0, 0}));
            heads += x.head != 0;
        }
        CHECK(heads > 400);
        CHECK(heads < 600);
    }

    SUBCASE("bernoulli head frequency follows tph / (tph + hpt)") {
        const auto g = graph_from_tsv("a\tp\tb\na\tp\tc\na\tp\td\n");  // tph=3, hpt=1
        const Corrupter c(g, Corruption::Bernoulli);
        CHECK(c.head_probability(0) == 0.75);
        Rng rng(12345);
        int heads = 0;
        const int n = 100000;
        for (int i = 0; i < n; ++i) heads += c(g.triples()[0], rng).head != 0;
        CHECK(std::abs(heads / double(n) - 0.75) <= 0.02);
    }

    SUBCASE("fewer than two entities") {
        KnowledgeGraph g;
        g.add_triple("a", "p", "a");
        Rng rng(1);
        CHECK_THROWS_AS(corrupt_triple(g, g.triples()[0], Corruption::Uniform, rng), std::invalid_argument);
    }
}

namespace {

TrainConfig small_config(std::size_t epochs) {
    TrainConfig c;
    c.dim = 8;
    c.relation_dim = 6;
    c.epochs = epochs;
    c.batch_size = 16;
    c.learning_rate = 0.01;
    c.seed = 77;
    return c;
}

}  // namespace

TEST_CASE("training preserves norm constraints after every epoch") {
    Rng grng(21);
    const auto g = kgforge::testing::random_graph(grng, 40, 4, 200);
    for (const auto variant : {Variant::TransE, Variant::TransH, Variant::TransR}) {
        auto config = small_config(8);
        config.corruption = Corruption::Bernoulli;
        std::size_t epochs_seen = 0;
        train_translational(g, variant, config, [&](const EpochReport& report, const TranslationalModel& m) {
            ++epochs_seen;
            CHECK(report.epoch == epochs_seen);
            for (std::size_t e = 0; e < m.entities.rows(); ++e) {
                const double n = l2_norm(m.entities.row(e));
                if (variant == Variant::TransE)
                    CHECK(std::abs(n - 1.0) <= 1e-6);
                else
                    CHECK(n <= 1.0 + 1e-6);
            }
            if (variant == Variant::TransH)
                for (std::size_t r = 0; r < m.normals.rows(); ++r)
                    CHECK(std::abs(l2_norm(m.normals.row(r)) - 1.0) <= 1e-6);
            Rng rng(0);
            auto copy = m;
            enforce_norm_constraints(copy, rng);
            auto twice = copy;
            enforce_norm_constraints(twice, rng);
            CHECK(twice == copy);
        });
        CHECK(epochs_seen == 8);
    }
}

TEST_CASE("zero epochs returns the initialization") {
    const auto g = graph_from_tsv("a\tp\tb\nb\tq\tc\n");
    for (const auto variant : {Variant::TransE, Variant::TransH, Variant::TransR}) {
        const auto config = small_config(0);
        const auto trained = train_translational(g, variant, config);
        CHECK(trained.model == init_translational(g, variant, config));
        CHECK(trained.epoch_loss.empty());
    }
}

TEST_CASE("seeded training is deterministic") {
    Rng grng(22);
    const auto g = kgforge::testing::random_graph(grng, 30, 3, 120);
    for (const auto variant : {Variant::TransE, Variant::TransH, Variant::TransR}) {
        const auto config = small_config(5);
        const auto a = train_translational(g, variant, config);
        const auto b = train_translational(g, variant, config);
        CHECK(a.model == b.model);
        CHECK(a.epoch_loss == b.epoch_loss);
        auto other = config;
        other.seed = 78;
        CHECK_FALSE(train_translational(g, variant, other).model == a.model);

        auto threaded = config;
        threaded.workers = 3;
        const auto c = train_translational(g, variant, threaded);
        const auto d = train_translational(g, variant, threaded);
        CHECK(c.model == d.model);
    }
}

TEST_CASE("invalid configurations and graphs are rejected") {
    const auto g = graph_from_tsv("a\tp\tb\n");
    auto config = small_config(1);
    config.margin = 0;
    CHECK_THROWS_AS(train_translational(g, Variant::TransE, config), std::invalid_argument);
    config = small_config(1);
    config.learning_rate = -1;
    CHECK_THROWS_AS(train_translational(g, Variant::TransE, config), std::invalid_argument);
    config = small_config(1);
    config.dim = 0;
    CHECK_THROWS_AS(train_translational(g, Variant::TransE, config), std::invalid_argument);
    CHECK_THROWS_AS(train_translational(KnowledgeGraph{}, Variant::TransE, small_config(1)), std::invalid_argument);
}

TEST_CASE("training reduces the margin loss on a consistent graph") {
    // Chain with two relations whose translations compose consistently.
    KnowledgeGraph g;
    for (int i = 0; i < 30; ++i) {
        g.add_triple("n" + std::to_string(i), "next", "n" + std::to_string(i + 1));
        if (i + 2 <= 30) g.add_triple("n" + std::to_string(i), "skip", "n" + std::to_string(i + 2));
    }
    for (const auto variant : {Variant::TransE, Variant::TransH, Variant::TransR}) {
        auto config = small_config(30);
        config.learning_rate = 0.02;
        const auto r = train_translational(g, variant, config);
        CHECK(r.epoch_loss.back() < r.epoch_loss.front());
    }
}
