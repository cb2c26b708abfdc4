#include "kgforge/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "kgforge/rng.hpp"

namespace kgforge {

namespace {

std::size_t cube_bits(std::size_t n) {
    std::size_t m = 1;
    while ((std::size_t{1} << m) < n) ++m;
    return m;
}

}  // namespace

void PlantedConfig::validate() const {
    if (entities < 2 || entities > (std::size_t{1} << 24)) throw std::invalid_argument("planted graph needs 2 to 2^24 entities");
    const auto m = cube_bits(entities);
    if (relations == 0 || relations > 2 * m)
        throw std::invalid_argument("planted graph over " + std::to_string(entities) + " entities supports 1 to " +
                                    std::to_string(2 * m) + " relations");
    if (dim < m) throw std::invalid_argument("planted graph needs dim >= " + std::to_string(m));
    if (triples_per_relation == 0) throw std::invalid_argument("triples_per_relation must be positive");
    if (!(noise >= 0.0)) throw std::invalid_argument("noise must be nonnegative");
}

PlantedKG generate_planted_kg(const PlantedConfig& config) {
    config.validate();
    const std::size_t n = config.entities;
    const std::size_t k = config.dim;
    const std::size_t m = cube_bits(n);
    const double a = 1.0 / std::sqrt(static_cast<double>(m));

    Rng rng(mix_seed(config.seed, 0x91A7));
    // Orthonormal basis u_0 .. u_{m-1} of the cube's span.
    std::vector<std::vector<double>> basis;
    while (basis.size() < m) {
        std::vector<double> v(k);
        for (auto& x : v) x = rng.normal();
        for (const auto& b : basis) axpy(-dot(b, v), b, v);
        const double norm = l2_norm(v);
        if (norm < 1e-6) continue;
        for (auto& x : v) x /= norm;
        basis.push_back(std::move(v));
    }

    // Entities are n distinct cube vertices.
    std::vector<std::uint64_t> codes(std::size_t{1} << m);
    for (std::size_t i = 0; i < codes.size(); ++i) codes[i] = i;
    rng.shuffle(codes.begin(), codes.end());
    codes.resize(n);
    std::vector<std::int64_t> entity_of(std::size_t{1} << m, -1);
    for (std::size_t i = 0; i < n; ++i) entity_of[codes[i]] = static_cast<std::int64_t>(i);

    PlantedKG out{KnowledgeGraph{}, Matrix(n, k), Matrix(config.relations, k)};
    for (std::size_t i = 0; i < n; ++i) {
        out.graph.add_entity("e" + std::to_string(i));
        auto row = out.entity_vectors.row(i);
        for (std::size_t b = 0; b < m; ++b) axpy((codes[i] >> b) & 1 ? a : -a, basis[b], row);
        std::vector<double> noise(k);
        for (auto& z : noise) z = rng.normal() * config.noise / (2.0 * std::sqrt(static_cast<double>(k)));
        const double nn = l2_norm(noise);
        if (nn > config.noise / 2.0) {
            for (auto& z : noise) z *= (config.noise / 2.0) / nn;
        }
        axpy(1.0, noise, row);
    }

    // Relation r < m sets bit r; relation m + b clears bit b.
    for (std::size_t r = 0; r < config.relations; ++r) {
        const auto rel = out.graph.add_relation("r" + std::to_string(r));
        const bool up = r < m;
        const std::size_t bit = up ? r : r - m;
        axpy(up ? 2.0 * a : -2.0 * a, basis[bit], out.relation_vectors.row(r));

        std::vector<std::pair<EntityId, EntityId>> candidates;
        for (std::size_t i = 0; i < n; ++i) {
            const bool set = (codes[i] >> bit) & 1;
            if (set == up) continue;
            const auto target = entity_of[codes[i] ^ (std::uint64_t{1} << bit)];
            if (target >= 0) candidates.emplace_back(static_cast<EntityId>(i), static_cast<EntityId>(target));
        }
        if (config.triples_per_relation > candidates.size())
            throw std::invalid_argument("relation r" + std::to_string(r) + " admits only " +
                                        std::to_string(candidates.size()) + " triples");
        Rng pick(mix_seed(config.seed, 0x100 + r));
        pick.shuffle(candidates.begin(), candidates.end());
        for (std::size_t i = 0; i < config.triples_per_relation; ++i)
            out.graph.add_triple({candidates[i].first, rel, candidates[i].second});
    }
    return out;
}

OneToManyDataset generate_one_to_many(const OneToManyConfig& config) {
    if (config.groups < 2 || config.tails_per_head < 2)
        throw std::invalid_argument("one-to-many data needs at least 2 groups and 2 tails per head");
    if (!(config.test_fraction > 0.0 && config.test_fraction < 1.0))
        throw std::invalid_argument("test_fraction must lie in (0, 1)");
    OneToManyDataset d;
    auto& g = d.graph;
    const auto has = g.add_relation("has");
    const auto owns = g.add_relation("owns");
    const auto slot = g.add_relation("slot");
    d.relation = has;
    const std::size_t m = config.tails_per_head;

    std::vector<EntityId> hubs;
    for (std::size_t j = 0; j < m; ++j) hubs.push_back(g.add_entity("u" + std::to_string(j)));
    std::vector<Triple> has_triples;
    for (std::size_t i = 0; i < config.groups; ++i) {
        const auto head = g.add_entity("h" + std::to_string(i));
        const auto twin = g.add_entity("w" + std::to_string(i));
        for (std::size_t j = 0; j < m; ++j) {
            const auto tail = g.add_entity("t" + std::to_string(i) + "_" + std::to_string(j));
            has_triples.push_back({head, has, tail});
            g.add_triple({head, has, tail});
            g.add_triple({twin, owns, tail});
            g.add_triple({hubs[j], slot, tail});
        }
    }

    Rng rng(mix_seed(config.seed, 0x1A2));
    rng.shuffle(has_triples.begin(), has_triples.end());
    const auto n_test = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(config.test_fraction * static_cast<double>(has_triples.size()))));
    d.test.assign(has_triples.begin(), has_triples.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::sort(d.test.begin(), d.test.end());
    for (const auto& t : g.triples())
        if (!std::binary_search(d.test.begin(), d.test.end(), t)) d.train.push_back(t);
    return d;
}

std::string_view to_string(FailureKind k) {
    switch (k) {
        case FailureKind::Node: return "node";
        case FailureKind::Edge: return "edge";
        case FailureKind::Subgraph: return "subgraph";
        case FailureKind::Graph: return "graph";
    }
    return "node";
}

void FactoryConfig::validate() const {
    const double fractions[] = {node_fraction, edge_fraction, subgraph_fraction, graph_fraction};
    double total = 0.0;
    for (const double f : fractions) {
        if (!(f >= 0.0 && f <= 1.0)) throw std::invalid_argument("failure fractions must lie in [0, 1]");
        total += f;
    }
    if (total > 1.0 + 1e-9) throw std::invalid_argument("failure fractions must sum to at most 1");
    if (machines == 0 || sensors_per_machine == 0) throw std::invalid_argument("need at least one machine and sensor");
    if (edge_fraction > 0.0 && machines < 3) throw std::invalid_argument("edge failures need at least 3 machines");
    if (subgraph_fraction > 0.0 && sensors_per_machine < 2)
        throw std::invalid_argument("subgraph failures need at least 2 sensors per machine");
}

FailureLabeledGraph generate_factory_graph(const FactoryConfig& config) {
    config.validate();
    const std::size_t machines = config.machines;
    const std::size_t sensors = config.sensors_per_machine;
    Rng rng(mix_seed(config.seed, 0xFAC7));

    enum Value { Normal, High, Low, Fault, Offline };
    static constexpr const char* kValues[] = {"value:normal", "value:high", "value:low", "value:fault",
                                              "value:offline"};
    std::vector<std::vector<Value>> reading(machines, std::vector<Value>(sensors, Normal));
    for (auto& row : reading) {
        for (auto& v : row) {
            const double u = rng.uniform();
            v = u < 0.8 ? Normal : (u < 0.9 ? High : Low);
        }
        if (sensors >= 2 && row[0] == High && row[1] == Low) row[1] = Normal;
    }
    std::vector<std::vector<bool>> failed(machines, std::vector<bool>(sensors, false));

    auto count_of = [&](double f) { return static_cast<std::size_t>(std::llround(f * static_cast<double>(machines))); };
    std::vector<std::size_t> order(machines);
    for (std::size_t i = 0; i < machines; ++i) order[i] = i;
    rng.shuffle(order.begin(), order.end());
    std::vector<std::pair<FailureKind, std::size_t>> assigned;
    std::size_t next = 0;
    const std::pair<FailureKind, double> modes[] = {{FailureKind::Node, config.node_fraction},
                                                    {FailureKind::Edge, config.edge_fraction},
                                                    {FailureKind::Subgraph, config.subgraph_fraction},
                                                    {FailureKind::Graph, config.graph_fraction}};
    for (const auto& [kind, f] : modes)
        for (std::size_t c = count_of(f); c > 0 && next < machines; --c) assigned.emplace_back(kind, order[next++]);

    FailureLabeledGraph out;
    auto& g = out.graph;
    for (const auto* r : {"measures", "feeds", "status"}) g.add_relation(r);
    auto machine = [](std::size_t i) { return "m" + std::to_string(i); };
    auto sensor = [](std::size_t i, std::size_t j) { return "s" + std::to_string(i) + "_" + std::to_string(j); };
    auto status_node = [](std::size_t i, std::size_t j) { return "st" + std::to_string(i) + "_" + std::to_string(j); };

    for (std::size_t i = 0; i < machines; ++i) g.add_entity(machine(i));
    for (std::size_t i = 0; i < machines; ++i)
        for (std::size_t j = 0; j < sensors; ++j) g.add_entity(sensor(i, j));
    for (std::size_t i = 0; i < machines; ++i)
        for (std::size_t j = 0; j < sensors; ++j) out.status_nodes.push_back(g.add_entity(status_node(i, j)));
    for (const auto* v : kValues) g.add_entity(v);

    // The line is a loop; line_target[i] is where machine i feeds, possibly garbled.
    std::vector<std::size_t> line_target(machines);
    for (std::size_t i = 0; i < machines; ++i) line_target[i] = (i + 1) % machines;
    std::vector<std::string> graph_elements;

    for (const auto& [kind, i] : assigned) {
        switch (kind) {
            case FailureKind::Node: {
                const auto j = static_cast<std::size_t>(rng.below(sensors));
                reading[i][j] = Fault;
                failed[i][j] = true;
                out.failures.push_back({kind, {status_node(i, j)}});
                break;
            }
            case FailureKind::Edge: {
                std::size_t to;
                do {
                    to = static_cast<std::size_t>(rng.below(machines));
                } while (to == i || to == line_target[i]);
                line_target[i] = to;
                out.failures.push_back({kind, {machine(i) + " feeds " + machine(to)}});
                break;
            }
            case FailureKind::Subgraph:
                reading[i][0] = High;
                reading[i][1] = Low;
                failed[i][0] = failed[i][1] = true;
                out.failures.push_back({kind, {status_node(i, 0), status_node(i, 1)}});
                break;
            case FailureKind::Graph:
                for (std::size_t j = 0; j < sensors; ++j) {
                    reading[i][j] = Offline;
                    failed[i][j] = true;
                }
                graph_elements.push_back(machine(i));
                break;
        }
    }
    if (!graph_elements.empty()) {
        std::sort(graph_elements.begin(), graph_elements.end());
        out.failures.push_back({FailureKind::Graph, std::move(graph_elements)});
    }

    if (machines > 1)
        for (std::size_t i = 0; i < machines; ++i) g.add_triple(machine(i), "feeds", machine(line_target[i]));
    for (std::size_t i = 0; i < machines; ++i)
        for (std::size_t j = 0; j < sensors; ++j) {
            g.add_triple(sensor(i, j), "measures", machine(i));
            g.add_triple(sensor(i, j), "feeds", status_node(i, j));
            g.add_triple(status_node(i, j), "status", kValues[reading[i][j]]);
            out.failed.push_back(failed[i][j]);
        }
    return out;
}

ClassifierReport threshold_classifier(const Matrix& features, const std::vector<bool>& labels, double train_fraction,
                                      std::uint64_t seed) {
    const std::size_t n = features.rows();
    if (labels.size() != n || n < 2) throw std::invalid_argument("need at least two labeled rows");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw std::invalid_argument("train_fraction must lie in (0, 1)");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(mix_seed(seed, 0xC1A5));
    rng.shuffle(order.begin(), order.end());
    const auto n_train = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n))), 1, n - 1);

    const std::size_t k = features.cols();
    std::vector<double> mean_pos(k, 0.0), mean_neg(k, 0.0);
    std::size_t pos = 0, neg = 0;
    for (std::size_t i = 0; i < n_train; ++i) {
        const auto r = order[i];
        axpy(1.0, features.row(r), labels[r] ? std::span<double>(mean_pos) : std::span<double>(mean_neg));
        (labels[r] ? pos : neg)++;
    }
    std::vector<double> direction(k, 0.0);
    if (pos > 0) axpy(1.0 / static_cast<double>(pos), mean_pos, direction);
    if (neg > 0) axpy(-1.0 / static_cast<double>(neg), mean_neg, direction);

    std::vector<std::pair<double, bool>> train;
    for (std::size_t i = 0; i < n_train; ++i) train.emplace_back(dot(features.row(order[i]), direction), labels[order[i]]);
    std::sort(train.begin(), train.end());
    // Threshold below every projection, then between consecutive ones.
    double best_threshold = train.front().first - 1.0;
    std::size_t correct = pos;  // everything predicted positive
    std::size_t best = correct;
    for (std::size_t i = 0; i < train.size(); ++i) {
        // row i moves to the negative side
        if (train[i].second)
            --correct;
        else
            ++correct;
        if (i + 1 < train.size() && train[i + 1].first == train[i].first) continue;
        if (correct > best) {
            best = correct;
            best_threshold = i + 1 < train.size() ? (train[i].first + train[i + 1].first) / 2.0 : train[i].first + 1.0;
        }
    }

    ClassifierReport report;
    report.train_size = n_train;
    report.test_size = n - n_train;
    std::size_t tp = 0, tn = 0, p = 0, q = 0;
    for (std::size_t i = n_train; i < n; ++i) {
        const auto r = order[i];
        const bool predicted = dot(features.row(r), direction) > best_threshold;
        if (labels[r]) {
            ++p;
            tp += predicted;
        } else {
            ++q;
            tn += !predicted;
        }
    }
    report.accuracy = static_cast<double>(tp + tn) / static_cast<double>(report.test_size);
    double rates = 0.0;
    int classes = 0;
    if (p > 0) rates += static_cast<double>(tp) / static_cast<double>(p), ++classes;
    if (q > 0) rates += static_cast<double>(tn) / static_cast<double>(q), ++classes;
    report.balanced_accuracy = rates / classes;
    return report;
}

}  // namespace kgforge
