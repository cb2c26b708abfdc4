#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "kgforge/checkpoint.hpp"
#include "kgforge/cli.hpp"
#include "kgforge/error.hpp"
#include "kgforge/eval.hpp"
#include "kgforge/graph.hpp"
#include "kgforge/kglove.hpp"
#include "kgforge/seq_embed.hpp"
#include "kgforge/synth.hpp"
#include "kgforge/trans.hpp"
#include "kgforge/walks.hpp"

namespace py = pybind11;
using namespace kgforge;

namespace {

using LabelTriple = std::tuple<std::string, std::string, std::string>;

py::array_t<double> to_numpy(const Matrix& m) {
    py::array_t<double> a({m.rows(), m.cols()});
    std::copy(m.data().begin(), m.data().end(), a.mutable_data());
    return a;
}

std::vector<LabelTriple> labels_of(const KnowledgeGraph& g, const std::vector<Triple>& ts) {
    std::vector<LabelTriple> out;
    out.reserve(ts.size());
    for (const auto& t : ts)
        out.emplace_back(g.entities().label(t.head), g.relations().label(t.relation), g.entities().label(t.tail));
    return out;
}

EntityId entity_id(const KnowledgeGraph& g, const std::string& label) {
    const auto id = g.entities().find(label);
    if (!id) throw py::key_error("unknown entity '" + label + "'");
    return *id;
}

Triple resolve(const std::vector<std::string>& ents, const std::vector<std::string>& rels, const LabelTriple& t) {
    const auto find = [](const std::vector<std::string>& v, const std::string& s) -> std::uint32_t {
        const auto it = std::find(v.begin(), v.end(), s);
        if (it == v.end()) throw py::key_error("unknown label '" + s + "'");
        return static_cast<std::uint32_t>(it - v.begin());
    };
    return {find(ents, std::get<0>(t)), find(rels, std::get<1>(t)), find(ents, std::get<2>(t))};
}

std::map<std::string, double> scores_by_label(const KnowledgeGraph& g, const std::vector<double>& p) {
    std::map<std::string, double> out;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] > 0.0) out[g.entities().label(static_cast<EntityId>(i))] = p[i];
    return out;
}

std::map<std::string, double> flatten(const LinkPredictionResult& r) {
    std::map<std::string, double> out;
    for (const auto* rep : {&r.raw, &r.filtered}) {
        const std::pair<const char*, const Metrics*> slots[] = {
            {"head", &rep->head}, {"tail", &rep->tail}, {"combined", &rep->combined}};
        for (const auto& [slot, m] : slots) {
            const std::string prefix = std::string(to_string(rep->setting)) + "." + slot + ".";
            out[prefix + "mean_rank"] = m->mean_rank;
            for (const auto& [k, v] : m->hits) out[prefix + "hits@" + std::to_string(k)] = v;
        }
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_kgforge, m) {
    m.doc() = "Knowledge-graph embedding toolkit";

    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    py::class_<KnowledgeGraph>(m, "KnowledgeGraph")
        .def(py::init<>())
        .def_static(
            "from_tsv",
            [](const std::string& text) {
                std::istringstream in(text);
                return load_graph(in, GraphFormat::Tsv).graph;
            },
            py::arg("text"))
        .def_static(
            "load", [](const std::string& path, const std::string& format) {
                return load_graph_file(path, parse_graph_format(format)).graph;
            },
            py::arg("path"), py::arg("format") = "tsv")
        .def("add_triple",
             py::overload_cast<std::string_view, std::string_view, std::string_view>(&KnowledgeGraph::add_triple),
             py::arg("head"), py::arg("relation"), py::arg("tail"))
        .def_property_readonly("entity_count", &KnowledgeGraph::entity_count)
        .def_property_readonly("relation_count", &KnowledgeGraph::relation_count)
        .def_property_readonly("triple_count", &KnowledgeGraph::triple_count)
        .def_property_readonly("entities", [](const KnowledgeGraph& g) { return g.entities().labels(); })
        .def_property_readonly("relations", [](const KnowledgeGraph& g) { return g.relations().labels(); })
        .def("triples", [](const KnowledgeGraph& g) { return labels_of(g, g.triples()); })
        .def("reverse", &reverse_graph)
        .def(
            "relation_stats",
            [](const KnowledgeGraph& g, const std::string& relation) {
                const auto r = g.relations().find(relation);
                if (!r) throw py::key_error("unknown relation '" + relation + "'");
                const auto s = relation_stats(g, *r);
                return std::make_pair(s.tails_per_head, s.heads_per_tail);
            },
            py::arg("relation"), "(tails per head, heads per tail)")
        .def("to_tsv", [](const KnowledgeGraph& g) {
            std::ostringstream out;
            write_tsv(out, g);
            return out.str();
        });

    py::class_<TranslationalModel>(m, "TranslationalModel")
        .def_property_readonly("variant", [](const TranslationalModel& t) { return std::string(to_string(t.variant)); })
        .def_readonly("dim", &TranslationalModel::dim)
        .def_readonly("relation_dim", &TranslationalModel::relation_dim)
        .def_readonly("entity_labels", &TranslationalModel::entity_labels)
        .def_readonly("relation_labels", &TranslationalModel::relation_labels)
        .def_property_readonly("entities", [](const TranslationalModel& t) { return to_numpy(t.entities); })
        .def_property_readonly("relations", [](const TranslationalModel& t) { return to_numpy(t.relations); })
        .def_property_readonly("normals", [](const TranslationalModel& t) { return to_numpy(t.normals); })
        .def_property_readonly("projections", [](const TranslationalModel& t) { return to_numpy(t.projections); })
        .def(
            "score",
            [](const TranslationalModel& t, const std::string& h, const std::string& r, const std::string& tail) {
                return t.score(resolve(t.entity_labels, t.relation_labels, {h, r, tail}));
            },
            py::arg("head"), py::arg("relation"), py::arg("tail"), "Lower is more plausible")
        .def(
            "save",
            [](const TranslationalModel& t, const std::string& path) {
                Checkpoint c;
                c.kind = model_kind(t.variant);
                c.translational = t;
                save_checkpoint_file(path, c);
            },
            py::arg("path"));

    py::class_<TokenEmbeddings>(m, "TokenEmbeddings")
        .def_readonly("tokens", &TokenEmbeddings::tokens)
        .def_property_readonly("vectors", [](const TokenEmbeddings& e) { return to_numpy(e.vectors); })
        .def_property_readonly("dim", &TokenEmbeddings::dim)
        .def(
            "nearest",
            [](const TokenEmbeddings& e, const std::string& query, std::size_t k, const std::string& metric) {
                return nearest_neighbors(e, query, k, parse_metric(metric));
            },
            py::arg("query"), py::arg("k") = 10, py::arg("metric") = "cosine");

    m.def(
        "train_translational",
        [](const KnowledgeGraph& g, const std::string& variant, std::size_t dim, std::size_t relation_dim,
           double margin, double learning_rate, std::size_t epochs, std::size_t batch_size,
           const std::string& corruption, const std::string& norm, double soft_weight, double epsilon,
           std::uint64_t seed, std::size_t workers) {
            TrainConfig c;
            c.dim = dim;
            c.relation_dim = relation_dim == 0 ? dim : relation_dim;
            c.margin = margin;
            c.learning_rate = learning_rate;
            c.epochs = epochs;
            c.batch_size = batch_size;
            c.corruption = parse_corruption(corruption);
            c.norm = parse_norm(norm);
            c.soft_weight = soft_weight;
            c.epsilon = epsilon;
            c.seed = seed;
            c.workers = workers;
            py::gil_scoped_release release;
            auto r = train_translational(g, parse_variant(variant), c);
            return std::make_pair(std::move(r.model), std::move(r.epoch_loss));
        },
        py::arg("graph"), py::arg("variant") = "transe", py::arg("dim") = 50, py::arg("relation_dim") = 0,
        py::arg("margin") = 1.0, py::arg("learning_rate") = 0.01, py::arg("epochs") = 100,
        py::arg("batch_size") = 100, py::arg("corruption") = "uniform", py::arg("norm") = "l2",
        py::arg("soft_weight") = 0.25, py::arg("epsilon") = 0.1, py::arg("seed") = 0, py::arg("workers") = 1,
        "Returns (model, per-epoch mean margin loss)");

    m.def(
        "evaluate",
        [](const TranslationalModel& model, const KnowledgeGraph& known, const std::vector<LabelTriple>& test,
           std::vector<std::size_t> ks, std::size_t workers) {
            KnowledgeGraph g;
            for (const auto& l : model.entity_labels) g.add_entity(l);
            for (const auto& l : model.relation_labels) g.add_relation(l);
            std::vector<Triple> ids;
            for (const auto& t : test) ids.push_back(resolve(model.entity_labels, model.relation_labels, t));
            for (const auto& t : ids) g.add_triple(t);
            for (const auto& t : labels_of(known, known.triples())) {
                const auto h = g.entities().find(std::get<0>(t));
                const auto r = g.relations().find(std::get<1>(t));
                const auto tl = g.entities().find(std::get<2>(t));
                if (h && r && tl) g.add_triple({*h, *r, *tl});
            }
            EvalOptions opt;
            opt.ks = std::move(ks);
            opt.workers = workers;
            py::gil_scoped_release release;
            return flatten(evaluate_link_prediction(make_scorer(model), g, ids, opt));
        },
        py::arg("model"), py::arg("known"), py::arg("test"), py::arg("ks") = std::vector<std::size_t>{1, 3, 10},
        py::arg("workers") = 1, "Flat {'filtered.tail.hits@10': value, ...} report");

    m.def(
        "build_corpus",
        [](const KnowledgeGraph& g, const std::string& mode, std::size_t depth,
           std::optional<std::size_t> walks_per_entity, std::size_t wl_iterations, std::uint64_t seed,
           std::size_t workers) {
            CorpusParams p;
            p.mode = parse_corpus_mode(mode);
            p.depth = depth;
            p.walks_per_entity = walks_per_entity;
            p.wl_iterations = wl_iterations;
            p.seed = seed;
            p.workers = workers;
            const auto c = build_corpus(g, p);
            std::vector<std::vector<std::string>> out;
            for (std::size_t i = 0; i < c.sequences.size(); ++i) out.push_back(c.sequence_tokens(i));
            return out;
        },
        py::arg("graph"), py::arg("mode") = "walks", py::arg("depth") = 2, py::arg("walks_per_entity") = py::none(),
        py::arg("wl_iterations") = 2, py::arg("seed") = 0, py::arg("workers") = 1);

    m.def(
        "train_sequences",
        [](const std::vector<std::vector<std::string>>& sequences, const std::string& architecture, std::size_t dim,
           std::size_t window, std::size_t negatives, std::size_t epochs, double learning_rate,
           std::uint64_t min_count, std::uint64_t seed) {
            WalkCorpus corpus;
            for (const auto& s : sequences) corpus.add_sequence(std::vector<std::string_view>(s.begin(), s.end()));
            SeqConfig c;
            c.dim = dim;
            c.window = window;
            c.negatives = negatives;
            c.epochs = epochs;
            c.learning_rate = learning_rate;
            c.min_count = min_count;
            c.seed = seed;
            py::gil_scoped_release release;
            auto r = train_sequences(corpus, parse_architecture(architecture), c);
            return std::make_pair(std::move(r.embeddings), std::move(r.epoch_loss));
        },
        py::arg("sequences"), py::arg("architecture") = "skipgram", py::arg("dim") = 100, py::arg("window") = 5,
        py::arg("negatives") = 5, py::arg("epochs") = 5, py::arg("learning_rate") = 0.025, py::arg("min_count") = 1,
        py::arg("seed") = 0, "Returns (embeddings, per-epoch mean loss)");

    m.def(
        "exact_ppr",
        [](const KnowledgeGraph& g, const std::string& focus, double alpha, const std::string& weighting) {
            return scores_by_label(g, exact_ppr(weigh_edges(g, parse_edge_weighting(weighting)),
                                                entity_id(g, focus), alpha));
        },
        py::arg("graph"), py::arg("focus"), py::arg("alpha") = 0.15, py::arg("weighting") = "uniform");

    m.def(
        "approx_ppr",
        [](const KnowledgeGraph& g, const std::string& focus, double alpha, double epsilon,
           const std::string& weighting) {
            const auto r = approx_ppr(weigh_edges(g, parse_edge_weighting(weighting)), entity_id(g, focus), alpha,
                                      epsilon);
            std::map<std::string, double> scores;
            for (const auto& [v, s] : r.scores) scores[g.entities().label(v)] = s;
            return std::make_tuple(scores, r.discarded, r.residual);
        },
        py::arg("graph"), py::arg("focus"), py::arg("alpha") = 0.15, py::arg("epsilon") = 1e-4,
        py::arg("weighting") = "uniform", "Returns (scores, discarded paint, residual paint)");

    py::class_<SparseCooccurrence>(m, "SparseCooccurrence")
        .def_readonly("tokens", &SparseCooccurrence::tokens)
        .def_property_readonly("nnz", &SparseCooccurrence::nnz)
        .def("entries", [](const SparseCooccurrence& x) {
            std::vector<std::tuple<std::string, std::string, double>> out;
            for (const auto& e : x.entries) out.emplace_back(x.tokens[e.focus], x.tokens[e.context], e.weight);
            return out;
        });

    m.def(
        "build_cooccurrence",
        [](const KnowledgeGraph& g, const std::string& weighting, double alpha, double epsilon, std::size_t workers,
           bool exact) {
            CooccurrenceParams p;
            p.weighting = parse_edge_weighting(weighting);
            p.alpha = alpha;
            p.epsilon = epsilon;
            p.workers = workers;
            py::gil_scoped_release release;
            return exact ? build_cooccurrence_exact(g, p) : build_cooccurrence(g, p);
        },
        py::arg("graph"), py::arg("weighting") = "uniform", py::arg("alpha") = 0.15, py::arg("epsilon") = 1e-4,
        py::arg("workers") = 1, py::arg("exact") = false);

    m.def(
        "train_glove",
        [](const SparseCooccurrence& x, std::size_t dim, std::optional<double> x_max, double exponent,
           std::size_t epochs, double learning_rate, std::uint64_t seed) {
            GloveConfig c;
            c.dim = dim;
            c.x_max = x_max;
            c.exponent = exponent;
            c.epochs = epochs;
            c.learning_rate = learning_rate;
            c.seed = seed;
            py::gil_scoped_release release;
            auto r = train_glove(x, c);
            return std::make_pair(std::move(r.embeddings), std::move(r.epoch_cost));
        },
        py::arg("cooccurrence"), py::arg("dim") = 50, py::arg("x_max") = py::none(), py::arg("exponent") = 0.75,
        py::arg("epochs") = 25, py::arg("learning_rate") = 0.05, py::arg("seed") = 0,
        "Returns (embeddings, cost after each epoch)");

    m.def(
        "generate_planted_kg",
        [](std::size_t entities, std::size_t relations, std::size_t dim, std::size_t triples_per_relation,
           double noise, std::uint64_t seed) {
            PlantedConfig c{entities, relations, dim, triples_per_relation, noise, seed};
            return generate_planted_kg(c).graph;
        },
        py::arg("entities") = 1000, py::arg("relations") = 10, py::arg("dim") = 20,
        py::arg("triples_per_relation") = 450, py::arg("noise") = 0.05, py::arg("seed") = 0);

    m.def(
        "generate_one_to_many",
        [](std::size_t groups, std::size_t tails_per_head, double test_fraction, std::uint64_t seed) {
            const auto d = generate_one_to_many({groups, tails_per_head, test_fraction, seed});
            return std::make_tuple(d.graph, labels_of(d.graph, d.train), labels_of(d.graph, d.test));
        },
        py::arg("groups") = 20, py::arg("tails_per_head") = 8, py::arg("test_fraction") = 0.2, py::arg("seed") = 0,
        "Returns (full graph, train triples, held-out triples)");

    m.def(
        "generate_factory_graph",
        [](std::size_t machines, std::size_t sensors_per_machine, double node_fraction, double edge_fraction,
           double subgraph_fraction, double graph_fraction, std::uint64_t seed) {
            FactoryConfig c;
            c.machines = machines;
            c.sensors_per_machine = sensors_per_machine;
            c.node_fraction = node_fraction;
            c.edge_fraction = edge_fraction;
            c.subgraph_fraction = subgraph_fraction;
            c.graph_fraction = graph_fraction;
            c.seed = seed;
            const auto f = generate_factory_graph(c);
            std::map<std::string, bool> labels;
            for (std::size_t i = 0; i < f.status_nodes.size(); ++i)
                labels[f.graph.entities().label(f.status_nodes[i])] = f.failed[i];
            std::vector<std::pair<std::string, std::vector<std::string>>> failures;
            for (const auto& a : f.failures) failures.emplace_back(std::string(to_string(a.kind)), a.elements);
            return std::make_tuple(f.graph, labels, failures);
        },
        py::arg("machines") = 20, py::arg("sensors_per_machine") = 4, py::arg("node_fraction") = 0.3,
        py::arg("edge_fraction") = 0.0, py::arg("subgraph_fraction") = 0.0, py::arg("graph_fraction") = 0.0,
        py::arg("seed") = 0, "Returns (graph, {status node: failed}, [(kind, elements)])");

    m.def(
        "load_checkpoint",
        [](const std::string& path) -> py::object {
            auto c = load_checkpoint_file(path);
            if (c.translational) return py::cast(std::move(*c.translational));
            return py::cast(std::move(*c.tokens));
        },
        py::arg("path"));

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            const int code = cli::run(args, out, err);
            return std::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs a kgforge subcommand; returns (exit code, stdout text, stderr text)");
}
