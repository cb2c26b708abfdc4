#include "kgforge/cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "CLI11.hpp"

#include "kgforge/checkpoint.hpp"
#include "kgforge/error.hpp"
#include "kgforge/eval.hpp"
#include "kgforge/graph.hpp"
#include "kgforge/kglove.hpp"
#include "kgforge/seq_embed.hpp"
#include "kgforge/synth.hpp"
#include "kgforge/trans.hpp"
#include "kgforge/walks.hpp"

namespace kgforge::cli {

namespace fs = std::filesystem;

namespace {

// Bad command line or configuration.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

// ---------------------------------------------------------------------------
// Logging to the diagnostic stream, level from KGFORGE_LOG.

class Logger {
public:
    enum Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

    explicit Logger(std::ostream& err) : err_(err) {
        const char* env = std::getenv("KGFORGE_LOG");
        const std::string v = env ? env : "";
        if (v == "error" || v == "0") level_ = Error;
        else if (v == "info" || v == "2") level_ = Info;
        else if (v == "debug" || v == "3") level_ = Debug;
    }

    void warn(const std::string& msg) const { emit(Warn, "warning", msg); }
    void info(const std::string& msg) const { emit(Info, "info", msg); }
    void debug(const std::string& msg) const { emit(Debug, "debug", msg); }
    bool enabled(Level l) const { return level_ >= l; }

private:
    void emit(Level l, const char* tag, const std::string& msg) const {
        if (level_ >= l) err_ << tag << ": " << msg << '\n';
    }
    std::ostream& err_;
    Level level_ = Warn;
};

// ---------------------------------------------------------------------------
// Settings registry: every accepted key with its default, in manifest order.

const std::vector<std::string> kTopLevel = {"model", "input", "format", "vocabulary", "out", "seed", "workers"};

std::vector<std::pair<std::string, std::string>> registry() {
    const TrainConfig tc;
    const SeqConfig sc;
    const CorpusParams cp;
    const CooccurrenceParams kp;
    const GloveConfig gc;
    const PlantedConfig pc;
    const OneToManyConfig oc;
    const FactoryConfig fc;
    const auto d = [](double v) { return format_double(v); };
    const auto u = [](std::size_t v) { return std::to_string(v); };

    std::vector<std::pair<std::string, std::string>> r = {
        {"model", "transe"}, {"input", ""}, {"format", "tsv"}, {"vocabulary", ""}, {"out", ""}, {"seed", "0"},
        {"workers", "1"},
        {"split.train", "0.8"}, {"split.valid", "0.1"}, {"split.test", "0.1"},
        {"synth.generator", "planted"}, {"synth.entities", u(pc.entities)}, {"synth.relations", u(pc.relations)},
        {"synth.dim", u(pc.dim)}, {"synth.triples_per_relation", u(pc.triples_per_relation)},
        {"synth.noise", d(pc.noise)}, {"synth.groups", u(oc.groups)}, {"synth.tails_per_head", u(oc.tails_per_head)},
        {"synth.test_fraction", d(oc.test_fraction)}, {"synth.machines", u(fc.machines)},
        {"synth.sensors_per_machine", u(fc.sensors_per_machine)}, {"synth.node_fraction", d(fc.node_fraction)},
        {"synth.edge_fraction", d(fc.edge_fraction)}, {"synth.subgraph_fraction", d(fc.subgraph_fraction)},
        {"synth.graph_fraction", d(fc.graph_fraction)},
    };
    for (const std::string s : {"transe", "transh", "transr"}) {
        r.emplace_back(s + ".dim", u(tc.dim));
        if (s == "transr") r.emplace_back(s + ".relation_dim", u(tc.relation_dim));
        r.emplace_back(s + ".margin", d(tc.margin));
        r.emplace_back(s + ".learning_rate", d(tc.learning_rate));
        r.emplace_back(s + ".epochs", u(tc.epochs));
        r.emplace_back(s + ".batch_size", u(tc.batch_size));
        r.emplace_back(s + ".corruption", std::string(to_string(tc.corruption)));
        if (s == "transe") r.emplace_back(s + ".norm", std::string(to_string(tc.norm)));
        if (s == "transh") {
            r.emplace_back(s + ".soft_weight", d(tc.soft_weight));
            r.emplace_back(s + ".epsilon", d(tc.epsilon));
        }
    }
    r.insert(r.end(), {
        {"rdf2vec.corpus", std::string(to_string(cp.mode))}, {"rdf2vec.depth", u(cp.depth)},
        {"rdf2vec.walks_per_entity", "all"}, {"rdf2vec.wl_iterations", u(cp.wl_iterations)},
        {"rdf2vec.architecture", "skipgram"}, {"rdf2vec.dim", u(sc.dim)}, {"rdf2vec.window", u(sc.window)},
        {"rdf2vec.negatives", u(sc.negatives)}, {"rdf2vec.epochs", u(sc.epochs)},
        {"rdf2vec.learning_rate", d(sc.learning_rate)}, {"rdf2vec.min_count", u(sc.min_count)},
        {"kglove.weighting", std::string(to_string(kp.weighting))}, {"kglove.alpha", d(kp.alpha)},
        {"kglove.epsilon", d(kp.epsilon)}, {"kglove.dim", u(gc.dim)}, {"kglove.x_max", "auto"},
        {"kglove.exponent", d(gc.exponent)}, {"kglove.epochs", u(gc.epochs)},
        {"kglove.learning_rate", d(gc.learning_rate)},
    });
    return r;
}

class Config {
public:
    Config() {
        for (auto& [k, v] : registry()) {
            order_.push_back(k);
            values_[k] = v;
        }
    }

    bool known(const std::string& key) const { return values_.contains(key); }

    void set(const std::string& key, const std::string& value, std::string_view origin) {
        if (!known(key)) throw UsageError("unknown configuration key '" + key + "' (" + std::string(origin) + ")");
        values_[key] = value;
    }

    const std::string& str(const std::string& key) const { return values_.at(key); }

    std::size_t size(const std::string& key) const {
        const auto& v = str(key);
        std::size_t x = 0;
        const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
        if (v.empty() || ec != std::errc{} || p != v.data() + v.size())
            throw UsageError("'" + key + "' expects a nonnegative integer, got '" + v + "'");
        return x;
    }

    std::uint64_t u64(const std::string& key) const {
        const auto& v = str(key);
        std::uint64_t x = 0;
        const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
        if (v.empty() || ec != std::errc{} || p != v.data() + v.size())
            throw UsageError("'" + key + "' expects a nonnegative integer, got '" + v + "'");
        return x;
    }

    double real(const std::string& key) const {
        const auto& v = str(key);
        char* end = nullptr;
        const double x = std::strtod(v.c_str(), &end);
        if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(x))
            throw UsageError("'" + key + "' expects a finite number, got '" + v + "'");
        return x;
    }

    template <class Parse>
    auto choice(const std::string& key, Parse parse) const {
        try {
            return parse(str(key));
        } catch (const std::invalid_argument& e) {
            throw UsageError("'" + key + "': " + e.what());
        }
    }

    // Top-level keys, then every key of the listed sections.
    void write(std::ostream& out, const std::vector<std::string>& sections) const {
        for (const auto& k : kTopLevel) out << k << " = " << str(k) << '\n';
        for (const auto& s : sections) {
            out << "\n[" << s << "]\n";
            for (const auto& k : order_)
                if (k.starts_with(s + ".")) out << k.substr(s.size() + 1) << " = " << str(k) << '\n';
        }
    }

private:
    std::vector<std::string> order_;
    std::map<std::string, std::string> values_;
};

// ---------------------------------------------------------------------------
// Options shared by every subcommand.

struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::string seed, workers, input, out, format;
    std::vector<std::pair<std::string, CLI::Option*>> flags;  // config key, option

    void attach(CLI::App* app) {
        app->add_option("--config", config, "Configuration file (key = value, [section] headers)");
        app->add_option("--set", sets, "Override one setting: key=value or section.key=value")->take_all();
        flags = {
            {"seed", app->add_option("--seed", seed, "Random seed")},
            {"workers", app->add_option("--workers", workers, "Worker threads (1 = deterministic single worker)")},
            {"input", app->add_option("--input", input, "Input triple file")},
            {"out", app->add_option("--out", out, "Output directory or file")},
            {"format", app->add_option("--format", format, "Input format: tsv or ntriples")},
        };
    }
};

void apply_flags(Config& c, const std::vector<std::pair<std::string, CLI::Option*>>& flags) {
    for (const auto& [key, opt] : flags)
        if (opt->count() > 0) c.set(key, opt->as<std::string>(), "--" + key);
}

// Defaults < config file < --set < dedicated flags. A bare --set key names a
// top-level setting or one in `section` (which may depend on the model).
template <class SectionFn>
Config resolve(const Common& common, const std::vector<std::pair<std::string, CLI::Option*>>& extra_flags,
               SectionFn section) {
    Config c;
    if (!common.config.empty()) {
        std::ifstream in(common.config);
        if (!in) throw IoError("cannot open config file '" + common.config + "'");
        std::vector<std::pair<std::string, std::string>> entries;
        try {
            entries = parse_config(in);
        } catch (const ParseError& e) {
            throw UsageError(common.config + ": " + e.what());
        }
        for (const auto& [k, v] : entries) c.set(k, v, "in " + common.config);
    }
    std::vector<std::pair<std::string, std::string>> bare;
    for (const auto& s : common.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
        const auto key = trim(std::string_view(s).substr(0, eq));
        const auto value = trim(std::string_view(s).substr(eq + 1));
        if (key.find('.') != std::string::npos || c.known(key))
            c.set(key, value, "--set");
        else
            bare.emplace_back(key, value);
    }
    apply_flags(c, common.flags);
    apply_flags(c, extra_flags);
    const std::string sec = section(c);
    for (const auto& [k, v] : bare) {
        if (sec.empty()) throw UsageError("unknown configuration key '" + k + "' (--set)");
        c.set(sec + "." + k, v, "--set");
    }
    return c;
}

// ---------------------------------------------------------------------------
// File helpers.

std::string require(const Config& c, const std::string& key, std::string_view what) {
    const auto& v = c.str(key);
    if (v.empty()) throw UsageError("missing " + std::string(what) + " (--" + key + " or '" + key + "' in the config)");
    return v;
}

void require_file(const std::string& path) {
    if (!fs::is_regular_file(path)) throw IoError("no such file '" + path + "'");
}

fs::path make_dir(const std::string& path) {
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec || !fs::is_directory(path)) throw IoError("cannot create directory '" + path + "'");
    return fs::path(path);
}

template <class Fn>
void write_file(const fs::path& path, Fn&& fn, bool binary = false) {
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    fn(out);
    out.close();
    if (!out) throw IoError("cannot write '" + path.string() + "'");
}

void write_triples(std::ostream& out, const KnowledgeGraph& g, std::span<const Triple> triples) {
    for (const auto& t : triples)
        out << g.entities().label(t.head) << '\t' << g.relations().label(t.relation) << '\t'
            << g.entities().label(t.tail) << '\n';
}

std::string absolute(const std::string& p) { return p.empty() ? p : fs::absolute(p).lexically_normal().string(); }

// Maps the triples of `src` onto the vocabularies of `dst`. Unknown labels
// are counted; with `strict` they raise ValidationError.
std::size_t map_triples(const KnowledgeGraph& src, const KnowledgeGraph& dst, std::vector<Triple>& out,
                        bool strict, std::string_view what) {
    std::size_t unknown = 0;
    for (const auto& t : src.triples()) {
        const auto h = dst.entities().find(src.entities().label(t.head));
        const auto r = dst.relations().find(src.relations().label(t.relation));
        const auto tl = dst.entities().find(src.entities().label(t.tail));
        if (h && r && tl) {
            out.push_back({*h, *r, *tl});
            continue;
        }
        if (strict)
            throw ValidationError(std::string(what) + " triple '" + src.describe(t) +
                                  "' uses a label outside the model vocabulary");
        ++unknown;
    }
    return unknown;
}

// ---------------------------------------------------------------------------
// Subcommands.

int cmd_ingest(const Config& c, const Logger& log, std::ostream& out) {
    const auto input = require(c, "input", "input file");
    const auto dir = make_dir(require(c, "out", "output directory"));
    const auto format = c.choice("format", parse_graph_format);
    require_file(input);
    const auto r = load_graph_file(input, format);
    log.info("loaded " + std::to_string(r.graph.triple_count()) + " triples from " + input);
    write_file(dir / "triples.tsv", [&](std::ostream& o) { write_tsv(o, r.graph); });
    write_file(dir / "entities.tsv", [&](std::ostream& o) { write_vocabulary(o, r.graph.entities()); });
    write_file(dir / "relations.tsv", [&](std::ostream& o) { write_vocabulary(o, r.graph.relations()); });
    out << "entities = " << r.graph.entity_count() << "\nrelations = " << r.graph.relation_count()
        << "\ntriples = " << r.graph.triple_count() << "\nskipped_literals = " << r.skipped_literals
        << "\nduplicate_triples = " << r.duplicate_triples << '\n';
    return Ok;
}

int cmd_split(const Config& c, const Logger& log, std::ostream& out) {
    const auto input = require(c, "input", "input file");
    const auto format = c.choice("format", parse_graph_format);
    const double tr = c.real("split.train"), va = c.real("split.valid"), te = c.real("split.test");
    const auto seed = c.u64("seed");
    const auto dir_name = require(c, "out", "output directory");
    require_file(input);
    const auto g = load_graph_file(input, format).graph;
    Split s;
    try {
        s = split_triples(g, tr, va, te, seed);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const auto dir = make_dir(dir_name);
    write_file(dir / "train.tsv", [&](std::ostream& o) { write_triples(o, g, s.train); });
    write_file(dir / "valid.tsv", [&](std::ostream& o) { write_triples(o, g, s.valid); });
    write_file(dir / "test.tsv", [&](std::ostream& o) { write_triples(o, g, s.test); });
    log.info("split " + std::to_string(g.triple_count()) + " triples");
    out << "train = " << s.train.size() << "\nvalid = " << s.valid.size() << "\ntest = " << s.test.size() << '\n';
    return Ok;
}

TrainConfig trans_config(const Config& c, const std::string& s) {
    TrainConfig t;
    t.dim = c.size(s + ".dim");
    t.relation_dim = s == "transr" ? c.size(s + ".relation_dim") : t.dim;
    t.margin = c.real(s + ".margin");
    t.learning_rate = c.real(s + ".learning_rate");
    t.epochs = c.size(s + ".epochs");
    t.batch_size = c.size(s + ".batch_size");
    t.corruption = c.choice(s + ".corruption", parse_corruption);
    if (s == "transe") t.norm = c.choice(s + ".norm", parse_norm);
    if (s == "transh") {
        t.soft_weight = c.real(s + ".soft_weight");
        t.epsilon = c.real(s + ".epsilon");
    }
    t.seed = c.u64("seed");
    t.workers = c.size("workers");
    return t;
}

template <class T>
void validate_as_usage(const T& cfg) {
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

KnowledgeGraph load_training_graph(const Config& c, const Logger& log) {
    const auto input = c.str("input");
    const auto vocab = c.str("vocabulary");
    const auto format = c.choice("format", parse_graph_format);
    require_file(input);
    if (!vocab.empty()) require_file(vocab);
    auto loaded = load_graph_file(input, format);
    if (loaded.skipped_literals) log.warn("skipped " + std::to_string(loaded.skipped_literals) + " literal triples");
    if (vocab.empty()) return std::move(loaded.graph);
    auto g = KnowledgeGraph::with_vocabulary_of(load_graph_file(vocab, format).graph);
    std::vector<Triple> mapped;
    map_triples(loaded.graph, g, mapped, true, "training");
    for (const auto& t : mapped) g.add_triple(t);
    return g;
}

int cmd_train(Config& c, const Logger& log, std::ostream& out) {
    const auto kind = c.choice("model", parse_model_kind);
    const std::string section(to_string(kind));
    require(c, "input", "training triples");
    require(c, "out", "output directory");
    c.set("input", absolute(c.str("input")), "resolved");
    c.set("vocabulary", absolute(c.str("vocabulary")), "resolved");
    c.set("out", absolute(c.str("out")), "resolved");
    const auto seed = c.u64("seed");
    const auto workers = c.size("workers");
    if (workers == 0) throw UsageError("'workers' must be at least 1");

    // Validate the whole configuration before touching any data.
    std::optional<TrainConfig> tc;
    CorpusParams cp;
    SeqConfig sc;
    Architecture arch = Architecture::SkipGram;
    CooccurrenceParams kp;
    GloveConfig gc;
    if (is_translational(kind)) {
        tc = trans_config(c, section);
        validate_as_usage(*tc);
    } else if (kind == ModelKind::Rdf2Vec) {
        cp.mode = c.choice("rdf2vec.corpus", parse_corpus_mode);
        cp.depth = c.size("rdf2vec.depth");
        if (c.str("rdf2vec.walks_per_entity") != "all") cp.walks_per_entity = c.size("rdf2vec.walks_per_entity");
        cp.wl_iterations = c.size("rdf2vec.wl_iterations");
        cp.seed = seed;
        cp.workers = workers;
        arch = c.choice("rdf2vec.architecture", parse_architecture);
        sc.dim = c.size("rdf2vec.dim");
        sc.window = c.size("rdf2vec.window");
        sc.negatives = c.size("rdf2vec.negatives");
        sc.epochs = c.size("rdf2vec.epochs");
        sc.learning_rate = c.real("rdf2vec.learning_rate");
        sc.min_count = c.u64("rdf2vec.min_count");
        sc.seed = seed;
        validate_as_usage(cp);
        validate_as_usage(sc);
    } else {
        kp.weighting = c.choice("kglove.weighting", parse_edge_weighting);
        kp.alpha = c.real("kglove.alpha");
        kp.epsilon = c.real("kglove.epsilon");
        kp.workers = workers;
        gc.dim = c.size("kglove.dim");
        if (c.str("kglove.x_max") != "auto") gc.x_max = c.real("kglove.x_max");
        gc.exponent = c.real("kglove.exponent");
        gc.epochs = c.size("kglove.epochs");
        gc.learning_rate = c.real("kglove.learning_rate");
        gc.seed = seed;
        validate_as_usage(kp);
        validate_as_usage(gc);
    }

    const auto g = load_training_graph(c, log);
    const auto dir = make_dir(c.str("out"));
    log.info("training " + section + " on " + std::to_string(g.triple_count()) + " triples");

    Checkpoint ckpt;
    ckpt.kind = kind;
    std::vector<double> curve;
    if (tc) {
        auto r = train_translational(g, parse_variant(section), *tc,
                                     [&](const EpochReport& e, const TranslationalModel&) {
                                         log.debug("epoch " + std::to_string(e.epoch) +
                                                   " loss " + format_double(e.mean_loss));
                                     });
        curve = std::move(r.epoch_loss);
        ckpt.translational = std::move(r.model);
    } else if (kind == ModelKind::Rdf2Vec) {
        const auto corpus = build_corpus(g, cp);
        log.info("corpus has " + std::to_string(corpus.sequences.size()) + " sequences");
        write_file(dir / "corpus.txt", [&](std::ostream& o) { write_corpus(o, corpus); });
        auto r = train_sequences(corpus, arch, sc);
        curve = std::move(r.epoch_loss);
        r.embeddings.context = Matrix();
        ckpt.tokens = std::move(r.embeddings);
    } else {
        const auto x = build_cooccurrence(g, kp);
        log.info("co-occurrence matrix has " + std::to_string(x.nnz()) + " entries");
        write_file(dir / "cooccurrence.bin", [&](std::ostream& o) { write_cooccurrence_binary(o, x); }, true);
        write_file(dir / "cooccurrence.tsv", [&](std::ostream& o) { write_cooccurrence_text(o, x); });
        auto r = train_glove(x, gc);
        curve = std::move(r.epoch_cost);
        ckpt.tokens = std::move(r.embeddings);
    }

    save_checkpoint_file((dir / "model.ckpt").string(), ckpt);
    write_file(dir / "training.tsv", [&](std::ostream& o) {
        o << "epoch\tobjective\n";
        for (std::size_t i = 0; i < curve.size(); ++i) o << i + 1 << '\t' << format_double(curve[i]) << '\n';
    });
    write_file(dir / "manifest.conf", [&](std::ostream& o) {
        o << "# kgforge train: replay with `kgforge train --config <this file>`\n";
        c.write(o, {section});
    });
    out << "model = " << section << "\ncheckpoint = " << (dir / "model.ckpt").string() << "\nepochs = " << curve.size();
    if (!curve.empty()) out << "\nfinal_objective = " << format_double(curve.back());
    out << '\n';
    return Ok;
}

struct EvalArgs {
    std::string checkpoint;
    std::vector<std::string> known;
};

KnowledgeGraph graph_of(const TranslationalModel& m) {
    KnowledgeGraph g;
    for (const auto& l : m.entity_labels) g.add_entity(l);
    for (const auto& l : m.relation_labels) g.add_relation(l);
    return g;
}

int cmd_eval(const Config& c, const EvalArgs& a, const Logger& log, std::ostream& out) {
    if (a.checkpoint.empty()) throw UsageError("missing --checkpoint");
    const auto input = require(c, "input", "test triples");
    const auto format = c.choice("format", parse_graph_format);
    const auto workers = c.size("workers");
    if (workers == 0) throw UsageError("'workers' must be at least 1");
    require_file(a.checkpoint);
    require_file(input);
    for (const auto& k : a.known) require_file(k);

    const auto ckpt = load_checkpoint_file(a.checkpoint);
    if (!ckpt.translational)
        throw ValidationError("link prediction needs a translational checkpoint, got " +
                              std::string(to_string(ckpt.kind)));
    const auto& model = *ckpt.translational;
    auto known = graph_of(model);
    std::vector<Triple> test;
    map_triples(load_graph_file(input, format).graph, known, test, true, "test");
    for (const auto& t : test) known.add_triple(t);
    for (const auto& path : a.known) {
        std::vector<Triple> extra;
        const auto unknown = map_triples(load_graph_file(path, format).graph, known, extra, false, "known");
        if (unknown) log.warn(std::to_string(unknown) + " triples of " + path + " use unknown labels; ignored");
        for (const auto& t : extra) known.add_triple(t);
    }
    log.info("ranking " + std::to_string(test.size()) + " test triples against " +
             std::to_string(known.entity_count()) + " entities");

    EvalOptions opt;
    opt.workers = workers;
    const auto result = evaluate_link_prediction(make_scorer(model), known, test, opt);
    write_report_text(out, result);
    if (!c.str("out").empty()) {
        const auto dir = make_dir(c.str("out"));
        write_file(dir / "report.txt", [&](std::ostream& o) { write_report_text(o, result); });
        write_file(dir / "report.json", [&](std::ostream& o) { write_report_json(o, result); });
        write_file(dir / "ranks.tsv", [&](std::ostream& o) { write_ranks_tsv(o, known, result); });
    }
    return Ok;
}

struct NearestArgs {
    std::string checkpoint, query, metric = "cosine";
    std::size_t k = 10;
};

int cmd_nearest(const NearestArgs& a, std::ostream& out) {
    if (a.checkpoint.empty() || a.query.empty()) throw UsageError("nearest needs --checkpoint and --query");
    const auto metric = [&] {
        try {
            return parse_metric(a.metric);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }();
    require_file(a.checkpoint);
    const auto emb = load_checkpoint_file(a.checkpoint).embeddings();
    if (!emb.find(a.query)) throw UsageError("unknown token '" + a.query + "'");
    for (const auto& [token, score] : nearest_neighbors(emb, a.query, a.k, metric))
        out << token << '\t' << format_double(score) << '\n';
    return Ok;
}

struct ExportArgs {
    std::string checkpoint, table = "entities";
};

int cmd_export(const Config& c, const ExportArgs& a, std::ostream& out) {
    if (a.checkpoint.empty()) throw UsageError("missing --checkpoint");
    if (a.table != "entities" && a.table != "relations")
        throw UsageError("--table must be entities or relations, got '" + a.table + "'");
    require_file(a.checkpoint);
    const auto ckpt = load_checkpoint_file(a.checkpoint);
    const auto emit = [&](std::ostream& o) {
        if (ckpt.translational) {
            export_text(o, *ckpt.translational, a.table == "entities" ? ExportTable::Entities : ExportTable::Relations);
        } else {
            if (a.table != "entities")
                throw UsageError(std::string(to_string(ckpt.kind)) + " checkpoints hold token vectors only");
            write_vectors_text(o, *ckpt.tokens);
        }
    };
    if (c.str("out").empty())
        emit(out);
    else
        write_file(c.str("out"), emit);
    return Ok;
}

int cmd_synth(const Config& c, const Logger& log, std::ostream& out) {
    const auto generator = c.str("synth.generator");
    const auto seed = c.u64("seed");
    const auto dir_name = require(c, "out", "output directory");
    const auto wrap = [](auto&& fn) {
        try {
            return fn();
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    };
    if (generator == "planted") {
        PlantedConfig p;
        p.entities = c.size("synth.entities");
        p.relations = c.size("synth.relations");
        p.dim = c.size("synth.dim");
        p.triples_per_relation = c.size("synth.triples_per_relation");
        p.noise = c.real("synth.noise");
        p.seed = seed;
        const auto kg = wrap([&] { return generate_planted_kg(p); });
        const auto dir = make_dir(dir_name);
        write_file(dir / "triples.tsv", [&](std::ostream& o) { write_tsv(o, kg.graph); });
        out << "generator = planted\ntriples = " << kg.graph.triple_count() << '\n';
    } else if (generator == "one-to-many") {
        OneToManyConfig o2m;
        o2m.groups = c.size("synth.groups");
        o2m.tails_per_head = c.size("synth.tails_per_head");
        o2m.test_fraction = c.real("synth.test_fraction");
        o2m.seed = seed;
        const auto ds = wrap([&] { return generate_one_to_many(o2m); });
        const auto dir = make_dir(dir_name);
        write_file(dir / "triples.tsv", [&](std::ostream& o) { write_tsv(o, ds.graph); });
        write_file(dir / "train.tsv", [&](std::ostream& o) { write_triples(o, ds.graph, ds.train); });
        write_file(dir / "test.tsv", [&](std::ostream& o) { write_triples(o, ds.graph, ds.test); });
        out << "generator = one-to-many\ntriples = " << ds.graph.triple_count() << "\ntrain = " << ds.train.size()
            << "\ntest = " << ds.test.size() << '\n';
    } else if (generator == "factory") {
        FactoryConfig f;
        f.machines = c.size("synth.machines");
        f.sensors_per_machine = c.size("synth.sensors_per_machine");
        f.node_fraction = c.real("synth.node_fraction");
        f.edge_fraction = c.real("synth.edge_fraction");
        f.subgraph_fraction = c.real("synth.subgraph_fraction");
        f.graph_fraction = c.real("synth.graph_fraction");
        f.seed = seed;
        const auto fg = wrap([&] {
            f.validate();
            return generate_factory_graph(f);
        });
        const auto dir = make_dir(dir_name);
        write_file(dir / "triples.tsv", [&](std::ostream& o) { write_tsv(o, fg.graph); });
        write_file(dir / "labels.tsv", [&](std::ostream& o) {
            for (std::size_t i = 0; i < fg.status_nodes.size(); ++i)
                o << fg.graph.entities().label(fg.status_nodes[i]) << '\t' << (fg.failed[i] ? 1 : 0) << '\n';
        });
        write_file(dir / "failures.tsv", [&](std::ostream& o) {
            for (const auto& a : fg.failures) {
                o << to_string(a.kind);
                for (const auto& e : a.elements) o << '\t' << e;
                o << '\n';
            }
        });
        out << "generator = factory\ntriples = " << fg.graph.triple_count() << "\nstatus_nodes = "
            << fg.status_nodes.size() << "\nfailures = " << fg.failures.size() << '\n';
    } else {
        throw UsageError("unknown generator '" + generator + "' (expected planted, one-to-many or factory)");
    }
    log.info("wrote synthetic data to " + dir_name);
    return Ok;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_config(std::istream& in) {
    std::vector<std::pair<std::string, std::string>> entries;
    std::string line, section;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto s = trim(line);
        if (s.empty() || s.front() == '#' || s.front() == ';') continue;
        if (s.front() == '[') {
            if (s.back() != ']' || s.size() < 3) throw ParseError(number, "malformed section header '" + s + "'");
            section = trim(std::string_view(s).substr(1, s.size() - 2));
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ParseError(number, "expected 'key = value', got '" + s + "'");
        const auto key = trim(std::string_view(s).substr(0, eq));
        if (key.empty()) throw ParseError(number, "empty key");
        entries.emplace_back(section.empty() ? key : section + "." + key, trim(std::string_view(s).substr(eq + 1)));
    }
    return entries;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Knowledge-graph embedding toolkit", "kgforge"};
    app.require_subcommand(1);
    app.fallthrough(false);

    const auto add = [&](const char* name, const char* help, Common& common) {
        auto* sub = app.add_subcommand(name, help);
        common.attach(sub);
        return sub;
    };

    Common c_ingest, c_split, c_train, c_eval, c_nearest, c_export, c_synth;
    auto* ingest = add("ingest", "Load a TSV or N-Triples file and write normalized triples and vocabularies", c_ingest);
    auto* split = add("split", "Split triples into train/valid/test files", c_split);
    auto* train = add("train", "Train a model and write a checkpoint plus a replayable manifest", c_train);
    auto* eval = add("eval", "Rank test triples with a translational checkpoint", c_eval);
    auto* nearest = add("nearest", "List the nearest neighbors of an entity or token", c_nearest);
    auto* exporter = add("export", "Write checkpoint vectors as text", c_export);
    auto* synth = add("synth", "Generate a synthetic graph", c_synth);

    std::string model;
    auto* model_opt = train->add_option("--model", model, "transe, transh, transr, rdf2vec or kglove");
    std::string vocabulary;
    auto* vocab_opt = train->add_option("--vocabulary", vocabulary, "Triple file whose labels fix the id order");
    EvalArgs eval_args;
    eval->add_option("--checkpoint", eval_args.checkpoint, "Model checkpoint");
    eval->add_option("--known", eval_args.known, "Further true triples for the filtered setting")->take_all();
    NearestArgs nearest_args;
    nearest->add_option("--checkpoint", nearest_args.checkpoint, "Model checkpoint");
    nearest->add_option("--query", nearest_args.query, "Entity or token label");
    nearest->add_option("-k,--k", nearest_args.k, "Number of neighbors");
    nearest->add_option("--metric", nearest_args.metric, "cosine or euclidean");
    ExportArgs export_args;
    exporter->add_option("--checkpoint", export_args.checkpoint, "Model checkpoint");
    exporter->add_option("--table", export_args.table, "entities or relations");
    std::string generator;
    auto* gen_opt = synth->add_option("--generator", generator, "planted, one-to-many or factory");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return Ok;
        }
        const auto parsed = app.get_subcommands();
        err << "error: " << e.what() << "\n\n" << (parsed.empty() ? app.help() : parsed.front()->help());
        return BadArguments;
    }

    const Logger log(err);
    try {
        const auto none = [](const Config&) { return std::string(); };
        if (ingest->parsed()) return cmd_ingest(resolve(c_ingest, {}, none), log, out);
        if (split->parsed()) return cmd_split(resolve(c_split, {}, [](const Config&) { return std::string("split"); }), log, out);
        if (train->parsed()) {
            auto cfg = resolve(c_train, {{"model", model_opt}, {"vocabulary", vocab_opt}},
                               [](const Config& c) { return c.str("model"); });
            return cmd_train(cfg, log, out);
        }
        if (eval->parsed()) return cmd_eval(resolve(c_eval, {}, none), eval_args, log, out);
        if (nearest->parsed()) {
            resolve(c_nearest, {}, none);
            return cmd_nearest(nearest_args, out);
        }
        if (exporter->parsed()) return cmd_export(resolve(c_export, {}, none), export_args, out);
        if (synth->parsed()) {
            auto cfg = resolve(c_synth, {}, [](const Config&) { return std::string("synth"); });
            if (gen_opt->count() > 0) cfg.set("synth.generator", generator, "--generator");
            return cmd_synth(cfg, log, out);
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return BadArguments;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return IoFailure;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return ValidationFailure;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return ValidationFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return Failure;
    }
    return BadArguments;
}

}  // namespace kgforge::cli
