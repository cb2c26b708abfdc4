#include "kgforge/eval.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "kgforge/parallel.hpp"
#include "kgforge/rng.hpp"

namespace kgforge {

std::string_view to_string(Slot s) { return s == Slot::Head ? "head" : "tail"; }
std::string_view to_string(Setting s) { return s == Setting::Raw ? "raw" : "filtered"; }

Scorer make_scorer(const TranslationalModel& model) {
    return [&model](const Triple& t) { return model.score(t); };
}

std::size_t rank_triple(const Scorer& scorer, const KnowledgeGraph& g, const Triple& t, Slot slot, Setting setting) {
    if (t.head >= g.entity_count() || t.tail >= g.entity_count() || t.relation >= g.relation_count())
        throw std::out_of_range("triple references unknown ids");
    const double truth = scorer(t);
    std::size_t rank = 1;
    Triple c = t;
    for (EntityId e = 0; e < g.entity_count(); ++e) {
        if (e == (slot == Slot::Head ? t.head : t.tail)) continue;
        (slot == Slot::Head ? c.head : c.tail) = e;
        if (setting == Setting::Filtered && g.contains(c)) continue;
        if (scorer(c) <= truth) ++rank;
    }
    return rank;
}

double Metrics::hits_at(std::size_t k) const {
    for (const auto& [kk, v] : hits)
        if (kk == k) return v;
    throw std::out_of_range("Hits@" + std::to_string(k) + " was not computed");
}

Metrics aggregate_metrics(std::span<const std::size_t> ranks, std::span<const std::size_t> ks) {
    if (ranks.empty()) throw std::invalid_argument("cannot aggregate an empty rank list");
    Metrics m;
    double total = 0.0;
    for (const auto r : ranks) total += static_cast<double>(r);
    m.mean_rank = total / static_cast<double>(ranks.size());
    for (const auto k : ks) {
        const auto within = std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r <= k; });
        m.hits.emplace_back(k, static_cast<double>(within) / static_cast<double>(ranks.size()));
    }
    return m;
}

namespace {

EvalReport make_report(const std::vector<TripleRanks>& ranks, Setting setting, std::span<const std::size_t> ks) {
    std::vector<std::size_t> head, tail, both;
    for (const auto& r : ranks) {
        head.push_back(setting == Setting::Raw ? r.raw_head : r.filtered_head);
        tail.push_back(setting == Setting::Raw ? r.raw_tail : r.filtered_tail);
    }
    both = head;
    both.insert(both.end(), tail.begin(), tail.end());
    return {setting, ranks.size(), aggregate_metrics(head, ks), aggregate_metrics(tail, ks),
            aggregate_metrics(both, ks)};
}

template <class Fn>
void for_each_metric(const LinkPredictionResult& r, Fn&& fn) {
    for (const auto* report : {&r.raw, &r.filtered}) {
        const std::pair<std::string_view, const Metrics*> slots[] = {
            {"head", &report->head}, {"tail", &report->tail}, {"combined", &report->combined}};
        for (const auto& [slot, m] : slots) {
            fn(std::string("mean_rank"), slot, to_string(report->setting), m->mean_rank);
            for (const auto& [k, v] : m->hits) fn("hits@" + std::to_string(k), slot, to_string(report->setting), v);
        }
    }
}

}  // namespace

LinkPredictionResult evaluate_link_prediction(const Scorer& scorer, const KnowledgeGraph& known,
                                              std::span<const Triple> test, const EvalOptions& options) {
    if (test.empty()) throw std::invalid_argument("no test triples to evaluate");
    LinkPredictionResult result;
    result.ranks.resize(test.size());
    parallel_chunks(test.size(), options.workers, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const auto& t = test[i];
            result.ranks[i] = {t,
                               rank_triple(scorer, known, t, Slot::Head, Setting::Raw),
                               rank_triple(scorer, known, t, Slot::Tail, Setting::Raw),
                               rank_triple(scorer, known, t, Slot::Head, Setting::Filtered),
                               rank_triple(scorer, known, t, Slot::Tail, Setting::Filtered)};
        }
    });
    result.raw = make_report(result.ranks, Setting::Raw, options.ks);
    result.filtered = make_report(result.ranks, Setting::Filtered, options.ks);
    return result;
}

void write_report_text(std::ostream& out, const LinkPredictionResult& r) {
    out << "triples = " << r.raw.triples << '\n';
    for_each_metric(r, [&](const std::string& metric, std::string_view slot, std::string_view setting, double v) {
        out << setting << '.' << slot << '.' << metric << " = " << format_double(v) << '\n';
    });
}

void write_report_json(std::ostream& out, const LinkPredictionResult& r) {
    nlohmann::ordered_json doc;
    doc["triples"] = r.raw.triples;
    doc["metrics"] = nlohmann::ordered_json::array();
    for_each_metric(r, [&](const std::string& metric, std::string_view slot, std::string_view setting, double v) {
        doc["metrics"].push_back({{"metric", metric}, {"slot", slot}, {"setting", setting}, {"value", v}});
    });
    out << doc.dump(2) << '\n';
}

void write_ranks_tsv(std::ostream& out, const KnowledgeGraph& g, const LinkPredictionResult& r) {
    out << "head\trelation\ttail\traw_head\traw_tail\tfiltered_head\tfiltered_tail\n";
    for (const auto& x : r.ranks)
        out << g.entities().label(x.triple.head) << '\t' << g.relations().label(x.triple.relation) << '\t'
            << g.entities().label(x.triple.tail) << '\t' << x.raw_head << '\t' << x.raw_tail << '\t'
            << x.filtered_head << '\t' << x.filtered_tail << '\n';
}

std::string_view to_string(Metric m) { return m == Metric::Cosine ? "cosine" : "euclidean"; }

Metric parse_metric(std::string_view s) {
    if (s == "cosine") return Metric::Cosine;
    if (s == "euclidean") return Metric::Euclidean;
    throw std::invalid_argument("unknown metric '" + std::string(s) + "' (expected cosine or euclidean)");
}

std::vector<std::pair<std::string, double>> nearest_neighbors(const TokenEmbeddings& emb, std::string_view query,
                                                              std::size_t k, Metric metric) {
    const auto q = emb.find(query);
    if (!q) throw std::out_of_range("unknown token '" + std::string(query) + "'");
    const auto qv = emb.vectors.row(*q);
    const double qn = l2_norm(qv);

    std::vector<std::pair<double, std::size_t>> scored;  // (sort key, id)
    for (std::size_t i = 0; i < emb.size(); ++i) {
        if (i == *q) continue;
        const auto v = emb.vectors.row(i);
        double s;
        if (metric == Metric::Cosine) {
            const double denom = qn * l2_norm(v);
            s = denom > 0.0 ? dot(qv, v) / denom : 0.0;
        } else {
            double d = 0.0;
            for (std::size_t j = 0; j < v.size(); ++j) d += (v[j] - qv[j]) * (v[j] - qv[j]);
            s = std::sqrt(d);
        }
        scored.emplace_back(metric == Metric::Cosine ? -s : s, i);
    }
    k = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end());
    std::vector<std::pair<std::string, double>> out;
    for (std::size_t i = 0; i < k; ++i)
        out.emplace_back(emb.tokens[scored[i].second], metric == Metric::Cosine ? -scored[i].first : scored[i].first);
    return out;
}

Split split_triples(const KnowledgeGraph& g, double train, double valid, double test, std::uint64_t seed) {
    if (!(train > 0.0) || !(test > 0.0) || valid < 0.0 || std::abs(train + valid + test - 1.0) > 1e-9)
        throw std::invalid_argument("split fractions must be positive (valid may be 0) and sum to 1");
    std::vector<Triple> all(g.triples().begin(), g.triples().end());
    Rng rng(mix_seed(seed, 0x5B117));
    rng.shuffle(all.begin(), all.end());
    const auto n = all.size();
    const auto n_train = static_cast<std::size_t>(std::llround(train * static_cast<double>(n)));
    const auto n_valid = std::min(n - n_train, static_cast<std::size_t>(std::llround(valid * static_cast<double>(n))));
    Split s;
    s.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.valid.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train),
                   all.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
    s.test.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), all.end());
    return s;
}

}  // namespace kgforge
