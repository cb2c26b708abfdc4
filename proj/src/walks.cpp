#include "kgforge/walks.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "kgforge/parallel.hpp"

namespace kgforge {

namespace {

constexpr std::uint64_t kSaturated = std::numeric_limits<std::uint64_t>::max();

std::uint64_t saturating_add(std::uint64_t a, std::uint64_t b) { return a > kSaturated - b ? kSaturated : a + b; }

// Memoized maximal-walk counts N(v, steps).
class WalkCounter {
public:
    explicit WalkCounter(const KnowledgeGraph& g) : g_(g) {}

    std::uint64_t operator()(EntityId v, std::size_t steps) {
        if (steps == 0 || g_.out_degree(v) == 0) return 1;
        const std::uint64_t key = (std::uint64_t{v} << 16) | steps;
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        std::uint64_t total = 0;
        for (const auto& e : g_.out_edges(v)) total = saturating_add(total, (*this)(e.target, steps - 1));
        memo_.emplace(key, total);
        return total;
    }

private:
    const KnowledgeGraph& g_;
    std::unordered_map<std::uint64_t, std::uint64_t> memo_;
};

void dfs_walks(const KnowledgeGraph& g, Walk& current, EntityId v, std::size_t steps, std::vector<Walk>& out) {
    if (steps == 0 || g.out_degree(v) == 0) {
        out.push_back(current);
        return;
    }
    for (const auto& e : g.out_edges(v)) {
        current.push_back(e.relation);
        current.push_back(e.target);
        dfs_walks(g, current, e.target, steps - 1, out);
        current.resize(current.size() - 2);
    }
}

Walk decode_walk(const KnowledgeGraph& g, WalkCounter& counter, EntityId root, std::size_t depth,
                 std::uint64_t index) {
    Walk w{root};
    EntityId v = root;
    for (std::size_t steps = depth; steps > 0 && g.out_degree(v) > 0; --steps) {
        for (const auto& e : g.out_edges(v)) {
            const auto n = counter(e.target, steps - 1);
            if (index < n) {
                w.push_back(e.relation);
                w.push_back(e.target);
                v = e.target;
                break;
            }
            index -= n;
        }
    }
    return w;
}

}  // namespace

std::uint64_t count_walks(const KnowledgeGraph& g, EntityId root, std::size_t depth) {
    if (root >= g.entity_count()) throw std::out_of_range("unknown root entity");
    return WalkCounter(g)(root, depth);
}

std::vector<Walk> enumerate_walks(const KnowledgeGraph& g, EntityId root, std::size_t depth,
                                  std::optional<std::size_t> cap, Rng& rng) {
    if (root >= g.entity_count()) throw std::out_of_range("unknown root entity");
    if (depth > 0xFFFF) throw std::invalid_argument("walk depth too large");
    WalkCounter counter(g);
    const auto total = counter(root, depth);
    std::vector<Walk> out;
    if (!cap || *cap >= total) {
        if (total == kSaturated) throw std::overflow_error("walk count overflows; set a cap or reduce depth");
        out.reserve(total);
        Walk current{root};
        dfs_walks(g, current, root, depth, out);
        return out;
    }
    if (total == kSaturated) throw std::overflow_error("walk count overflows 64 bits; reduce depth");
    // Floyd's algorithm: `cap` distinct indices from [0, total).
    std::set<std::uint64_t> picked;
    for (std::uint64_t j = total - *cap; j < total; ++j) {
        const auto t = rng.below(j + 1);
        if (!picked.insert(t).second) picked.insert(j);
    }
    out.reserve(picked.size());
    for (const auto index : picked) out.push_back(decode_walk(g, counter, root, depth, index));
    return out;
}

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (const unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void append_field(std::string& out, std::string_view field) {
    out += std::to_string(field.size());
    out += ':';
    out += field;
}

}  // namespace

WLLabeling wl_relabel(const KnowledgeGraph& g, std::size_t iterations) {
    return wl_relabel(g, iterations, g.entities().labels());
}

WLLabeling wl_relabel(const KnowledgeGraph& g, std::size_t iterations, std::vector<std::string> initial) {
    const std::size_t n = g.entity_count();
    if (initial.size() != n) throw std::invalid_argument("one initial label per vertex required");
    using Multiset = std::vector<std::pair<std::string, std::string>>;
    WLLabeling result;
    result.labels.reserve(iterations + 1);
    result.labels.push_back(std::move(initial));
    std::vector<Multiset> previous(n);  // empty before the first round

    for (std::size_t it = 1; it <= iterations; ++it) {
        const auto& before = result.labels.back();
        std::vector<std::string> next(n);
        for (EntityId v = 0; v < n; ++v) {
            Multiset current;
            current.reserve(g.out_degree(v));
            for (const auto& e : g.out_edges(v))
                current.emplace_back(g.relations().label(e.relation), before[e.target]);
            std::sort(current.begin(), current.end());
            if (current == previous[v]) {
                next[v] = before[v];
            } else {
                std::string composite;
                append_field(composite, before[v]);
                for (const auto& [rel, label] : current) {
                    append_field(composite, rel);
                    append_field(composite, label);
                }
                char hex[17];
                std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a(composite)));
                next[v] = "wl" + std::to_string(it) + "_" + hex;
            }
            previous[v] = std::move(current);
        }
        result.labels.push_back(std::move(next));
    }
    return result;
}

std::string_view to_string(CorpusMode m) { return m == CorpusMode::Walks ? "walks" : "wl"; }

CorpusMode parse_corpus_mode(std::string_view s) {
    if (s == "walks") return CorpusMode::Walks;
    if (s == "wl") return CorpusMode::WL;
    throw std::invalid_argument("unknown corpus mode '" + std::string(s) + "' (expected walks or wl)");
}

void CorpusParams::validate() const {
    if (depth == 0) throw std::invalid_argument("depth must be positive");
    if (walks_per_entity && *walks_per_entity == 0) throw std::invalid_argument("walks_per_entity must be positive");
    if (workers == 0) throw std::invalid_argument("workers must be positive");
}

void WalkCorpus::add_sequence(const std::vector<std::string_view>& tokens) {
    std::vector<std::uint32_t> ids;
    ids.reserve(tokens.size());
    for (const auto t : tokens) {
        const auto id = vocabulary.intern(t);
        if (counts.size() <= id) counts.resize(id + 1, 0);
        ++counts[id];
        ids.push_back(id);
    }
    sequences.push_back(std::move(ids));
}

std::vector<std::string> WalkCorpus::sequence_tokens(std::size_t i) const {
    std::vector<std::string> out;
    for (const auto id : sequences.at(i)) out.push_back(vocabulary.label(id));
    return out;
}

std::size_t WalkCorpus::token_count() const {
    std::size_t n = 0;
    for (const auto& s : sequences) n += s.size();
    return n;
}

namespace {

struct SequenceHash {
    std::size_t operator()(const std::vector<std::string_view>& s) const noexcept {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const auto t : s) h = fnv1a(t, h ^ 0xFF);
        return static_cast<std::size_t>(h);
    }
};

std::uint64_t root_seed(std::uint64_t seed, std::size_t round, EntityId root) {
    const std::uint64_t base = round == 0 ? seed : mix_seed(seed, 0x5700 + round);
    return mix_seed(base, root);
}

}  // namespace

WalkCorpus build_corpus(const KnowledgeGraph& g, const CorpusParams& params) {
    params.validate();
    WalkCorpus corpus;
    corpus.mode = params.mode;
    corpus.depth = params.depth;
    corpus.wl_iterations = params.mode == CorpusMode::WL ? params.wl_iterations : 0;
    const std::size_t n = g.entity_count();

    WLLabeling wl;
    if (params.mode == CorpusMode::WL)
        wl = wl_relabel(g, params.wl_iterations);
    else
        wl.labels.push_back(g.entities().labels());

    std::unordered_set<std::vector<std::string_view>, SequenceHash> seen;
    for (std::size_t round = 0; round < wl.labels.size(); ++round) {
        std::vector<std::vector<Walk>> per_root(n);
        parallel_chunks(n, params.workers, [&](std::size_t, std::size_t b, std::size_t e) {
            for (std::size_t v = b; v < e; ++v) {
                Rng rng(root_seed(params.seed, round, static_cast<EntityId>(v)));
                per_root[v] = enumerate_walks(g, static_cast<EntityId>(v), params.depth, params.walks_per_entity, rng);
            }
        });
        const auto& labels = wl.labels[round];
        for (EntityId v = 0; v < n; ++v) {
            for (const auto& walk : per_root[v]) {
                std::vector<std::string_view> tokens;
                tokens.reserve(walk.size());
                tokens.push_back(g.entities().label(v));
                for (std::size_t i = 1; i + 1 < walk.size(); i += 2) {
                    tokens.push_back(g.relations().label(walk[i]));
                    tokens.push_back(labels[walk[i + 1]]);
                }
                if (seen.insert(tokens).second) corpus.add_sequence(tokens);
            }
        }
    }
    return corpus;
}

void write_corpus(std::ostream& out, const WalkCorpus& corpus) {
    for (const auto& seq : corpus.sequences) {
        for (std::size_t i = 0; i < seq.size(); ++i) {
            if (i) out << ' ';
            out << corpus.vocabulary.label(seq[i]);
        }
        out << '\n';
    }
}

WalkCorpus read_corpus(std::istream& in) {
    WalkCorpus corpus;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::vector<std::string> owned;
        for (std::string tok; ss >> tok;) owned.push_back(std::move(tok));
        if (owned.empty()) continue;
        corpus.add_sequence({owned.begin(), owned.end()});
    }
    return corpus;
}

}  // namespace kgforge
