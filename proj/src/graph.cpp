#include "kgforge/graph.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "kgforge/error.hpp"

namespace kgforge {

std::uint32_t Vocabulary::intern(std::string_view label) {
    if (auto it = ids_.find(label); it != ids_.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(labels_.size());
    labels_.emplace_back(label);
    ids_.emplace(labels_.back(), id);
    return id;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view label) const {
    if (auto it = ids_.find(label); it != ids_.end()) return it->second;
    return std::nullopt;
}

KnowledgeGraph KnowledgeGraph::with_vocabulary_of(const KnowledgeGraph& other) {
    KnowledgeGraph g;
    for (const auto& l : other.entities_.labels()) g.add_entity(l);
    for (const auto& l : other.relations_.labels()) g.add_relation(l);
    return g;
}

EntityId KnowledgeGraph::add_entity(std::string_view label) {
    const auto id = entities_.intern(label);
    if (out_.size() < entities_.size()) {
        out_.resize(entities_.size());
        in_.resize(entities_.size());
    }
    return id;
}

RelationId KnowledgeGraph::add_relation(std::string_view label) { return relations_.intern(label); }

bool KnowledgeGraph::add_triple(Triple t) {
    if (t.head >= entities_.size() || t.tail >= entities_.size() || t.relation >= relations_.size())
        throw std::out_of_range("triple references an id outside the vocabulary");
    if (!index_.insert(t).second) return false;
    triples_.push_back(t);
    out_[t.head].push_back({t.relation, t.tail});
    in_[t.tail].push_back({t.relation, t.head});
    return true;
}

bool KnowledgeGraph::add_triple(std::string_view head, std::string_view relation, std::string_view tail) {
    const auto h = add_entity(head);
    const auto r = add_relation(relation);
    const auto t = add_entity(tail);
    return add_triple({h, r, t});
}

std::string KnowledgeGraph::describe(const Triple& t) const {
    return "(" + entities_.label(t.head) + ", " + relations_.label(t.relation) + ", " + entities_.label(t.tail) + ")";
}

GraphFormat parse_graph_format(std::string_view name) {
    if (name == "tsv") return GraphFormat::Tsv;
    if (name == "ntriples" || name == "nt") return GraphFormat::NTriples;
    throw std::invalid_argument("unknown graph format '" + std::string(name) + "' (expected tsv or ntriples)");
}

namespace {

bool valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        std::size_t extra;
        std::uint32_t cp;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            extra = 1;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            extra = 2;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            extra = 3;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + extra >= s.size()) return false;
        for (std::size_t k = 1; k <= extra; ++k) {
            const auto cc = static_cast<unsigned char>(s[i + k]);
            if ((cc & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (cc & 0x3F);
        }
        // overlong forms, surrogates, out of range
        if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) || (extra == 3 && cp < 0x10000) ||
            (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF)
            return false;
        i += extra + 1;
    }
    return true;
}

bool is_blank(std::string_view s) { return s.find_first_not_of(" \t") == std::string_view::npos; }

struct ParsedLine {
    std::string_view head, relation, tail;
    bool literal = false;
};

ParsedLine parse_tsv_line(std::string_view line, std::size_t lineno) {
    const auto a = line.find('\t');
    const auto b = a == std::string_view::npos ? a : line.find('\t', a + 1);
    if (a == std::string_view::npos || b == std::string_view::npos || line.find('\t', b + 1) != std::string_view::npos)
        throw ParseError(lineno, "expected exactly three tab-separated fields");
    ParsedLine p{line.substr(0, a), line.substr(a + 1, b - a - 1), line.substr(b + 1)};
    if (p.head.empty() || p.relation.empty() || p.tail.empty()) throw ParseError(lineno, "empty field");
    return p;
}

class NTriplesCursor {
public:
    NTriplesCursor(std::string_view line, std::size_t lineno) : s_(line), lineno_(lineno) {}

    void skip_ws() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
    }

    bool at(char c) const { return pos_ < s_.size() && s_[pos_] == c; }

    std::string_view iri() {
        skip_ws();
        if (at('_')) throw ParseError(lineno_, "blank nodes are not supported");
        if (!at('<')) throw ParseError(lineno_, "expected '<'");
        const auto close = s_.find('>', pos_ + 1);
        if (close == std::string_view::npos) throw ParseError(lineno_, "unterminated IRI");
        auto out = s_.substr(pos_ + 1, close - pos_ - 1);
        if (out.empty() || out.find_first_of(" \t<\"") != std::string_view::npos)
            throw ParseError(lineno_, "invalid IRI");
        pos_ = close + 1;
        return out;
    }

    void literal() {
        skip_ws();
        ++pos_;  // opening quote
        bool closed = false;
        while (pos_ < s_.size()) {
            const char c = s_[pos_++];
            if (c == '\\') {
                ++pos_;
            } else if (c == '"') {
                closed = true;
                break;
            }
        }
        if (!closed) throw ParseError(lineno_, "unterminated literal");
        if (at('@')) {
            while (pos_ < s_.size() && s_[pos_] != ' ' && s_[pos_] != '\t' && s_[pos_] != '.') ++pos_;
        } else if (s_.substr(pos_, 2) == "^^") {
            pos_ += 2;
            iri();
        }
    }

    void finish() {
        skip_ws();
        if (!at('.')) throw ParseError(lineno_, "expected terminating '.'");
        ++pos_;
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] != '#') throw ParseError(lineno_, "trailing characters after '.'");
    }

    bool object_is_literal() {
        skip_ws();
        return at('"');
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
    std::size_t lineno_;
};

ParsedLine parse_ntriples_line(std::string_view line, std::size_t lineno) {
    NTriplesCursor cur(line, lineno);
    ParsedLine p;
    p.head = cur.iri();
    p.relation = cur.iri();
    if (cur.object_is_literal()) {
        cur.literal();
        p.literal = true;
    } else {
        p.tail = cur.iri();
    }
    cur.finish();
    return p;
}

template <class OnLine>
void for_each_line(std::istream& in, GraphFormat format, OnLine&& on_line) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!valid_utf8(line)) throw ParseError(lineno, "invalid UTF-8");
        if (is_blank(line)) continue;
        if (format == GraphFormat::NTriples) {
            const auto first = line.find_first_not_of(" \t");
            if (line[first] == '#') continue;
            on_line(parse_ntriples_line(line, lineno));
        } else {
            on_line(parse_tsv_line(line, lineno));
        }
    }
    if (in.bad()) throw IoError("read failure");
}

}  // namespace

LoadResult load_graph(std::istream& in, GraphFormat format) {
    LoadResult result;
    for_each_line(in, format, [&](const ParsedLine& p) {
        if (p.literal) {
            ++result.skipped_literals;
            return;
        }
        if (!result.graph.add_triple(p.head, p.relation, p.tail)) ++result.duplicate_triples;
    });
    return result;
}

LoadResult load_graph_file(const std::string& path, GraphFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    return load_graph(in, format);
}

MergeResult merge_known_triples(std::istream& in, KnowledgeGraph& g) {
    MergeResult result;
    for_each_line(in, GraphFormat::Tsv, [&](const ParsedLine& p) {
        const auto h = g.entities().find(p.head);
        const auto r = g.relations().find(p.relation);
        const auto t = g.entities().find(p.tail);
        if (!h || !r || !t) {
            ++result.unknown;
            return;
        }
        if (g.add_triple({*h, *r, *t})) ++result.added;
    });
    return result;
}

void write_tsv(std::ostream& out, const KnowledgeGraph& g) {
    for (const auto& t : g.triples())
        out << g.entities().label(t.head) << '\t' << g.relations().label(t.relation) << '\t'
            << g.entities().label(t.tail) << '\n';
}

void write_vocabulary(std::ostream& out, const Vocabulary& vocab) {
    for (std::size_t i = 0; i < vocab.size(); ++i) out << i << '\t' << vocab.label(static_cast<std::uint32_t>(i)) << '\n';
}

KnowledgeGraph reverse_graph(const KnowledgeGraph& g) {
    auto r = KnowledgeGraph::with_vocabulary_of(g);
    for (const auto& t : g.triples()) r.add_triple({t.tail, t.relation, t.head});
    return r;
}

std::vector<CardinalityStats> all_relation_stats(const KnowledgeGraph& g) {
    const auto n = g.relation_count();
    std::vector<std::size_t> count(n, 0);
    std::vector<std::unordered_set<EntityId>> heads(n), tails(n);
    for (const auto& t : g.triples()) {
        ++count[t.relation];
        heads[t.relation].insert(t.head);
        tails[t.relation].insert(t.tail);
    }
    std::vector<CardinalityStats> stats(n);
    for (std::size_t r = 0; r < n; ++r) {
        if (count[r] == 0) continue;
        stats[r].tails_per_head = static_cast<double>(count[r]) / static_cast<double>(heads[r].size());
        stats[r].heads_per_tail = static_cast<double>(count[r]) / static_cast<double>(tails[r].size());
    }
    return stats;
}

CardinalityStats relation_stats(const KnowledgeGraph& g, RelationId r) {
    if (r >= g.relation_count()) throw std::invalid_argument("unknown relation id");
    std::size_t count = 0;
    std::unordered_set<EntityId> heads, tails;
    for (const auto& t : g.triples()) {
        if (t.relation != r) continue;
        ++count;
        heads.insert(t.head);
        tails.insert(t.tail);
    }
    if (count == 0) throw std::invalid_argument("relation '" + g.relations().label(r) + "' has no triples");
    return {static_cast<double>(count) / static_cast<double>(heads.size()),
            static_cast<double>(count) / static_cast<double>(tails.size())};
}

}  // namespace kgforge
