#include "kgforge/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "kgforge/error.hpp"

namespace kgforge {

std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::TransE: return "transe";
        case ModelKind::TransH: return "transh";
        case ModelKind::TransR: return "transr";
        case ModelKind::Rdf2Vec: return "rdf2vec";
        case ModelKind::KGlove: return "kglove";
    }
    return "?";
}

ModelKind parse_model_kind(std::string_view s) {
    for (const auto k : {ModelKind::TransE, ModelKind::TransH, ModelKind::TransR, ModelKind::Rdf2Vec, ModelKind::KGlove})
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown model '" + std::string(s) + "'");
}

ModelKind model_kind(Variant v) {
    switch (v) {
        case Variant::TransE: return ModelKind::TransE;
        case Variant::TransH: return ModelKind::TransH;
        case Variant::TransR: return ModelKind::TransR;
    }
    return ModelKind::TransE;
}

bool is_translational(ModelKind kind) {
    return kind == ModelKind::TransE || kind == ModelKind::TransH || kind == ModelKind::TransR;
}

namespace {

constexpr std::array<char, 8> kMagic{'K', 'G', 'F', 'O', 'R', 'G', 'E', '\0'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void u32(std::uint32_t v) {
        const char b[4] = {char(v & 0xFF), char((v >> 8) & 0xFF), char((v >> 16) & 0xFF), char((v >> 24) & 0xFF)};
        out_.write(b, 4);
    }
    void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    void matrix(const Matrix& m) {
        for (const double x : m.data()) f32(x);
    }
    void raw(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }

private:
    std::ostream& out_;
};

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    std::uint32_t u32() {
        unsigned char b[4];
        read(reinterpret_cast<char*>(b), 4);
        return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
               (std::uint32_t{b[3]} << 24);
    }
    double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
    std::string str() {
        const auto n = u32();
        if (n > (1u << 24)) fail("label too long");
        std::string s(n, '\0');
        read(s.data(), n);
        return s;
    }
    Matrix matrix(std::size_t rows, std::size_t cols) {
        Matrix m(rows, cols);
        for (auto& x : m.data()) x = f32();
        return m;
    }
    void read(char* p, std::size_t n) {
        in_.read(p, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) fail("truncated checkpoint");
    }
    [[noreturn]] static void fail(const std::string& what) { throw ParseError(0, "checkpoint: " + what); }

private:
    std::istream& in_;
};

void write_header(Writer& w, ModelKind kind, Norm norm, std::size_t dim, std::size_t relation_dim,
                  const std::vector<std::string>& entities, const std::vector<std::string>& relations) {
    w.raw(kMagic.data(), kMagic.size());
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(kind));
    w.u32(norm == Norm::L1 ? 0 : 1);
    w.u32(static_cast<std::uint32_t>(dim));
    w.u32(static_cast<std::uint32_t>(relation_dim));
    w.u32(static_cast<std::uint32_t>(entities.size()));
    w.u32(static_cast<std::uint32_t>(relations.size()));
    for (const auto& l : entities) w.str(l);
    for (const auto& l : relations) w.str(l);
}

}  // namespace

void save_checkpoint(std::ostream& out, const TranslationalModel& model) {
    Writer w(out);
    write_header(w, model_kind(model.variant), model.norm, model.dim, model.relation_dim, model.entity_labels,
                 model.relation_labels);
    w.matrix(model.entities);
    w.matrix(model.relations);
    if (model.variant == Variant::TransH) w.matrix(model.normals);
    if (model.variant == Variant::TransR) w.matrix(model.projections);
    if (!out) throw IoError("checkpoint write failed");
}

void save_checkpoint(std::ostream& out, const TokenEmbeddings& emb, ModelKind kind) {
    if (is_translational(kind)) throw std::invalid_argument("token embeddings cannot be saved as a translational model");
    Writer w(out);
    write_header(w, kind, Norm::L2, emb.dim(), 0, emb.tokens, {});
    w.matrix(emb.vectors);
    if (!out) throw IoError("checkpoint write failed");
}

Checkpoint load_checkpoint(std::istream& in) {
    Reader r(in);
    std::array<char, 8> magic{};
    r.read(magic.data(), magic.size());
    if (magic != kMagic) Reader::fail("bad magic");
    if (r.u32() != kVersion) Reader::fail("unsupported version");
    const auto kind_code = r.u32();
    if (kind_code > static_cast<std::uint32_t>(ModelKind::KGlove)) Reader::fail("unknown model kind");
    Checkpoint ckpt;
    ckpt.kind = static_cast<ModelKind>(kind_code);
    const auto norm_code = r.u32();
    if (norm_code > 1) Reader::fail("unknown norm");
    const std::size_t dim = r.u32(), relation_dim = r.u32(), ne = r.u32(), nr = r.u32();
    std::vector<std::string> entities(ne), relations(nr);
    for (auto& l : entities) l = r.str();
    for (auto& l : relations) l = r.str();

    if (!is_translational(ckpt.kind)) {
        TokenEmbeddings emb;
        emb.tokens = std::move(entities);
        emb.vectors = r.matrix(ne, dim);
        ckpt.tokens = std::move(emb);
        return ckpt;
    }
    TranslationalModel m;
    m.variant = ckpt.kind == ModelKind::TransE ? Variant::TransE
                : ckpt.kind == ModelKind::TransH ? Variant::TransH
                                                  : Variant::TransR;
    m.norm = norm_code == 0 ? Norm::L1 : Norm::L2;
    m.dim = dim;
    m.relation_dim = relation_dim;
    m.entity_labels = std::move(entities);
    m.relation_labels = std::move(relations);
    m.entities = r.matrix(ne, dim);
    m.relations = r.matrix(nr, relation_dim);
    if (m.variant == Variant::TransH) m.normals = r.matrix(nr, dim);
    if (m.variant == Variant::TransR) m.projections = r.matrix(nr, relation_dim * dim);
    ckpt.translational = std::move(m);
    return ckpt;
}

TokenEmbeddings Checkpoint::embeddings() const {
    if (tokens) return *tokens;
    TokenEmbeddings emb;
    emb.tokens = translational->entity_labels;
    emb.vectors = translational->entities;
    return emb;
}

void save_checkpoint_file(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    if (ckpt.translational)
        save_checkpoint(out, *ckpt.translational);
    else
        save_checkpoint(out, *ckpt.tokens, ckpt.kind);
    out.close();
    if (!out) throw IoError("cannot write '" + path + "'");
}

Checkpoint load_checkpoint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    return load_checkpoint(in);
}

void export_text(std::ostream& out, const TranslationalModel& model, ExportTable table) {
    const auto& labels = table == ExportTable::Entities ? model.entity_labels : model.relation_labels;
    const auto& m = table == ExportTable::Entities ? model.entities : model.relations;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out << labels[i];
        for (const double x : m.row(i)) out << ' ' << format_float(static_cast<float>(x));
        out << '\n';
    }
}

}  // namespace kgforge
