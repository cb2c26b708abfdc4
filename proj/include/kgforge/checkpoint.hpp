#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include "kgforge/embeddings.hpp"
#include "kgforge/trans.hpp"

namespace kgforge {

enum class ModelKind : std::uint32_t { TransE = 0, TransH = 1, TransR = 2, Rdf2Vec = 3, KGlove = 4 };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view s);
ModelKind model_kind(Variant v);
bool is_translational(ModelKind kind);

// Binary checkpoint, little-endian:
//   "KGFORGE\0" magic, u32 version (1), u32 kind, u32 norm (0=L1, 1=L2),
//   u32 dim, u32 relation_dim, u32 entity count, u32 relation count,
//   labels (u32 byte length + UTF-8 bytes; entities then relations),
//   then f32 row-major matrices: entities, relations, normals (TransH),
//   projections (TransR). Token embeddings store tokens as entities, no
//   relations, and one vector matrix.
void save_checkpoint(std::ostream& out, const TranslationalModel& model);
void save_checkpoint(std::ostream& out, const TokenEmbeddings& emb, ModelKind kind);

struct Checkpoint {
    ModelKind kind = ModelKind::TransE;
    std::optional<TranslationalModel> translational;
    std::optional<TokenEmbeddings> tokens;

    // Entity (or token) vectors as a TokenEmbeddings view.
    TokenEmbeddings embeddings() const;
};

// Throws ParseError on a malformed or truncated checkpoint.
Checkpoint load_checkpoint(std::istream& in);

void save_checkpoint_file(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint_file(const std::string& path);

// `label v1 ... vk` one row per line.
enum class ExportTable { Entities, Relations };
void export_text(std::ostream& out, const TranslationalModel& model, ExportTable table);

}  // namespace kgforge
