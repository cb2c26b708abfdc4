#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kgforge/matrix.hpp"

namespace kgforge {

// One vector per token. Produced by the sequence trainer and by GloVe, and
// viewable from translational models (entity rows) for neighbor queries.
struct TokenEmbeddings {
    std::vector<std::string> tokens;
    Matrix vectors;  // tokens.size() x dim
    Matrix context;  // training-internal output vectors; may be empty

    std::size_t dim() const noexcept { return vectors.cols(); }
    std::size_t size() const noexcept { return tokens.size(); }
    std::optional<std::size_t> find(std::string_view token) const;

    friend bool operator==(const TokenEmbeddings&, const TokenEmbeddings&) = default;
};

// First line `count dim`, then `token v1 ... vk` per token.
void write_vectors_text(std::ostream& out, const TokenEmbeddings& emb);
TokenEmbeddings read_vectors_text(std::istream& in);

// Shortest round-trip decimal for a value stored as 32-bit float.
std::string format_float(float v);
// Shortest round-trip decimal.
std::string format_double(double v);

}  // namespace kgforge
