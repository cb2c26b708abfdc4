#include "kgforge/embeddings.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include "kgforge/error.hpp"

namespace kgforge {

std::optional<std::size_t> TokenEmbeddings::find(std::string_view token) const {
    for (std::size_t i = 0; i < tokens.size(); ++i)
        if (tokens[i] == token) return i;
    return std::nullopt;
}

std::string format_float(float v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}

std::string format_double(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}

void write_vectors_text(std::ostream& out, const TokenEmbeddings& emb) {
    out << emb.size() << ' ' << emb.dim() << '\n';
    for (std::size_t i = 0; i < emb.size(); ++i) {
        out << emb.tokens[i];
        for (const double x : emb.vectors.row(i)) out << ' ' << format_float(static_cast<float>(x));
        out << '\n';
    }
}

TokenEmbeddings read_vectors_text(std::istream& in) {
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line)) throw ParseError(1, "missing header line");
    std::size_t count = 0, dim = 0;
    {
        std::istringstream header(line);
        if (!(header >> count >> dim)) throw ParseError(1, "header must be `count dim`");
    }
    TokenEmbeddings emb;
    emb.vectors = Matrix(count, dim);
    for (std::size_t i = 0; i < count; ++i) {
        ++lineno;
        if (!std::getline(in, line)) throw ParseError(lineno, "truncated vector file");
        std::istringstream row(line);
        std::string token;
        row >> token;
        for (std::size_t j = 0; j < dim; ++j)
            if (!(row >> emb.vectors(i, j))) throw ParseError(lineno, "expected " + std::to_string(dim) + " values");
        emb.tokens.push_back(std::move(token));
    }
    return emb;
}

}  // namespace kgforge
