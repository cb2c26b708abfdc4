#include "kgforge/seq_embed.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace kgforge {

std::string_view to_string(Architecture a) { return a == Architecture::SkipGram ? "skipgram" : "cbow"; }

Architecture parse_architecture(std::string_view s) {
    if (s == "skipgram" || s == "skip-gram") return Architecture::SkipGram;
    if (s == "cbow") return Architecture::Cbow;
    throw std::invalid_argument("unknown architecture '" + std::string(s) + "' (expected skipgram or cbow)");
}

void SeqConfig::validate() const {
    if (dim == 0) throw std::invalid_argument("dim must be positive");
    if (window == 0) throw std::invalid_argument("window must be positive");
    if (negatives == 0) throw std::invalid_argument("negatives must be positive");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
}

NegativeSampler::NegativeSampler(std::span<const std::uint64_t> counts, double power) {
    cumulative_.reserve(counts.size());
    double total = 0.0;
    for (const auto c : counts) {
        total += c > 0 ? std::pow(static_cast<double>(c), power) : 0.0;
        cumulative_.push_back(total);
    }
    if (total <= 0.0) throw std::invalid_argument("negative sampling needs at least one token with positive count");
    for (auto& c : cumulative_) c /= total;
    cumulative_.back() = 1.0;
}

std::uint32_t NegativeSampler::draw(Rng& rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return static_cast<std::uint32_t>(std::min<std::size_t>(it - cumulative_.begin(), cumulative_.size() - 1));
}

double NegativeSampler::probability(std::uint32_t token) const {
    return token == 0 ? cumulative_.at(0) : cumulative_.at(token) - cumulative_.at(token - 1);
}

std::vector<std::uint32_t> NegativeSampler::sample(std::size_t n, std::uint32_t exclude, Rng& rng) const {
    const double p_excluded = exclude < cumulative_.size() ? probability(exclude) : 0.0;
    if (cumulative_.size() < 2 || p_excluded >= 1.0)
        throw std::invalid_argument("negative sampling needs a second token to draw");
    std::vector<std::uint32_t> out;
    out.reserve(n);
    while (out.size() < n) {
        const auto t = draw(rng);
        if (t != exclude) out.push_back(t);
    }
    return out;
}

std::vector<std::uint32_t> negative_sample(std::span<const std::uint64_t> counts, std::size_t n,
                                           std::uint32_t exclude, Rng& rng) {
    if (counts.size() < 2) throw std::invalid_argument("negative sampling needs a vocabulary of at least two tokens");
    return NegativeSampler(counts).sample(n, exclude, rng);
}

double clamped_sigmoid(double x) {
    x = std::clamp(x, -6.0, 6.0);
    return 1.0 / (1.0 + std::exp(-x));
}

double sgns_objective(std::span<const double> w, std::span<const double> c, std::span<const double> negatives,
                      double scale, std::span<double> gw, std::span<double> gc, std::span<double> gneg) {
    const std::size_t k = w.size();
    if (c.size() != k || negatives.size() % k != 0) throw std::invalid_argument("dimension mismatch");
    // d/dx log s(x) = 1 - s(x);  d/dx log s(-x) = -s(x); zero where the clamp is active
    double obj = 0.0;
    {
        const double x = dot(w, c);
        const double s = clamped_sigmoid(x);
        obj += std::log(s);
        const double g = std::abs(x) > 6.0 ? 0.0 : scale * (1.0 - s);
        axpy(g, c, gw);
        axpy(g, w, gc);
    }
    for (std::size_t j = 0; j < negatives.size() / k; ++j) {
        const auto n = negatives.subspan(j * k, k);
        const double x = dot(w, n);
        const double s = clamped_sigmoid(x);
        obj += std::log(1.0 - s);
        const double g = std::abs(x) > 6.0 ? 0.0 : -scale * s;
        axpy(g, n, gw);
        axpy(g, w, gneg.subspan(j * k, k));
    }
    return obj;
}

namespace {

struct FilteredCorpus {
    std::vector<std::string> tokens;
    std::vector<std::uint64_t> counts;
    std::vector<std::vector<std::uint32_t>> sequences;
};

FilteredCorpus filter_corpus(const WalkCorpus& corpus, std::uint64_t min_count) {
    FilteredCorpus f;
    std::vector<std::int64_t> remap(corpus.vocabulary.size(), -1);
    for (std::uint32_t id = 0; id < corpus.vocabulary.size(); ++id) {
        if (corpus.counts[id] < min_count) continue;
        remap[id] = static_cast<std::int64_t>(f.tokens.size());
        f.tokens.push_back(corpus.vocabulary.label(id));
        f.counts.push_back(corpus.counts[id]);
    }
    for (const auto& seq : corpus.sequences) {
        std::vector<std::uint32_t> kept;
        for (const auto id : seq)
            if (remap[id] >= 0) kept.push_back(static_cast<std::uint32_t>(remap[id]));
        if (kept.size() >= 2) f.sequences.push_back(std::move(kept));
    }
    return f;
}

}  // namespace

TokenEmbeddings init_sequence_embeddings(const WalkCorpus& corpus, const SeqConfig& config) {
    config.validate();
    const auto filtered = filter_corpus(corpus, config.min_count);
    TokenEmbeddings emb;
    emb.tokens = filtered.tokens;
    emb.vectors = Matrix(emb.tokens.size(), config.dim);
    emb.context = Matrix(emb.tokens.size(), config.dim);
    Rng rng(mix_seed(config.seed, 0x5E9));
    const double bound = 0.5 / static_cast<double>(config.dim);
    for (auto& x : emb.vectors.data()) x = rng.uniform(-bound, bound);
    return emb;
}

SeqTrainResult train_sequences(const WalkCorpus& corpus, Architecture architecture, const SeqConfig& config) {
    config.validate();
    if (corpus.sequences.empty()) throw std::invalid_argument("cannot train on an empty corpus");
    const auto data = filter_corpus(corpus, config.min_count);
    if (data.tokens.size() < 2 || data.sequences.empty())
        throw std::invalid_argument("corpus needs at least two tokens above min_count in a common sequence");

    SeqTrainResult result{init_sequence_embeddings(corpus, config), {}};
    auto& input = result.embeddings.vectors;
    auto& output = result.embeddings.context;
    const NegativeSampler sampler(data.counts);
    const std::size_t k = config.dim;
    const std::size_t window = config.window;

    std::size_t positions_per_epoch = 0;
    for (const auto& s : data.sequences) positions_per_epoch += s.size();
    const double total_positions = static_cast<double>(positions_per_epoch * std::max<std::size_t>(1, config.epochs));

    std::vector<std::size_t> order(data.sequences.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<double> gw(k), gc(k), gneg(config.negatives * k), negs(config.negatives * k), h(k);
    std::size_t processed = 0;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        Rng rng(mix_seed(config.seed, epoch));
        rng.shuffle(order.begin(), order.end());
        double loss = 0.0;
        std::size_t pairs = 0;

        for (const auto si : order) {
            const auto& seq = data.sequences[si];
            for (std::size_t i = 0; i < seq.size(); ++i, ++processed) {
                const double lr = config.learning_rate * std::max(1e-4, 1.0 - static_cast<double>(processed) / total_positions);
                const std::size_t lo = i >= window ? i - window : 0;
                const std::size_t hi = std::min(seq.size() - 1, i + window);

                if (architecture == Architecture::SkipGram) {
                    const auto w = seq[i];
                    for (std::size_t j = lo; j <= hi; ++j) {
                        if (j == i) continue;
                        const auto c = seq[j];
                        const auto drawn = sampler.sample(config.negatives, c, rng);
                        for (std::size_t n = 0; n < drawn.size(); ++n)
                            std::copy_n(output.row(drawn[n]).begin(), k, negs.begin() + n * k);
                        std::fill(gw.begin(), gw.end(), 0.0);
                        std::fill(gc.begin(), gc.end(), 0.0);
                        std::fill(gneg.begin(), gneg.end(), 0.0);
                        loss -= sgns_objective(input.row(w), output.row(c), negs, 1.0, gw, gc, gneg);
                        ++pairs;
                        axpy(lr, gw, input.row(w));
                        axpy(lr, gc, output.row(c));
                        for (std::size_t n = 0; n < drawn.size(); ++n)
                            axpy(lr, std::span<const double>(gneg).subspan(n * k, k), output.row(drawn[n]));
                    }
                } else {
                    const std::size_t count = hi - lo;  // window positions other than i
                    if (count == 0) continue;
                    std::fill(h.begin(), h.end(), 0.0);
                    for (std::size_t j = lo; j <= hi; ++j)
                        if (j != i) axpy(1.0 / static_cast<double>(count), input.row(seq[j]), h);
                    const auto target = seq[i];
                    const auto drawn = sampler.sample(config.negatives, target, rng);
                    for (std::size_t n = 0; n < drawn.size(); ++n)
                        std::copy_n(output.row(drawn[n]).begin(), k, negs.begin() + n * k);
                    std::fill(gw.begin(), gw.end(), 0.0);
                    std::fill(gc.begin(), gc.end(), 0.0);
                    std::fill(gneg.begin(), gneg.end(), 0.0);
                    loss -= sgns_objective(h, output.row(target), negs, 1.0, gw, gc, gneg);
                    ++pairs;
                    for (std::size_t j = lo; j <= hi; ++j)
                        if (j != i) axpy(lr / static_cast<double>(count), gw, input.row(seq[j]));
                    axpy(lr, gc, output.row(target));
                    for (std::size_t n = 0; n < drawn.size(); ++n)
                        axpy(lr, std::span<const double>(gneg).subspan(n * k, k), output.row(drawn[n]));
                }
            }
        }
        result.epoch_loss.push_back(pairs ? loss / static_cast<double>(pairs) : 0.0);
    }
    return result;
}

}  // namespace kgforge
