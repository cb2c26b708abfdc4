#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "kgforge/embeddings.hpp"
#include "kgforge/rng.hpp"
#include "kgforge/walks.hpp"

namespace kgforge {

enum class Architecture { SkipGram, Cbow };

std::string_view to_string(Architecture a);
Architecture parse_architecture(std::string_view s);

struct SeqConfig {
    std::size_t dim = 100;
    std::size_t window = 5;
    std::size_t negatives = 5;
    std::size_t epochs = 5;
    double learning_rate = 0.025;
    std::uint64_t min_count = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

// Draws from the unigram^power distribution over token ids.
class NegativeSampler {
public:
    explicit NegativeSampler(std::span<const std::uint64_t> counts, double power = 0.75);

    std::uint32_t draw(Rng& rng) const;
    // n draws, none equal to `exclude`. Requires at least two tokens with
    // positive count.
    std::vector<std::uint32_t> sample(std::size_t n, std::uint32_t exclude, Rng& rng) const;
    double probability(std::uint32_t token) const;
    std::size_t size() const noexcept { return cumulative_.size(); }

private:
    std::vector<double> cumulative_;
};

std::vector<std::uint32_t> negative_sample(std::span<const std::uint64_t> counts, std::size_t n,
                                           std::uint32_t exclude, Rng& rng);

// Logistic function on an input clamped to [-6, 6].
double clamped_sigmoid(double x);

// Negative-sampling objective for one (predictor, context) pair:
//   log s(w.c) + sum_j log s(-w.n_j)
// with `negatives` holding the n_j rows back to back. Adds `scale` times the
// gradient with respect to w, c and every n_j into gw, gc, gneg. A term whose
// dot product lies outside the clamp range contributes no gradient.
double sgns_objective(std::span<const double> w, std::span<const double> c, std::span<const double> negatives,
                      double scale, std::span<double> gw, std::span<double> gc, std::span<double> gneg);

struct SeqTrainResult {
    TokenEmbeddings embeddings;  // exported vector = input vector
    std::vector<double> epoch_loss;  // mean negative objective per training pair
};

// Seeded initial embeddings for the tokens of `corpus` that reach min_count:
// input vectors uniform in [-0.5/k, 0.5/k], context vectors zero.
TokenEmbeddings init_sequence_embeddings(const WalkCorpus& corpus, const SeqConfig& config);

// SGD with a linearly decaying learning rate. Single-threaded; output is a
// pure function of (corpus, architecture, config).
SeqTrainResult train_sequences(const WalkCorpus& corpus, Architecture architecture, const SeqConfig& config);

}  // namespace kgforge
