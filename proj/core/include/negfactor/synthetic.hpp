#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "negfactor/dataset.hpp"
#include "negfactor/factorization.hpp"
#include "negfactor/model.hpp"
#include "negfactor/response.hpp"

namespace negfactor {

// Population terms and random-effect spreads for one response channel.
struct PlantedChannel {
    double beta0 = 0.0;
    double sigma0 = 0.0;
    double sd_beta = 0.0;
    double sd_sigma = 0.0;
};

// Generator settings plus the factors the data are drawn from. Boolean
// factors are the 0/1 special case of `factors`.
struct PlantedSpec {
    std::size_t n_verbs = 10;
    std::size_t n_frames = 6;
    std::size_t n_participants = 10;
    Hyperparams hyper;
    FactorProbabilities factors;
    double noise_scale = 0.0;
    std::uint64_t seed = 0;
    // Distinct participants rating each sentence (capped by n_participants).
    std::size_t ratings_per_cell = 5;
    PlantedChannel negraising;
    PlantedChannel acceptability{2.0, 0.0, 0.0, 0.0};
    // alpha per sentence ~ Normal(alpha_mean, alpha_sd^2).
    double alpha_mean = 0.0;
    double alpha_sd = 0.0;

    // Throws DimensionError on inconsistent factor shapes or bad sizes and
    // DomainError on negative spreads.
    void validate() const;

    // Settings only; factors are drawn with random_planted_factors unless a
    // "factors" object with probability arrays is present.
    static PlantedSpec from_json(std::string_view text);
    std::string to_json() const;
};

// Factor probabilities logistic(Normal(0, scale^2)) per entry. With
// `boolean` set, each entry is instead 1 with probability 0.5.
FactorProbabilities random_planted_factors(std::size_t n_verbs, std::size_t n_frames,
                                           Hyperparams hyper, std::uint64_t seed,
                                           double scale = 1.5, bool boolean = false);

struct SyntheticDataset {
    ResponseTable table;
    PlantedSpec spec;
    // Drawn effects, indexed by planted participant number.
    EffectsParams effects;
    // Per table cell.
    std::vector<double> alpha;
    std::vector<double> probability;
};

// Deterministic in the spec. Responses are the link prediction plus
// Normal(0, noise_scale^2) noise, truncated to [0, 1].
SyntheticDataset generate_synthetic(const PlantedSpec& spec);

// Planted parameters as a model over the dataset's table. Saturated
// probabilities map to logits of +-40.
FittedModel planted_model(const SyntheticDataset& data);

// "v007", "p012": zero padded to at least three digits.
std::string synthetic_name(char prefix, std::size_t id, std::size_t count);

} // namespace negfactor
