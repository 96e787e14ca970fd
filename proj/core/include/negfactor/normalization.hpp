#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "negfactor/dataset.hpp"
#include "negfactor/optim.hpp"
#include "negfactor/response.hpp"

namespace negfactor {

// Free linear predictors per sentence in place of the factorization.
struct NormalizationParams {
    std::vector<double> nu;
    AcceptabilityCells cells;
    EffectsParams effects;

    std::vector<ParameterBlock> blocks();
    std::vector<ConstParameterBlock> blocks() const;
};

struct NormalizeOptions {
    // Score as logistic(exp(sigma0) nu + beta0) instead of
    // logistic(exp(sigma0) nu) + beta0, which can leave [0, 1].
    bool inside_link = false;
    // When false the random and fixed effects stay at the identity link.
    bool learn_effects = true;
};

struct NormalizedScores {
    std::vector<SentenceLabel> sentences;
    std::vector<double> nu;
    std::vector<double> alpha;
    std::vector<double> score;
    NormalizationParams params;
    std::vector<double> trajectory;
    bool converged = false;
};

// Initializes nu and alpha at the logits of each sentence's mean responses
// and minimizes the same loss as the factor model. Fit failures throw
// FitError.
NormalizedScores normalize(const ResponseTable& table, const FitConfig& config,
                           const NormalizeOptions& options = {});

double normalized_score(double nu, const ChannelEffects& negraising, bool inside_link);

// verb,frame,subject,tense,nu,alpha,score
void write_scores(const NormalizedScores& scores, std::ostream& out);
void write_scores(const NormalizedScores& scores, const std::filesystem::path& path);

} // namespace negfactor
