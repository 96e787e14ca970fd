#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "negfactor/dataset.hpp"
#include "negfactor/factorization.hpp"

namespace negfactor {

// Scale/shift terms for one response channel. The expected response for
// participant l is logistic(exp(sigma0 + sigma_l) * x + beta0 + beta_l).
// Random effects carry a zero-mean Gaussian prior whose variances are
// learned on the log scale.
struct ChannelEffects {
    double beta0 = 0.0;
    double sigma0 = 0.0;
    std::vector<double> beta;  // per participant
    std::vector<double> sigma; // per participant
    double log_var_beta = 0.0;
    double log_var_sigma = 0.0;

    double var_beta() const { return std::exp(log_var_beta); }
    double var_sigma() const { return std::exp(log_var_sigma); }

    // exp(sigma0 + sigma_l); population scale when `participant` is empty.
    double scale(std::optional<std::size_t> participant) const;
    double shift(std::optional<std::size_t> participant) const;

    friend bool operator==(const ChannelEffects&, const ChannelEffects&) = default;
};

struct EffectsParams {
    ChannelEffects negraising;
    ChannelEffects acceptability;

    // All terms zero: identity link, unit variances.
    static EffectsParams identity(std::size_t n_participants);

    std::size_t n_participants() const { return negraising.beta.size(); }
    // Throws DimensionError on ragged random-effect vectors.
    void validate() const;

    friend bool operator==(const EffectsParams&, const EffectsParams&) = default;
};

// alpha per observed cell, indexed like ResponseTable::cells().
struct AcceptabilityCells {
    std::vector<double> alpha;

    friend bool operator==(const AcceptabilityCells&, const AcceptabilityCells&) = default;
};

// Throws IndexError for a participant id outside the effects vectors.
double predict_negraising(double nu, const EffectsParams& effects, std::size_t participant);
double predict_acceptability(double alpha, const EffectsParams& effects, std::size_t participant);

// Population-level prediction (random effects at their prior mean 0).
double predict_channel(double x, const ChannelEffects& channel,
                       std::optional<std::size_t> participant);

// D(r || r_hat) for Bernoulli distributions, natural log. Both arguments
// must lie strictly inside (0, 1); DomainError otherwise.
double kl_loss(double r, double r_hat);

// D(r || logistic(z)), evaluated without forming logistic(z).
double kl_from_logit(double r, double z);

// Forward outputs are pulled into [kProbabilityClamp, 1 - kProbabilityClamp]
// before taking the logit.
inline constexpr double kProbabilityClamp = 1e-7;

// logit(clamp(p)), with d/dp written to `derivative` (0 where clamped).
double clamped_logit(double p, double* derivative = nullptr);

struct LossOptions {
    // When false, alpha' weights are 1 and neither D(a || a_hat) nor the
    // acceptability priors are included.
    bool acceptability_channel = true;
    bool include_prior = true;
};

struct LossBreakdown {
    double negraising = 0.0;    // sum alpha' D(r || r_hat)
    double acceptability = 0.0; // sum D(a || a_hat)
    double prior = 0.0;         // Gaussian negative log prior on random effects
    double total = 0.0;
};

struct LossGradient {
    std::vector<double> nu; // per cell
    EffectsParams effects;
    std::vector<double> alpha; // per cell
};

// Loss given per-cell linear predictors `nu` for the neg-raising channel.
//
// `participant_map` maps table participant ids to ids in `effects`, with -1
// meaning "unseen" (random effects 0); empty means identity. The alpha'
// weight is a constant in the neg-raising term, so alpha only receives
// gradient through D(a || a_hat). Ratings are summed sequentially in table
// order. `gradient`, if given, is resized and overwritten; `per_cell`, if
// given, receives each cell's share of the weighted neg-raising term.
LossBreakdown cell_loss(const ResponseTable& table, std::span<const double> nu,
                        const EffectsParams& effects, std::span<const double> alpha,
                        const LossOptions& options = {},
                        std::span<const std::ptrdiff_t> participant_map = {},
                        LossGradient* gradient = nullptr,
                        std::vector<double>* per_cell = nullptr);

// Per-cell neg-raising linear predictors logit(clamp(P(n_vfjk))).
std::vector<double> cell_predictors(const ResponseTable& table, const FactorProbabilities& probs);

// Full objective with the forward model in place of free predictors.
// Throws ConsistencyError when `cells` does not hold one alpha per cell.
LossBreakdown total_loss(const ResponseTable& table, const FactorParams& factors,
                         const EffectsParams& effects, const AcceptabilityCells& cells,
                         const LossOptions& options = {});

} // namespace negfactor
