#pragma once

// Shared fixtures and independent reference computations for the tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "negfactor/negfactor.hpp"

namespace negfactor::testing {

// Bernoulli KL as a sum over the two outcomes, written independently of
// the library formula.
inline double bernoulli_kl(double p, double q) {
    const double P[2] = {1.0 - p, p};
    const double Q[2] = {1.0 - q, q};
    double sum = 0.0;
    for (int x = 0; x < 2; ++x) {
        sum += P[x] * std::log(P[x] / Q[x]);
    }
    return sum;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// P(OR_t (lambda_t & pi_t)) by summing over all 2^(2T) worlds.
inline double selection_by_worlds(const std::vector<double>& lambda,
                                  const std::vector<double>& pi) {
    const std::size_t T = lambda.size();
    const std::size_t n = 2 * T;
    double total = 0.0;
    for (std::uint64_t w = 0; w < (std::uint64_t{1} << n); ++w) {
        double weight = 1.0;
        bool any = false;
        for (std::size_t t = 0; t < T; ++t) {
            const bool l = (w >> t) & 1U;
            const bool p = (w >> (T + t)) & 1U;
            weight *= (l ? lambda[t] : 1.0 - lambda[t]) * (p ? pi[t] : 1.0 - pi[t]);
            any = any || (l && p);
        }
        if (any) {
            total += weight;
        }
    }
    return total;
}

// P(OR_{t,i} (lambda_t & psi_i & phi_i & pi_t & omega_t)) for one cell when
// every boolean variable is shared across the disjuncts it appears in.
inline double shared_variable_worlds(const FactorProbabilities& p, std::size_t v, std::size_t f,
                                     std::size_t j, std::size_t k) {
    const std::size_t T = p.n_structural, I = p.n_lexical;
    std::vector<double> prob;
    for (std::size_t t = 0; t < T; ++t) {
        prob.push_back(p.lambda_at(v, t));
        prob.push_back(p.pi_at(t, f));
        prob.push_back(p.omega_at(t, j, k));
    }
    for (std::size_t i = 0; i < I; ++i) {
        prob.push_back(p.psi_at(v, i));
        prob.push_back(p.phi_at(i, j, k));
    }
    const std::size_t n = prob.size();
    double total = 0.0;
    for (std::uint64_t w = 0; w < (std::uint64_t{1} << n); ++w) {
        double weight = 1.0;
        for (std::size_t b = 0; b < n; ++b) {
            weight *= ((w >> b) & 1U) ? prob[b] : 1.0 - prob[b];
        }
        auto bit = [&](std::size_t b) { return ((w >> b) & 1U) != 0; };
        bool any = false;
        for (std::size_t t = 0; t < T && !any; ++t) {
            const bool structural = bit(3 * t) && bit(3 * t + 1) && bit(3 * t + 2);
            for (std::size_t i = 0; i < I && !any; ++i) {
                any = structural && bit(3 * T + 2 * i) && bit(3 * T + 2 * i + 1);
            }
        }
        if (any) {
            total += weight;
        }
    }
    return total;
}

inline FactorParams random_factor_params(std::size_t V, std::size_t F, Hyperparams hyper,
                                         std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    auto params = FactorParams::zeros(V, F, hyper);
    for (auto* block : {&params.lambda, &params.pi, &params.psi, &params.phi, &params.omega}) {
        for (double& x : *block) {
            x = normal(rng);
        }
    }
    return params;
}

// Table with 1..max_ratings ratings per cell over a random subset of cells.
inline ResponseTable random_table(std::size_t V, std::size_t F, std::size_t participants,
                                  std::mt19937_64& rng, std::size_t max_ratings = 2,
                                  double density = 0.7) {
    std::uniform_real_distribution<double> unit(0.02, 0.98);
    std::uniform_int_distribution<std::size_t> pick_p(0, participants - 1);
    std::uniform_int_distribution<std::size_t> n_ratings(1, max_ratings);
    std::bernoulli_distribution keep(density);
    std::vector<ResponseRecord> records;
    for (std::size_t v = 0; v < V; ++v) {
        for (std::size_t f = 0; f < F; ++f) {
            for (std::size_t j = 0; j < kNumSubjects; ++j) {
                for (std::size_t k = 0; k < kNumTenses; ++k) {
                    // the first cell of every (verb, frame) is always kept
                    if (j + k > 0 && !keep(rng)) {
                        continue;
                    }
                    const std::size_t n = n_ratings(rng);
                    for (std::size_t r = 0; r < n; ++r) {
                        records.push_back({synthetic_name('v', v, V), kAllFrames[f],
                                           kAllSubjects[j], kAllTenses[k],
                                           synthetic_name('p', pick_p(rng), participants),
                                           unit(rng), unit(rng)});
                    }
                }
            }
        }
    }
    return ResponseTable::from_records(records);
}

// Random parameters of every kind, shaped for `table`.
inline ModelParams random_model_params(const ResponseTable& table, Hyperparams hyper,
                                       std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    ModelParams p;
    p.factors = random_factor_params(table.verbs().size(), table.frames().size(), hyper, rng);
    p.effects = EffectsParams::identity(table.participants().size());
    for (ChannelEffects* c : {&p.effects.negraising, &p.effects.acceptability}) {
        c->beta0 = 0.3 * normal(rng);
        c->sigma0 = 0.3 * normal(rng);
        for (double& x : c->beta) {
            x = 0.3 * normal(rng);
        }
        for (double& x : c->sigma) {
            x = 0.3 * normal(rng);
        }
        c->log_var_beta = 0.5 * normal(rng);
        c->log_var_sigma = 0.5 * normal(rng);
    }
    for (std::size_t c = 0; c < table.cells().size(); ++c) {
        p.cells.alpha.push_back(normal(rng));
    }
    return p;
}

struct GradientCheck {
    double max_relative_error = 0.0;
    std::string worst;
};

// Central differences of `loss(params)` against `analytic`, entry by entry.
template <typename Params, typename Loss>
GradientCheck check_gradient(const Params& params, const Params& analytic, Loss&& loss,
                             double h = 1e-5, double floor = 1e-4) {
    GradientCheck out;
    Params work = params;
    auto blocks = work.blocks();
    const auto grads = analytic.blocks();
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        for (std::size_t n = 0; n < blocks[b].values.size(); ++n) {
            double& x = blocks[b].values[n];
            const double saved = x;
            x = saved + h;
            const double up = loss(work);
            x = saved - h;
            const double down = loss(work);
            x = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double exact = grads[b].values[n];
            const double scale = std::max({std::abs(numeric), std::abs(exact), floor});
            const double err = std::abs(numeric - exact) / scale;
            if (err > out.max_relative_error) {
                out.max_relative_error = err;
                out.worst = std::string(blocks[b].name) + "[" + std::to_string(n) +
                            "] analytic " + std::to_string(exact) + " numeric " +
                            std::to_string(numeric);
            }
        }
    }
    return out;
}

// Planted (|I|, |T|) data with small, well-spread factors.
inline PlantedSpec planted_spec(std::size_t V, std::size_t F, std::size_t participants,
                                Hyperparams hyper, double noise, std::uint64_t seed) {
    PlantedSpec s;
    s.n_verbs = V;
    s.n_frames = F;
    s.n_participants = participants;
    s.hyper = hyper;
    s.noise_scale = noise;
    s.seed = seed;
    s.factors = random_planted_factors(V, F, hyper, derive_seed(seed, 77));
    return s;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("negfactor_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace negfactor::testing
