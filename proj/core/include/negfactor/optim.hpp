#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "negfactor/dataset.hpp"
#include "negfactor/factorization.hpp"
#include "negfactor/model.hpp"
#include "negfactor/response.hpp"

namespace negfactor {

struct FitConfig {
    double learning_rate = 0.01;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::size_t max_iterations = 30000;
    // Converged once the loss changes by less than `convergence_tol`
    // (relative) across `check_every` iterations, `patience` checks in a row.
    double convergence_tol = 1e-6;
    std::size_t check_every = 100;
    std::size_t patience = 1;
    std::uint64_t seed = 0;
    double init_scale = 0.5;
    std::size_t restarts = 3;
    // Lower bound on learned log-variances of the random effects.
    double min_log_variance = -6.907755278982137; // log(1e-3)
    bool acceptability_channel = true;

    // Throws DomainError for out-of-range settings.
    void validate() const;

    std::string to_json() const;
    // Missing keys keep their defaults; unknown keys are a SchemaError.
    static FitConfig from_json(std::string_view text);
};

struct FitResult {
    FittedModel model;
    // Training objective at every evaluated iterate. When the last iterate is
    // not the best one, the best loss is appended after restoring it, so the
    // final entry always equals model.info.loss.
    std::vector<double> trajectory;
    std::size_t iterations_run = 0;
    bool converged = false;
    // Final objective of each restart, in the order they were run.
    std::vector<double> restart_losses;
};

// Objective and exact gradient with respect to every unconstrained
// parameter. The gradient has the same shape as `params`; alpha gets no
// gradient from the weighted neg-raising term. Throws NumericalError naming
// the first parameter whose value or gradient is not finite.
ModelParams gradient(const ResponseTable& table, const ModelParams& params,
                     const LossOptions& options = {}, LossBreakdown* loss = nullptr);

LossBreakdown objective(const ResponseTable& table, const ModelParams& params,
                        const LossOptions& options = {});

// Factor logits ~ Normal(0, init_scale^2); effects at the identity; alpha
// at the logit of each cell's mean acceptability response.
ModelParams initialize(const ResponseTable& table, Hyperparams hyper, double init_scale,
                       std::uint64_t seed);

// One Adam run from `init`.
FitResult fit_from(const ResponseTable& table, ModelParams init, const FitConfig& config);

// `config.restarts` random initializations plus any `warm_starts`; the run
// with the lowest objective is returned. Throws FitError only when every
// run diverges.
FitResult fit(const ResponseTable& table, Hyperparams hyper, const FitConfig& config,
              std::span<const ModelParams> warm_starts = {});

// Weighted neg-raising KL of `model` on `table`, without prior terms.
// Verbs and frames are matched by name (CoverageError when missing);
// participants unknown to the model get zero random effects; cells without a
// fitted alpha get one solved from the table's acceptability responses.
double evaluate(const FittedModel& model, const ResponseTable& table);

// Same quantity split by the table's cells.
std::vector<double> evaluate_cells(const FittedModel& model, const ResponseTable& table);

// Adam with bias correction over any parameter struct exposing blocks().
class Adam {
  public:
    explicit Adam(const FitConfig& config)
        : lr_(config.learning_rate), b1_(config.adam_beta1), b2_(config.adam_beta2),
          eps_(config.adam_epsilon) {}

    template <typename Params> void step(Params& params, const Params& grad) {
        auto p_blocks = params.blocks();
        const auto g_blocks = grad.blocks();
        std::size_t total = 0;
        for (const auto& b : p_blocks) {
            total += b.values.size();
        }
        if (m_.empty()) {
            m_.assign(total, 0.0);
            v_.assign(total, 0.0);
        }
        ++t_;
        const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
        std::size_t offset = 0;
        for (std::size_t b = 0; b < p_blocks.size(); ++b) {
            auto x = p_blocks[b].values;
            auto g = g_blocks[b].values;
            for (std::size_t i = 0; i < x.size(); ++i, ++offset) {
                m_[offset] = b1_ * m_[offset] + (1.0 - b1_) * g[i];
                v_[offset] = b2_ * v_[offset] + (1.0 - b2_) * g[i] * g[i];
                x[i] -= lr_ * (m_[offset] / c1) / (std::sqrt(v_[offset] / c2) + eps_);
            }
        }
    }

  private:
    double lr_, b1_, b2_, eps_;
    std::size_t t_ = 0;
    std::vector<double> m_, v_;
};

struct OptimizationTrace {
    std::vector<double> trajectory;
    std::size_t iterations = 0;
    bool converged = false;
};

// Full-batch Adam on `objective(params, grad) -> loss`, which must overwrite
// `grad`. `project` is applied after every step. On exit `params` holds the
// lowest-loss iterate seen. Throws FitError when the loss is not finite.
template <typename Params, typename Objective, typename Project>
OptimizationTrace minimize(Params& params, Objective&& objective, const FitConfig& config,
                           Project&& project) {
    config.validate();
    Adam adam(config);
    OptimizationTrace trace;
    Params grad = params;
    Params best = params;
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t best_at = 0;
    std::size_t streak = 0;
    for (std::size_t it = 0;; ++it) {
        double loss = 0.0;
        try {
            loss = objective(params, grad);
        } catch (const NumericalError& e) {
            trace.trajectory.push_back(std::numeric_limits<double>::quiet_NaN());
            throw FitError(std::string("fit diverged: ") + e.what(), trace.trajectory);
        }
        trace.trajectory.push_back(loss);
        if (!std::isfinite(loss)) {
            throw FitError("fit diverged at iteration " + std::to_string(it), trace.trajectory);
        }
        if (loss < best_loss) {
            best_loss = loss;
            best = params;
            best_at = it;
        }
        if (it > 0 && it % config.check_every == 0) {
            const double previous = trace.trajectory[it - config.check_every];
            const double change =
                std::abs(previous - loss) / std::max(std::abs(previous), 1e-12);
            streak = change < config.convergence_tol ? streak + 1 : 0;
            if (streak >= config.patience) {
                trace.converged = true;
                break;
            }
        }
        if (it >= config.max_iterations) {
            break;
        }
        adam.step(params, grad);
        project(params);
        ++trace.iterations;
    }
    if (best_at + 1 != trace.trajectory.size()) {
        params = std::move(best);
        trace.trajectory.push_back(best_loss);
    }
    return trace;
}

} // namespace negfactor
