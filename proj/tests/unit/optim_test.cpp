#include <gtest/gtest.h>

#include <random>

#include "negfactor_testing.hpp"

using namespace negfactor;
namespace nt = negfactor::testing;

namespace {

// Objective with each neg-raising weight held at its value in `fixed`, the
// quantity whose alpha derivative the analytic gradient reports.
double objective_fixed_weights(const ResponseTable& table, const ModelParams& work,
                               const ModelParams& fixed, const LossOptions& options) {
    const auto full = objective(table, work, options);
    if (!options.acceptability_channel) {
        return full.total;
    }
    ModelParams weights = work;
    weights.cells.alpha = fixed.cells.alpha;
    return full.total - full.negraising + objective(table, weights, options).negraising;
}

FitConfig quick_config(std::size_t iterations) {
    FitConfig c;
    c.max_iterations = iterations;
    c.restarts = 1;
    return c;
}

} // namespace

TEST(Gradient, MatchesFiniteDifferences) {
    std::mt19937_64 rng(42);
    const std::vector<Hyperparams> hypers = {{1, 0}, {0, 1}, {1, 1}, {2, 1},
                                             {1, 3}, {3, 0}, {0, 2}, {2, 2}};
    std::size_t instances = 0;
    for (std::size_t rep = 0; rep < 8; ++rep) {
        for (auto h : hypers) {
            for (bool acceptability : {true, false}) {
                auto table = nt::random_table(3, 3, 4, rng, 2, 0.5);
                auto params = nt::random_model_params(table, h, rng);
                const LossOptions options{acceptability, true};
                const auto analytic = gradient(table, params, options);
                const auto check = nt::check_gradient(params, analytic, [&](const ModelParams& w) {
                    return objective_fixed_weights(table, w, params, options);
                });
                EXPECT_LT(check.max_relative_error, 1e-5)
                    << h.label() << " acceptability " << acceptability << ": " << check.worst;
                ++instances;
            }
        }
    }
    EXPECT_GE(instances, 50U);
}

TEST(Gradient, ValueMatchesObjective) {
    std::mt19937_64 rng(1);
    auto table = nt::random_table(4, 2, 3, rng);
    auto params = nt::random_model_params(table, {2, 2}, rng);
    LossBreakdown loss;
    gradient(table, params, {}, &loss);
    EXPECT_EQ(loss.total, objective(table, params).total);
}

TEST(Gradient, FrozenSidesHaveNoEntries) {
    std::mt19937_64 rng(2);
    auto table = nt::random_table(3, 2, 3, rng);
    for (Hyperparams h : {Hyperparams{0, 2}, Hyperparams{2, 0}}) {
        auto params = nt::random_model_params(table, h, rng);
        const auto g = gradient(table, params);
        if (h.n_lexical == 0) {
            EXPECT_TRUE(g.factors.psi.empty());
            EXPECT_TRUE(g.factors.phi.empty());
        } else {
            EXPECT_TRUE(g.factors.lambda.empty());
            EXPECT_TRUE(g.factors.pi.empty());
            EXPECT_TRUE(g.factors.omega.empty());
        }
    }
}

TEST(Gradient, AlphaUntouchedWithoutAcceptabilityChannel) {
    std::mt19937_64 rng(3);
    auto table = nt::random_table(3, 2, 3, rng);
    auto params = nt::random_model_params(table, {1, 1}, rng);
    const auto g = gradient(table, params, {false, true});
    for (double x : g.cells.alpha) {
        EXPECT_EQ(x, 0.0);
    }
    for (double x : g.effects.acceptability.beta) {
        EXPECT_EQ(x, 0.0);
    }
}

TEST(Gradient, DataTermsVanishAtExactPredictions) {
    auto spec = nt::planted_spec(4, 3, 5, {1, 2}, 0.0, 8);
    spec.negraising = {0.3, 0.2, 0.4, 0.3};
    spec.acceptability = {1.0, 0.1, 0.2, 0.2};
    spec.alpha_sd = 1.0;
    spec.factors = random_planted_factors(4, 3, {1, 2}, 5, 0.3);
    const auto data = generate_synthetic(spec);
    for (const auto& r : data.table.ratings()) {
        // clamped responses cannot be matched exactly
        ASSERT_GT(r.negraising, kResponseEpsilon);
        ASSERT_LT(r.acceptability, 1.0 - kResponseEpsilon);
    }
    const auto model = planted_model(data);
    const auto g = gradient(data.table, model.params, {true, false});
    for (const auto& b : g.blocks()) {
        for (double x : b.values) {
            EXPECT_NEAR(x, 0.0, 1e-8) << b.name;
        }
    }
}

TEST(Gradient, NonFiniteParameterIsNamed) {
    std::mt19937_64 rng(4);
    auto table = nt::random_table(2, 2, 2, rng);
    auto params = nt::random_model_params(table, {1, 1}, rng);
    params.factors.pi[0] = std::numeric_limits<double>::quiet_NaN();
    try {
        gradient(table, params);
        FAIL() << "expected a numerical error";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("pi"), std::string::npos);
    }
}

TEST(FitConfig, JsonAndValidation) {
    FitConfig c;
    c.seed = 99;
    c.learning_rate = 0.05;
    const auto again = FitConfig::from_json(c.to_json());
    EXPECT_EQ(again.to_json(), c.to_json());
    EXPECT_EQ(FitConfig::from_json("{}").max_iterations, 30000U);
    EXPECT_THROW(FitConfig::from_json(R"({"learning_rat": 1})"), SchemaError);
    EXPECT_THROW(FitConfig::from_json(R"({"learning_rate": -1})"), DomainError);
}

TEST(FitFrom, ZeroIterationsReturnsInitialization) {
    std::mt19937_64 rng(5);
    auto table = nt::random_table(3, 2, 3, rng);
    const auto init = initialize(table, {1, 1}, 0.5, 7);
    const auto result = fit_from(table, init, quick_config(0));
    EXPECT_EQ(result.model.params, init);
    ASSERT_EQ(result.trajectory.size(), 1U);
    EXPECT_EQ(result.trajectory[0], objective(table, init).total);
    EXPECT_EQ(result.iterations_run, 0U);
}

TEST(FitFrom, ReportsBestIterate) {
    std::mt19937_64 rng(6);
    auto table = nt::random_table(4, 3, 4, rng);
    const auto result = fit_from(table, initialize(table, {1, 1}, 0.5, 1), quick_config(300));
    const double best = *std::min_element(result.trajectory.begin(), result.trajectory.end());
    EXPECT_EQ(result.model.info.loss, best);
    EXPECT_EQ(result.trajectory.back(), best);
    EXPECT_EQ(objective(table, result.model.params).total, best);
    EXPECT_LT(best, result.trajectory.front());
}

TEST(FitFrom, KeepsLogVariancesAboveFloor) {
    std::mt19937_64 rng(7);
    auto table = nt::random_table(3, 2, 3, rng);
    FitConfig config = quick_config(2000);
    config.learning_rate = 0.1;
    const auto result = fit_from(table, initialize(table, {1, 1}, 0.5, 2), config);
    for (const auto* c : {&result.model.params.effects.negraising,
                          &result.model.params.effects.acceptability}) {
        EXPECT_GE(c->log_var_beta, config.min_log_variance);
        EXPECT_GE(c->log_var_sigma, config.min_log_variance);
    }
}

TEST(Fit, Deterministic) {
    std::mt19937_64 rng(8);
    auto table = nt::random_table(4, 2, 3, rng);
    FitConfig config = quick_config(200);
    config.restarts = 2;
    config.seed = 5;
    const auto a = fit(table, {1, 2}, config);
    const auto b = fit(table, {1, 2}, config);
    EXPECT_EQ(a.model, b.model);
    EXPECT_EQ(a.trajectory, b.trajectory);
    EXPECT_EQ(a.restart_losses.size(), 2U);
}

TEST(Fit, PicksLowestRestartAndRejectsMismatchedWarmStart) {
    std::mt19937_64 rng(9);
    auto table = nt::random_table(3, 2, 3, rng);
    FitConfig config = quick_config(100);
    config.restarts = 3;
    const auto result = fit(table, {1, 1}, config);
    EXPECT_EQ(result.model.info.loss,
              *std::min_element(result.restart_losses.begin(), result.restart_losses.end()));
    const std::vector<ModelParams> wrong = {initialize(table, {2, 1}, 0.5, 0)};
    EXPECT_THROW(fit(table, {1, 1}, config, wrong), DimensionError);
    config.restarts = 0;
    EXPECT_THROW(fit(table, {1, 1}, config), DomainError);
}

TEST(Fit, WarmStartFromSmallerModelNeverLosesGround) {
    std::mt19937_64 rng(10);
    auto table = nt::random_table(4, 3, 4, rng);
    FitConfig config = quick_config(400);
    const auto small = fit(table, {1, 1}, config);
    const auto embedded = ModelParams{embed(small.model.params.factors, {1, 2}),
                                      small.model.params.effects, small.model.params.cells};
    EXPECT_NEAR(objective(table, embedded).total, small.model.info.loss,
                1e-9 * std::abs(small.model.info.loss));
    config.restarts = 0;
    const std::vector<ModelParams> warm = {embedded};
    const auto big = fit(table, {1, 2}, config, warm);
    EXPECT_LE(big.model.info.loss, small.model.info.loss);
}

TEST(Fit, PlantedDataFitsNearPlantedObjective) {
    auto spec = nt::planted_spec(8, 4, 8, {1, 1}, 0.02, 31);
    const auto data = generate_synthetic(spec);
    const auto planted = planted_model(data);
    const double planted_data_loss = evaluate(planted, data.table);
    FitConfig config;
    config.max_iterations = 5000;
    config.restarts = 3;
    const auto result = fit(data.table, {1, 1}, config);
    EXPECT_LE(result.model.info.data_loss, 1.05 * planted_data_loss + 1e-3)
        << "planted " << planted_data_loss;
}

TEST(Evaluate, EqualsWeightedDataTerm) {
    std::mt19937_64 rng(11);
    auto table = nt::random_table(4, 2, 3, rng);
    auto params = nt::random_model_params(table, {2, 1}, rng);
    const auto model = FittedModel::from_table(table, params);
    EXPECT_NEAR(evaluate(model, table), objective(table, params).negraising, 1e-12);
    const auto cells = evaluate_cells(model, table);
    double sum = 0.0;
    for (double x : cells) {
        sum += x;
    }
    EXPECT_NEAR(sum, evaluate(model, table), 1e-12);
}

TEST(Evaluate, PlantedModelOnNoiseFreeDataIsZero) {
    const auto data = generate_synthetic(nt::planted_spec(5, 3, 6, {2, 1}, 0.0, 12));
    EXPECT_NEAR(evaluate(planted_model(data), data.table), 0.0, 1e-9);
}

TEST(Evaluate, PlantedBeatsRandomInitializations) {
    const auto data = generate_synthetic(nt::planted_spec(6, 4, 6, {1, 2}, 0.05, 13));
    const auto planted = planted_model(data);
    const double planted_loss = objective(data.table, planted.params).total;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto init = initialize(data.table, {1, 2}, 1.0, s);
        EXPECT_LT(planted_loss, objective(data.table, init).total);
    }
}

TEST(Evaluate, MissingVerbIsCoverageError) {
    std::mt19937_64 rng(14);
    auto table = nt::random_table(3, 2, 3, rng);
    auto model = FittedModel::from_table(table, nt::random_model_params(table, {1, 1}, rng));
    auto bigger = nt::random_table(4, 2, 3, rng);
    EXPECT_THROW(evaluate(model, bigger), CoverageError);
}
