#include <gtest/gtest.h>

#include <nlohmann/json.hpp>
#include <random>

#include "negfactor_testing.hpp"

using namespace negfactor;
namespace nt = negfactor::testing;
using nlohmann::json;

namespace {

FittedModel random_model(Hyperparams hyper, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto table = nt::random_table(4, 3, 5, rng);
    auto model = FittedModel::from_table(table, nt::random_model_params(table, hyper, rng));
    model.info.loss = 1.0 / 3.0;
    model.info.data_loss = 0.1;
    model.info.seed = 0xdeadbeefcafef00dULL;
    model.info.iterations = 1234;
    model.info.converged = true;
    return model;
}

} // namespace

TEST(ModelParams, BlocksCoverEveryTrainableEntry) {
    std::mt19937_64 rng(1);
    auto table = nt::random_table(3, 2, 4, rng);
    auto params = nt::random_model_params(table, {2, 0}, rng);
    std::size_t total = 0;
    for (const auto& b : params.blocks()) {
        total += b.values.size();
    }
    const auto& f = params.factors;
    const auto& e = params.effects;
    const std::size_t expected = f.lambda.size() + f.pi.size() + f.psi.size() + f.phi.size() +
                                 f.omega.size() + 2 * (4 + 2 * e.negraising.beta.size()) +
                                 params.cells.alpha.size();
    EXPECT_EQ(total, expected);
    EXPECT_TRUE(f.lambda.empty());
    const auto zeros = params.zeros_like();
    for (const auto& b : zeros.blocks()) {
        for (double x : b.values) {
            EXPECT_EQ(x, 0.0);
        }
    }
}

TEST(FittedModel, JsonRoundTripIsBitExact) {
    for (Hyperparams h : {Hyperparams{1, 1}, Hyperparams{0, 3}, Hyperparams{4, 0},
                          Hyperparams{2, 3}}) {
        const auto model = random_model(h, 10 + h.n_lexical);
        const auto again = FittedModel::from_json(model.to_json());
        EXPECT_EQ(again, model) << h.label();
        EXPECT_EQ(again.to_json(), model.to_json());
    }
}

TEST(FittedModel, NanLossSurvivesRoundTrip) {
    auto model = random_model({1, 1}, 3);
    model.info.loss = std::numeric_limits<double>::quiet_NaN();
    const auto again = FittedModel::from_json(model.to_json());
    EXPECT_TRUE(std::isnan(again.info.loss));
}

TEST(FittedModel, SaveLoad) {
    const auto dir = nt::scratch_dir("model");
    const auto model = random_model({2, 2}, 4);
    model.save(dir / "m.json");
    EXPECT_EQ(FittedModel::load(dir / "m.json"), model);
    EXPECT_THROW(FittedModel::load(dir / "missing.json"), Error);
}

TEST(FittedModel, SchemaErrors) {
    const auto good = json::parse(random_model({1, 2}, 5).to_json());
    auto expect_schema_error = [](const json& j) {
        EXPECT_THROW(FittedModel::from_json(j.dump()), SchemaError) << j.dump().substr(0, 80);
    };
    EXPECT_THROW(FittedModel::from_json("{not json"), SchemaError);
    auto j = good;
    j["format"] = "something-else";
    expect_schema_error(j);
    j = good;
    j["version"] = 99;
    expect_schema_error(j);
    j = good;
    j.erase("factors");
    expect_schema_error(j);
    j = good;
    j["factors"]["lambda"]["logits"].erase(0);
    expect_schema_error(j);
    j = good;
    j["frames"][0] = "NP __ NP";
    expect_schema_error(j);
    j = good;
    j["participants"].erase(0);
    expect_schema_error(j);
    j = good;
    j["acceptability_cells"]["alpha"].erase(0);
    expect_schema_error(j);
    j = good;
    j["hyperparameters"]["n_lexical"] = 5;
    expect_schema_error(j);
}
