#include <gtest/gtest.h>

#include <set>

#include "negfactor_testing.hpp"

using namespace negfactor;
namespace nt = negfactor::testing;

namespace {

bool same_factors(const FactorProbabilities& a, const FactorProbabilities& b) {
    return a.n_verbs == b.n_verbs && a.n_frames == b.n_frames && a.n_lexical == b.n_lexical &&
           a.n_structural == b.n_structural && a.lambda == b.lambda && a.pi == b.pi &&
           a.psi == b.psi && a.phi == b.phi && a.omega == b.omega;
}

} // namespace

TEST(SyntheticName, ZeroPadded) {
    EXPECT_EQ(synthetic_name('v', 7, 10), "v007");
    EXPECT_EQ(synthetic_name('p', 12, 5000), "p0012");
}

TEST(GenerateSynthetic, DeterministicInSeed) {
    const auto spec = nt::planted_spec(6, 4, 8, {1, 2}, 0.05, 11);
    const auto a = generate_synthetic(spec);
    const auto b = generate_synthetic(spec);
    EXPECT_EQ(a.table.records(), b.table.records());
    EXPECT_EQ(a.alpha, b.alpha);
    auto other = spec;
    other.seed = 12;
    EXPECT_NE(generate_synthetic(other).table.records(), a.table.records());
}

TEST(GenerateSynthetic, CoversEverySentence) {
    auto spec = nt::planted_spec(5, 6, 7, {2, 1}, 0.0, 3);
    spec.ratings_per_cell = 3;
    const auto data = generate_synthetic(spec);
    EXPECT_EQ(data.table.cells().size(), 5U * 6U * kNumSubjects * kNumTenses);
    for (const auto& ids : data.table.ratings_by_cell()) {
        ASSERT_EQ(ids.size(), 3U);
        std::set<std::size_t> who;
        for (auto id : ids) {
            who.insert(data.table.ratings()[id].participant);
        }
        EXPECT_EQ(who.size(), 3U);
    }
    EXPECT_EQ(data.alpha.size(), data.table.cells().size());
    EXPECT_EQ(data.probability.size(), data.table.cells().size());
}

TEST(GenerateSynthetic, NoiseFreeResponsesMatchPrediction) {
    auto spec = nt::planted_spec(4, 3, 5, {1, 1}, 0.0, 5);
    spec.negraising = {0.2, 0.1, 0.3, 0.2};
    const auto data = generate_synthetic(spec);
    const auto& t = data.table;
    for (const auto& r : t.ratings()) {
        const auto& key = t.cells()[r.cell];
        const double p = forward_negraising(spec.factors, key.verb, key.frame, key.subject, key.tense);
        EXPECT_NEAR(data.probability[r.cell], p, 1e-15);
        const std::size_t planted = std::stoul(t.participants().key(r.participant).substr(1));
        const auto& c = data.effects.negraising;
        const double expected = nt::sigmoid(std::exp(c.sigma0 + c.sigma[planted]) *
                                                clamped_logit(p) +
                                            c.beta0 + c.beta[planted]);
        EXPECT_NEAR(r.negraising, std::clamp(expected, kResponseEpsilon, 1.0 - kResponseEpsilon),
                    1e-12);
    }
}

TEST(GenerateSynthetic, SaturatedFactorsGiveUnitProbability) {
    auto spec = nt::planted_spec(3, 2, 4, {1, 1}, 0.0, 9);
    spec.factors = FactorProbabilities::constant(3, 2, {1, 1}, 1.0);
    const auto data = generate_synthetic(spec);
    for (double p : data.probability) {
        EXPECT_EQ(p, 1.0);
    }
    for (const auto& r : data.table.ratings()) {
        EXPECT_GT(r.negraising, 0.999);
    }
}

TEST(GenerateSynthetic, ResponsesStayInRange) {
    auto spec = nt::planted_spec(5, 6, 10, {2, 2}, 0.5, 13);
    const auto data = generate_synthetic(spec);
    for (const auto& r : data.table.ratings()) {
        EXPECT_GT(r.negraising, 0.0);
        EXPECT_LT(r.negraising, 1.0);
        EXPECT_GT(r.acceptability, 0.0);
        EXPECT_LT(r.acceptability, 1.0);
    }
}

TEST(PlantedSpec, RejectsBadShapes) {
    auto spec = nt::planted_spec(3, 2, 4, {1, 1}, 0.0, 1);
    spec.factors.lambda.pop_back();
    EXPECT_THROW(spec.validate(), DimensionError);
    spec = nt::planted_spec(3, 2, 4, {0, 1}, 0.0, 1);
    spec.factors.psi[0] = 0.5;
    EXPECT_THROW(spec.validate(), DimensionError);
    spec = nt::planted_spec(3, 7, 4, {1, 1}, 0.0, 1);
    EXPECT_THROW(spec.validate(), DimensionError);
    spec = nt::planted_spec(3, 2, 4, {1, 1}, -0.1, 1);
    EXPECT_THROW(spec.validate(), DomainError);
}

TEST(PlantedSpec, JsonRoundTrip) {
    auto spec = nt::planted_spec(4, 3, 6, {2, 1}, 0.1, 21);
    spec.negraising = {0.5, -0.2, 0.3, 0.1};
    spec.alpha_mean = 1.0;
    spec.alpha_sd = 0.5;
    const auto again = PlantedSpec::from_json(spec.to_json());
    EXPECT_EQ(again.to_json(), spec.to_json());
    EXPECT_TRUE(same_factors(again.factors, spec.factors));
}

TEST(PlantedSpec, FromJsonDrawsFactorsAndRejectsUnknownKeys) {
    const auto a = PlantedSpec::from_json(R"({"n_verbs": 4, "n_lexical": 2, "seed": 3})");
    const auto b = PlantedSpec::from_json(R"({"n_verbs": 4, "n_lexical": 2, "seed": 3})");
    EXPECT_EQ(a.factors.psi.size(), 8U);
    EXPECT_TRUE(same_factors(a.factors, b.factors));
    const auto boolean =
        PlantedSpec::from_json(R"({"n_verbs": 4, "seed": 3, "boolean_factors": true})");
    for (double x : boolean.factors.lambda) {
        EXPECT_TRUE(x == 0.0 || x == 1.0);
    }
    EXPECT_THROW(PlantedSpec::from_json(R"({"n_verb": 4})"), SchemaError);
    EXPECT_THROW(PlantedSpec::from_json("[1]"), SchemaError);
}

TEST(PlantedModel, ReproducesGeneratingProbabilities) {
    auto spec = nt::planted_spec(5, 4, 6, {2, 2}, 0.0, 17);
    const auto data = generate_synthetic(spec);
    const auto model = planted_model(data);
    const auto probs = FactorProbabilities::from_params(model.params.factors);
    for (std::size_t c = 0; c < data.table.cells().size(); ++c) {
        const auto& key = data.table.cells()[c];
        EXPECT_NEAR(forward_negraising(probs, key.verb, key.frame, key.subject, key.tense),
                    data.probability[c], 1e-12);
    }
}
