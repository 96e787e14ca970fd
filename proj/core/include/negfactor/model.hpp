#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "negfactor/dataset.hpp"
#include "negfactor/factorization.hpp"
#include "negfactor/response.hpp"

namespace negfactor {

struct ParameterBlock {
    std::string_view name;
    std::span<double> values;
};

struct ConstParameterBlock {
    std::string_view name;
    std::span<const double> values;
};

// Every unconstrained parameter of the neg-raising model.
struct ModelParams {
    FactorParams factors;
    EffectsParams effects;
    AcceptabilityCells cells;

    // Named views over the trainable parameters, in a fixed order. Frozen
    // boundary factors have no storage and so never appear with entries.
    std::vector<ParameterBlock> blocks();
    std::vector<ConstParameterBlock> blocks() const;

    // Same shape, all zeros.
    ModelParams zeros_like() const;

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct FitInfo {
    double loss = std::numeric_limits<double>::quiet_NaN();      // full objective
    double data_loss = std::numeric_limits<double>::quiet_NaN(); // weighted neg-raising KL
    std::uint64_t seed = 0;
    std::size_t iterations = 0;
    bool converged = false;
    double learning_rate = 0.01;
    // Whether neg-raising terms were weighted by logistic(alpha).
    bool acceptability_weighting = true;

    friend bool operator==(const FitInfo&, const FitInfo&) = default;
};

// Parameters plus the identifiers they are indexed by.
struct FittedModel {
    ModelParams params;
    std::vector<std::string> verbs;
    std::vector<Frame> frames;
    std::vector<std::string> participants;
    // Cells that own an alpha entry, in model ids.
    std::vector<CellKey> cells;
    FitInfo info;

    const Hyperparams& hyper() const { return params.factors.hyper; }

    // Takes identifiers and cell keys from `table`.
    static FittedModel from_table(const ResponseTable& table, ModelParams params);

    // Throws SchemaError when parameter shapes disagree with the identifier
    // lists.
    void validate() const;

    // JSON with explicit shapes and logits; doubles use shortest round-trip
    // formatting so save/load is bit-exact.
    std::string to_json() const;
    static FittedModel from_json(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static FittedModel load(const std::filesystem::path& path);

    friend bool operator==(const FittedModel&, const FittedModel&) = default;
};

} // namespace negfactor
