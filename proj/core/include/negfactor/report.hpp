#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "negfactor/dataset.hpp"
#include "negfactor/factorization.hpp"
#include "negfactor/model.hpp"

namespace negfactor {

// Probability tables read off a fitted model. Tables for a frozen side are
// empty; verb scores use the frozen ones so they are always defined.
struct AnalysisBundle {
    Hyperparams hyper;
    std::vector<std::string> verbs;
    std::vector<Frame> frames;
    std::vector<double> phi;   // |I| x 2 x 2
    std::vector<double> omega; // |T| x 2 x 2
    std::vector<double> pi;    // |T| x |F|
    std::vector<double> psi;    // |V| x max(|I|, 1)
    std::vector<double> lambda; // |V| x max(|T|, 1)
    // P(psi_vi) P(lambda_vt), |V| x max(|I|, 1) x max(|T|, 1)
    std::vector<double> verb_scores;
    // Rank correlation of P(psi) and P(lambda) across verbs; only defined
    // (non-NaN) when |I| = |T| = 1.
    double psi_lambda_spearman = 0.0;

    std::size_t lexical_columns() const;
    std::size_t structural_columns() const;
    double verb_score(std::size_t v, std::size_t i, std::size_t t) const;

    std::string to_json() const;
    static AnalysisBundle from_json(std::string_view text);

    friend bool operator==(const AnalysisBundle&, const AnalysisBundle&);
};

// Throws SchemaError when the model's shapes are inconsistent.
AnalysisBundle analyze(const FittedModel& model);

// Verbs by score, descending, ties by verb name. Needs a single lexical and
// structural column (DimensionError otherwise).
std::vector<std::pair<std::string, double>> rank_verbs(const AnalysisBundle& bundle);

// phi.csv, omega.csv, pi.csv, verb_scores.csv and bundle.json.
void write_report(const AnalysisBundle& bundle, const std::filesystem::path& dir);

} // namespace negfactor
