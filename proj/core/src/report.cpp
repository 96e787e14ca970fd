#include "negfactor/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "negfactor/stats.hpp"

namespace negfactor {

using nlohmann::json;

namespace {

std::vector<double> probabilities(const std::vector<double>& logits) {
    std::vector<double> out(logits.size());
    std::transform(logits.begin(), logits.end(), out.begin(), logistic);
    return out;
}

std::ofstream open(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    return out;
}

// rows of (property, subject, tense, probability)
void write_jk_table(const std::vector<double>& table, const std::filesystem::path& path) {
    auto out = open(path);
    out << "property,subject,tense,probability\n";
    for (std::size_t n = 0; n < table.size(); ++n) {
        const std::size_t row = n / (kNumSubjects * kNumTenses);
        const std::size_t j = (n / kNumTenses) % kNumSubjects;
        const std::size_t k = n % kNumTenses;
        out << row << ',' << to_string(kAllSubjects[j]) << ',' << to_string(kAllTenses[k]) << ','
            << format_double(table[n]) << '\n';
    }
}

json nullable(double x) {
    if (!std::isfinite(x)) {
        return nullptr;
    }
    return x;
}

bool same(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

} // namespace

std::size_t AnalysisBundle::lexical_columns() const {
    return static_cast<std::size_t>(std::max(hyper.n_lexical, 1));
}

std::size_t AnalysisBundle::structural_columns() const {
    return static_cast<std::size_t>(std::max(hyper.n_structural, 1));
}

double AnalysisBundle::verb_score(std::size_t v, std::size_t i, std::size_t t) const {
    return verb_scores[(v * lexical_columns() + i) * structural_columns() + t];
}

AnalysisBundle analyze(const FittedModel& model) {
    model.validate();
    const auto probs = FactorProbabilities::from_params(model.params.factors);
    AnalysisBundle b;
    b.hyper = model.hyper();
    b.verbs = model.verbs;
    b.frames = model.frames;
    b.phi = probabilities(model.params.factors.phi);
    b.omega = probabilities(model.params.factors.omega);
    b.pi = probabilities(model.params.factors.pi);
    b.psi = probs.psi;
    b.lambda = probs.lambda;
    const std::size_t I = probs.n_lexical, T = probs.n_structural;
    for (std::size_t v = 0; v < b.verbs.size(); ++v) {
        for (std::size_t i = 0; i < I; ++i) {
            for (std::size_t t = 0; t < T; ++t) {
                b.verb_scores.push_back(probs.psi_at(v, i) * probs.lambda_at(v, t));
            }
        }
    }
    b.psi_lambda_spearman = std::numeric_limits<double>::quiet_NaN();
    if (b.hyper.n_lexical == 1 && b.hyper.n_structural == 1) {
        b.psi_lambda_spearman = spearman(b.psi, b.lambda);
    }
    return b;
}

std::vector<std::pair<std::string, double>> rank_verbs(const AnalysisBundle& bundle) {
    if (bundle.lexical_columns() != 1 || bundle.structural_columns() != 1) {
        throw DimensionError("verb ranking needs a model with one lexical and one structural "
                             "column, got " +
                             bundle.hyper.label());
    }
    std::vector<std::pair<std::string, double>> out;
    for (std::size_t v = 0; v < bundle.verbs.size(); ++v) {
        out.emplace_back(bundle.verbs[v], bundle.verb_scores[v]);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) {
            return a.second > b.second;
        }
        return a.first < b.first;
    });
    return out;
}

std::string AnalysisBundle::to_json() const {
    json frames_json = json::array();
    for (Frame f : frames) {
        frames_json.push_back(std::string(to_string(f)));
    }
    const std::size_t I = static_cast<std::size_t>(hyper.n_lexical);
    const std::size_t T = static_cast<std::size_t>(hyper.n_structural);
    const std::size_t V = verbs.size();
    json j = {
        {"format", "negfactor-analysis"},
        {"version", 1},
        {"hyperparameters", {{"n_lexical", hyper.n_lexical}, {"n_structural", hyper.n_structural}}},
        {"verbs", verbs},
        {"frames", frames_json},
        {"subjects", {"first", "third"}},
        {"tenses", {"past", "present"}},
        {"phi", {{"shape", {I, kNumSubjects, kNumTenses}}, {"probabilities", phi}}},
        {"omega", {{"shape", {T, kNumSubjects, kNumTenses}}, {"probabilities", omega}}},
        {"pi", {{"shape", {T, frames.size()}}, {"probabilities", pi}}},
        {"psi", {{"shape", {V, lexical_columns()}}, {"probabilities", psi}}},
        {"lambda", {{"shape", {V, structural_columns()}}, {"probabilities", lambda}}},
        {"verb_scores",
         {{"shape", {V, lexical_columns(), structural_columns()}}, {"values", verb_scores}}},
        {"psi_lambda_spearman", nullable(psi_lambda_spearman)}};
    return j.dump(1) + "\n";
}

AnalysisBundle AnalysisBundle::from_json(std::string_view text) {
    AnalysisBundle b;
    try {
        const json j = json::parse(text);
        if (j.at("format").get<std::string>() != "negfactor-analysis") {
            throw SchemaError("not an analysis bundle");
        }
        b.hyper = {j.at("hyperparameters").at("n_lexical").get<int>(),
                   j.at("hyperparameters").at("n_structural").get<int>()};
        b.hyper.validate();
        b.verbs = j.at("verbs").get<std::vector<std::string>>();
        for (const auto& label : j.at("frames")) {
            const auto frame = parse_frame(label.get<std::string>());
            if (!frame) {
                throw SchemaError("unknown frame '" + label.get<std::string>() + "'");
            }
            b.frames.push_back(*frame);
        }
        b.phi = j.at("phi").at("probabilities").get<std::vector<double>>();
        b.omega = j.at("omega").at("probabilities").get<std::vector<double>>();
        b.pi = j.at("pi").at("probabilities").get<std::vector<double>>();
        b.psi = j.at("psi").at("probabilities").get<std::vector<double>>();
        b.lambda = j.at("lambda").at("probabilities").get<std::vector<double>>();
        b.verb_scores = j.at("verb_scores").at("values").get<std::vector<double>>();
        const auto& rho = j.at("psi_lambda_spearman");
        b.psi_lambda_spearman =
            rho.is_null() ? std::numeric_limits<double>::quiet_NaN() : rho.get<double>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed analysis bundle: ") + e.what());
    } catch (const DimensionError& e) {
        throw SchemaError(e.what());
    }
    const std::size_t V = b.verbs.size();
    if (b.verb_scores.size() != V * b.lexical_columns() * b.structural_columns() ||
        b.psi.size() != V * b.lexical_columns() || b.lambda.size() != V * b.structural_columns()) {
        throw SchemaError("analysis bundle shapes do not match its verb list");
    }
    return b;
}

bool operator==(const AnalysisBundle& a, const AnalysisBundle& b) {
    const bool rho_equal = (std::isnan(a.psi_lambda_spearman) && std::isnan(b.psi_lambda_spearman)) ||
                           a.psi_lambda_spearman == b.psi_lambda_spearman;
    return a.hyper == b.hyper && a.verbs == b.verbs && a.frames == b.frames && same(a.phi, b.phi) &&
           same(a.omega, b.omega) && same(a.pi, b.pi) && same(a.psi, b.psi) &&
           same(a.lambda, b.lambda) && same(a.verb_scores, b.verb_scores) && rho_equal;
}

void write_report(const AnalysisBundle& bundle, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_jk_table(bundle.phi, dir / "phi.csv");
    write_jk_table(bundle.omega, dir / "omega.csv");
    {
        auto out = open(dir / "pi.csv");
        out << "property,frame,probability\n";
        const std::size_t F = bundle.frames.size();
        for (std::size_t n = 0; n < bundle.pi.size(); ++n) {
            out << n / F << ',' << csv_field(to_string(bundle.frames[n % F])) << ','
                << format_double(bundle.pi[n]) << '\n';
        }
    }
    {
        auto out = open(dir / "verb_scores.csv");
        out << "verb,lexical,structural,psi,lambda,score\n";
        const std::size_t I = bundle.lexical_columns(), T = bundle.structural_columns();
        for (std::size_t v = 0; v < bundle.verbs.size(); ++v) {
            for (std::size_t i = 0; i < I; ++i) {
                for (std::size_t t = 0; t < T; ++t) {
                    out << csv_field(bundle.verbs[v]) << ',' << i << ',' << t << ','
                        << format_double(bundle.psi[v * I + i]) << ','
                        << format_double(bundle.lambda[v * T + t]) << ','
                        << format_double(bundle.verb_score(v, i, t)) << '\n';
                }
            }
        }
    }
    auto out = open(dir / "bundle.json");
    out << bundle.to_json();
}

} // namespace negfactor
