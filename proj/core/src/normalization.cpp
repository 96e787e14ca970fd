#include "negfactor/normalization.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <utility>

#include "negfactor/stats.hpp"

namespace negfactor {

namespace {

void push_channel(std::vector<ParameterBlock>& out, ChannelEffects& c, const char* prefix) {
    static const std::string names[2][6] = {
        {"negraising.beta0", "negraising.sigma0", "negraising.beta", "negraising.sigma",
         "negraising.log_var_beta", "negraising.log_var_sigma"},
        {"acceptability.beta0", "acceptability.sigma0", "acceptability.beta",
         "acceptability.sigma", "acceptability.log_var_beta", "acceptability.log_var_sigma"}};
    const auto& n = names[std::string_view(prefix) == "negraising" ? 0 : 1];
    out.push_back({n[0], {&c.beta0, 1}});
    out.push_back({n[1], {&c.sigma0, 1}});
    out.push_back({n[2], c.beta});
    out.push_back({n[3], c.sigma});
    out.push_back({n[4], {&c.log_var_beta, 1}});
    out.push_back({n[5], {&c.log_var_sigma, 1}});
}

void zero(ChannelEffects& c) {
    c.beta0 = c.sigma0 = c.log_var_beta = c.log_var_sigma = 0.0;
    std::fill(c.beta.begin(), c.beta.end(), 0.0);
    std::fill(c.sigma.begin(), c.sigma.end(), 0.0);
}

double mean_logit(const ResponseTable& table, const std::vector<std::size_t>& ids,
                  double Rating::*field) {
    double mean = 0.0;
    for (std::size_t id : ids) {
        mean += table.ratings()[id].*field;
    }
    mean /= static_cast<double>(ids.size());
    return logit(std::clamp(mean, kResponseEpsilon, 1.0 - kResponseEpsilon));
}

} // namespace

std::vector<ParameterBlock> NormalizationParams::blocks() {
    std::vector<ParameterBlock> out;
    out.push_back({"nu", nu});
    push_channel(out, effects.negraising, "negraising");
    push_channel(out, effects.acceptability, "acceptability");
    out.push_back({"alpha", cells.alpha});
    return out;
}

std::vector<ConstParameterBlock> NormalizationParams::blocks() const {
    std::vector<ConstParameterBlock> out;
    for (const auto& b : const_cast<NormalizationParams*>(this)->blocks()) {
        out.push_back({b.name, b.values});
    }
    return out;
}

double normalized_score(double nu, const ChannelEffects& negraising, bool inside_link) {
    const double scaled = std::exp(negraising.sigma0) * nu;
    if (inside_link) {
        return logistic(scaled + negraising.beta0);
    }
    return logistic(scaled) + negraising.beta0;
}

NormalizedScores normalize(const ResponseTable& table, const FitConfig& config,
                           const NormalizeOptions& options) {
    config.validate();
    if (table.empty()) {
        throw ConsistencyError("cannot normalize an empty table");
    }
    const auto& by_cell = table.ratings_by_cell();
    NormalizationParams params;
    params.effects = EffectsParams::identity(table.participants().size());
    for (const auto& ids : by_cell) {
        params.nu.push_back(mean_logit(table, ids, &Rating::negraising));
        params.cells.alpha.push_back(mean_logit(table, ids, &Rating::acceptability));
    }

    const LossOptions loss_options{config.acceptability_channel, true};
    auto objective = [&](const NormalizationParams& p, NormalizationParams& grad) {
        LossGradient g;
        const auto loss =
            cell_loss(table, p.nu, p.effects, p.cells.alpha, loss_options, {}, &g, nullptr);
        grad.nu = std::move(g.nu);
        grad.cells.alpha = std::move(g.alpha);
        grad.effects = std::move(g.effects);
        if (!config.acceptability_channel) {
            std::fill(grad.cells.alpha.begin(), grad.cells.alpha.end(), 0.0);
        }
        if (!options.learn_effects) {
            zero(grad.effects.negraising);
            zero(grad.effects.acceptability);
        }
        for (const auto& b : std::as_const(grad).blocks()) {
            for (double x : b.values) {
                if (!std::isfinite(x)) {
                    throw NumericalError("gradient of " + std::string(b.name) +
                                         " is not finite");
                }
            }
        }
        return loss.total;
    };
    auto project = [&](NormalizationParams& p) {
        for (ChannelEffects* c : {&p.effects.negraising, &p.effects.acceptability}) {
            c->log_var_beta = std::max(c->log_var_beta, config.min_log_variance);
            c->log_var_sigma = std::max(c->log_var_sigma, config.min_log_variance);
        }
    };
    const auto trace = minimize(params, objective, config, project);

    NormalizedScores out;
    out.sentences = sentence_labels(table);
    out.nu = params.nu;
    out.alpha = params.cells.alpha;
    for (double nu : params.nu) {
        out.score.push_back(normalized_score(nu, params.effects.negraising, options.inside_link));
    }
    out.params = std::move(params);
    out.trajectory = trace.trajectory;
    out.converged = trace.converged;
    return out;
}

void write_scores(const NormalizedScores& scores, std::ostream& out) {
    out << "verb,frame,subject,tense,nu,alpha,score\n";
    for (std::size_t c = 0; c < scores.sentences.size(); ++c) {
        const auto& s = scores.sentences[c];
        out << csv_field(s.verb) << ',' << csv_field(to_string(s.frame)) << ','
            << to_string(s.subject) << ',' << to_string(s.tense) << ','
            << format_double(scores.nu[c]) << ',' << format_double(scores.alpha[c]) << ','
            << format_double(scores.score[c]) << '\n';
    }
}

void write_scores(const NormalizedScores& scores, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    write_scores(scores, out);
}

} // namespace negfactor
