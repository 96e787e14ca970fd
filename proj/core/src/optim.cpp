#include "negfactor/optim.hpp"

#include <map>
#include <random>
#include <set>
#include <utility>

#include <nlohmann/json.hpp>

#include "negfactor/stats.hpp"

namespace negfactor {

using nlohmann::json;

namespace {

constexpr std::size_t kJK = kNumSubjects * kNumTenses;

void check_finite(std::span<const ConstParameterBlock> blocks, const char* what) {
    for (const auto& b : blocks) {
        for (std::size_t i = 0; i < b.values.size(); ++i) {
            if (!std::isfinite(b.values[i])) {
                throw NumericalError(std::string(what) + " of " + std::string(b.name) + "[" +
                                     std::to_string(i) + "] is not finite");
            }
        }
    }
}

// d loss / d P(n_vfjk) for every cell, pushed back onto factor logits.
void backprop_factors(const ResponseTable& table, const FactorParams& factors,
                      const FactorProbabilities& probs, std::span<const double> dloss_dnu,
                      FactorParams& grad) {
    const std::size_t T = probs.n_structural;
    const std::size_t I = probs.n_lexical;
    const std::size_t F = probs.n_frames;
    const bool lexical = factors.n_lexical() > 0;
    const bool structural = factors.n_structural() > 0;

    std::vector<double> g_lambda(probs.lambda.size(), 0.0), g_pi(probs.pi.size(), 0.0),
        g_psi(probs.psi.size(), 0.0), g_phi(probs.phi.size(), 0.0),
        g_omega(probs.omega.size(), 0.0);

    ForwardTerms terms;
    const auto cells = table.cells();
    for (std::size_t c = 0; c < cells.size(); ++c) {
        if (dloss_dnu[c] == 0.0) {
            continue;
        }
        const auto& key = cells[c];
        forward_negraising_terms(probs, key.verb, key.frame, key.subject, key.tense, terms);
        double dnu_dp = 0.0;
        clamped_logit(terms.probability, &dnu_dp);
        const double g_p = dloss_dnu[c] * dnu_dp;
        if (g_p == 0.0) {
            continue;
        }
        const std::size_t jk = key.subject * kNumTenses + key.tense;
        for (std::size_t t = 0; t < T; ++t) {
            const double lam = probs.lambda[key.verb * T + t];
            const double pi = probs.pi[t * F + key.frame];
            const double om = probs.omega[t * kJK + jk];
            for (std::size_t i = 0; i < I; ++i) {
                const double coef = g_p * terms.dprob_dzeta[t * I + i];
                const double psi = probs.psi[key.verb * I + i];
                const double phi = probs.phi[i * kJK + jk];
                if (structural) {
                    g_lambda[key.verb * T + t] += coef * psi * phi * pi * om;
                    g_pi[t * F + key.frame] += coef * lam * psi * phi * om;
                    g_omega[t * kJK + jk] += coef * lam * psi * phi * pi;
                }
                if (lexical) {
                    g_psi[key.verb * I + i] += coef * lam * phi * pi * om;
                    g_phi[i * kJK + jk] += coef * lam * psi * pi * om;
                }
            }
        }
    }
    // chain through the logistic: dp/dx = p (1 - p)
    auto to_logits = [](const std::vector<double>& g_prob, const std::vector<double>& prob,
                        std::vector<double>& out) {
        for (std::size_t n = 0; n < out.size(); ++n) {
            out[n] = g_prob[n] * prob[n] * (1.0 - prob[n]);
        }
    };
    grad = FactorParams::zeros(factors.n_verbs, factors.n_frames, factors.hyper);
    if (structural) {
        to_logits(g_lambda, probs.lambda, grad.lambda);
        to_logits(g_pi, probs.pi, grad.pi);
        to_logits(g_omega, probs.omega, grad.omega);
    }
    if (lexical) {
        to_logits(g_psi, probs.psi, grad.psi);
        to_logits(g_phi, probs.phi, grad.phi);
    }
}

double solve_alpha(std::span<const std::size_t> rating_ids, const ResponseTable& table,
                                const ChannelEffects& acc, std::span<const std::ptrdiff_t> pmap) {
    // Newton on sum_r D(a_r || logistic(m_r alpha + b_r)), convex in alpha.
    std::vector<double> m, b, a;
    for (std::size_t id : rating_ids) {
        const Rating& r = table.ratings()[id];
        std::optional<std::size_t> p;
        if (pmap[r.participant] >= 0) {
            p = static_cast<std::size_t>(pmap[r.participant]);
        }
        m.push_back(acc.scale(p));
        b.push_back(acc.shift(p));
        a.push_back(r.acceptability);
    }
    double mean = 0.0;
    for (double x : a) {
        mean += x;
    }
    mean /= static_cast<double>(a.size());
    double alpha = logit(mean);
    for (int iter = 0; iter < 100; ++iter) {
        double g = 0.0, h = 0.0;
        for (std::size_t n = 0; n < a.size(); ++n) {
            const double s = logistic(m[n] * alpha + b[n]);
            g += (s - a[n]) * m[n];
            h += s * (1.0 - s) * m[n] * m[n];
        }
        if (h <= 0.0) {
            break;
        }
        const double step = std::clamp(g / h, -5.0, 5.0);
        alpha = std::clamp(alpha - step, -30.0, 30.0);
        if (std::abs(step) < 1e-12) {
            break;
        }
    }
    return alpha;
}

struct Alignment {
    std::vector<double> nu;
    std::vector<double> alpha;
    std::vector<std::ptrdiff_t> participants;
};

Alignment align(const FittedModel& model, const ResponseTable& table) {
    model.validate();
    std::map<std::string, std::size_t> verb_ids, participant_ids;
    std::map<Frame, std::size_t> frame_ids;
    for (std::size_t v = 0; v < model.verbs.size(); ++v) {
        verb_ids.emplace(model.verbs[v], v);
    }
    for (std::size_t f = 0; f < model.frames.size(); ++f) {
        frame_ids.emplace(model.frames[f], f);
    }
    for (std::size_t p = 0; p < model.participants.size(); ++p) {
        participant_ids.emplace(model.participants[p], p);
    }
    std::map<CellKey, std::size_t> model_cells;
    for (std::size_t c = 0; c < model.cells.size(); ++c) {
        model_cells.emplace(model.cells[c], c);
    }

    Alignment out;
    out.participants.resize(table.participants().size());
    for (std::size_t p = 0; p < out.participants.size(); ++p) {
        auto it = participant_ids.find(table.participants().key(p));
        out.participants[p] = it == participant_ids.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
    }

    const auto probs = FactorProbabilities::from_params(model.params.factors);
    const auto cells = table.cells();
    out.nu.resize(cells.size());
    out.alpha.resize(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto& key = cells[c];
        const auto& verb = table.verbs().key(key.verb);
        const Frame frame = table.frames().key(key.frame);
        auto v = verb_ids.find(verb);
        if (v == verb_ids.end()) {
            throw CoverageError("model has no parameters for verb '" + verb + "'");
        }
        auto f = frame_ids.find(frame);
        if (f == frame_ids.end()) {
            throw CoverageError("model has no parameters for frame '" +
                                std::string(to_string(frame)) + "'");
        }
        const CellKey model_key{v->second, f->second, key.subject, key.tense};
        out.nu[c] = clamped_logit(
            forward_negraising(probs, model_key.verb, model_key.frame, key.subject, key.tense));
        auto known = model_cells.find(model_key);
        if (known != model_cells.end()) {
            out.alpha[c] = model.params.cells.alpha[known->second];
        } else {
            out.alpha[c] = solve_alpha(table.ratings_by_cell()[c], table,
                                       model.params.effects.acceptability, out.participants);
        }
    }
    return out;
}

} // namespace

void FitConfig::validate() const {
    auto fail = [](const std::string& what) { throw DomainError("invalid fit config: " + what); };
    if (!(learning_rate > 0.0)) {
        fail("learning_rate must be positive");
    }
    if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
        fail("Adam betas must lie in (0, 1)");
    }
    if (!(adam_epsilon > 0.0)) {
        fail("adam_epsilon must be positive");
    }
    if (patience < 1) {
        fail("patience must be at least 1");
    }
    if (check_every < 1) {
        fail("check_every must be at least 1");
    }
    if (!(convergence_tol >= 0.0)) {
        fail("convergence_tol must be nonnegative");
    }
    if (!(init_scale >= 0.0)) {
        fail("init_scale must be nonnegative");
    }
    if (!std::isfinite(min_log_variance)) {
        fail("min_log_variance must be finite");
    }
}

std::string FitConfig::to_json() const {
    json j = {{"learning_rate", learning_rate},
              {"adam_beta1", adam_beta1},
              {"adam_beta2", adam_beta2},
              {"adam_epsilon", adam_epsilon},
              {"max_iterations", max_iterations},
              {"convergence_tol", convergence_tol},
              {"check_every", check_every},
              {"patience", patience},
              {"seed", seed},
              {"init_scale", init_scale},
              {"restarts", restarts},
              {"min_log_variance", min_log_variance},
              {"acceptability_channel", acceptability_channel}};
    return j.dump(1) + "\n";
}

FitConfig FitConfig::from_json(std::string_view text) {
    FitConfig c;
    try {
        const json j = json::parse(text);
        if (!j.is_object()) {
            throw SchemaError("fit config must be a JSON object");
        }
        static const std::set<std::string> known = {
            "learning_rate", "adam_beta1",  "adam_beta2", "adam_epsilon", "max_iterations",
            "convergence_tol", "check_every", "patience",  "seed",         "init_scale",
            "restarts",      "min_log_variance", "acceptability_channel"};
        for (const auto& [key, value] : j.items()) {
            if (!known.contains(key)) {
                throw SchemaError("unknown fit config key '" + key + "'");
            }
        }
        auto get = [&](const char* key, auto& dst) {
            if (j.contains(key)) {
                dst = j.at(key).get<std::decay_t<decltype(dst)>>();
            }
        };
        get("learning_rate", c.learning_rate);
        get("adam_beta1", c.adam_beta1);
        get("adam_beta2", c.adam_beta2);
        get("adam_epsilon", c.adam_epsilon);
        get("max_iterations", c.max_iterations);
        get("convergence_tol", c.convergence_tol);
        get("check_every", c.check_every);
        get("patience", c.patience);
        get("seed", c.seed);
        get("init_scale", c.init_scale);
        get("restarts", c.restarts);
        get("min_log_variance", c.min_log_variance);
        get("acceptability_channel", c.acceptability_channel);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed fit config: ") + e.what());
    }
    c.validate();
    return c;
}

ModelParams gradient(const ResponseTable& table, const ModelParams& params,
                     const LossOptions& options, LossBreakdown* loss) {
    check_finite(params.blocks(), "value");
    if (params.factors.n_verbs != table.verbs().size() ||
        params.factors.n_frames != table.frames().size()) {
        throw ConsistencyError("factor shapes do not match the table's verb and frame indexes");
    }
    const auto probs = FactorProbabilities::from_params(params.factors);
    const auto nu = cell_predictors(table, probs);
    LossGradient g;
    const auto value =
        cell_loss(table, nu, params.effects, params.cells.alpha, options, {}, &g, nullptr);
    ModelParams out;
    backprop_factors(table, params.factors, probs, g.nu, out.factors);
    out.effects = std::move(g.effects);
    out.cells.alpha = std::move(g.alpha);
    if (!options.acceptability_channel) {
        out.cells.alpha.assign(params.cells.alpha.size(), 0.0);
    }
    check_finite(std::as_const(out).blocks(), "gradient");
    if (loss != nullptr) {
        *loss = value;
    }
    return out;
}

LossBreakdown objective(const ResponseTable& table, const ModelParams& params,
                        const LossOptions& options) {
    if (options.acceptability_channel && params.cells.alpha.size() != table.cells().size()) {
        throw ConsistencyError("alpha does not cover every observed cell");
    }
    return total_loss(table, params.factors, params.effects, params.cells, options);
}

ModelParams initialize(const ResponseTable& table, Hyperparams hyper, double init_scale,
                       std::uint64_t seed) {
    hyper.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    ModelParams p;
    p.factors = FactorParams::zeros(table.verbs().size(), table.frames().size(), hyper);
    for (auto* block : {&p.factors.lambda, &p.factors.pi, &p.factors.psi, &p.factors.phi,
                        &p.factors.omega}) {
        for (double& x : *block) {
            x = init_scale * normal(rng);
        }
    }
    p.effects = EffectsParams::identity(table.participants().size());
    const auto& by_cell = table.ratings_by_cell();
    p.cells.alpha.resize(table.cells().size());
    for (std::size_t c = 0; c < by_cell.size(); ++c) {
        double mean = 0.0;
        for (std::size_t id : by_cell[c]) {
            mean += table.ratings()[id].acceptability;
        }
        mean /= static_cast<double>(by_cell[c].size());
        p.cells.alpha[c] = logit(std::clamp(mean, kResponseEpsilon, 1.0 - kResponseEpsilon));
    }
    return p;
}

FitResult fit_from(const ResponseTable& table, ModelParams init, const FitConfig& config) {
    config.validate();
    if (table.empty()) {
        throw ConsistencyError("cannot fit an empty table");
    }
    const LossOptions options{config.acceptability_channel, true};
    auto objective_fn = [&](const ModelParams& params, ModelParams& grad) {
        LossBreakdown loss;
        grad = gradient(table, params, options, &loss);
        return loss.total;
    };
    auto project = [&](ModelParams& params) {
        for (ChannelEffects* c : {&params.effects.negraising, &params.effects.acceptability}) {
            c->log_var_beta = std::max(c->log_var_beta, config.min_log_variance);
            c->log_var_sigma = std::max(c->log_var_sigma, config.min_log_variance);
        }
    };
    ModelParams params = std::move(init);
    const auto trace = minimize(params, objective_fn, config, project);

    FitResult result;
    result.trajectory = trace.trajectory;
    result.iterations_run = trace.iterations;
    result.converged = trace.converged;
    result.model = FittedModel::from_table(table, std::move(params));
    result.model.info.loss = trace.trajectory.back();
    result.model.info.seed = config.seed;
    result.model.info.iterations = trace.iterations;
    result.model.info.converged = trace.converged;
    result.model.info.learning_rate = config.learning_rate;
    result.model.info.acceptability_weighting = config.acceptability_channel;
    result.model.info.data_loss = evaluate(result.model, table);
    result.restart_losses = {result.model.info.loss};
    return result;
}

FitResult fit(const ResponseTable& table, Hyperparams hyper, const FitConfig& config,
              std::span<const ModelParams> warm_starts) {
    hyper.validate();
    config.validate();
    std::optional<FitResult> best;
    std::vector<double> losses;
    std::optional<FitError> last_error;
    auto consider = [&](ModelParams init) {
        try {
            FitResult run = fit_from(table, std::move(init), config);
            losses.push_back(run.model.info.loss);
            if (!best || run.model.info.loss < best->model.info.loss) {
                best = std::move(run);
            }
        } catch (const FitError& e) {
            losses.push_back(std::numeric_limits<double>::quiet_NaN());
            last_error = e;
        }
    };
    if (config.restarts == 0 && warm_starts.empty()) {
        throw DomainError("fit needs at least one restart or warm start");
    }
    for (std::size_t r = 0; r < config.restarts; ++r) {
        consider(initialize(table, hyper, config.init_scale, derive_seed(config.seed, r)));
    }
    for (const auto& start : warm_starts) {
        if (start.factors.hyper != hyper) {
            throw DimensionError("warm start has hyperparameters " + start.factors.hyper.label() +
                                 ", expected " + hyper.label());
        }
        consider(start);
    }
    if (!best) {
        throw *last_error;
    }
    best->restart_losses = std::move(losses);
    return std::move(*best);
}

double evaluate(const FittedModel& model, const ResponseTable& table) {
    const auto a = align(model, table);
    if (model.info.acceptability_weighting) {
        return cell_loss(table, a.nu, model.params.effects, a.alpha, {true, false}, a.participants)
            .negraising;
    }
    return cell_loss(table, a.nu, model.params.effects, {}, {false, false}, a.participants)
        .negraising;
}

std::vector<double> evaluate_cells(const FittedModel& model, const ResponseTable& table) {
    const auto a = align(model, table);
    std::vector<double> per_cell;
    if (model.info.acceptability_weighting) {
        cell_loss(table, a.nu, model.params.effects, a.alpha, {true, false}, a.participants,
                  nullptr, &per_cell);
    } else {
        cell_loss(table, a.nu, model.params.effects, {}, {false, false}, a.participants, nullptr,
                  &per_cell);
    }
    return per_cell;
}

} // namespace negfactor
