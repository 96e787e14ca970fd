#include "negfactor/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

#include "negfactor/stats.hpp"

namespace negfactor {

using nlohmann::json;

namespace {

constexpr double kSaturatedLogit = 40.0;

double planted_logit(double p) { return std::clamp(logit(p), -kSaturatedLogit, kSaturatedLogit); }

std::vector<double> to_logits(const std::vector<double>& probs) {
    std::vector<double> out(probs.size());
    std::transform(probs.begin(), probs.end(), out.begin(), planted_logit);
    return out;
}

json channel_json(const PlantedChannel& c) {
    return json{{"beta0", c.beta0}, {"sigma0", c.sigma0}, {"sd_beta", c.sd_beta},
                {"sd_sigma", c.sd_sigma}};
}

PlantedChannel read_channel(const json& j, PlantedChannel c) {
    static const std::set<std::string> known = {"beta0", "sigma0", "sd_beta", "sd_sigma"};
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) {
            throw SchemaError("unknown channel key '" + key + "'");
        }
    }
    c.beta0 = j.value("beta0", c.beta0);
    c.sigma0 = j.value("sigma0", c.sigma0);
    c.sd_beta = j.value("sd_beta", c.sd_beta);
    c.sd_sigma = j.value("sd_sigma", c.sd_sigma);
    return c;
}

void check_ones(const std::vector<double>& v, const char* name) {
    for (double x : v) {
        if (x != 1.0) {
            throw DimensionError(std::string("frozen factor ") + name + " must be all ones");
        }
    }
}

} // namespace

std::string synthetic_name(char prefix, std::size_t id, std::size_t count) {
    std::size_t width = 3;
    for (std::size_t n = count > 0 ? count - 1 : 0; n >= 1000; n /= 10) {
        ++width;
    }
    std::string digits = std::to_string(id);
    if (digits.size() < width) {
        digits.insert(0, width - digits.size(), '0');
    }
    return std::string(1, prefix) + digits;
}

void PlantedSpec::validate() const {
    hyper.validate();
    if (n_verbs == 0 || n_participants == 0 || ratings_per_cell == 0) {
        throw DimensionError("verbs, participants and ratings per cell must be positive");
    }
    if (n_frames == 0 || n_frames > kAllFrames.size()) {
        throw DimensionError("n_frames must lie in 1.." + std::to_string(kAllFrames.size()));
    }
    const std::size_t I = std::max(hyper.n_lexical, 1);
    const std::size_t T = std::max(hyper.n_structural, 1);
    if (factors.n_verbs != n_verbs || factors.n_frames != n_frames || factors.n_lexical != I ||
        factors.n_structural != T) {
        throw DimensionError("planted factors do not match the spec dimensions");
    }
    factors.validate();
    if (hyper.n_lexical == 0) {
        check_ones(factors.psi, "psi");
        check_ones(factors.phi, "phi");
    }
    if (hyper.n_structural == 0) {
        check_ones(factors.lambda, "lambda");
        check_ones(factors.pi, "pi");
        check_ones(factors.omega, "omega");
    }
    for (const PlantedChannel* c : {&negraising, &acceptability}) {
        if (!(c->sd_beta >= 0.0) || !(c->sd_sigma >= 0.0)) {
            throw DomainError("random-effect spreads must be nonnegative");
        }
    }
    if (!(noise_scale >= 0.0) || !(alpha_sd >= 0.0)) {
        throw DomainError("noise_scale and alpha_sd must be nonnegative");
    }
}

FactorProbabilities random_planted_factors(std::size_t n_verbs, std::size_t n_frames,
                                           Hyperparams hyper, std::uint64_t seed, double scale,
                                           bool boolean) {
    auto probs = FactorProbabilities::constant(n_verbs, n_frames, hyper, 1.0);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    auto fill = [&](std::vector<double>& v) {
        for (double& x : v) {
            x = boolean ? (coin(rng) ? 1.0 : 0.0) : logistic(scale * normal(rng));
        }
    };
    if (hyper.n_structural > 0) {
        fill(probs.lambda);
        fill(probs.pi);
        fill(probs.omega);
    }
    if (hyper.n_lexical > 0) {
        fill(probs.psi);
        fill(probs.phi);
    }
    return probs;
}

PlantedSpec PlantedSpec::from_json(std::string_view text) {
    PlantedSpec s;
    try {
        const json j = json::parse(text);
        if (!j.is_object()) {
            throw SchemaError("planted spec must be a JSON object");
        }
        static const std::set<std::string> known = {
            "n_verbs",       "n_frames",      "n_participants", "n_lexical",
            "n_structural",  "noise_scale",   "seed",           "ratings_per_cell",
            "negraising",    "acceptability", "alpha_mean",     "alpha_sd",
            "factor_seed",   "factor_scale",  "boolean_factors", "factors"};
        for (const auto& [key, value] : j.items()) {
            if (!known.contains(key)) {
                throw SchemaError("unknown planted spec key '" + key + "'");
            }
        }
        s.n_verbs = j.value("n_verbs", s.n_verbs);
        s.n_frames = j.value("n_frames", s.n_frames);
        s.n_participants = j.value("n_participants", s.n_participants);
        s.hyper.n_lexical = j.value("n_lexical", s.hyper.n_lexical);
        s.hyper.n_structural = j.value("n_structural", s.hyper.n_structural);
        s.noise_scale = j.value("noise_scale", s.noise_scale);
        s.seed = j.value("seed", s.seed);
        s.ratings_per_cell = j.value("ratings_per_cell", s.ratings_per_cell);
        s.alpha_mean = j.value("alpha_mean", s.alpha_mean);
        s.alpha_sd = j.value("alpha_sd", s.alpha_sd);
        if (j.contains("negraising")) {
            s.negraising = read_channel(j.at("negraising"), s.negraising);
        }
        if (j.contains("acceptability")) {
            s.acceptability = read_channel(j.at("acceptability"), s.acceptability);
        }
        s.hyper.validate();
        if (j.contains("factors")) {
            const auto& f = j.at("factors");
            s.factors = FactorProbabilities::constant(s.n_verbs, s.n_frames, s.hyper, 1.0);
            s.factors.lambda = f.at("lambda").get<std::vector<double>>();
            s.factors.pi = f.at("pi").get<std::vector<double>>();
            s.factors.psi = f.at("psi").get<std::vector<double>>();
            s.factors.phi = f.at("phi").get<std::vector<double>>();
            s.factors.omega = f.at("omega").get<std::vector<double>>();
        } else {
            s.factors = random_planted_factors(
                s.n_verbs, s.n_frames, s.hyper,
                j.value("factor_seed", derive_seed(s.seed, 0x666163)),
                j.value("factor_scale", 1.5), j.value("boolean_factors", false));
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed planted spec: ") + e.what());
    }
    s.validate();
    return s;
}

std::string PlantedSpec::to_json() const {
    json j = {{"n_verbs", n_verbs},
              {"n_frames", n_frames},
              {"n_participants", n_participants},
              {"n_lexical", hyper.n_lexical},
              {"n_structural", hyper.n_structural},
              {"noise_scale", noise_scale},
              {"seed", seed},
              {"ratings_per_cell", ratings_per_cell},
              {"negraising", channel_json(negraising)},
              {"acceptability", channel_json(acceptability)},
              {"alpha_mean", alpha_mean},
              {"alpha_sd", alpha_sd},
              {"factors",
               {{"lambda", factors.lambda},
                {"pi", factors.pi},
                {"psi", factors.psi},
                {"phi", factors.phi},
                {"omega", factors.omega}}}};
    return j.dump(1) + "\n";
}

SyntheticDataset generate_synthetic(const PlantedSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    SyntheticDataset out;
    out.spec = spec;
    out.effects = EffectsParams::identity(spec.n_participants);
    auto draw_channel = [&](const PlantedChannel& planted, ChannelEffects& c) {
        c.beta0 = planted.beta0;
        c.sigma0 = planted.sigma0;
        c.log_var_beta = 2.0 * std::log(std::max(planted.sd_beta, 1e-3));
        c.log_var_sigma = 2.0 * std::log(std::max(planted.sd_sigma, 1e-3));
        for (std::size_t p = 0; p < spec.n_participants; ++p) {
            c.beta[p] = planted.sd_beta * normal(rng);
            c.sigma[p] = planted.sd_sigma * normal(rng);
        }
    };
    draw_channel(spec.negraising, out.effects.negraising);
    draw_channel(spec.acceptability, out.effects.acceptability);

    std::vector<std::string> verbs, participants;
    for (std::size_t v = 0; v < spec.n_verbs; ++v) {
        verbs.push_back(synthetic_name('v', v, spec.n_verbs));
    }
    for (std::size_t p = 0; p < spec.n_participants; ++p) {
        participants.push_back(synthetic_name('p', p, spec.n_participants));
    }

    const std::size_t per_cell = std::min(spec.ratings_per_cell, spec.n_participants);
    std::vector<std::size_t> order(spec.n_participants);
    std::vector<ResponseRecord> records;
    std::map<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>,
             std::pair<double, double>>
        planted_cells;
    auto noisy = [&](double mean) {
        return std::clamp(mean + spec.noise_scale * normal(rng), 0.0, 1.0);
    };
    for (std::size_t v = 0; v < spec.n_verbs; ++v) {
        for (std::size_t f = 0; f < spec.n_frames; ++f) {
            for (std::size_t j = 0; j < kNumSubjects; ++j) {
                for (std::size_t k = 0; k < kNumTenses; ++k) {
                    const double prob = forward_negraising(spec.factors, v, f, j, k);
                    const double nu = clamped_logit(prob);
                    const double alpha = spec.alpha_mean + spec.alpha_sd * normal(rng);
                    planted_cells[{v, f, j, k}] = {prob, alpha};
                    std::iota(order.begin(), order.end(), 0);
                    for (std::size_t n = 0; n < per_cell; ++n) {
                        std::uniform_int_distribution<std::size_t> pick(n, order.size() - 1);
                        std::swap(order[n], order[pick(rng)]);
                    }
                    for (std::size_t n = 0; n < per_cell; ++n) {
                        const std::size_t p = order[n];
                        ResponseRecord r;
                        r.verb = verbs[v];
                        r.frame = kAllFrames[f];
                        r.subject = kAllSubjects[j];
                        r.tense = kAllTenses[k];
                        r.participant = participants[p];
                        r.negraising = noisy(predict_negraising(nu, out.effects, p));
                        r.acceptability = noisy(predict_acceptability(alpha, out.effects, p));
                        records.push_back(std::move(r));
                    }
                }
            }
        }
    }
    out.table = ResponseTable::from_records(records);

    const auto& table = out.table;
    out.alpha.resize(table.cells().size());
    out.probability.resize(table.cells().size());
    for (std::size_t c = 0; c < table.cells().size(); ++c) {
        const auto& key = table.cells()[c];
        const std::size_t v = std::stoul(table.verbs().key(key.verb).substr(1));
        const auto frame = table.frames().key(key.frame);
        const std::size_t f = static_cast<std::size_t>(frame);
        const auto& [prob, alpha] = planted_cells.at({v, f, key.subject, key.tense});
        out.probability[c] = prob;
        out.alpha[c] = alpha;
    }
    return out;
}

FittedModel planted_model(const SyntheticDataset& data) {
    const auto& spec = data.spec;
    const auto& table = data.table;
    ModelParams params;
    auto& f = params.factors;
    f = FactorParams::zeros(table.verbs().size(), table.frames().size(), spec.hyper);
    // table verbs and frames are a sorted image of the planted ones
    std::vector<std::size_t> verb_of(table.verbs().size()), frame_of(table.frames().size());
    for (std::size_t v = 0; v < verb_of.size(); ++v) {
        verb_of[v] = std::stoul(table.verbs().key(v).substr(1));
    }
    for (std::size_t fr = 0; fr < frame_of.size(); ++fr) {
        frame_of[fr] = static_cast<std::size_t>(table.frames().key(fr));
    }
    const auto& p = spec.factors;
    const std::size_t T = f.n_structural(), I = f.n_lexical(), F = frame_of.size();
    for (std::size_t v = 0; v < verb_of.size(); ++v) {
        for (std::size_t t = 0; t < T; ++t) {
            f.lambda[v * T + t] = planted_logit(p.lambda_at(verb_of[v], t));
        }
        for (std::size_t i = 0; i < I; ++i) {
            f.psi[v * I + i] = planted_logit(p.psi_at(verb_of[v], i));
        }
    }
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t fr = 0; fr < F; ++fr) {
            f.pi[t * F + fr] = planted_logit(p.pi_at(t, frame_of[fr]));
        }
    }
    if (T > 0) {
        f.omega = to_logits(p.omega);
    }
    if (I > 0) {
        f.phi = to_logits(p.phi);
    }

    params.effects = EffectsParams::identity(table.participants().size());
    for (std::size_t l = 0; l < table.participants().size(); ++l) {
        const std::size_t planted = std::stoul(table.participants().key(l).substr(1));
        for (auto [dst, src] : {std::pair{&params.effects.negraising, &data.effects.negraising},
                                std::pair{&params.effects.acceptability,
                                          &data.effects.acceptability}}) {
            dst->beta[l] = src->beta[planted];
            dst->sigma[l] = src->sigma[planted];
        }
    }
    for (auto [dst, src] : {std::pair{&params.effects.negraising, &data.effects.negraising},
                            std::pair{&params.effects.acceptability,
                                      &data.effects.acceptability}}) {
        dst->beta0 = src->beta0;
        dst->sigma0 = src->sigma0;
        dst->log_var_beta = src->log_var_beta;
        dst->log_var_sigma = src->log_var_sigma;
    }
    params.cells.alpha = data.alpha;
    auto model = FittedModel::from_table(table, std::move(params));
    model.info.seed = spec.seed;
    model.info.iterations = 0;
    return model;
}

} // namespace negfactor
