#include "negfactor/response.hpp"

#include <algorithm>
#include <string>

#include "negfactor/stats.hpp"

namespace negfactor {

namespace {

double entropy_term(double r) { return r * std::log(r) + (1.0 - r) * std::log1p(-r); }

std::optional<std::size_t> checked(const ChannelEffects& c, std::size_t participant) {
    if (participant >= c.beta.size() || participant >= c.sigma.size()) {
        throw IndexError("participant " + std::to_string(participant) + " out of range");
    }
    return participant;
}

void prior_terms(const ChannelEffects& c, double& value, ChannelEffects* grad) {
    const double vb = c.var_beta();
    const double vs = c.var_sigma();
    double sb = 0.0, ss = 0.0;
    for (double b : c.beta) {
        sb += b * b;
    }
    for (double s : c.sigma) {
        ss += s * s;
    }
    const double nb = static_cast<double>(c.beta.size());
    const double ns = static_cast<double>(c.sigma.size());
    value += sb / (2.0 * vb) + 0.5 * nb * c.log_var_beta;
    value += ss / (2.0 * vs) + 0.5 * ns * c.log_var_sigma;
    if (grad != nullptr) {
        for (std::size_t l = 0; l < c.beta.size(); ++l) {
            grad->beta[l] += c.beta[l] / vb;
        }
        for (std::size_t l = 0; l < c.sigma.size(); ++l) {
            grad->sigma[l] += c.sigma[l] / vs;
        }
        grad->log_var_beta += 0.5 * nb - sb / (2.0 * vb);
        grad->log_var_sigma += 0.5 * ns - ss / (2.0 * vs);
    }
}

// Per-table-participant link terms for one channel.
struct ChannelLink {
    std::vector<double> scale;
    std::vector<double> shift;
    // accumulated d loss / d z and d loss / d z * x, per table participant
    std::vector<double> dz;
    std::vector<double> dz_x;
};

ChannelLink make_link(const ChannelEffects& c, std::size_t n_table_participants,
                      std::span<const std::ptrdiff_t> map) {
    ChannelLink link;
    link.scale.resize(n_table_participants);
    link.shift.resize(n_table_participants);
    link.dz.assign(n_table_participants, 0.0);
    link.dz_x.assign(n_table_participants, 0.0);
    for (std::size_t p = 0; p < n_table_participants; ++p) {
        std::optional<std::size_t> id;
        if (map.empty()) {
            id = p;
        } else if (map[p] >= 0) {
            id = static_cast<std::size_t>(map[p]);
        }
        link.scale[p] = c.scale(id);
        link.shift[p] = c.shift(id);
    }
    return link;
}

void scatter(const ChannelLink& link, std::span<const std::ptrdiff_t> map, ChannelEffects& grad) {
    for (std::size_t p = 0; p < link.dz.size(); ++p) {
        const double d_shift = link.dz[p];
        const double d_scale = link.dz_x[p] * link.scale[p];
        grad.beta0 += d_shift;
        grad.sigma0 += d_scale;
        std::ptrdiff_t id = map.empty() ? static_cast<std::ptrdiff_t>(p) : map[p];
        if (id >= 0) {
            grad.beta[static_cast<std::size_t>(id)] += d_shift;
            grad.sigma[static_cast<std::size_t>(id)] += d_scale;
        }
    }
}

ChannelEffects zeros_like(const ChannelEffects& c) {
    ChannelEffects z;
    z.beta0 = z.sigma0 = z.log_var_beta = z.log_var_sigma = 0.0;
    z.beta.assign(c.beta.size(), 0.0);
    z.sigma.assign(c.sigma.size(), 0.0);
    return z;
}

} // namespace

double ChannelEffects::scale(std::optional<std::size_t> participant) const {
    return std::exp(sigma0 + (participant ? sigma[*participant] : 0.0));
}

double ChannelEffects::shift(std::optional<std::size_t> participant) const {
    return beta0 + (participant ? beta[*participant] : 0.0);
}

EffectsParams EffectsParams::identity(std::size_t n_participants) {
    EffectsParams e;
    for (ChannelEffects* c : {&e.negraising, &e.acceptability}) {
        c->beta.assign(n_participants, 0.0);
        c->sigma.assign(n_participants, 0.0);
    }
    return e;
}

void EffectsParams::validate() const {
    const std::size_t n = negraising.beta.size();
    for (const ChannelEffects* c : {&negraising, &acceptability}) {
        if (c->beta.size() != n || c->sigma.size() != n) {
            throw DimensionError("random-effect vectors disagree on the number of participants");
        }
    }
}

double predict_channel(double x, const ChannelEffects& channel,
                       std::optional<std::size_t> participant) {
    if (participant) {
        checked(channel, *participant);
    }
    return logistic(channel.scale(participant) * x + channel.shift(participant));
}

double predict_negraising(double nu, const EffectsParams& effects, std::size_t participant) {
    return predict_channel(nu, effects.negraising, checked(effects.negraising, participant));
}

double predict_acceptability(double alpha, const EffectsParams& effects, std::size_t participant) {
    return predict_channel(alpha, effects.acceptability,
                           checked(effects.acceptability, participant));
}

double kl_loss(double r, double r_hat) {
    if (!(r > 0.0 && r < 1.0) || !(r_hat > 0.0 && r_hat < 1.0)) {
        throw DomainError("kl_loss arguments must lie strictly inside (0, 1)");
    }
    return r * std::log(r / r_hat) + (1.0 - r) * std::log((1.0 - r) / (1.0 - r_hat));
}

double kl_from_logit(double r, double z) {
    return entropy_term(r) + r * softplus(-z) + (1.0 - r) * softplus(z);
}

double clamped_logit(double p, double* derivative) {
    if (p < kProbabilityClamp || p > 1.0 - kProbabilityClamp) {
        if (derivative != nullptr) {
            *derivative = 0.0;
        }
        return logit(std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp));
    }
    if (derivative != nullptr) {
        *derivative = 1.0 / (p * (1.0 - p));
    }
    return logit(p);
}

LossBreakdown cell_loss(const ResponseTable& table, std::span<const double> nu,
                        const EffectsParams& effects, std::span<const double> alpha,
                        const LossOptions& options, std::span<const std::ptrdiff_t> participant_map,
                        LossGradient* gradient, std::vector<double>* per_cell) {
    const std::size_t n_cells = table.cells().size();
    const std::size_t n_table_participants = table.participants().size();
    effects.validate();
    if (nu.size() != n_cells) {
        throw ConsistencyError("expected " + std::to_string(n_cells) + " cell predictors, got " +
                               std::to_string(nu.size()));
    }
    if (options.acceptability_channel && alpha.size() != n_cells) {
        throw ConsistencyError("expected " + std::to_string(n_cells) +
                               " acceptability cells, got " + std::to_string(alpha.size()));
    }
    if (participant_map.empty()) {
        if (effects.n_participants() != n_table_participants) {
            throw ConsistencyError("effects cover " + std::to_string(effects.n_participants()) +
                                   " participants, table has " +
                                   std::to_string(n_table_participants));
        }
    } else if (participant_map.size() != n_table_participants) {
        throw ConsistencyError("participant map size does not match the table");
    } else {
        for (std::ptrdiff_t id : participant_map) {
            if (id >= static_cast<std::ptrdiff_t>(effects.n_participants())) {
                throw IndexError("participant map points outside the effects");
            }
        }
    }

    ChannelLink nr = make_link(effects.negraising, n_table_participants, participant_map);
    ChannelLink acc;
    if (options.acceptability_channel) {
        acc = make_link(effects.acceptability, n_table_participants, participant_map);
    }
    std::vector<double> weight(n_cells, 1.0);
    if (options.acceptability_channel) {
        std::transform(alpha.begin(), alpha.end(), weight.begin(), logistic);
    }

    if (gradient != nullptr) {
        gradient->nu.assign(n_cells, 0.0);
        gradient->alpha.assign(n_cells, 0.0);
        gradient->effects.negraising = zeros_like(effects.negraising);
        gradient->effects.acceptability = zeros_like(effects.acceptability);
    }
    if (per_cell != nullptr) {
        per_cell->assign(n_cells, 0.0);
    }

    LossBreakdown out;
    for (const Rating& r : table.ratings()) {
        const std::size_t c = r.cell;
        const std::size_t p = r.participant;
        const double z = nr.scale[p] * nu[c] + nr.shift[p];
        const double term = weight[c] * kl_from_logit(r.negraising, z);
        out.negraising += term;
        if (per_cell != nullptr) {
            (*per_cell)[c] += term;
        }
        if (gradient != nullptr) {
            const double dz = weight[c] * (logistic(z) - r.negraising);
            gradient->nu[c] += dz * nr.scale[p];
            nr.dz[p] += dz;
            nr.dz_x[p] += dz * nu[c];
        }
        if (options.acceptability_channel) {
            const double za = acc.scale[p] * alpha[c] + acc.shift[p];
            out.acceptability += kl_from_logit(r.acceptability, za);
            if (gradient != nullptr) {
                const double dz = logistic(za) - r.acceptability;
                gradient->alpha[c] += dz * acc.scale[p];
                acc.dz[p] += dz;
                acc.dz_x[p] += dz * alpha[c];
            }
        }
    }

    if (options.include_prior) {
        prior_terms(effects.negraising, out.prior,
                    gradient ? &gradient->effects.negraising : nullptr);
        if (options.acceptability_channel) {
            prior_terms(effects.acceptability, out.prior,
                        gradient ? &gradient->effects.acceptability : nullptr);
        }
    }
    if (gradient != nullptr) {
        scatter(nr, participant_map, gradient->effects.negraising);
        if (options.acceptability_channel) {
            scatter(acc, participant_map, gradient->effects.acceptability);
        }
    }
    out.total = out.negraising + out.acceptability + out.prior;
    return out;
}

std::vector<double> cell_predictors(const ResponseTable& table, const FactorProbabilities& probs) {
    std::vector<double> nu;
    nu.reserve(table.cells().size());
    for (const CellKey& cell : table.cells()) {
        nu.push_back(clamped_logit(
            forward_negraising(probs, cell.verb, cell.frame, cell.subject, cell.tense)));
    }
    return nu;
}

LossBreakdown total_loss(const ResponseTable& table, const FactorParams& factors,
                         const EffectsParams& effects, const AcceptabilityCells& cells,
                         const LossOptions& options) {
    if (options.acceptability_channel && cells.alpha.size() != table.cells().size()) {
        throw ConsistencyError("acceptability cells hold " + std::to_string(cells.alpha.size()) +
                               " entries for " + std::to_string(table.cells().size()) +
                               " observed cells");
    }
    if (factors.n_verbs != table.verbs().size() || factors.n_frames != table.frames().size()) {
        throw ConsistencyError("factor shapes do not match the table's verb and frame indexes");
    }
    const auto probs = FactorProbabilities::from_params(factors);
    const auto nu = cell_predictors(table, probs);
    return cell_loss(table, nu, effects, cells.alpha, options);
}

} // namespace negfactor
