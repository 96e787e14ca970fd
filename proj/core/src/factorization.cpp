#include "negfactor/factorization.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>

#include "negfactor/stats.hpp"

namespace negfactor {

namespace {

constexpr std::size_t kJK = kNumSubjects * kNumTenses;
constexpr double kEmbedLogit = 40.0;

void check_cell(const FactorProbabilities& p, std::size_t v, std::size_t f, std::size_t j,
                std::size_t k) {
    if (v >= p.n_verbs || f >= p.n_frames || j >= kNumSubjects || k >= kNumTenses) {
        throw IndexError("cell (" + std::to_string(v) + ", " + std::to_string(f) + ", " +
                         std::to_string(j) + ", " + std::to_string(k) + ") out of range");
    }
}

void check_length(const std::vector<double>& v, std::size_t expected, const char* name) {
    if (v.size() != expected) {
        throw DimensionError(std::string(name) + " has " + std::to_string(v.size()) +
                             " entries, expected " + std::to_string(expected));
    }
}

std::vector<double> transform(const std::vector<double>& logits, std::size_t frozen_size) {
    if (logits.empty()) {
        return std::vector<double>(frozen_size, 1.0);
    }
    std::vector<double> out(logits.size());
    std::transform(logits.begin(), logits.end(), out.begin(), logistic);
    return out;
}

} // namespace

void Hyperparams::validate() const {
    if (n_lexical < 0 || n_lexical > kMax || n_structural < 0 || n_structural > kMax) {
        throw DimensionError("hyperparameters " + label() + " outside 0.." +
                             std::to_string(kMax));
    }
    if (n_lexical == 0 && n_structural == 0) {
        throw DimensionError("hyperparameters 0,0 are not a model");
    }
}

std::string Hyperparams::label() const {
    return std::to_string(n_lexical) + "," + std::to_string(n_structural);
}

Hyperparams Hyperparams::parse(std::string_view label) {
    const auto comma = label.find(',');
    if (comma == std::string_view::npos) {
        throw SchemaError("hyperparameters must look like I,T; got '" + std::string(label) + "'");
    }
    auto parse_int = [&](std::string_view s) {
        int value = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
        if (ec != std::errc() || ptr != s.data() + s.size()) {
            throw SchemaError("bad hyperparameter '" + std::string(label) + "'");
        }
        return value;
    };
    Hyperparams h{parse_int(label.substr(0, comma)), parse_int(label.substr(comma + 1))};
    h.validate();
    return h;
}

std::vector<Hyperparams> full_grid() {
    std::vector<Hyperparams> grid;
    for (int i = 0; i <= Hyperparams::kMax; ++i) {
        for (int t = 0; t <= Hyperparams::kMax; ++t) {
            if (i != 0 || t != 0) {
                grid.push_back({i, t});
            }
        }
    }
    return grid;
}

FactorParams FactorParams::zeros(std::size_t n_verbs, std::size_t n_frames, Hyperparams hyper) {
    hyper.validate();
    FactorParams p;
    p.n_verbs = n_verbs;
    p.n_frames = n_frames;
    p.hyper = hyper;
    const std::size_t I = p.n_lexical();
    const std::size_t T = p.n_structural();
    p.lambda.assign(n_verbs * T, 0.0);
    p.pi.assign(T * n_frames, 0.0);
    p.psi.assign(n_verbs * I, 0.0);
    p.phi.assign(I * kJK, 0.0);
    p.omega.assign(T * kJK, 0.0);
    return p;
}

void FactorParams::validate_shape() const {
    hyper.validate();
    const std::size_t I = n_lexical();
    const std::size_t T = n_structural();
    check_length(lambda, n_verbs * T, "lambda");
    check_length(pi, T * n_frames, "pi");
    check_length(psi, n_verbs * I, "psi");
    check_length(phi, I * kJK, "phi");
    check_length(omega, T * kJK, "omega");
}

FactorProbabilities FactorProbabilities::from_params(const FactorParams& params) {
    params.validate_shape();
    FactorProbabilities p;
    p.n_verbs = params.n_verbs;
    p.n_frames = params.n_frames;
    p.n_lexical = std::max<std::size_t>(params.n_lexical(), 1);
    p.n_structural = std::max<std::size_t>(params.n_structural(), 1);
    p.lambda = transform(params.lambda, p.n_verbs);
    p.pi = transform(params.pi, p.n_frames);
    p.psi = transform(params.psi, p.n_verbs);
    p.phi = transform(params.phi, kJK);
    p.omega = transform(params.omega, kJK);
    return p;
}

FactorProbabilities FactorProbabilities::constant(std::size_t n_verbs, std::size_t n_frames,
                                                  Hyperparams hyper, double value) {
    hyper.validate();
    FactorProbabilities p;
    p.n_verbs = n_verbs;
    p.n_frames = n_frames;
    p.n_lexical = std::max(hyper.n_lexical, 1);
    p.n_structural = std::max(hyper.n_structural, 1);
    const double lex = hyper.n_lexical == 0 ? 1.0 : value;
    const double str = hyper.n_structural == 0 ? 1.0 : value;
    p.lambda.assign(n_verbs * p.n_structural, str);
    p.pi.assign(p.n_structural * n_frames, str);
    p.omega.assign(p.n_structural * kJK, str);
    p.psi.assign(n_verbs * p.n_lexical, lex);
    p.phi.assign(p.n_lexical * kJK, lex);
    return p;
}

void FactorProbabilities::validate() const {
    if (n_lexical == 0 || n_structural == 0) {
        throw DimensionError("effective factor dimensions must be positive");
    }
    check_length(lambda, n_verbs * n_structural, "lambda");
    check_length(pi, n_structural * n_frames, "pi");
    check_length(psi, n_verbs * n_lexical, "psi");
    check_length(phi, n_lexical * kJK, "phi");
    check_length(omega, n_structural * kJK, "omega");
    for (const auto* v : {&lambda, &pi, &psi, &phi, &omega}) {
        for (double x : *v) {
            if (!(x >= 0.0 && x <= 1.0)) {
                throw DimensionError("factor probability outside [0, 1]");
            }
        }
    }
}

double forward_selection(const FactorProbabilities& p, std::size_t v, std::size_t f) {
    check_cell(p, v, f, 0, 0);
    double log_none = 0.0;
    for (std::size_t t = 0; t < p.n_structural; ++t) {
        log_none += std::log1p(-p.lambda_at(v, t) * p.pi_at(t, f));
    }
    return -std::expm1(log_none);
}

double forward_selection(const FactorParams& params, std::size_t v, std::size_t f) {
    return forward_selection(FactorProbabilities::from_params(params), v, f);
}

double forward_negraising(const FactorProbabilities& p, std::size_t v, std::size_t f,
                          std::size_t j, std::size_t k) {
    check_cell(p, v, f, j, k);
    double log_none = 0.0;
    for (std::size_t t = 0; t < p.n_structural; ++t) {
        const double structural = p.lambda_at(v, t) * p.pi_at(t, f) * p.omega_at(t, j, k);
        for (std::size_t i = 0; i < p.n_lexical; ++i) {
            const double zeta = structural * p.psi_at(v, i) * p.phi_at(i, j, k);
            log_none += std::log1p(-zeta);
        }
    }
    return -std::expm1(log_none);
}

double forward_negraising(const FactorParams& params, std::size_t v, std::size_t f,
                          std::size_t j, std::size_t k) {
    return forward_negraising(FactorProbabilities::from_params(params), v, f, j, k);
}

double enumeration_oracle(const FactorProbabilities& p, std::size_t v, std::size_t f,
                          std::size_t j, std::size_t k) {
    check_cell(p, v, f, j, k);
    const std::size_t terms = p.n_structural * p.n_lexical;
    if (terms > kMaxEnumerationTerms) {
        throw CapacityError("enumeration over " + std::to_string(terms) +
                            " conjuncts exceeds the limit of " +
                            std::to_string(kMaxEnumerationTerms));
    }
    // Probability that each conjunct holds, by summing the weights of the
    // 32 assignments to its five variables in which all five are true.
    std::vector<double> conjunct(terms);
    for (std::size_t t = 0; t < p.n_structural; ++t) {
        for (std::size_t i = 0; i < p.n_lexical; ++i) {
            const std::array<double, 5> q = {p.lambda_at(v, t), p.psi_at(v, i),
                                             p.phi_at(i, j, k), p.pi_at(t, f),
                                             p.omega_at(t, j, k)};
            double holds = 0.0;
            for (unsigned world = 0; world < 32u; ++world) {
                double weight = 1.0;
                for (std::size_t b = 0; b < 5; ++b) {
                    weight *= (world >> b) & 1u ? q[b] : 1.0 - q[b];
                }
                if (world == 31u) {
                    holds += weight;
                }
            }
            conjunct[t * p.n_lexical + i] = holds;
        }
    }
    // Sum over patterns of conjunct truth values with at least one true.
    double total = 0.0;
    const std::size_t patterns = std::size_t{1} << terms;
    for (std::size_t pattern = 1; pattern < patterns; ++pattern) {
        double weight = 1.0;
        for (std::size_t c = 0; c < terms; ++c) {
            weight *= (pattern >> c) & 1u ? conjunct[c] : 1.0 - conjunct[c];
        }
        total += weight;
    }
    return total;
}

double enumeration_oracle(const FactorParams& params, std::size_t v, std::size_t f,
                          std::size_t j, std::size_t k) {
    return enumeration_oracle(FactorProbabilities::from_params(params), v, f, j, k);
}

void forward_negraising_terms(const FactorProbabilities& p, std::size_t v, std::size_t f,
                              std::size_t j, std::size_t k, ForwardTerms& out) {
    const std::size_t T = p.n_structural;
    const std::size_t I = p.n_lexical;
    const std::size_t n = T * I;
    out.zeta.resize(n);
    out.dprob_dzeta.resize(n);
    double log_none = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        const double structural = p.lambda_at(v, t) * p.pi_at(t, f) * p.omega_at(t, j, k);
        for (std::size_t i = 0; i < I; ++i) {
            const double zeta = structural * p.psi_at(v, i) * p.phi_at(i, j, k);
            out.zeta[t * I + i] = zeta;
            log_none += std::log1p(-zeta);
        }
    }
    out.probability = -std::expm1(log_none);
    // leave-one-out products of (1 - zeta) via prefix/suffix sweeps, so a
    // saturated zeta == 1 never divides by zero
    double prefix = 1.0;
    for (std::size_t c = 0; c < n; ++c) {
        out.dprob_dzeta[c] = prefix;
        prefix *= 1.0 - out.zeta[c];
    }
    double suffix = 1.0;
    for (std::size_t c = n; c-- > 0;) {
        out.dprob_dzeta[c] *= suffix;
        suffix *= 1.0 - out.zeta[c];
    }
}

FactorParams embed(const FactorParams& params, Hyperparams target) {
    params.validate_shape();
    target.validate();
    const std::size_t I0 = params.n_lexical();
    const std::size_t T0 = params.n_structural();
    const auto I1 = static_cast<std::size_t>(target.n_lexical);
    const auto T1 = static_cast<std::size_t>(target.n_structural);
    if (I1 < I0 || T1 < T0) {
        throw DimensionError("cannot embed " + params.hyper.label() + " into smaller " +
                             target.label());
    }
    FactorParams out = FactorParams::zeros(params.n_verbs, params.n_frames, target);
    const std::size_t V = params.n_verbs;
    const std::size_t F = params.n_frames;

    for (std::size_t t = 0; t < T1; ++t) {
        const bool copied = t < T0;
        const bool saturated = T0 == 0 && t == 0;
        for (std::size_t v = 0; v < V; ++v) {
            out.lambda[v * T1 + t] = copied      ? params.lambda[v * T0 + t]
                                     : saturated ? kEmbedLogit
                                                 : -kEmbedLogit;
        }
        for (std::size_t f = 0; f < F; ++f) {
            out.pi[t * F + f] = copied ? params.pi[t * F + f] : saturated ? kEmbedLogit : 0.0;
        }
        for (std::size_t jk = 0; jk < kJK; ++jk) {
            out.omega[t * kJK + jk] =
                copied ? params.omega[t * kJK + jk] : saturated ? kEmbedLogit : 0.0;
        }
    }
    for (std::size_t i = 0; i < I1; ++i) {
        const bool copied = i < I0;
        const bool saturated = I0 == 0 && i == 0;
        for (std::size_t v = 0; v < V; ++v) {
            out.psi[v * I1 + i] = copied      ? params.psi[v * I0 + i]
                                  : saturated ? kEmbedLogit
                                              : -kEmbedLogit;
        }
        for (std::size_t jk = 0; jk < kJK; ++jk) {
            out.phi[i * kJK + jk] = copied ? params.phi[i * kJK + jk] : saturated ? kEmbedLogit : 0.0;
        }
    }
    return out;
}

} // namespace negfactor
