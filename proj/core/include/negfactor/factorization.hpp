#pragma once

#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "negfactor/dataset.hpp"

namespace negfactor {

// Number of lexical properties |I| and structural properties |T|.
// Zero on either side selects the corresponding boundary model.
struct Hyperparams {
    int n_lexical = 1;
    int n_structural = 1;

    static constexpr int kMax = 4;

    // Throws DimensionError unless both lie in 0..kMax and not both are 0.
    void validate() const;
    std::string label() const; // "I,T"
    static Hyperparams parse(std::string_view label);

    friend auto operator<=>(const Hyperparams&, const Hyperparams&) = default;
};

// Every (I, T) in {0..4}^2 except (0, 0), ordered by (I, T).
std::vector<Hyperparams> full_grid();

// Unconstrained logits for the five factor objects, row-major:
//   lambda V x T, pi T x F, psi V x I, phi I x 2 x 2, omega T x 2 x 2.
// A boundary side (I = 0 or T = 0) stores no logits; its factors are fixed
// to 1 and never optimized.
struct FactorParams {
    std::size_t n_verbs = 0;
    std::size_t n_frames = 0;
    Hyperparams hyper;

    std::vector<double> lambda;
    std::vector<double> pi;
    std::vector<double> psi;
    std::vector<double> phi;
    std::vector<double> omega;

    static FactorParams zeros(std::size_t n_verbs, std::size_t n_frames, Hyperparams hyper);

    std::size_t n_lexical() const { return static_cast<std::size_t>(hyper.n_lexical); }
    std::size_t n_structural() const { return static_cast<std::size_t>(hyper.n_structural); }

    // Throws DimensionError when a vector's length disagrees with the shape.
    void validate_shape() const;

    friend bool operator==(const FactorParams&, const FactorParams&) = default;
};

// Factor probabilities with boundary sides materialized as a single column
// of exact ones, so forward evaluation never special-cases boundary models.
struct FactorProbabilities {
    std::size_t n_verbs = 0;
    std::size_t n_frames = 0;
    std::size_t n_lexical = 1;    // effective |I|, at least 1
    std::size_t n_structural = 1; // effective |T|, at least 1

    std::vector<double> lambda; // V x T
    std::vector<double> pi;     // T x F
    std::vector<double> psi;    // V x I
    std::vector<double> phi;    // I x 2 x 2
    std::vector<double> omega;  // T x 2 x 2

    static FactorProbabilities from_params(const FactorParams& params);
    // Every entry set to `value`; shape as `hyper` (boundary sides still 1).
    static FactorProbabilities constant(std::size_t n_verbs, std::size_t n_frames,
                                        Hyperparams hyper, double value);

    double lambda_at(std::size_t v, std::size_t t) const { return lambda[v * n_structural + t]; }
    double pi_at(std::size_t t, std::size_t f) const { return pi[t * n_frames + f]; }
    double psi_at(std::size_t v, std::size_t i) const { return psi[v * n_lexical + i]; }
    double phi_at(std::size_t i, std::size_t j, std::size_t k) const {
        return phi[(i * kNumSubjects + j) * kNumTenses + k];
    }
    double omega_at(std::size_t t, std::size_t j, std::size_t k) const {
        return omega[(t * kNumSubjects + j) * kNumTenses + k];
    }

    // Throws DimensionError on inconsistent lengths or entries outside [0, 1].
    void validate() const;
};

// Probability that verb v is acceptable in frame f under the s-selection
// special case: 1 - prod_t (1 - P(lambda_vt) P(pi_tf)).
double forward_selection(const FactorProbabilities& probs, std::size_t v, std::size_t f);
double forward_selection(const FactorParams& params, std::size_t v, std::size_t f);

// P(n_vfjk) = 1 - prod_{t,i} (1 - zeta_vtifjk), with the product taken in
// log space.
double forward_negraising(const FactorProbabilities& probs, std::size_t v, std::size_t f,
                          std::size_t j, std::size_t k);
double forward_negraising(const FactorParams& params, std::size_t v, std::size_t f,
                          std::size_t j, std::size_t k);

inline constexpr std::size_t kMaxEnumerationTerms = 12;

// Exact probability of the disjunction over (t, i) of the conjunction
// lambda & psi & phi & pi & omega when each (t, i) conjunct draws its own
// independent Bernoulli variables. Sums explicitly over every boolean world:
// 2^5 assignments per conjunct, then 2^(T*I) patterns of conjunct truth
// values. Throws CapacityError when T*I exceeds kMaxEnumerationTerms.
double enumeration_oracle(const FactorProbabilities& probs, std::size_t v, std::size_t f,
                          std::size_t j, std::size_t k);
double enumeration_oracle(const FactorParams& params, std::size_t v, std::size_t f,
                          std::size_t j, std::size_t k);

// Per-cell pieces of the forward pass needed for differentiation.
struct ForwardTerms {
    double probability = 0.0;
    // zeta[t * I + i] and d P / d zeta_ti (the product of (1 - zeta) over
    // every other (t, i) pair).
    std::vector<double> zeta;
    std::vector<double> dprob_dzeta;
};

void forward_negraising_terms(const FactorProbabilities& probs, std::size_t v, std::size_t f,
                              std::size_t j, std::size_t k, ForwardTerms& out);

// Embeds `params` into the larger shape `target`: existing columns are
// copied, a boundary side becomes one column of saturated (+40) logits, and
// new structural or lexical columns are switched off through lambda or psi
// logits of -40. Forward values are unchanged up to ~1e-17.
FactorParams embed(const FactorParams& params, Hyperparams target);

} // namespace negfactor
