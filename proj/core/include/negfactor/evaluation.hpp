#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "negfactor/dataset.hpp"
#include "negfactor/factorization.hpp"
#include "negfactor/optim.hpp"

namespace negfactor {

// Sentence-level (cell-level) fold assignment.
struct FoldAssignment {
    static constexpr int kPinned = -1;

    // Per table cell; kPinned cells are in training for every fold.
    std::vector<int> fold_of;
    std::size_t n_folds = 5;
    std::uint64_t seed = 0;
    std::size_t swaps = 0;

    std::vector<std::size_t> held_out(std::size_t fold) const;
    std::vector<std::size_t> training(std::size_t fold) const;
    std::vector<std::size_t> pinned() const;

    friend bool operator==(const FoldAssignment&, const FoldAssignment&) = default;
};

inline constexpr std::size_t kMaxRepairSwaps = 10000;

// Balanced shuffled assignment, repaired by swaps so that every fold's
// training portion keeps at least one sentence of each (verb, frame) pair.
// A pair with a single sentence has it pinned to training (warning written
// to `log`); pairs still violated after kMaxRepairSwaps swaps get one
// sentence pinned the same way.
FoldAssignment assign_folds(const ResponseTable& table, std::uint64_t seed,
                            std::size_t n_folds = 5, std::ostream* log = nullptr);

// Human-readable violations of the partition and training coverage rules;
// empty when the assignment is valid for `table`.
std::vector<std::string> check_folds(const ResponseTable& table, const FoldAssignment& folds);

struct GridResult {
    Hyperparams hyper;
    std::vector<double> fold_losses; // NaN for a failed fold
    std::vector<std::string> fold_errors; // empty string when the fold fit
    double total = 0.0;               // NaN when any fold failed
    // Held-out loss per table cell; NaN for pinned cells and failed folds.
    std::vector<double> sentence_losses;

    bool failed() const;
};

struct ComparisonRecord {
    Hyperparams a;
    Hyperparams b;
    double mean_difference = 0.0; // mean over sentences of loss(a) - loss(b)
    double lower = 0.0;
    double upper = 0.0;
    bool reliable = false;
    std::size_t n_boot = 0;
    std::uint64_t seed = 0;
};

struct EvalReport {
    std::vector<SentenceLabel> sentences; // table cell order
    FoldAssignment folds;
    std::vector<GridResult> results;
    // Grid points by total held-out loss, failed points last.
    std::vector<Hyperparams> ranking;
    std::vector<ComparisonRecord> comparisons;

    const GridResult& result(Hyperparams hyper) const; // IndexError if absent

    std::string to_json() const;
    static EvalReport from_json(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static EvalReport load(const std::filesystem::path& path);
};

struct CvConfig {
    FitConfig fit;
    std::size_t n_folds = 5;
    std::uint64_t fold_seed = 0;
    // Concurrent fits; results do not depend on it.
    std::size_t threads = 1;
    std::ostream* log = nullptr;
};

// Fits every grid point on each fold's training portion and records the
// weighted held-out loss per sentence. Fit failures are recorded, not thrown.
EvalReport cross_validate(const ResponseTable& table, std::span<const Hyperparams> grid,
                          const CvConfig& config);

inline constexpr std::size_t kDefaultBootstrapReplicates = 10000;

// Percentile interval for the mean paired difference a - b, resampling
// sentences with replacement. Throws PairingError on length mismatch or
// empty input.
ComparisonRecord bootstrap_compare(std::span<const double> losses_a,
                                   std::span<const double> losses_b,
                                   std::size_t n_boot = kDefaultBootstrapReplicates,
                                   std::uint64_t seed = 0, double level = 0.95);

// Pairs the two grid points by sentence. Throws PairingError when a sentence
// has a held-out loss under one model but not the other.
ComparisonRecord bootstrap_compare(const EvalReport& report, Hyperparams a, Hyperparams b,
                                   std::size_t n_boot = kDefaultBootstrapReplicates,
                                   std::uint64_t seed = 0);

// Pairwise comparisons among the `top` best-ranked successful grid points.
std::vector<ComparisonRecord> compare_top(const EvalReport& report, std::size_t top = 3,
                                          std::size_t n_boot = kDefaultBootstrapReplicates,
                                          std::uint64_t seed = 0);

} // namespace negfactor
