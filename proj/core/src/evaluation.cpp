#include "negfactor/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "negfactor/stats.hpp"

namespace negfactor {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Cells grouped by (verb, frame), in table order.
std::vector<std::vector<std::size_t>> verb_frame_groups(const ResponseTable& table,
                                                        std::vector<std::size_t>* group_of) {
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> ids;
    std::vector<std::vector<std::size_t>> groups;
    if (group_of != nullptr) {
        group_of->resize(table.cells().size());
    }
    for (std::size_t c = 0; c < table.cells().size(); ++c) {
        const auto& key = table.cells()[c];
        auto [it, added] = ids.try_emplace({key.verb, key.frame}, groups.size());
        if (added) {
            groups.emplace_back();
        }
        groups[it->second].push_back(c);
        if (group_of != nullptr) {
            (*group_of)[c] = it->second;
        }
    }
    return groups;
}

// Fold that holds every sentence of the group, or -1 if the training side
// of every fold keeps one.
int violated_fold(const std::vector<std::size_t>& group, const std::vector<int>& fold_of) {
    const int first = fold_of[group.front()];
    if (first == FoldAssignment::kPinned) {
        return -1;
    }
    for (std::size_t c : group) {
        if (fold_of[c] != first) {
            return -1;
        }
    }
    return first;
}

std::string describe(const ResponseTable& table, const std::vector<std::size_t>& group) {
    const auto& key = table.cells()[group.front()];
    return "(" + table.verbs().key(key.verb) + ", " +
           std::string(to_string(table.frames().key(key.frame))) + ")";
}

json number(double x) {
    if (!std::isfinite(x)) {
        return nullptr;
    }
    return x;
}

double read_number(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

json numbers(const std::vector<double>& xs) {
    json out = json::array();
    for (double x : xs) {
        out.push_back(number(x));
    }
    return out;
}

std::vector<double> read_numbers(const json& j) {
    std::vector<double> out;
    for (const auto& x : j) {
        out.push_back(read_number(x));
    }
    return out;
}

json comparison_json(const ComparisonRecord& c) {
    return json{{"a", c.a.label()},
                {"b", c.b.label()},
                {"mean_difference", number(c.mean_difference)},
                {"lower", number(c.lower)},
                {"upper", number(c.upper)},
                {"reliable", c.reliable},
                {"n_boot", c.n_boot},
                {"seed", c.seed}};
}

ComparisonRecord read_comparison(const json& j) {
    ComparisonRecord c;
    c.a = Hyperparams::parse(j.at("a").get<std::string>());
    c.b = Hyperparams::parse(j.at("b").get<std::string>());
    c.mean_difference = read_number(j.at("mean_difference"));
    c.lower = read_number(j.at("lower"));
    c.upper = read_number(j.at("upper"));
    c.reliable = j.at("reliable").get<bool>();
    c.n_boot = j.at("n_boot").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

std::vector<std::size_t> cells_where(const std::vector<int>& fold_of, auto&& keep) {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < fold_of.size(); ++c) {
        if (keep(fold_of[c])) {
            out.push_back(c);
        }
    }
    return out;
}

} // namespace

std::vector<std::size_t> FoldAssignment::held_out(std::size_t fold) const {
    return cells_where(fold_of, [&](int f) { return f == static_cast<int>(fold); });
}

std::vector<std::size_t> FoldAssignment::training(std::size_t fold) const {
    return cells_where(fold_of, [&](int f) { return f != static_cast<int>(fold); });
}

std::vector<std::size_t> FoldAssignment::pinned() const {
    return cells_where(fold_of, [](int f) { return f == kPinned; });
}

FoldAssignment assign_folds(const ResponseTable& table, std::uint64_t seed, std::size_t n_folds,
                            std::ostream* log) {
    if (n_folds < 2) {
        throw DomainError("cross-validation needs at least two folds");
    }
    FoldAssignment out;
    out.n_folds = n_folds;
    out.seed = seed;
    out.fold_of.assign(table.cells().size(), FoldAssignment::kPinned);

    std::vector<std::size_t> group_of;
    const auto groups = verb_frame_groups(table, &group_of);
    std::vector<std::size_t> free_cells;
    for (const auto& g : groups) {
        if (g.size() == 1) {
            if (log != nullptr) {
                *log << "warning: " << describe(table, g)
                     << " has a single sentence; kept in training for every fold\n";
            }
            continue;
        }
        free_cells.insert(free_cells.end(), g.begin(), g.end());
    }

    std::mt19937_64 rng(seed);
    std::shuffle(free_cells.begin(), free_cells.end(), rng);
    for (std::size_t n = 0; n < free_cells.size(); ++n) {
        out.fold_of[free_cells[n]] = static_cast<int>(n % n_folds);
    }

    auto violated = [&]() {
        std::vector<std::size_t> v;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            if (violated_fold(groups[g], out.fold_of) >= 0) {
                v.push_back(g);
            }
        }
        return v;
    };
    auto bad = violated();
    std::size_t attempts = 0;
    while (!bad.empty() && attempts < kMaxRepairSwaps && free_cells.size() > 1) {
        ++attempts;
        const auto& g = groups[bad[std::uniform_int_distribution<std::size_t>(0, bad.size() - 1)(rng)]];
        const std::size_t c = g[std::uniform_int_distribution<std::size_t>(0, g.size() - 1)(rng)];
        const std::size_t d =
            free_cells[std::uniform_int_distribution<std::size_t>(0, free_cells.size() - 1)(rng)];
        if (out.fold_of[d] == out.fold_of[c] || group_of[d] == group_of[c]) {
            continue;
        }
        std::swap(out.fold_of[c], out.fold_of[d]);
        if (violated_fold(groups[group_of[d]], out.fold_of) >= 0) {
            std::swap(out.fold_of[c], out.fold_of[d]);
            continue;
        }
        ++out.swaps;
        bad = violated();
    }
    for (std::size_t g : bad) {
        if (log != nullptr) {
            *log << "warning: could not spread " << describe(table, groups[g])
                 << " across folds; one sentence kept in training for every fold\n";
        }
        out.fold_of[groups[g].front()] = FoldAssignment::kPinned;
    }
    return out;
}

std::vector<std::string> check_folds(const ResponseTable& table, const FoldAssignment& folds) {
    std::vector<std::string> problems;
    if (folds.fold_of.size() != table.cells().size()) {
        problems.push_back("assignment covers " + std::to_string(folds.fold_of.size()) +
                           " sentences, table has " + std::to_string(table.cells().size()));
        return problems;
    }
    for (std::size_t c = 0; c < folds.fold_of.size(); ++c) {
        const int f = folds.fold_of[c];
        if (f != FoldAssignment::kPinned && (f < 0 || f >= static_cast<int>(folds.n_folds))) {
            problems.push_back("sentence " + std::to_string(c) + " has invalid fold " +
                               std::to_string(f));
        }
    }
    for (const auto& g : verb_frame_groups(table, nullptr)) {
        const int f = violated_fold(g, folds.fold_of);
        if (f >= 0) {
            problems.push_back("fold " + std::to_string(f) + " training portion lacks " +
                               describe(table, g));
        }
    }
    return problems;
}

bool GridResult::failed() const {
    return std::any_of(fold_errors.begin(), fold_errors.end(),
                       [](const std::string& e) { return !e.empty(); });
}

const GridResult& EvalReport::result(Hyperparams hyper) const {
    for (const auto& r : results) {
        if (r.hyper == hyper) {
            return r;
        }
    }
    throw IndexError("report has no grid point " + hyper.label());
}

EvalReport cross_validate(const ResponseTable& table, std::span<const Hyperparams> grid,
                          const CvConfig& config) {
    config.fit.validate();
    if (grid.empty()) {
        throw DomainError("empty hyperparameter grid");
    }
    for (const auto& h : grid) {
        h.validate();
    }
    EvalReport report;
    report.sentences = sentence_labels(table);
    report.folds = assign_folds(table, config.fold_seed, config.n_folds, config.log);

    const std::size_t n_folds = config.n_folds;
    std::vector<ResponseTable> train(n_folds), held(n_folds);
    std::vector<std::vector<std::size_t>> held_ids(n_folds);
    for (std::size_t k = 0; k < n_folds; ++k) {
        held_ids[k] = report.folds.held_out(k);
        train[k] = table.subset(report.folds.training(k));
        held[k] = table.subset(held_ids[k]);
    }

    struct Job {
        std::vector<double> cell_losses;
        std::string error;
    };
    const std::size_t n_jobs = grid.size() * n_folds;
    std::vector<Job> jobs(n_jobs);
    std::mutex log_mutex;
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t n = next++; n < n_jobs; n = next++) {
            const Hyperparams hyper = grid[n / n_folds];
            const std::size_t k = n % n_folds;
            try {
                const auto result = fit(train[k], hyper, config.fit);
                jobs[n].cell_losses = evaluate_cells(result.model, held[k]);
            } catch (const Error& e) {
                jobs[n].error = e.what();
            }
            if (config.log != nullptr) {
                std::lock_guard lock(log_mutex);
                *config.log << "grid " << hyper.label() << " fold " << k << ": "
                            << (jobs[n].error.empty() ? "ok" : "failed: " + jobs[n].error)
                            << '\n';
            }
        }
    };
    const std::size_t n_threads = std::clamp<std::size_t>(config.threads, 1, n_jobs);
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }

    for (std::size_t g = 0; g < grid.size(); ++g) {
        GridResult r;
        r.hyper = grid[g];
        r.sentence_losses.assign(table.cells().size(), kNaN);
        r.total = 0.0;
        for (std::size_t k = 0; k < n_folds; ++k) {
            const Job& job = jobs[g * n_folds + k];
            r.fold_errors.push_back(job.error);
            if (!job.error.empty()) {
                r.fold_losses.push_back(kNaN);
                r.total = kNaN;
                continue;
            }
            double fold_loss = 0.0;
            for (std::size_t n = 0; n < held_ids[k].size(); ++n) {
                r.sentence_losses[held_ids[k][n]] = job.cell_losses[n];
                fold_loss += job.cell_losses[n];
            }
            r.fold_losses.push_back(fold_loss);
            r.total += fold_loss;
        }
        report.results.push_back(std::move(r));
    }

    std::vector<std::size_t> order(report.results.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        const auto& a = report.results[x];
        const auto& b = report.results[y];
        if (a.failed() != b.failed()) {
            return !a.failed();
        }
        if (a.failed()) {
            return false;
        }
        return a.total < b.total;
    });
    for (std::size_t i : order) {
        report.ranking.push_back(report.results[i].hyper);
    }
    return report;
}

ComparisonRecord bootstrap_compare(std::span<const double> losses_a,
                                   std::span<const double> losses_b, std::size_t n_boot,
                                   std::uint64_t seed, double level) {
    if (losses_a.size() != losses_b.size()) {
        throw PairingError("paired comparison needs equal numbers of sentences (" +
                           std::to_string(losses_a.size()) + " vs " +
                           std::to_string(losses_b.size()) + ")");
    }
    if (losses_a.empty()) {
        throw PairingError("no sentences to compare");
    }
    if (n_boot == 0) {
        throw DomainError("n_boot must be positive");
    }
    if (!(level > 0.0 && level < 1.0)) {
        throw DomainError("confidence level must lie in (0, 1)");
    }
    const std::size_t n = losses_a.size();
    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i) {
        diff[i] = losses_a[i] - losses_b[i];
    }

    ComparisonRecord out;
    out.n_boot = n_boot;
    out.seed = seed;
    out.mean_difference = std::accumulate(diff.begin(), diff.end(), 0.0) / static_cast<double>(n);

    std::vector<double> means(n_boot), negated(n_boot);
    for (std::size_t b = 0; b < n_boot; ++b) {
        std::mt19937_64 rng(derive_seed(seed, b));
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sum += diff[pick(rng)];
        }
        means[b] = sum / static_cast<double>(n);
        negated[b] = -means[b];
    }
    // both ends from the lower tail so that swapping a and b mirrors exactly
    const double tail = (1.0 - level) / 2.0;
    std::sort(means.begin(), means.end());
    std::sort(negated.begin(), negated.end());
    out.lower = sorted_quantile(means, tail);
    out.upper = 0.0 - sorted_quantile(negated, tail); // no negative zero
    out.reliable = out.lower > 0.0 || out.upper < 0.0;
    return out;
}

ComparisonRecord bootstrap_compare(const EvalReport& report, Hyperparams a, Hyperparams b,
                                   std::size_t n_boot, std::uint64_t seed) {
    const auto& ra = report.result(a);
    const auto& rb = report.result(b);
    if (ra.sentence_losses.size() != rb.sentence_losses.size()) {
        throw PairingError("grid points " + a.label() + " and " + b.label() +
                           " cover different sentence sets");
    }
    std::vector<double> xa, xb;
    for (std::size_t c = 0; c < ra.sentence_losses.size(); ++c) {
        const bool has_a = std::isfinite(ra.sentence_losses[c]);
        const bool has_b = std::isfinite(rb.sentence_losses[c]);
        if (has_a != has_b) {
            throw PairingError("sentence " + std::to_string(c) + " has a held-out loss under " +
                               (has_a ? a : b).label() + " but not under " +
                               (has_a ? b : a).label());
        }
        if (has_a) {
            xa.push_back(ra.sentence_losses[c]);
            xb.push_back(rb.sentence_losses[c]);
        }
    }
    auto out = bootstrap_compare(xa, xb, n_boot, seed);
    out.a = a;
    out.b = b;
    return out;
}

std::vector<ComparisonRecord> compare_top(const EvalReport& report, std::size_t top,
                                          std::size_t n_boot, std::uint64_t seed) {
    std::vector<Hyperparams> best;
    for (const auto& h : report.ranking) {
        if (best.size() < top && !report.result(h).failed()) {
            best.push_back(h);
        }
    }
    std::vector<ComparisonRecord> out;
    for (std::size_t i = 0; i < best.size(); ++i) {
        for (std::size_t j = i + 1; j < best.size(); ++j) {
            out.push_back(bootstrap_compare(report, best[i], best[j], n_boot, seed));
        }
    }
    return out;
}

std::string EvalReport::to_json() const {
    json j;
    j["format"] = "negfactor-cv-report";
    j["version"] = 1;
    json sentences_json = json::array();
    for (const auto& s : sentences) {
        sentences_json.push_back({s.verb, std::string(to_string(s.frame)),
                                  std::string(to_string(s.subject)),
                                  std::string(to_string(s.tense))});
    }
    j["sentences"] = sentences_json;
    j["folds"] = {{"n_folds", folds.n_folds},
                  {"seed", folds.seed},
                  {"swaps", folds.swaps},
                  {"fold_of", folds.fold_of}};
    json results_json = json::array();
    for (const auto& r : results) {
        results_json.push_back({{"n_lexical", r.hyper.n_lexical},
                                {"n_structural", r.hyper.n_structural},
                                {"total", number(r.total)},
                                {"fold_losses", numbers(r.fold_losses)},
                                {"fold_errors", r.fold_errors},
                                {"sentence_losses", numbers(r.sentence_losses)}});
    }
    j["results"] = results_json;
    json ranking_json = json::array();
    for (const auto& h : ranking) {
        ranking_json.push_back(h.label());
    }
    j["ranking"] = ranking_json;
    json comparisons_json = json::array();
    for (const auto& c : comparisons) {
        comparisons_json.push_back(comparison_json(c));
    }
    j["comparisons"] = comparisons_json;
    return j.dump(1) + "\n";
}

EvalReport EvalReport::from_json(std::string_view text) {
    EvalReport report;
    try {
        const json j = json::parse(text);
        if (j.at("format").get<std::string>() != "negfactor-cv-report") {
            throw SchemaError("not a cross-validation report");
        }
        for (const auto& s : j.at("sentences")) {
            const auto fields = s.get<std::vector<std::string>>();
            if (fields.size() != 4) {
                throw SchemaError("sentence entries must have four fields");
            }
            const auto frame = parse_frame(fields[1]);
            const auto subject = parse_subject(fields[2]);
            const auto tense = parse_tense(fields[3]);
            if (!frame || !subject || !tense) {
                throw SchemaError("unrecognized sentence labels in report");
            }
            report.sentences.push_back({fields[0], *frame, *subject, *tense});
        }
        const auto& folds = j.at("folds");
        report.folds.n_folds = folds.at("n_folds").get<std::size_t>();
        report.folds.seed = folds.at("seed").get<std::uint64_t>();
        report.folds.swaps = folds.at("swaps").get<std::size_t>();
        report.folds.fold_of = folds.at("fold_of").get<std::vector<int>>();
        for (const auto& r : j.at("results")) {
            GridResult g;
            g.hyper = {r.at("n_lexical").get<int>(), r.at("n_structural").get<int>()};
            g.total = read_number(r.at("total"));
            g.fold_losses = read_numbers(r.at("fold_losses"));
            g.fold_errors = r.at("fold_errors").get<std::vector<std::string>>();
            g.sentence_losses = read_numbers(r.at("sentence_losses"));
            if (g.sentence_losses.size() != report.sentences.size()) {
                throw SchemaError("grid point " + g.hyper.label() +
                                  " does not cover every sentence");
            }
            report.results.push_back(std::move(g));
        }
        for (const auto& h : j.at("ranking")) {
            report.ranking.push_back(Hyperparams::parse(h.get<std::string>()));
        }
        for (const auto& c : j.at("comparisons")) {
            report.comparisons.push_back(read_comparison(c));
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed report JSON: ") + e.what());
    } catch (const DimensionError& e) {
        throw SchemaError(e.what());
    }
    return report;
}

void EvalReport::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << to_json();
}

EvalReport EvalReport::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_json(buffer.str());
}

} // namespace negfactor
