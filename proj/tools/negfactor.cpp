// negfactor command-line interface.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "negfactor/negfactor.hpp"

namespace nf = negfactor;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw nf::Error("cannot open " + path);
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

struct DataOptions {
    std::string path;
    std::vector<std::string> columns; // role=name
    bool skip_invalid = false;
    std::vector<std::string> drop;

    void add(CLI::App* cmd, bool positional) {
        if (positional) {
            cmd->add_option("path", path, "Judgment CSV")->required()->check(CLI::ExistingFile);
        } else {
            cmd->add_option("--data", path, "Judgment CSV")->required()->check(CLI::ExistingFile);
        }
        cmd->add_option("--col", columns, "Column override ROLE=NAME (roles: verb, frame, "
                                          "subject, tense, participant, negraising, "
                                          "acceptability)");
        cmd->add_flag("--skip-invalid", skip_invalid, "Skip and log bad rows instead of failing");
        cmd->add_option("--drop-participants", drop, "Participants to drop")->delimiter(',');
    }

    nf::ResponseTable load() const {
        nf::CsvSchema schema;
        for (const auto& spec : columns) {
            const auto eq = spec.find('=');
            if (eq == std::string::npos) {
                throw nf::SchemaError("--col expects ROLE=NAME, got '" + spec + "'");
            }
            const std::string role = spec.substr(0, eq), name = spec.substr(eq + 1);
            std::string* slot = role == "verb"            ? &schema.verb
                                : role == "frame"         ? &schema.frame
                                : role == "subject"       ? &schema.subject
                                : role == "tense"         ? &schema.tense
                                : role == "participant"   ? &schema.participant
                                : role == "negraising"    ? &schema.negraising
                                : role == "acceptability" ? &schema.acceptability
                                                          : nullptr;
            if (slot == nullptr) {
                throw nf::SchemaError("unknown column role '" + role + "'");
            }
            *slot = name;
        }
        nf::LoadOptions options;
        options.on_row_error =
            skip_invalid ? nf::RowErrorPolicy::Skip : nf::RowErrorPolicy::FailFast;
        options.drop_participants = drop;
        options.log = &std::cerr;
        nf::LoadStats stats;
        auto table = nf::load_csv(path, schema, options, &stats);
        if (stats.skipped_rows > 0 || stats.dropped_rows > 0) {
            std::cerr << "loaded " << table.size() << " of " << stats.data_rows << " rows ("
                      << stats.skipped_rows << " skipped, " << stats.dropped_rows
                      << " dropped)\n";
        }
        return table;
    }
};

struct ConfigOptions {
    std::string path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> restarts;
    std::optional<std::size_t> max_iterations;
    bool no_acceptability = false;

    void add(CLI::App* cmd) {
        cmd->add_option("--config", path, "Fit configuration JSON")->check(CLI::ExistingFile);
        cmd->add_option("--seed", seed, "Random seed (overrides the config)");
        cmd->add_option("--restarts", restarts, "Random restarts (overrides the config)");
        cmd->add_option("--max-iterations", max_iterations,
                        "Iteration cap (overrides the config)");
        cmd->add_flag("--no-acceptability", no_acceptability,
                      "Fit neg-raising responses only, unweighted");
    }

    nf::FitConfig get() const {
        auto config = path.empty() ? nf::FitConfig{} : nf::FitConfig::from_json(read_file(path));
        if (seed) {
            config.seed = *seed;
        }
        if (restarts) {
            config.restarts = *restarts;
        }
        if (max_iterations) {
            config.max_iterations = *max_iterations;
        }
        if (no_acceptability) {
            config.acceptability_channel = false;
        }
        config.validate();
        return config;
    }
};

std::vector<nf::Hyperparams> parse_grid(const std::string& text) {
    if (text == "all") {
        return nf::full_grid();
    }
    std::vector<nf::Hyperparams> grid;
    std::string item;
    for (char c : text + ";") {
        if (c == ';' || c == ' ') {
            if (!item.empty()) {
                grid.push_back(nf::Hyperparams::parse(item));
            }
            item.clear();
        } else {
            item.push_back(c);
        }
    }
    if (grid.empty()) {
        throw nf::SchemaError("empty grid");
    }
    return grid;
}

void print_comparison(const nf::ComparisonRecord& c) {
    std::cout << c.a.label() << " vs " << c.b.label() << ": mean difference "
              << nf::format_double(c.mean_difference) << ", 95% CI ["
              << nf::format_double(c.lower) << ", " << nf::format_double(c.upper) << "]"
              << (c.reliable ? " reliable" : " not reliable") << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Boolean-factorization models of neg-raising judgments"};
    app.require_subcommand(1);

    auto* data = app.add_subcommand("data", "Inspect or generate judgment data");
    data->require_subcommand(1);

    DataOptions summarize_data;
    auto* summarize = data->add_subcommand("summarize", "Counts per tense/frame and participant");
    summarize_data.add(summarize, true);

    std::string synth_spec, synth_out, synth_planted;
    auto* synth = data->add_subcommand("synth", "Generate data from planted factors");
    synth->add_option("--spec", synth_spec, "Planted spec JSON")
        ->required()
        ->check(CLI::ExistingFile);
    synth->add_option("--out", synth_out, "Output CSV")->required();
    synth->add_option("--planted-out", synth_planted, "Also write the planted model JSON");

    DataOptions fit_data;
    ConfigOptions fit_config;
    int n_lexical = 1, n_structural = 1;
    std::string fit_out;
    auto* fit = app.add_subcommand("fit", "Fit one model");
    fit_data.add(fit, false);
    fit_config.add(fit);
    fit->add_option("--n-lexical", n_lexical, "Lexical properties |I|")->required();
    fit->add_option("--n-structural", n_structural, "Structural properties |T|")->required();
    fit->add_option("--out", fit_out, "Model JSON")->required();

    DataOptions cv_data;
    ConfigOptions cv_config;
    std::string grid_text = "all", cv_out;
    std::size_t n_folds = 5, threads = 1, n_boot = nf::kDefaultBootstrapReplicates, top = 3;
    std::uint64_t fold_seed = 0, boot_seed = 0;
    auto* cv = app.add_subcommand("cv", "Cross-validate a hyperparameter grid");
    cv_data.add(cv, false);
    cv_config.add(cv);
    cv->add_option("--grid", grid_text, "'all' or a list like '1,0;0,1;1,1'");
    cv->add_option("--out", cv_out, "Report JSON")->required();
    cv->add_option("--folds", n_folds, "Number of folds");
    cv->add_option("--fold-seed", fold_seed, "Seed for the fold assignment");
    cv->add_option("--threads", threads, "Concurrent fits");
    cv->add_option("--n-boot", n_boot, "Bootstrap replicates for the top comparisons");
    cv->add_option("--boot-seed", boot_seed, "Bootstrap seed");
    cv->add_option("--top", top, "Compare the best N grid points pairwise");

    std::string report_path, a_label, b_label;
    std::size_t compare_boot = nf::kDefaultBootstrapReplicates;
    std::uint64_t compare_seed = 0;
    auto* compare = app.add_subcommand("compare", "Paired bootstrap of two grid points");
    compare->add_option("--report", report_path, "Report JSON")
        ->required()
        ->check(CLI::ExistingFile);
    compare->add_option("--a", a_label, "First grid point, I,T")->required();
    compare->add_option("--b", b_label, "Second grid point, I,T")->required();
    compare->add_option("--n-boot", compare_boot, "Bootstrap replicates");
    compare->add_option("--seed", compare_seed, "Bootstrap seed");

    DataOptions norm_data;
    ConfigOptions norm_config;
    std::string norm_out;
    bool inside_link = false, fixed_effects = false;
    auto* normalize = app.add_subcommand("normalize", "Per-sentence normalized scores");
    norm_data.add(normalize, false);
    norm_config.add(normalize);
    normalize->add_option("--out", norm_out, "Scores CSV")->required();
    normalize->add_flag("--inside-link", inside_link,
                        "Score as logistic(exp(sigma0) nu + beta0)");
    normalize->add_flag("--fixed-effects", fixed_effects,
                        "Keep the link at the identity instead of learning effects");

    std::string model_path, out_dir;
    auto* report = app.add_subcommand("report", "Probability tables and verb scores");
    report->add_option("--model", model_path, "Model JSON")
        ->required()
        ->check(CLI::ExistingFile);
    report->add_option("--out-dir", out_dir, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (summarize->parsed()) {
            nf::write_summary(nf::summarize(summarize_data.load()), std::cout);
        } else if (synth->parsed()) {
            const auto spec = nf::PlantedSpec::from_json(read_file(synth_spec));
            const auto dataset = nf::generate_synthetic(spec);
            nf::write_csv(dataset.table, std::filesystem::path(synth_out));
            if (!synth_planted.empty()) {
                nf::planted_model(dataset).save(synth_planted);
            }
            std::cerr << "wrote " << dataset.table.size() << " ratings to " << synth_out << '\n';
        } else if (fit->parsed()) {
            const auto table = fit_data.load();
            const auto result =
                nf::fit(table, nf::Hyperparams{n_lexical, n_structural}, fit_config.get());
            result.model.save(fit_out);
            std::cerr << "loss " << nf::format_double(result.model.info.loss) << " after "
                      << result.iterations_run << " iterations"
                      << (result.converged ? " (converged)" : "") << '\n';
        } else if (cv->parsed()) {
            const auto table = cv_data.load();
            nf::CvConfig config;
            config.fit = cv_config.get();
            config.n_folds = n_folds;
            config.fold_seed = fold_seed;
            config.threads = threads;
            config.log = &std::cerr;
            const auto grid = parse_grid(grid_text);
            auto result = nf::cross_validate(table, grid, config);
            result.comparisons = nf::compare_top(result, top, n_boot, boot_seed);
            result.save(cv_out);
            for (const auto& h : result.ranking) {
                const auto& r = result.result(h);
                std::cout << h.label() << '\t'
                          << (r.failed() ? std::string("failed") : nf::format_double(r.total))
                          << '\n';
            }
            for (const auto& c : result.comparisons) {
                print_comparison(c);
            }
        } else if (compare->parsed()) {
            const auto loaded = nf::EvalReport::load(report_path);
            print_comparison(nf::bootstrap_compare(loaded, nf::Hyperparams::parse(a_label),
                                                   nf::Hyperparams::parse(b_label), compare_boot,
                                                   compare_seed));
        } else if (normalize->parsed()) {
            const auto table = norm_data.load();
            nf::NormalizeOptions options;
            options.inside_link = inside_link;
            options.learn_effects = !fixed_effects;
            nf::write_scores(nf::normalize(table, norm_config.get(), options),
                             std::filesystem::path(norm_out));
        } else if (report->parsed()) {
            nf::write_report(nf::analyze(nf::FittedModel::load(model_path)), out_dir);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
