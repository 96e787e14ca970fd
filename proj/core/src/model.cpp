#include "negfactor/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace negfactor {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

void push_channel(std::vector<ParameterBlock>& out, ChannelEffects& c, bool negraising) {
    if (negraising) {
        out.push_back({"negraising.beta0", {&c.beta0, 1}});
        out.push_back({"negraising.sigma0", {&c.sigma0, 1}});
        out.push_back({"negraising.beta", c.beta});
        out.push_back({"negraising.sigma", c.sigma});
        out.push_back({"negraising.log_var_beta", {&c.log_var_beta, 1}});
        out.push_back({"negraising.log_var_sigma", {&c.log_var_sigma, 1}});
    } else {
        out.push_back({"acceptability.beta0", {&c.beta0, 1}});
        out.push_back({"acceptability.sigma0", {&c.sigma0, 1}});
        out.push_back({"acceptability.beta", c.beta});
        out.push_back({"acceptability.sigma", c.sigma});
        out.push_back({"acceptability.log_var_beta", {&c.log_var_beta, 1}});
        out.push_back({"acceptability.log_var_sigma", {&c.log_var_sigma, 1}});
    }
}

json number(double x) {
    if (!std::isfinite(x)) {
        return nullptr;
    }
    return x;
}

double read_number(const json& j) {
    if (j.is_null()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return j.get<double>();
}

json block(const std::vector<double>& values, std::vector<std::size_t> shape) {
    return json{{"shape", shape}, {"logits", values}};
}

std::vector<double> read_block(const json& j, const char* name,
                               const std::vector<std::size_t>& expected) {
    const auto& b = j.at(name);
    const auto shape = b.at("shape").get<std::vector<std::size_t>>();
    if (shape != expected) {
        throw SchemaError(std::string(name) + " has an unexpected shape");
    }
    auto values = b.at("logits").get<std::vector<double>>();
    std::size_t n = 1;
    for (auto s : shape) {
        n *= s;
    }
    if (values.size() != n) {
        throw SchemaError(std::string(name) + " holds the wrong number of logits");
    }
    return values;
}

json channel_json(const ChannelEffects& c) {
    return json{{"beta0", c.beta0},
                {"sigma0", c.sigma0},
                {"beta", c.beta},
                {"sigma", c.sigma},
                {"log_var_beta", c.log_var_beta},
                {"log_var_sigma", c.log_var_sigma}};
}

ChannelEffects read_channel(const json& j) {
    ChannelEffects c;
    c.beta0 = j.at("beta0").get<double>();
    c.sigma0 = j.at("sigma0").get<double>();
    c.beta = j.at("beta").get<std::vector<double>>();
    c.sigma = j.at("sigma").get<std::vector<double>>();
    c.log_var_beta = j.at("log_var_beta").get<double>();
    c.log_var_sigma = j.at("log_var_sigma").get<double>();
    return c;
}

} // namespace

std::vector<ParameterBlock> ModelParams::blocks() {
    std::vector<ParameterBlock> out;
    out.push_back({"lambda", factors.lambda});
    out.push_back({"pi", factors.pi});
    out.push_back({"psi", factors.psi});
    out.push_back({"phi", factors.phi});
    out.push_back({"omega", factors.omega});
    push_channel(out, effects.negraising, true);
    push_channel(out, effects.acceptability, false);
    out.push_back({"alpha", cells.alpha});
    return out;
}

std::vector<ConstParameterBlock> ModelParams::blocks() const {
    auto mutable_blocks = const_cast<ModelParams*>(this)->blocks();
    std::vector<ConstParameterBlock> out;
    out.reserve(mutable_blocks.size());
    for (const auto& b : mutable_blocks) {
        out.push_back({b.name, b.values});
    }
    return out;
}

ModelParams ModelParams::zeros_like() const {
    ModelParams z = *this;
    for (auto& b : z.blocks()) {
        std::fill(b.values.begin(), b.values.end(), 0.0);
    }
    return z;
}

FittedModel FittedModel::from_table(const ResponseTable& table, ModelParams params) {
    FittedModel m;
    m.params = std::move(params);
    m.verbs.assign(table.verbs().keys().begin(), table.verbs().keys().end());
    m.frames.assign(table.frames().keys().begin(), table.frames().keys().end());
    m.participants.assign(table.participants().keys().begin(),
                          table.participants().keys().end());
    m.cells.assign(table.cells().begin(), table.cells().end());
    m.validate();
    return m;
}

void FittedModel::validate() const {
    try {
        params.factors.validate_shape();
        params.effects.validate();
    } catch (const Error& e) {
        throw SchemaError(std::string("inconsistent model parameters: ") + e.what());
    }
    if (params.factors.n_verbs != verbs.size() || params.factors.n_frames != frames.size()) {
        throw SchemaError("factor shapes do not match the verb and frame lists");
    }
    if (params.effects.n_participants() != participants.size()) {
        throw SchemaError("random effects do not match the participant list");
    }
    if (params.cells.alpha.size() != cells.size()) {
        throw SchemaError("alpha entries do not match the cell list");
    }
    for (const auto& c : cells) {
        if (c.verb >= verbs.size() || c.frame >= frames.size() || c.subject >= kNumSubjects ||
            c.tense >= kNumTenses) {
            throw SchemaError("cell key out of range");
        }
    }
}

std::string FittedModel::to_json() const {
    validate();
    const auto& f = params.factors;
    const std::size_t V = f.n_verbs, F = f.n_frames, I = f.n_lexical(), T = f.n_structural();

    json frames_json = json::array();
    for (Frame fr : frames) {
        frames_json.push_back(std::string(to_string(fr)));
    }
    json cells_json = json::array();
    for (const auto& c : cells) {
        cells_json.push_back({c.verb, c.frame, c.subject, c.tense});
    }
    json subjects = json::array(), tenses = json::array();
    for (auto s : kAllSubjects) {
        subjects.push_back(std::string(to_string(s)));
    }
    for (auto t : kAllTenses) {
        tenses.push_back(std::string(to_string(t)));
    }

    json j;
    j["format"] = "negfactor-model";
    j["version"] = kFormatVersion;
    j["hyperparameters"] = {{"n_lexical", f.hyper.n_lexical},
                            {"n_structural", f.hyper.n_structural}};
    j["verbs"] = verbs;
    j["frames"] = frames_json;
    j["subjects"] = subjects;
    j["tenses"] = tenses;
    j["participants"] = participants;
    j["factors"] = {{"lambda", block(f.lambda, {V, T})},
                    {"pi", block(f.pi, {T, F})},
                    {"psi", block(f.psi, {V, I})},
                    {"phi", block(f.phi, {I, kNumSubjects, kNumTenses})},
                    {"omega", block(f.omega, {T, kNumSubjects, kNumTenses})}};
    j["effects"] = {{"negraising", channel_json(params.effects.negraising)},
                    {"acceptability", channel_json(params.effects.acceptability)}};
    j["acceptability_cells"] = {{"cells", cells_json}, {"alpha", params.cells.alpha}};
    j["fit"] = {{"loss", number(info.loss)},
                {"data_loss", number(info.data_loss)},
                {"seed", info.seed},
                {"iterations", info.iterations},
                {"converged", info.converged},
                {"learning_rate", info.learning_rate},
                {"acceptability_weighting", info.acceptability_weighting}};
    return j.dump(1) + "\n";
}

FittedModel FittedModel::from_json(std::string_view text) {
    FittedModel m;
    try {
        const json j = json::parse(text);
        if (j.at("format").get<std::string>() != "negfactor-model") {
            throw SchemaError("not a negfactor model file");
        }
        if (j.at("version").get<int>() != kFormatVersion) {
            throw SchemaError("unsupported model format version");
        }
        Hyperparams hyper{j.at("hyperparameters").at("n_lexical").get<int>(),
                          j.at("hyperparameters").at("n_structural").get<int>()};
        hyper.validate();
        m.verbs = j.at("verbs").get<std::vector<std::string>>();
        for (const auto& label : j.at("frames")) {
            auto frame = parse_frame(label.get<std::string>());
            if (!frame) {
                throw SchemaError("unknown frame '" + label.get<std::string>() + "'");
            }
            m.frames.push_back(*frame);
        }
        m.participants = j.at("participants").get<std::vector<std::string>>();

        auto& f = m.params.factors;
        f.n_verbs = m.verbs.size();
        f.n_frames = m.frames.size();
        f.hyper = hyper;
        const std::size_t V = f.n_verbs, F = f.n_frames, I = f.n_lexical(), T = f.n_structural();
        const auto& factors = j.at("factors");
        f.lambda = read_block(factors, "lambda", {V, T});
        f.pi = read_block(factors, "pi", {T, F});
        f.psi = read_block(factors, "psi", {V, I});
        f.phi = read_block(factors, "phi", {I, kNumSubjects, kNumTenses});
        f.omega = read_block(factors, "omega", {T, kNumSubjects, kNumTenses});

        m.params.effects.negraising = read_channel(j.at("effects").at("negraising"));
        m.params.effects.acceptability = read_channel(j.at("effects").at("acceptability"));

        const auto& cells = j.at("acceptability_cells");
        for (const auto& c : cells.at("cells")) {
            const auto k = c.get<std::vector<std::size_t>>();
            if (k.size() != 4) {
                throw SchemaError("cell keys must have four entries");
            }
            m.cells.push_back({k[0], k[1], k[2], k[3]});
        }
        m.params.cells.alpha = cells.at("alpha").get<std::vector<double>>();

        const auto& fit = j.at("fit");
        m.info.loss = read_number(fit.at("loss"));
        m.info.data_loss = read_number(fit.at("data_loss"));
        m.info.seed = fit.at("seed").get<std::uint64_t>();
        m.info.iterations = fit.at("iterations").get<std::size_t>();
        m.info.converged = fit.at("converged").get<bool>();
        m.info.learning_rate = fit.at("learning_rate").get<double>();
        m.info.acceptability_weighting = fit.at("acceptability_weighting").get<bool>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed model JSON: ") + e.what());
    } catch (const DimensionError& e) {
        throw SchemaError(e.what());
    }
    m.validate();
    return m;
}

void FittedModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << to_json();
}

FittedModel FittedModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_json(buffer.str());
}

} // namespace negfactor
