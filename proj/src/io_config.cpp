#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "viablearn/io.hpp"

namespace viablearn::io {

namespace {

const char* kind_tag(ConfigErrorKind k) {
    switch (k) {
        case ConfigErrorKind::Parse: return "config-parse";
        case ConfigErrorKind::Schema: return "config-schema";
        case ConfigErrorKind::Range: return "config-range";
    }
    return "config";
}

[[noreturn]] void schema(const std::string& path, const std::string& what) {
    throw ConfigError(ConfigErrorKind::Schema, path, what);
}

[[noreturn]] void range(const std::string& path, const std::string& what) {
    throw ConfigError(ConfigErrorKind::Range, path, what);
}

void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) {
        schema(path, "expected an object");
    }
}

void allow_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
    require_object(j, path);
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, _] : j.items()) {
        if (!allowed.count(k)) {
            schema(path + "/" + k, "unknown key '" + k + "'");
        }
    }
}

double number(const json& j, const std::string& path) {
    if (!j.is_number()) {
        schema(path, "expected a number");
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
        range(path, "must be finite");
    }
    return v;
}

double number_or(const json& obj, const char* key, const std::string& path, double fallback) {
    return obj.contains(key) ? number(obj.at(key), path + "/" + key) : fallback;
}

long long integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) {
        schema(path, "expected an integer");
    }
    return j.get<long long>();
}

long long integer_or(const json& obj, const char* key, const std::string& path, long long fallback) {
    return obj.contains(key) ? integer(obj.at(key), path + "/" + key) : fallback;
}

std::string string_or(const json& obj, const char* key, const std::string& path, const std::string& fallback) {
    if (!obj.contains(key)) {
        return fallback;
    }
    if (!obj.at(key).is_string()) {
        schema(path + "/" + key, "expected a string");
    }
    return obj.at(key).get<std::string>();
}

std::vector<double> number_list(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) {
        schema(path, "expected a nonempty array of numbers");
    }
    std::vector<double> out;
    for (std::size_t k = 0; k < j.size(); ++k) {
        out.push_back(number(j[k], path + "/" + std::to_string(k)));
    }
    return out;
}

Eigen::VectorXd to_vec(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json vec_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        a.push_back(v[i]);
    }
    return a;
}

Box parse_box(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) {
        schema(path, "expected a nonempty array of [lower, upper] pairs");
    }
    Box b{Eigen::VectorXd(static_cast<Eigen::Index>(j.size())), Eigen::VectorXd(static_cast<Eigen::Index>(j.size()))};
    for (std::size_t d = 0; d < j.size(); ++d) {
        const std::string p = path + "/" + std::to_string(d);
        const auto pair = number_list(j[d], p);
        if (pair.size() != 2) {
            schema(p, "expected [lower, upper]");
        }
        if (!(pair[0] < pair[1])) {
            range(p, "lower must be < upper");
        }
        b.lower[static_cast<Eigen::Index>(d)] = pair[0];
        b.upper[static_cast<Eigen::Index>(d)] = pair[1];
    }
    return b;
}

json box_json(const Box& b) {
    json a = json::array();
    for (Eigen::Index d = 0; d < b.dim(); ++d) {
        a.push_back({b.lower[d], b.upper[d]});
    }
    return a;
}

struct ParsedModel {
    SystemModel model;
    json normalized;
};

ParsedModel parse_model(const json& j) {
    const std::string path = "/model";
    if (j.is_string()) {
        const auto name = j.get<std::string>();
        if (name != "hovership") {
            schema(path, "unknown builtin model '" + name + "'");
        }
        return {hovership_model(), name};
    }
    allow_keys(j, path, {"name", "state_box", "action_box", "vector_field", "hold_duration", "substep", "failure"});
    for (const char* key : {"state_box", "action_box", "vector_field"}) {
        if (!j.contains(key)) {
            schema(path + "/" + key, "missing required key");
        }
    }
    const Box sbox = parse_box(j.at("state_box"), path + "/state_box");
    const Box abox = parse_box(j.at("action_box"), path + "/action_box");
    const std::string field_name = string_or(j, "vector_field", path, "");
    VectorField field;
    try {
        field = builtin_vector_field(field_name);
    } catch (const PreconditionError&) {
        schema(path + "/vector_field", "unknown vector field '" + field_name + "'");
    }
    const double hold = number_or(j, "hold_duration", path, 1.0);
    if (!(hold > 0.0)) {
        range(path + "/hold_duration", "must be > 0");
    }
    const double substep = number_or(j, "substep", path, 0.01);
    if (!(substep > 0.0) || substep > hold) {
        range(path + "/substep", "must be in (0, hold_duration]");
    }
    if (std::abs(std::round(hold / substep) * substep - hold) > 1e-9 * hold) {
        range(path + "/substep", "must divide hold_duration into whole steps");
    }
    json failure_json = "outside_state_box";
    Box safe = sbox;
    if (j.contains("failure")) {
        const auto& f = j.at("failure");
        if (f.is_string()) {
            if (f.get<std::string>() != "outside_state_box") {
                schema(path + "/failure", "unknown failure spec");
            }
        } else {
            allow_keys(f, path + "/failure", {"safe_box"});
            if (!f.contains("safe_box")) {
                schema(path + "/failure/safe_box", "missing required key");
            }
            safe = parse_box(f.at("safe_box"), path + "/failure/safe_box");
            if (safe.dim() != sbox.dim()) {
                schema(path + "/failure/safe_box", "dimension differs from state_box");
            }
            failure_json = json{{"safe_box", box_json(safe)}};
        }
    }
    const std::string name = string_or(j, "name", path, field_name);
    SystemModel model = make_model(name, sbox, abox, field, hold, substep, outside_box(safe));
    json norm = {{"name", name},
                 {"state_box", box_json(sbox)},
                 {"action_box", box_json(abox)},
                 {"vector_field", field_name},
                 {"hold_duration", hold},
                 {"substep", substep},
                 {"failure", failure_json}};
    return {std::move(model), std::move(norm)};
}

std::vector<std::size_t> point_counts(const json& obj, const char* key, const std::string& path,
                                      std::size_t dims, std::size_t fallback) {
    std::vector<std::size_t> out(dims, fallback);
    if (!obj.contains(key)) {
        return out;
    }
    const auto& a = obj.at(key);
    const std::string p = path + "/" + key;
    if (!a.is_array() || a.size() != dims) {
        schema(p, "expected one point count per dimension");
    }
    for (std::size_t d = 0; d < dims; ++d) {
        const auto n = integer(a[d], p + "/" + std::to_string(d));
        if (n < 2) {
            range(p + "/" + std::to_string(d), "point count must be >= 2");
        }
        out[d] = static_cast<std::size_t>(n);
    }
    return out;
}

struct ParsedPolicy {
    NominalPolicy policy;
    json normalized;
};

ParsedPolicy parse_policy(const json& j, const std::string& path, const SystemModel& model) {
    allow_keys(j, path, {"kind", "gain", "offset", "seed"});
    const std::string kind = string_or(j, "kind", path, "");
    const auto sdim = model.state_box.dim();
    const auto adim = model.action_box.dim();
    if (kind == "affine") {
        for (const char* key : {"gain", "offset"}) {
            if (!j.contains(key)) {
                schema(path + "/" + key, "missing required key");
            }
        }
        const auto& g = j.at("gain");
        if (!g.is_array() || static_cast<Eigen::Index>(g.size()) != adim) {
            schema(path + "/gain", "expected one row per action dimension");
        }
        Eigen::MatrixXd gain(adim, sdim);
        for (Eigen::Index r = 0; r < adim; ++r) {
            const std::string p = path + "/gain/" + std::to_string(r);
            const auto row = number_list(g[static_cast<std::size_t>(r)], p);
            if (static_cast<Eigen::Index>(row.size()) != sdim) {
                schema(p, "expected one entry per state dimension");
            }
            gain.row(r) = to_vec(row).transpose();
        }
        const auto offset = number_list(j.at("offset"), path + "/offset");
        if (static_cast<Eigen::Index>(offset.size()) != adim) {
            schema(path + "/offset", "expected one entry per action dimension");
        }
        json norm = {{"kind", "affine"}, {"gain", j.at("gain")}, {"offset", j.at("offset")}};
        return {NominalPolicy(AffinePolicy{gain, to_vec(offset)}, model.action_box), norm};
    }
    if (kind == "uniform_random") {
        if (j.contains("gain") || j.contains("offset")) {
            schema(path, "uniform_random policy takes only 'seed'");
        }
        const auto seed = integer_or(j, "seed", path, 0);
        if (seed < 0) {
            range(path + "/seed", "must be >= 0");
        }
        return {NominalPolicy(UniformRandomPolicy{static_cast<std::uint64_t>(seed)}, model.action_box),
                {{"kind", "uniform_random"}, {"seed", seed}}};
    }
    schema(path + "/kind", "expected 'affine' or 'uniform_random'");
}

json default_policy_json(const std::string& model_name) {
    if (model_name == "hovership") {
        return {{"kind", "affine"}, {"gain", {{-0.3}}}, {"offset", {0.7}}};
    }
    return nullptr;
}

json default_search_json() {
    return {{"lengthscales", {{0.1, 0.2, 0.4, 0.8}, {0.05, 0.1, 0.2, 0.4}}},
            {"signal_variance", {1.0}},
            {"noise_variance", {1e-4, 1e-2}}};
}

std::vector<double> positive_list(const json& j, const std::string& path) {
    auto v = number_list(j, path);
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (!(v[k] > 0.0)) {
            range(path + "/" + std::to_string(k), "must be > 0");
        }
    }
    return v;
}

struct ParsedLearner {
    LearnerConfig config;
    json normalized;
};

ParsedLearner parse_learner(const json& j, const SystemModel& model, const NominalPolicy& policy,
                            const std::string& model_name) {
    const std::string path = "/learner";
    allow_keys(j, path,
               {"threshold", "prior_mean", "lengthscales", "signal_variance", "noise_variance", "seed_region", "seeds",
                "hyperparameter_search"});
    const auto sdim = static_cast<std::size_t>(model.state_box.dim());
    const auto dims = sdim + static_cast<std::size_t>(model.action_box.dim());
    ParsedLearner out;
    LearnerConfig& c = out.config;
    c.threshold = number_or(j, "threshold", path, 0.5);
    if (!(c.threshold > 0.0 && c.threshold < 1.0)) {
        range(path + "/threshold", "must lie strictly between 0 and 1");
    }
    c.initial_hyper.prior_mean = number_or(j, "prior_mean", path, 0.0);
    std::vector<double> ls;
    if (j.contains("lengthscales")) {
        ls = positive_list(j.at("lengthscales"), path + "/lengthscales");
        if (ls.size() != dims) {
            schema(path + "/lengthscales", "expected one lengthscale per state and action dimension");
        }
    } else {
        ls.assign(sdim, 0.2);
        ls.resize(dims, 0.1);
    }
    c.initial_hyper.lengthscales = to_vec(ls);
    c.initial_hyper.signal_variance = number_or(j, "signal_variance", path, 1.0);
    if (!(c.initial_hyper.signal_variance > 0.0)) {
        range(path + "/signal_variance", "must be > 0");
    }
    c.initial_hyper.noise_variance = number_or(j, "noise_variance", path, 1e-4);
    if (!(c.initial_hyper.noise_variance > 0.0)) {
        range(path + "/noise_variance", "must be > 0");
    }

    json norm = {{"threshold", c.threshold},
                 {"prior_mean", c.initial_hyper.prior_mean},
                 {"lengthscales", ls},
                 {"signal_variance", c.initial_hyper.signal_variance},
                 {"noise_variance", c.initial_hyper.noise_variance}};

    if (j.contains("seeds")) {
        const auto& s = j.at("seeds");
        if (!s.is_array() || s.empty()) {
            schema(path + "/seeds", "expected a nonempty array of [state..., action...] rows");
        }
        for (std::size_t k = 0; k < s.size(); ++k) {
            const std::string p = path + "/seeds/" + std::to_string(k);
            const auto row = number_list(s[k], p);
            if (row.size() != dims) {
                schema(p, "expected state dims followed by action dims");
            }
            const Eigen::VectorXd x = to_vec(row);
            c.seeds.push_back({x.head(static_cast<Eigen::Index>(sdim)), x.tail(static_cast<Eigen::Index>(dims - sdim)), 1.0});
        }
        norm["seeds"] = s;
    } else {
        json region = j.value("seed_region", json::object());
        const std::string p = path + "/seed_region";
        allow_keys(region, p, {"operating_point", "half_width", "count", "policy"});
        const Eigen::VectorXd centre = 0.5 * (model.state_box.lower + model.state_box.upper);
        Eigen::VectorXd op = centre;
        if (region.contains("operating_point")) {
            const auto v = number_list(region.at("operating_point"), p + "/operating_point");
            if (v.size() != sdim) {
                schema(p + "/operating_point", "expected one coordinate per state dimension");
            }
            op = to_vec(v);
        }
        const double half_width = number_or(region, "half_width", p, 0.1);
        if (half_width < 0.0) {
            range(p + "/half_width", "must be >= 0");
        }
        const auto count = integer_or(region, "count", p, 5);
        if (count < 1) {
            range(p + "/count", "must be >= 1");
        }
        json seed_policy_json = region.contains("policy") ? region.at("policy") : json(nullptr);
        std::optional<NominalPolicy> seed_policy;
        if (!seed_policy_json.is_null()) {
            auto parsed = parse_policy(seed_policy_json, p + "/policy", model);
            seed_policy.emplace(parsed.policy);
            seed_policy_json = parsed.normalized;
        } else if (policy.deterministic()) {
            seed_policy.emplace(policy);
        } else {
            const json fallback = default_policy_json(model_name);
            if (fallback.is_null()) {
                schema(p + "/policy", "a deterministic policy is needed to place seeds");
            }
            seed_policy.emplace(parse_policy(fallback, p + "/policy", model).policy);
            seed_policy_json = fallback;
        }
        c.seeds = seeds_on_graph(*seed_policy, op, half_width, static_cast<std::size_t>(count));
        norm["seed_region"] = {{"operating_point", vec_json(op)}, {"half_width", half_width}, {"count", count}};
        if (!seed_policy_json.is_null()) {
            norm["seed_region"]["policy"] = seed_policy_json;
        }
    }

    json search = j.value("hyperparameter_search", default_search_json());
    const std::string sp = path + "/hyperparameter_search";
    allow_keys(search, sp, {"lengthscales", "signal_variance", "noise_variance"});
    std::vector<std::vector<double>> ls_options;
    if (search.contains("lengthscales")) {
        const auto& a = search.at("lengthscales");
        if (!a.is_array() || a.size() != dims) {
            schema(sp + "/lengthscales", "expected one candidate list per input dimension");
        }
        for (std::size_t d = 0; d < dims; ++d) {
            ls_options.push_back(positive_list(a[d], sp + "/lengthscales/" + std::to_string(d)));
        }
    } else {
        for (double v : ls) {
            ls_options.push_back({v});
        }
    }
    const auto sig = search.contains("signal_variance") ? positive_list(search.at("signal_variance"), sp + "/signal_variance")
                                                        : std::vector<double>{c.initial_hyper.signal_variance};
    const auto noise = search.contains("noise_variance") ? positive_list(search.at("noise_variance"), sp + "/noise_variance")
                                                         : std::vector<double>{c.initial_hyper.noise_variance};
    // Cartesian product, first dimension outermost, then signal, then noise.
    std::vector<Eigen::VectorXd> ls_combos{Eigen::VectorXd(0)};
    for (const auto& opts : ls_options) {
        std::vector<Eigen::VectorXd> next;
        for (const auto& prefix : ls_combos) {
            for (double v : opts) {
                Eigen::VectorXd x(prefix.size() + 1);
                x << prefix, v;
                next.push_back(x);
            }
        }
        ls_combos = std::move(next);
    }
    for (const auto& l : ls_combos) {
        for (double s : sig) {
            for (double n : noise) {
                c.search_grid.push_back({l, s, n, c.initial_hyper.prior_mean});
            }
        }
    }
    json ls_norm = json::array();
    for (const auto& opts : ls_options) {
        ls_norm.push_back(opts);
    }
    norm["hyperparameter_search"] = {{"lengthscales", ls_norm}, {"signal_variance", sig}, {"noise_variance", noise}};
    out.normalized = std::move(norm);
    return out;
}

}  // namespace

ConfigError::ConfigError(ConfigErrorKind k, std::string path, const std::string& what)
    : Error(kind_tag(k), (path.empty() ? std::string("/") : path) + ": " + what), config_kind_(k), path_(std::move(path)) {}

json default_config_document(const std::string& model) { return {{"schema_version", kSchemaVersion}, {"model", model}}; }

Config parse_config(const json& doc) {
    allow_keys(doc, "", {"schema_version", "model", "grid", "policy", "learner", "experiment", "output_dir"});
    const auto version = integer_or(doc, "schema_version", "", kSchemaVersion);
    if (version != kSchemaVersion) {
        range("/schema_version", "unsupported schema version " + std::to_string(version));
    }
    if (!doc.contains("model")) {
        schema("/model", "missing required key");
    }
    auto [model, model_json] = parse_model(doc.at("model"));
    const std::string model_name = model.name;
    const auto sdim = static_cast<std::size_t>(model.state_box.dim());
    const auto adim = static_cast<std::size_t>(model.action_box.dim());

    const json grid_doc = doc.value("grid", json::object());
    allow_keys(grid_doc, "/grid", {"state_points", "action_points"});
    const auto sp = point_counts(grid_doc, "state_points", "/grid", sdim, 201);
    const auto ap = point_counts(grid_doc, "action_points", "/grid", adim, 161);
    GridSpec grid = GridSpec::over(model.state_box, model.action_box, sp, ap);

    json policy_doc = doc.contains("policy") ? doc.at("policy") : default_policy_json(model_name);
    if (policy_doc.is_null()) {
        schema("/policy", "missing required key (no default policy for this model)");
    }
    auto parsed_policy = parse_policy(policy_doc, "/policy", model);

    auto learner = parse_learner(doc.value("learner", json::object()), model, parsed_policy.policy, model_name);

    const json exp = doc.value("experiment", json::object());
    const std::string ep = "/experiment";
    allow_keys(exp, ep, {"episodes_per_batch", "batch_count", "max_steps", "seed", "fallback", "refit", "membership"});
    const auto episodes = integer_or(exp, "episodes_per_batch", ep, 10);
    const auto batches = integer_or(exp, "batch_count", ep, 2);
    const auto max_steps = integer_or(exp, "max_steps", ep, 10);
    for (auto [key, v] : {std::pair{"episodes_per_batch", episodes}, {"batch_count", batches}, {"max_steps", max_steps}}) {
        if (v < 1) {
            range(ep + "/" + key, "must be >= 1");
        }
    }
    const auto seed = integer_or(exp, "seed", ep, 0);
    if (seed < 0) {
        range(ep + "/seed", "must be >= 0");
    }
    const std::string fallback = string_or(exp, "fallback", ep, "nominal");
    if (fallback != "nominal" && fallback != "uniform_random") {
        schema(ep + "/fallback", "expected 'nominal' or 'uniform_random'");
    }
    const std::string refit = string_or(exp, "refit", ep, "per_sample");
    if (refit != "per_sample" && refit != "per_episode") {
        schema(ep + "/refit", "expected 'per_sample' or 'per_episode'");
    }
    const std::string membership = string_or(exp, "membership", ep, "nearest");
    if (membership != "nearest" && membership != "conservative") {
        schema(ep + "/membership", "expected 'nearest' or 'conservative'");
    }
    const std::string output_dir = string_or(doc, "output_dir", "", "out");

    ExperimentConfig ec{std::move(model),
                        grid,
                        parsed_policy.policy,
                        learner.config,
                        static_cast<int>(episodes),
                        static_cast<int>(batches),
                        static_cast<int>(max_steps),
                        static_cast<std::uint64_t>(seed),
                        fallback == "nominal" ? Fallback::Nominal : Fallback::UniformRandom,
                        refit == "per_sample" ? Refit::PerSample : Refit::PerEpisode,
                        membership == "nearest" ? Membership::Nearest : Membership::Conservative};

    json normalized = {{"schema_version", kSchemaVersion},
                       {"model", model_json},
                       {"grid", {{"state_points", sp}, {"action_points", ap}}},
                       {"policy", parsed_policy.normalized},
                       {"learner", learner.normalized},
                       {"experiment",
                        {{"episodes_per_batch", episodes},
                         {"batch_count", batches},
                         {"max_steps", max_steps},
                         {"seed", seed},
                         {"fallback", fallback},
                         {"refit", refit},
                         {"membership", membership}}},
                       {"output_dir", output_dir}};
    return Config{std::move(normalized), model_name, std::move(ec), output_dir};
}

Config load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(ConfigErrorKind::Parse, "", "cannot open config file " + path.string());
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(ConfigErrorKind::Parse, "", std::string("invalid JSON: ") + e.what());
    }
    return parse_config(doc);
}

}  // namespace viablearn::io
