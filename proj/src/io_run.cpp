#include <charconv>
#include <cstdio>
#include <sstream>

#include "viablearn/io.hpp"

namespace viablearn::io {

namespace {

json vec_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        a.push_back(v[i]);
    }
    return a;
}

Eigen::VectorXd vec_from(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void put(std::string& row, const std::string& field) {
    if (!row.empty()) {
        row += ',';
    }
    row += field;
}

void put(std::string& row, const Eigen::VectorXd& v) {
    for (Eigen::Index d = 0; d < v.size(); ++d) {
        put(row, format_double(v[d]));
    }
}

std::string columns(const char* prefix, std::size_t n) {
    std::string out;
    for (std::size_t d = 0; d < n; ++d) {
        put(out, prefix + std::to_string(d));
    }
    return out;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        out.push_back(cell);
    }
    return out;
}

double parse_double(const std::string& s) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
        throw Error("artifact-format", "not a number: '" + s + "'");
    }
    return v;
}

std::string episode_file(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "episode_%03d.csv", index);
    return buf;
}

}  // namespace

json hyper_to_json(const GpHyper& h) {
    return {{"lengthscales", vec_json(h.lengthscales)},
            {"signal_variance", h.signal_variance},
            {"noise_variance", h.noise_variance},
            {"prior_mean", h.prior_mean}};
}

GpHyper hyper_from_json(const json& j) {
    return {vec_from(j.at("lengthscales")), j.at("signal_variance").get<double>(), j.at("noise_variance").get<double>(),
            j.at("prior_mean").get<double>()};
}

json metrics_to_json(const Metrics& m) {
    json j = {{"failure_count", m.failure_count},
              {"sample_count", m.sample_count},
              {"underestimate_pct", m.underestimate},
              {"overreach_pct", m.overreach},
              {"khat_count", m.khat_count},
              {"viable_count", m.viable_count},
              {"critical_count", m.critical_count}};
    j["deviation_max_pct"] = m.deviation_max ? json(*m.deviation_max) : json(nullptr);
    j["deviation_mean_pct"] = m.deviation_mean ? json(*m.deviation_mean) : json(nullptr);
    j["admissible"] = m.admissible ? json(*m.admissible) : json(nullptr);
    return j;
}

std::string samples_csv(const RunRecord& record) {
    const auto& g = record.khat_final.grid();
    std::string out = "episode,step," + columns("s", g.state_dim()) + "," + columns("a", g.action_dim()) +
                      ",label,feasible\n";
    for (const auto& e : record.episodes) {
        for (const auto& st : e.steps) {
            std::string row;
            put(row, std::to_string(st.episode));
            put(row, std::to_string(st.step));
            put(row, st.state);
            put(row, st.executed);
            put(row, st.failed ? "0" : "1");
            put(row, st.feasible ? "1" : "0");
            out += row + "\n";
        }
    }
    return out;
}

std::string trajectory_csv(const EpisodeLog& episode) {
    const auto sdim = static_cast<std::size_t>(episode.initial_state.size());
    const auto adim = episode.steps.empty() ? 0 : static_cast<std::size_t>(episode.steps.front().executed.size());
    std::string out = "step," + columns("s", sdim) + "," + columns("nominal_a", adim) + "," +
                      columns("executed_a", adim) + ",feasible,outcome," + columns("next_s", sdim) + "\n";
    for (const auto& st : episode.steps) {
        std::string row;
        put(row, std::to_string(st.step));
        put(row, st.state);
        put(row, st.nominal);
        put(row, st.executed);
        put(row, st.feasible ? "1" : "0");
        put(row, st.failed ? "failed" : "alive");
        put(row, st.next_state);
        out += row + "\n";
    }
    return out;
}

void save_run(const fs::path& dir, const RunRecord& record, const json& config, const std::optional<Metrics>& metrics) {
    json episodes = json::array();
    for (const auto& e : record.episodes) {
        episodes.push_back({{"index", e.index},
                            {"batch", e.batch},
                            {"initial_state", vec_json(e.initial_state)},
                            {"length", e.steps.size()},
                            {"failed", e.failed()}});
    }
    json hyper = json::array();
    for (const auto& h : record.hyper_history) {
        hyper.push_back(hyper_to_json(h));
    }
    json run = {{"schema_version", kSchemaVersion},
                {"config", config},
                {"seed", config.at("experiment").at("seed")},
                {"hyperparameters", hyper},
                {"episodes", episodes},
                {"sample_count", record.sample_count()},
                {"failure_count", record.failure_count()}};
    if (metrics) {
        run["metrics"] = metrics_to_json(*metrics);
    }
    const json meta = {{"model", config.at("model").is_string() ? config.at("model") : config.at("model").at("name")}};
    write_atomic(dir / "khat_initial.json", set_to_json(record.khat_initial, meta).dump() + "\n");
    write_atomic(dir / "khat_final.json", set_to_json(record.khat_final, meta).dump() + "\n");
    write_atomic(dir / "samples.csv", samples_csv(record));
    for (const auto& e : record.episodes) {
        write_atomic(dir / "trajectories" / episode_file(e.index), trajectory_csv(e));
    }
    write_atomic(dir / "run.json", run.dump(2) + "\n");
}

RunRecord load_run(const fs::path& dir) {
    for (const char* f : {"run.json", "khat_initial.json", "khat_final.json", "samples.csv"}) {
        if (!fs::exists(dir / f)) {
            throw Error("missing-artifact", (dir / f).string() + " not found");
        }
    }
    const json run = read_json(dir / "run.json");
    RunRecord r;
    r.khat_initial = qset_from_json(read_json(dir / "khat_initial.json"));
    r.khat_final = qset_from_json(read_json(dir / "khat_final.json"));
    for (const auto& h : run.at("hyperparameters")) {
        r.hyper_history.push_back(hyper_from_json(h));
    }
    const auto sdim = static_cast<Eigen::Index>(r.khat_final.grid().state_dim());
    const auto adim = static_cast<Eigen::Index>(r.khat_final.grid().action_dim());
    for (const auto& ej : run.at("episodes")) {
        EpisodeLog e;
        e.index = ej.at("index").get<int>();
        e.batch = ej.at("batch").get<int>();
        e.initial_state = vec_from(ej.at("initial_state"));
        std::stringstream in(read_file(dir / "trajectories" / episode_file(e.index)));
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) {
                continue;
            }
            const auto cells = split(line);
            if (static_cast<Eigen::Index>(cells.size()) != 3 + 2 * sdim + 2 * adim) {
                throw Error("artifact-format", "malformed trajectory row in episode " + std::to_string(e.index));
            }
            std::size_t c = 0;
            auto take = [&](Eigen::Index n) {
                Eigen::VectorXd v(n);
                for (Eigen::Index d = 0; d < n; ++d) {
                    v[d] = parse_double(cells[c++]);
                }
                return v;
            };
            StepLog st;
            st.episode = e.index;
            st.step = std::stoi(cells[c++]);
            st.state = take(sdim);
            st.nominal = take(adim);
            st.executed = take(adim);
            st.feasible = cells[c++] == "1";
            st.failed = cells[c++] == "failed";
            st.next_state = take(sdim);
            e.steps.push_back(std::move(st));
        }
        if (e.steps.size() != ej.at("length").get<std::size_t>()) {
            throw Error("artifact-format", "trajectory length mismatch in episode " + std::to_string(e.index));
        }
        r.episodes.push_back(std::move(e));
    }
    return r;
}

}  // namespace viablearn::io
