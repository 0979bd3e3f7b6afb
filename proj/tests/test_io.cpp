#include <doctest.h>

#include <random>
#include <unistd.h>

#include "viablearn/cli.hpp"
#include "viablearn/io.hpp"

using namespace viablearn;
using io::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag)
        : path(fs::temp_directory_path() / ("viablearn_" + tag + "_" + std::to_string(::getpid()))) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

json small_config() {
    return json::parse(R"({
        "schema_version": 1,
        "model": "hovership",
        "grid": {"state_points": [41], "action_points": [33]},
        "learner": {"seed_region": {"operating_point": [1.0], "half_width": 0.1, "count": 5}},
        "experiment": {"episodes_per_batch": 3, "batch_count": 2, "max_steps": 10, "seed": 7}
    })");
}

json inline_model() {
    return json::parse(R"({
        "name": "hover", "state_box": [[0, 2]], "action_box": [[0, 0.8]],
        "vector_field": "hovership", "hold_duration": 1.0, "substep": 0.01
    })");
}

io::ConfigErrorKind error_kind(const json& doc, std::string* path = nullptr) {
    try {
        io::parse_config(doc);
    } catch (const io::ConfigError& e) {
        if (path) {
            *path = e.path();
        }
        return e.config_kind();
    }
    FAIL("config was accepted");
    return io::ConfigErrorKind::Parse;
}

}  // namespace

TEST_CASE("minimal config gets the defaults") {
    const auto c = io::parse_config(io::default_config_document());
    const auto& e = c.experiment;
    CHECK(e.grid.state_axes()[0].points == 201);
    CHECK(e.grid.action_axes()[0].points == 161);
    CHECK(e.episodes_per_batch == 10);
    CHECK(e.batch_count == 2);
    CHECK(e.max_steps == 10);
    CHECK(e.policy.deterministic());
    CHECK(e.learner.threshold == 0.5);
    CHECK(e.learner.search_grid.size() == 32);
    CHECK(c.model_name == "hovership");
    // the normalized document parses to the same thing
    const auto again = io::parse_config(c.normalized);
    CHECK(again.normalized == c.normalized);
}

TEST_CASE("config errors name the offending key") {
    std::string path;
    auto doc = io::default_config_document();
    doc["modle"] = "hovership";
    CHECK(error_kind(doc, &path) == io::ConfigErrorKind::Schema);
    CHECK(path == "/modle");

    doc = io::default_config_document();
    doc["model"] = inline_model();
    CHECK(error_kind(doc, &path) == io::ConfigErrorKind::Schema);  // inline models need a policy
    CHECK(path == "/policy");
    doc["policy"] = {{"kind", "affine"}, {"gain", {{-0.3}}}, {"offset", {0.7}}};
    CHECK_NOTHROW(io::parse_config(doc));
    doc["model"]["hold_duration"] = -1.0;
    CHECK(error_kind(doc, &path) == io::ConfigErrorKind::Range);
    CHECK(path == "/model/hold_duration");

    doc["model"] = inline_model();
    doc["model"]["substep"] = 0.3;
    CHECK(error_kind(doc, &path) == io::ConfigErrorKind::Range);

    doc = io::default_config_document();
    doc["experiment"] = {{"batch_count", 0}};
    CHECK(error_kind(doc, &path) == io::ConfigErrorKind::Range);
    CHECK(path == "/experiment/batch_count");

    doc = io::default_config_document();
    doc["grid"] = {{"state_points", {201, 3}}};
    CHECK(error_kind(doc) == io::ConfigErrorKind::Schema);

    doc = io::default_config_document();
    doc["schema_version"] = 2;
    CHECK(error_kind(doc) == io::ConfigErrorKind::Range);

    const TempDir tmp("cfg");
    io::write_atomic(tmp.path / "bad.json", "{ \"model\": ");
    try {
        io::load_config(tmp.path / "bad.json");
        FAIL("parsed");
    } catch (const io::ConfigError& e) {
        CHECK(e.config_kind() == io::ConfigErrorKind::Parse);
    }
}

TEST_CASE("run-length coding round trips") {
    std::mt19937 rng(4);
    for (int t = 0; t < 300; ++t) {
        std::vector<bool> bits(rng() % 200);
        const double p = (rng() % 100) / 100.0;
        for (auto&& b : bits) {
            b = (rng() % 1000) < p * 1000;
        }
        const auto rle = io::rle_encode(bits);
        std::size_t total = 0;
        for (auto r : rle.runs) {
            total += r;
        }
        CHECK(total == bits.size());
        CHECK(io::rle_decode(rle, bits.size()) == bits);
    }
    CHECK_THROWS(io::rle_decode({true, {3, 2}}, 6));
}

TEST_CASE("set documents round trip") {
    std::mt19937 rng(6);
    for (int t = 0; t < 50; ++t) {
        const GridSpec g({{0.0, 1.0 + t, 2 + rng() % 20}}, {{-0.5, 0.5, 2 + rng() % 20}});
        QSet q(g);
        for (std::size_t f = 0; f < q.size(); ++f) {
            q.set_flat(f, rng() % 3 == 0);
        }
        const json j = io::set_to_json(q, {{"tag", t}});
        CHECK(j.at("count") == q.count());
        const QSet back = io::qset_from_json(json::parse(j.dump()));
        CHECK(back == q);
        CHECK(back.grid() == g);
        const SSet s = project(q);
        CHECK(io::sset_from_json(io::set_to_json(s)) == s);
        CHECK_THROWS_AS(io::sset_from_json(j), Error);
    }
    auto bad = io::set_to_json(QSet(GridSpec({{0.0, 1.0, 3}}, {{0.0, 1.0, 3}}), true));
    bad["count"] = 4;
    CHECK_THROWS_AS(io::qset_from_json(bad), Error);
}

TEST_CASE("csv and number formatting") {
    CHECK(io::format_double(0.1) == "0.1");
    CHECK(io::format_double(2.0) == "2");
    CHECK(std::stod(io::format_double(1.0 / 3.0)) == 1.0 / 3.0);
    const GridSpec g({{0.0, 2.0, 3}}, {{0.0, 0.8, 5}});
    QSet q(g);
    q.set(1, 2);
    q.set(2, 0);
    CHECK(io::to_csv(q) == "s0,a0\n1,0.4\n2,0\n");
}

TEST_CASE("oracle files round trip") {
    const TempDir tmp("oracle");
    const auto m = hovership_model();
    const auto r = compute_viability(m, GridSpec::over(m.state_box, m.action_box, {21}, {17}));
    io::save_oracle(tmp.path, r, "hovership");
    const auto back = io::load_oracle(tmp.path);
    CHECK(back.viable == r.viable);
    CHECK(back.kernel == r.kernel);
    CHECK(back.iterations == r.iterations);
    CHECK(back.trace == r.trace);
    CHECK_THROWS_AS(io::load_oracle(tmp.path / "nope"), Error);
}

TEST_CASE("run artifacts") {
    const TempDir tmp("run");
    const auto cfg = io::parse_config(small_config());
    const auto rec = run_experiment(cfg.experiment);
    io::save_run(tmp.path / "a", rec, cfg.normalized, std::nullopt);
    io::save_run(tmp.path / "b", run_experiment(cfg.experiment), cfg.normalized, std::nullopt);

    for (const char* f : {"run.json", "samples.csv", "khat_initial.json", "khat_final.json",
                          "trajectories/episode_000.csv"}) {
        CHECK(io::read_file(tmp.path / "a" / f) == io::read_file(tmp.path / "b" / f));
    }
    const auto back = io::load_run(tmp.path / "a");
    CHECK(back.khat_final == rec.khat_final);
    CHECK(back.khat_initial == rec.khat_initial);
    CHECK(back.hyper_history == rec.hyper_history);
    CHECK(back.observed_samples() == rec.observed_samples());
    CHECK(back.failure_count() == rec.failure_count());

    const auto samples = io::read_file(tmp.path / "a" / "samples.csv");
    CHECK(samples.rfind("episode,step,s0,a0,label,feasible\n", 0) == 0);
    CHECK(static_cast<std::size_t>(std::count(samples.begin(), samples.end(), '\n')) == rec.sample_count() + 1);

    for (const auto& h : rec.hyper_history) {
        CHECK(io::hyper_from_json(io::hyper_to_json(h)) == h);
    }
    CHECK_THROWS_AS(io::load_run(tmp.path / "missing"), Error);
}

TEST_CASE("evaluate a perfect estimate") {
    const TempDir tmp("eval");
    const auto cfg = io::parse_config(small_config());
    const auto oracle = compute_viability(cfg.experiment.model, cfg.experiment.grid);
    io::save_oracle(tmp.path / "oracle", oracle, "hovership");
    RunRecord rec = run_experiment(cfg.experiment);
    rec.khat_final = oracle.viable;
    io::save_run(tmp.path / "run", rec, cfg.normalized, std::nullopt);

    const auto r = cli::cmd_evaluate(tmp.path / "run", std::nullopt, tmp.path / "oracle");
    CHECK(r.report.at("verdict") == "admissible");
    CHECK(r.report.at("deviation_max_pct") == 0.0);
    CHECK(fs::exists(tmp.path / "run" / "evaluation.json"));
    // recomputing the oracle instead of loading it agrees
    CHECK(cli::cmd_evaluate(tmp.path / "run", cfg, std::nullopt).report == r.report);

    auto other = small_config();
    other["grid"]["state_points"] = {21};
    CHECK_THROWS_AS(cli::cmd_evaluate(tmp.path / "run", io::parse_config(other), std::nullopt), GridMismatch);
}

TEST_CASE("exit codes") {
    CHECK(cli::exit_code(io::ConfigError(io::ConfigErrorKind::Parse, "", "x")) == 3);
    CHECK(cli::exit_code(io::ConfigError(io::ConfigErrorKind::Schema, "/a", "x")) == 4);
    CHECK(cli::exit_code(io::ConfigError(io::ConfigErrorKind::Range, "/a", "x")) == 5);
    CHECK(cli::exit_code(GridMismatch("x")) == 7);
    CHECK(cli::exit_code(cli::GreedySufficiencyViolation("x")) == 8);
    CHECK(cli::exit_code(UnrecoverableConstraint("x")) == 9);
    CHECK(cli::exit_code(PreconditionError("x")) == 10);
    CHECK(cli::exit_code(std::runtime_error("x")) == 1);
}
