#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>
#include <system_error>

#include "viablearn/io.hpp"
#include "viablearn/policy.hpp"

namespace viablearn::io {

namespace {

json axes_json(const std::vector<Axis>& axes) {
    json a = json::array();
    for (const auto& ax : axes) {
        a.push_back({{"lower", ax.lower}, {"upper", ax.upper}, {"points", ax.points}});
    }
    return a;
}

std::vector<Axis> axes_from(const json& j) {
    std::vector<Axis> out;
    for (const auto& a : j) {
        out.push_back({a.at("lower").get<double>(), a.at("upper").get<double>(), a.at("points").get<std::size_t>()});
    }
    return out;
}

Error bad_set(const std::string& what) { return Error("set-format", what); }

void append_coords(std::string& out, const Eigen::VectorXd& x) {
    for (Eigen::Index d = 0; d < x.size(); ++d) {
        if (!out.empty() && out.back() != '\n') {
            out += ',';
        }
        out += format_double(x[d]);
    }
}

std::string header(const GridSpec& g, bool with_actions) {
    std::string h;
    for (std::size_t d = 0; d < g.state_dim(); ++d) {
        h += (d ? ",s" : "s") + std::to_string(d);
    }
    if (with_actions) {
        for (std::size_t d = 0; d < g.action_dim(); ++d) {
            h += ",a" + std::to_string(d);
        }
    }
    return h + "\n";
}

template <typename Set>
std::vector<bool> bits_of(const Set& s) {
    std::vector<bool> bits(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
        if constexpr (std::is_same_v<Set, QSet>) {
            bits[k] = s.contains_flat(k);
        } else {
            bits[k] = s.contains(k);
        }
    }
    return bits;
}

json set_doc(const char* kind, const GridSpec& g, const std::vector<bool>& bits, std::size_t count, const json& meta) {
    const auto rle = rle_encode(bits);
    json doc = {{"schema_version", kSchemaVersion},
                {"kind", kind},
                {"grid", grid_to_json(g)},
                {"count", count},
                {"rle", {{"first", rle.first}, {"runs", rle.runs}}}};
    if (!meta.empty()) {
        doc["meta"] = meta;
    }
    return doc;
}

std::vector<bool> bits_from(const json& j, const char* kind, std::size_t size) {
    if (j.value("kind", std::string()) != kind) {
        throw bad_set(std::string("expected a set of kind '") + kind + "'");
    }
    RunLengths rle;
    rle.first = j.at("rle").at("first").get<bool>();
    rle.runs = j.at("rle").at("runs").get<std::vector<std::size_t>>();
    auto bits = rle_decode(rle, size);
    const auto n = static_cast<std::size_t>(std::count(bits.begin(), bits.end(), true));
    if (j.contains("count") && j.at("count").get<std::size_t>() != n) {
        throw bad_set("member count does not match the bitmap");
    }
    return bits;
}

}  // namespace

std::string format_double(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, r.ptr);
}

json grid_to_json(const GridSpec& grid) {
    return {{"state_axes", axes_json(grid.state_axes())}, {"action_axes", axes_json(grid.action_axes())}};
}

GridSpec grid_from_json(const json& j) { return GridSpec(axes_from(j.at("state_axes")), axes_from(j.at("action_axes"))); }

RunLengths rle_encode(const std::vector<bool>& bits) {
    RunLengths r;
    if (bits.empty()) {
        return r;
    }
    r.first = bits.front();
    bool cur = r.first;
    std::size_t run = 0;
    for (bool b : bits) {
        if (b == cur) {
            ++run;
        } else {
            r.runs.push_back(run);
            cur = b;
            run = 1;
        }
    }
    r.runs.push_back(run);
    return r;
}

std::vector<bool> rle_decode(const RunLengths& rle, std::size_t size) {
    std::vector<bool> bits;
    bits.reserve(size);
    bool cur = rle.first;
    for (auto n : rle.runs) {
        if (bits.size() + n > size) {
            throw bad_set("run lengths exceed the grid size");
        }
        bits.insert(bits.end(), n, cur);
        cur = !cur;
    }
    if (bits.size() != size) {
        throw bad_set("run lengths do not cover the grid");
    }
    return bits;
}

json set_to_json(const QSet& q, const json& meta) { return set_doc("qset", q.grid(), bits_of(q), q.count(), meta); }
json set_to_json(const SSet& s, const json& meta) { return set_doc("sset", s.grid(), bits_of(s), s.count(), meta); }

QSet qset_from_json(const json& j) {
    QSet q(grid_from_json(j.at("grid")));
    const auto bits = bits_from(j, "qset", q.size());
    for (std::size_t k = 0; k < bits.size(); ++k) {
        q.set_flat(k, bits[k]);
    }
    return q;
}

SSet sset_from_json(const json& j) {
    SSet s(grid_from_json(j.at("grid")));
    const auto bits = bits_from(j, "sset", s.size());
    for (std::size_t k = 0; k < bits.size(); ++k) {
        s.set(k, bits[k]);
    }
    return s;
}

std::string to_csv(const QSet& q) {
    const auto& g = q.grid();
    std::string out = header(g, true);
    for (std::size_t i = 0; i < g.state_count(); ++i) {
        for (std::size_t j = 0; j < g.action_count(); ++j) {
            if (q.contains(i, j)) {
                append_coords(out, g.state_point(i));
                append_coords(out, g.action_point(j));
                out += '\n';
            }
        }
    }
    return out;
}

std::string to_csv(const SSet& s) {
    const auto& g = s.grid();
    std::string out = header(g, false);
    for (auto i : s.cells()) {
        append_coords(out, g.state_point(i));
        out += '\n';
    }
    return out;
}

void write_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("io", "cannot write " + tmp.string());
        }
        out << content;
        if (!out.flush()) {
            throw Error("io", "short write to " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("missing-artifact", "cannot read " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json read_json(const fs::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw Error("artifact-format", path.string() + ": " + e.what());
    }
}

void save_oracle(const fs::path& dir, const ViabilityResult& result, const std::string& model_name) {
    const json meta = {{"model", model_name},
                       {"grid", grid_to_json(result.viable.grid())},
                       {"iterations", result.iterations},
                       {"trace", result.trace}};
    write_atomic(dir / "q_viable.json", set_to_json(result.viable, meta).dump() + "\n");
    write_atomic(dir / "s_kernel.json", set_to_json(result.kernel, meta).dump() + "\n");
    write_atomic(dir / "viability.csv", to_csv(result.viable));
}

ViabilityResult load_oracle(const fs::path& dir) {
    const json q = read_json(dir / "q_viable.json");
    const json s = read_json(dir / "s_kernel.json");
    ViabilityResult r;
    r.viable = qset_from_json(q);
    r.kernel = sset_from_json(s);
    if (!(r.viable.grid() == r.kernel.grid())) {
        throw GridMismatch("stored kernel and viable set use different grids");
    }
    if (q.contains("meta")) {
        r.iterations = q.at("meta").value("iterations", 0);
        r.trace = q.at("meta").value("trace", std::vector<std::size_t>{});
    }
    return r;
}

void save_critical(const fs::path& dir, const ViabilityResult& result, const NominalPolicy& pi,
                   const std::string& model_name) {
    const auto& g = result.viable.grid();
    const json meta = {{"model", model_name}, {"grid", grid_to_json(g)}};
    const QSet crit = pi.deterministic() ? critical_set(result, pi) : critical_set_stochastic(result);
    write_atomic(dir / "q_critical.json", set_to_json(crit, meta).dump() + "\n");
    write_atomic(dir / "critical.csv", to_csv(crit));
    if (!pi.deterministic()) {
        return;
    }
    write_atomic(dir / "opt_graph.json", set_to_json(opt_graph(result, pi), meta).dump() + "\n");
    const auto table = optimal_policy(result.viable, pi);
    std::string csv = header(g, true);
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (table[i]) {
            append_coords(csv, g.state_point(i));
            append_coords(csv, g.action_point(*table[i]));
            csv += '\n';
        }
    }
    write_atomic(dir / "opt_policy.csv", csv);
}

}  // namespace viablearn::io
