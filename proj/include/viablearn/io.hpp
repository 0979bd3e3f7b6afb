#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "viablearn/errors.hpp"
#include "viablearn/experiment.hpp"
#include "viablearn/lattice.hpp"
#include "viablearn/viability.hpp"

namespace viablearn::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kSchemaVersion = 1;

// ---- configuration -------------------------------------------------------

enum class ConfigErrorKind { Parse, Schema, Range };

/// Configuration problem; `path` is a JSON pointer to the offending value.
class ConfigError : public Error {
public:
    ConfigError(ConfigErrorKind k, std::string path, const std::string& what);

    ConfigErrorKind config_kind() const { return config_kind_; }
    const std::string& path() const { return path_; }

private:
    ConfigErrorKind config_kind_;
    std::string path_;
};

struct Config {
    /// Fully populated document (defaults filled in); stored in run.json.
    json normalized;
    std::string model_name;
    ExperimentConfig experiment;
    std::string output_dir;
};

/// Validates the document, fills defaults and builds the runtime objects.
Config parse_config(const json& doc);
Config load_config(const fs::path& path);
/// Minimal document for a named builtin model.
json default_config_document(const std::string& model = "hovership");

// ---- sets ----------------------------------------------------------------

json grid_to_json(const GridSpec& grid);
GridSpec grid_from_json(const json& j);

/// Alternating run lengths starting with a run of `first`.
struct RunLengths {
    bool first = false;
    std::vector<std::size_t> runs;
};
RunLengths rle_encode(const std::vector<bool>& bits);
std::vector<bool> rle_decode(const RunLengths& rle, std::size_t size);

json set_to_json(const QSet& q, const json& meta = json::object());
json set_to_json(const SSet& s, const json& meta = json::object());
QSet qset_from_json(const json& j);
SSet sset_from_json(const json& j);

/// One row per member: state coordinates then action coordinates.
std::string to_csv(const QSet& q);
std::string to_csv(const SSet& s);

// ---- files ---------------------------------------------------------------

/// Writes `content` to a sibling temporary file and renames it into place.
void write_atomic(const fs::path& path, const std::string& content);
std::string read_file(const fs::path& path);
json read_json(const fs::path& path);

/// Shortest decimal that round-trips.
std::string format_double(double x);

// ---- oracle / critical outputs --------------------------------------------

void save_oracle(const fs::path& dir, const ViabilityResult& result, const std::string& model_name);
/// Kernel and viable set (no transition table).
ViabilityResult load_oracle(const fs::path& dir);

void save_critical(const fs::path& dir, const ViabilityResult& result, const NominalPolicy& pi,
                   const std::string& model_name);

// ---- runs ----------------------------------------------------------------

json hyper_to_json(const GpHyper& h);
GpHyper hyper_from_json(const json& j);
json metrics_to_json(const Metrics& m);

std::string samples_csv(const RunRecord& record);
std::string trajectory_csv(const EpisodeLog& episode);

void save_run(const fs::path& dir, const RunRecord& record, const json& config, const std::optional<Metrics>& metrics);
/// Throws Error("missing-artifact", ...) when files are absent.
RunRecord load_run(const fs::path& dir);

}  // namespace viablearn::io
