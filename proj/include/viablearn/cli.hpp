#pragma once

#include <exception>
#include <filesystem>
#include <optional>

#include "viablearn/io.hpp"

namespace viablearn::cli {

namespace fs = std::filesystem;

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<fs::path> out;
    bool conservative_membership = false;
};

/// Applies command-line overrides to a parsed config (document and runtime objects).
void apply(io::Config& config, const Overrides& o);

struct CommandResult {
    fs::path out_dir;
    io::json report;
};

/// q_viable.json, s_kernel.json, viability.csv.
CommandResult cmd_viability(const io::Config& config);
/// q_critical.json, critical.csv, opt_graph.json, opt_policy.csv (+ the oracle files).
CommandResult cmd_critical(const io::Config& config);
/// Run directory: run.json, samples.csv, khat_*.json, trajectories/.
CommandResult cmd_learn(const io::Config& config);
/// Recomputes metrics and the admissibility verdict for a stored run and
/// writes evaluation.json into it. Uses the stored oracle when given.
CommandResult cmd_evaluate(const fs::path& run_dir, const std::optional<io::Config>& config,
                           const std::optional<fs::path>& oracle_dir);

/// Raised when an admissible K-hat does not reproduce the optimal policy.
class GreedySufficiencyViolation : public Error {
public:
    explicit GreedySufficiencyViolation(const std::string& what) : Error("greedy-sufficiency", what) {}
};

int exit_code(const std::exception& e);

/// Full command-line entry point; returns the process exit code.
int main(int argc, char** argv);

}  // namespace viablearn::cli
