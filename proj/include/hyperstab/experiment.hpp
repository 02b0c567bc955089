#pragma once

#include "hyperstab/conjugacy.hpp"
#include "hyperstab/rightinverse.hpp"
#include "hyperstab/splitting.hpp"
#include "hyperstab/systems.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hyperstab {

/// Model description as it appears in a config file.
struct ModelSpec {
    std::string kind = "linear_toral";  ///< linear_toral | perturbed_toral | morse_smale_circle | conjugated
    IntMat2 matrix = (IntMat2() << 2, 1, 1, 1).finished();
    double amplitude = 0.0;
    std::vector<TrigTerm> terms;  ///< empty: the default series for the kind
    bool eigenframe = true;
    std::shared_ptr<ModelSpec> base;  ///< conjugated only

    [[nodiscard]] ModelMapPtr build() const;
    [[nodiscard]] TrigSeries series(ManifoldKind kind) const;
};

struct ExperimentConfig {
    ModelSpec model;
    std::optional<ModelSpec> target;
    int resolution = 128;
    std::optional<double> alpha;  ///< empty: auto
    std::optional<int> window;    ///< empty: auto
    std::optional<GraphTransformConstants> graph;  ///< empty: auto
    int n_trunc = 40;
    std::optional<double> series_tolerance;  ///< replaces n_trunc when set
    std::string projectors = "f";            ///< "f" or "g"
    double splitting_tol = 1e-12;
    int splitting_max_iter = 500;
    double solver_tol = 1e-10;
    int solver_max_iter = 60;
    double r_ball = 0.24;
    double eps_ball = 0.5;
    std::vector<double> alphas = {0.25, 0.5, 0.75, 0.9};
    int fields = 10;
    std::uint64_t seed = 1;
    std::size_t pair_budget = 2000;
};

/// Throws Error(ParseError) on malformed JSON and Error(InvalidConfig) on
/// unknown keys or out-of-range values.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// One summary row per command run (also the unit of a sweep).
struct CommandSummary {
    std::string header;
    std::string row;
};

CommandSummary run_splitting(const ExperimentConfig& cfg, const std::filesystem::path& out);
CommandSummary run_conjugacy(const ExperimentConfig& cfg, const std::filesystem::path& out);
CommandSummary run_inverse_check(const ExperimentConfig& cfg, const std::filesystem::path& out);
CommandSummary run_norms(const ExperimentConfig& cfg, const std::filesystem::path& field,
                         const std::filesystem::path& out);

/// Sweep document: {"base": {config}, "parameter": "eps_p" | "resolution" |
/// "alpha", "values": [...], "command": "splitting" | "conjugacy" | "inverse-check"}.
/// Each value runs in out/run_<k>; failures are recorded in sweep.csv and the
/// sweep continues. eps_p sets the target amplitude, or the model amplitude
/// when there is no target.
CommandSummary run_sweep(const std::filesystem::path& sweep_file, const std::filesystem::path& out,
                         std::optional<std::uint64_t> seed);

}  // namespace hyperstab
