#pragma once

#include "geoscore/config.hpp"
#include "geoscore/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace geoscore {

// Config-driven experiment description. `params` carries scenario-specific
// knobs; flags and config files both land here.
struct ExperimentConfig {
    std::string name; // circle_nll_sweep | kde_vs_score | manifold_choice |
                      // bump_manifold | affine_verify | renyi_sweep | custom
    std::uint64_t seed = 1;
    int replicates = 5;
    std::string out_dir = "runs";
    bool full_scale = false; // restore full-scale sample counts
    DiffusionConfig diffusion;
    nlohmann::json params = nlohmann::json::object();

    static ExperimentConfig from_json(const std::string& json_text);
    std::string to_json() const;
};

// One metrics row per sweep point and replicate. Unset metrics are NaN and
// serialize to empty CSV cells.
struct MetricRow {
    std::string kernel; // exact kernel descriptor in effect
    double sigma = 0.0;
    std::uint64_t seed = 0;
    int replicate = 0;
    double dist_to_data_mean = std::numeric_limits<double>::quiet_NaN();
    double dist_to_manifold_mean = std::numeric_limits<double>::quiet_NaN();
    double lateral_mean = std::numeric_limits<double>::quiet_NaN();
    double nll = std::numeric_limits<double>::quiet_NaN();
    double anisotropy_mean = std::numeric_limits<double>::quiet_NaN();
    double d2_renyi = std::numeric_limits<double>::quiet_NaN();
};

struct RunReport {
    std::string experiment;
    std::string output_directory;
    std::vector<MetricRow> rows;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::string build_id;
    std::map<std::string, double> stage_seconds;
    double wall_seconds = 0.0;
    // Scenario-specific scalar results (e.g. the affine residual).
    std::map<std::string, double> scalars;
};

// Executes the named scenario: generates or loads data, builds kernels,
// samples, computes metrics, and writes metrics.csv + report.json + SVG
// plots under <out_dir>/<name>/<timestamp>/.
RunReport run_experiment(const ExperimentConfig& config);

// The CSV serialization used for metrics tables (deterministic bytes).
std::string metrics_csv(const std::vector<MetricRow>& rows);

} // namespace geoscore
