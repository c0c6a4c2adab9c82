#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "geoscore/dataset.hpp"
#include "geoscore/errors.hpp"
#include "geoscore/experiment.hpp"
#include "geoscore/svg.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace geoscore;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("geoscore_harness_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int count_occurrences(const std::string& haystack, const std::string& needle) {
    int n = 0;
    std::size_t pos = 0;
    while ((pos = haystack.find(needle, pos)) != std::string::npos) {
        ++n;
        pos += needle.size();
    }
    return n;
}

ExperimentConfig small_kde_config(const fs::path& out) {
    ExperimentConfig config;
    config.name = "kde_vs_score";
    config.seed = 7;
    config.replicates = 1;
    config.out_dir = out.string();
    config.diffusion.schedule = NoiseSchedule::ve_geometric(0.01, 4.0, 9.0);
    config.diffusion.n_steps = 20;
    config.diffusion.epsilon = 0.01;
    config.diffusion.smoothing_samples = 100;
    config.params["sigmas"] = std::vector<double>{0.05, 0.15};
    config.params["kde_sigmas"] = std::vector<double>{0.05, 0.15};
    config.params["samples"] = 20;
    return config;
}

} // namespace

TEST_CASE("identical config and seed produce byte-identical csv outputs") {
    const fs::path out = temp_dir("determinism");
    const ExperimentConfig config = small_kde_config(out);
    const RunReport a = run_experiment(config);
    const RunReport b = run_experiment(config);
    CHECK(a.output_directory != b.output_directory);
    CHECK(slurp(fs::path(a.output_directory) / "metrics.csv") ==
          slurp(fs::path(b.output_directory) / "metrics.csv"));
    CHECK(slurp(fs::path(a.output_directory) / "samples_score.csv") ==
          slurp(fs::path(b.output_directory) / "samples_score.csv"));
    CHECK(a.config_hash == b.config_hash);

    // a different seed must actually change the outputs
    ExperimentConfig other = config;
    other.seed = 8;
    const RunReport c = run_experiment(other);
    CHECK(slurp(fs::path(a.output_directory) / "metrics.csv") !=
          slurp(fs::path(c.output_directory) / "metrics.csv"));
    fs::remove_all(out);
}

TEST_CASE("metrics rows carry the exact kernel descriptors") {
    const fs::path out = temp_dir("rows");
    const ExperimentConfig config = small_kde_config(out);
    const RunReport report = run_experiment(config);
    REQUIRE(report.rows.size() == 4); // 2 score sigmas + 2 kde sigmas
    for (const auto& row : report.rows) {
        CHECK(row.kernel.find("\"sigma\":") != std::string::npos);
        CHECK(std::isfinite(row.dist_to_data_mean));
        CHECK(std::isfinite(row.dist_to_manifold_mean));
    }
    const std::string csv = metrics_csv(report.rows);
    CHECK(csv.find("kernel,sigma,seed,replicate,dist_to_data_mean,dist_to_manifold_mean,"
                   "lateral_mean,nll,anisotropy_mean,d2_renyi") == 0);
    // unset metrics serialize as empty cells, kernel descriptors are quoted
    CHECK(csv.find(",,") != std::string::npos);
    CHECK(csv.find("\"{\"\"kind\"\"") != std::string::npos);
    fs::remove_all(out);
}

TEST_CASE("affine verify experiment reports the residual") {
    const fs::path out = temp_dir("affine");
    ExperimentConfig config;
    config.name = "affine_verify";
    config.out_dir = out.string();
    config.replicates = 1;
    config.diffusion.schedule = NoiseSchedule::ou(0.0, 1.0);
    const RunReport report = run_experiment(config);
    REQUIRE(report.scalars.count("residual") == 1);
    CHECK(report.scalars.at("residual") < 1e-8);
    CHECK(report.scalars.at("residual_tangent_only") < 1e-12);
    CHECK(fs::exists(fs::path(report.output_directory) / "residual.txt"));
    fs::remove_all(out);
}

TEST_CASE("unknown experiment and invalid config are rejected") {
    ExperimentConfig config;
    config.name = "definitely_not_a_scenario";
    CHECK_THROWS_AS(static_cast<void>(run_experiment(config)), ConfigError);
    CHECK_THROWS_AS(static_cast<void>(ExperimentConfig::from_json("{")), ConfigError);
    CHECK_THROWS_AS(static_cast<void>(ExperimentConfig::from_json(R"({"seed":1})")),
                    ConfigError);
    const ExperimentConfig ok = ExperimentConfig::from_json(
        R"({"name":"custom","seed":3,"replicates":2,"params":{"samples":5}})");
    CHECK(ok.name == "custom");
    CHECK(ok.seed == 3);
    CHECK(ok.params.at("samples").get<int>() == 5);
}

TEST_CASE("svg scatter: distinct marks per series") {
    const fs::path out = temp_dir("svg");
    Matrix triangles(3, 2), dots(5, 2);
    triangles << 0, 0, 1, 0, 0, 1;
    dots << 0.2, 0.2, 0.4, 0.1, 0.6, 0.3, 0.8, 0.9, 0.5, 0.5;
    const fs::path path = out / "scatter.svg";
    emit_svg_scatter({{"training", triangles, "#c23b22", "triangle"},
                      {"generated", dots, "#1f4e9c", "circle"}},
                     {"demo", "x", "y"}, path.string());
    const std::string svg = slurp(path);
    CHECK(count_occurrences(svg, "<polygon") == 3);
    CHECK(count_occurrences(svg, "<circle") == 5);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("nan") == std::string::npos);
    fs::remove_all(out);
}

TEST_CASE("svg lines: one polyline per series, single-point guard") {
    const fs::path out = temp_dir("svg_lines");
    Matrix a(4, 2), b(3, 2), single(1, 2);
    a << 0, 1, 1, 2, 2, 1.5, 3, 3;
    b << 0, 0.5, 1.5, 0.7, 3, 0.2;
    single << 0.7, 0.7;
    const fs::path path = out / "lines.svg";
    emit_svg_lines({{"a", a}, {"b", b}}, {"two series", "x", "y"}, path.string());
    const std::string svg = slurp(path);
    CHECK(count_occurrences(svg, "<polyline") == 2);

    const fs::path single_path = out / "single.svg";
    emit_svg_lines({{"one", single}}, {"degenerate", "x", "y"}, single_path.string());
    const std::string single_svg = slurp(single_path);
    CHECK(count_occurrences(single_svg, "<polyline") == 1);
    CHECK(single_svg.find("nan") == std::string::npos);
    CHECK(single_svg.find("inf") == std::string::npos);
    fs::remove_all(out);
}

TEST_CASE("cli exit codes: success, config error, numerical abort, io error") {
    const std::string cli = GEOSCORE_CLI_PATH;
    const fs::path out = temp_dir("cli");
    auto run = [&](const std::string& args) {
        const std::string cmd = cli + " " + args + " > /dev/null 2>&1";
        const int status = std::system(cmd.c_str());
        return WEXITSTATUS(status);
    };
    CHECK(run("verify-affine --grid-res 32 --out " + (out / "v").string()) == 0);
    CHECK(run("definitely-not-a-subcommand") == 2);
    CHECK(run("sample --circle 4 --sigma -3 --out " + (out / "s.csv").string()) == 2);
    CHECK(run("verify-affine --grid-res 32 --tolerance 1e-30 --out " + (out / "v2").string()) ==
          3);
    CHECK(run("renyi --p " + (out / "missing.gsg").string() + " --q " +
              (out / "missing2.gsg").string()) == 4);
    CHECK(run("kde --dataset " + (out / "missing.csv").string() + " --sigma 0.1 --out " +
              (out / "k.csv").string()) == 4);
    fs::remove_all(out);
}

TEST_CASE("scenario smoke: circle_nll_sweep emits a curve and rows") {
    const fs::path out = temp_dir("nll_smoke");
    ExperimentConfig config;
    config.name = "circle_nll_sweep";
    config.seed = 5;
    config.replicates = 1;
    config.out_dir = out.string();
    config.diffusion.schedule = NoiseSchedule::ve_geometric(0.01, 4.0, 9.0);
    config.diffusion.n_steps = 20;
    config.diffusion.epsilon = 0.01;
    config.diffusion.smoothing_samples = 100;
    config.params["sigmas"] = std::vector<double>{0.05, 0.2};
    config.params["eval_points"] = 16;
    const RunReport report = run_experiment(config);
    REQUIRE(report.rows.size() == 2);
    for (const auto& row : report.rows) CHECK(std::isfinite(row.nll));
    CHECK(fs::exists(fs::path(report.output_directory) / "nll_curve.svg"));
    CHECK(fs::exists(fs::path(report.output_directory) / "metrics.csv"));
    CHECK(fs::exists(fs::path(report.output_directory) / "report.json"));
    fs::remove_all(out);
}

TEST_CASE("scenario smoke: manifold_choice samples under different kernels") {
    const fs::path out = temp_dir("choice_smoke");
    ExperimentConfig config;
    config.name = "manifold_choice";
    config.seed = 5;
    config.replicates = 1;
    config.out_dir = out.string();
    config.diffusion.schedule = NoiseSchedule::ve_geometric(0.01, 4.0, 9.0);
    config.diffusion.n_steps = 20;
    config.diffusion.epsilon = 0.01;
    config.diffusion.smoothing_samples = 100;
    config.params["sigmas"] = std::vector<double>{0.1};
    config.params["samples"] = 10;
    config.params["resolution"] = 256;
    const RunReport report = run_experiment(config);
    REQUIRE(report.rows.size() == 3); // one iso + two adapted kernels
    CHECK(fs::exists(fs::path(report.output_directory) / "manifold_choice.svg"));
    fs::remove_all(out);
}

TEST_CASE("scenario smoke: renyi_sweep produces divergences") {
    const fs::path out = temp_dir("renyi_smoke");
    ExperimentConfig config;
    config.name = "renyi_sweep";
    config.seed = 5;
    config.replicates = 1;
    config.out_dir = out.string();
    config.diffusion.schedule = NoiseSchedule::ve_geometric(0.01, 4.0, 9.0);
    config.diffusion.epsilon = 0.01;
    config.params["sigmas"] = std::vector<double>{0.02, 0.12};
    config.params["cell_samples"] = 60;
    config.params["grid_resolution"] = 24;
    const RunReport report = run_experiment(config);
    REQUIRE(report.rows.size() == 2);
    for (const auto& row : report.rows) {
        CHECK(std::isfinite(row.d2_renyi));
        CHECK(row.d2_renyi >= 0.0);
    }
    CHECK(fs::exists(fs::path(report.output_directory) / "renyi_curve.svg"));
    fs::remove_all(out);
}

TEST_CASE("scenario smoke: bump_manifold with an eta sweep") {
    const fs::path out = temp_dir("bump_smoke");
    ExperimentConfig config;
    config.name = "bump_manifold";
    config.seed = 5;
    config.replicates = 1;
    config.out_dir = out.string();
    config.diffusion.schedule = NoiseSchedule::ve_geometric(0.01, 30.0, 9.0);
    config.diffusion.n_steps = 20;
    config.diffusion.epsilon = 0.01;
    config.params["sigmas"] = std::vector<double>{2.6};
    config.params["adapted_sigmas"] = std::vector<double>{5.0};
    config.params["eta_list"] = std::vector<double>{0.15, 0.25};
    config.params["samples"] = 2;
    config.params["iso_smoothing"] = 200;
    config.params["adapted_smoothing"] = 100;
    config.params["proj_nodes"] = 64;
    config.params["metric_nodes"] = 100;
    const RunReport report = run_experiment(config);
    REQUIRE(report.rows.size() == 4); // (iso + adapted) x 2 etas
    for (const auto& row : report.rows) {
        CHECK(std::isfinite(row.dist_to_manifold_mean));
        CHECK(std::isfinite(row.anisotropy_mean));
    }
    CHECK(fs::exists(fs::path(report.output_directory) / "bump_distances.svg"));
    fs::remove_all(out);
}

TEST_CASE("scenario smoke: custom experiment from a dataset file") {
    const fs::path out = temp_dir("custom_smoke");
    const fs::path data_path = out / "data.csv";
    save_dataset(circle_dataset(8, 1.0), data_path.string(), FileFormat::CsvRows);
    ExperimentConfig config;
    config.name = "custom";
    config.seed = 5;
    config.replicates = 1;
    config.out_dir = out.string();
    config.diffusion.schedule = NoiseSchedule::ve_geometric(0.01, 4.0, 9.0);
    config.diffusion.n_steps = 20;
    config.diffusion.epsilon = 0.01;
    config.diffusion.smoothing_samples = 100;
    config.params["dataset"] = {{"path", data_path.string()}, {"format", "csv"}};
    config.params["kernels"] = nlohmann::json::array(
        {{{"kind", "isotropic_gaussian"}, {"sigma", 0.1}}});
    config.params["manifold"] = {{"kind", "circle"}, {"radius", 1.0}};
    config.params["samples"] = 10;
    const RunReport report = run_experiment(config);
    REQUIRE(report.rows.size() == 1);
    CHECK(std::isfinite(report.rows[0].dist_to_manifold_mean));
    fs::remove_all(out);
}
