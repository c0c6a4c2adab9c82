#include "geoscore/experiment.hpp"

#include "geoscore/dataset.hpp"
#include "geoscore/errors.hpp"
#include "geoscore/grid_density.hpp"
#include "geoscore/metrics.hpp"
#include "geoscore/renyi.hpp"
#include "geoscore/rng.hpp"
#include "geoscore/svg.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace geoscore {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kBuildId = "geoscore-0.1.0";

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += "\"";
    return out;
}

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string timestamp_dir(const fs::path& parent) {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d%02d%02d-%02d%02d%02d", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
    std::string stem = buf;
    std::string candidate = stem;
    int suffix = 1;
    while (fs::exists(parent / candidate)) candidate = stem + "-" + std::to_string(++suffix);
    return candidate;
}

class StageTimer {
public:
    explicit StageTimer(std::map<std::string, double>& sink) : sink_(sink) {}
    void start(const std::string& stage) {
        flush();
        stage_ = stage;
        begin_ = std::chrono::steady_clock::now();
    }
    void flush() {
        if (stage_.empty()) return;
        const auto end = std::chrono::steady_clock::now();
        sink_[stage_] += std::chrono::duration<double>(end - begin_).count();
        stage_.clear();
    }

private:
    std::map<std::string, double>& sink_;
    std::string stage_;
    std::chrono::steady_clock::time_point begin_;
};

void write_text(const fs::path& path, const std::string& body) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << body;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_samples_csv(const fs::path& path, const Matrix& samples) {
    std::ostringstream os;
    for (Index i = 0; i < samples.rows(); ++i) {
        for (Index j = 0; j < samples.cols(); ++j)
            os << (j ? "," : "") << fmt17(samples(i, j));
        os << "\n";
    }
    write_text(path, os.str());
}

std::vector<double> sigma_list(const json& params, const char* key,
                               std::vector<double> fallback) {
    if (params.contains(key)) return params.at(key).get<std::vector<double>>();
    return fallback;
}

NoiseSchedule default_ve_schedule(const Dataset& dataset) {
    const double sigma_max = std::max(2.0 * dataset.diameter(), 0.02);
    return NoiseSchedule::ve_geometric(0.01, sigma_max, 9.0);
}

std::shared_ptr<const EmpiricalScore> make_score(const Dataset& dataset,
                                                 const NoiseSchedule& schedule) {
    return std::make_shared<EmpiricalScore>(dataset, schedule);
}

Matrix circle_eval_points(int n, double radius) {
    Matrix pts(n, 2);
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    for (int i = 0; i < n; ++i) {
        const double theta = kTwoPi * i / n;
        pts(i, 0) = radius * std::cos(theta);
        pts(i, 1) = radius * std::sin(theta);
    }
    return pts;
}

// ---------------------------------------------------------------------------
// Scenarios

void run_circle_nll_sweep(const ExperimentConfig& config, RunReport& report, const fs::path& dir,
                          StageTimer& timer) {
    const json& p = config.params;
    timer.start("dataset");
    const Dataset data = circle_dataset(p.value("train_points", 12), p.value("radius", 1.0));
    DiffusionConfig diff = config.diffusion;
    diff.schedule = default_ve_schedule(data);
    const auto score = make_score(data, diff.schedule);
    const auto sigmas = sigma_list(p, "sigmas", {0.02, 0.05, 0.09, 0.15, 0.25, 0.4});
    const int eval_n = p.value("eval_points", config.full_scale ? 1000 : 200);
    const Matrix eval_points = circle_eval_points(eval_n, p.value("radius", 1.0));

    timer.start("nll");
    RngStream root(config.seed);
    for (int rep = 0; rep < config.replicates; ++rep) {
        // One substream per replicate, shared across sigmas (paired seeds).
        for (std::size_t si = 0; si < sigmas.size(); ++si) {
            auto kernel = std::make_shared<IsotropicGaussian>(sigmas[si]);
            const SmoothedScoreModel model(score, kernel, diff.smoothing_samples);
            RngStream rng = root.child("replicate", static_cast<std::uint64_t>(rep));
            MetricRow row;
            row.kernel = kernel->describe();
            row.sigma = sigmas[si];
            row.seed = config.seed;
            row.replicate = rep;
            row.nll = nll(model, diff, eval_points, rng);
            report.rows.push_back(std::move(row));
        }
    }

    timer.start("plots");
    Matrix curve(static_cast<Index>(sigmas.size()), 2);
    for (std::size_t si = 0; si < sigmas.size(); ++si) {
        std::vector<double> vals;
        for (const auto& row : report.rows)
            if (row.sigma == sigmas[si]) vals.push_back(row.nll);
        curve(static_cast<Index>(si), 0) = sigmas[si];
        curve(static_cast<Index>(si), 1) = median(vals);
    }
    emit_svg_lines({{"median NLL", curve, "#1f4e9c", "circle"}},
                   {"Population NLL vs smoothing scale", "sigma", "NLL (nats)"},
                   (dir / "nll_curve.svg").string());
}

void run_kde_vs_score(const ExperimentConfig& config, RunReport& report, const fs::path& dir,
                      StageTimer& timer) {
    const json& p = config.params;
    timer.start("dataset");
    const Dataset data = circle_dataset(p.value("train_points", 12), p.value("radius", 1.0));
    const ManifoldPtr manifold = make_circle(p.value("radius", 1.0));
    DiffusionConfig diff = config.diffusion;
    diff.schedule = default_ve_schedule(data);
    const auto score = make_score(data, diff.schedule);
    const auto score_sigmas = sigma_list(p, "sigmas", {0.03, 0.06, 0.1, 0.15, 0.22});
    const auto kde_sigmas = sigma_list(p, "kde_sigmas", {0.03, 0.06, 0.1, 0.15, 0.22});
    const int n_generate = p.value("samples", config.full_scale ? 500 : 100);

    RngStream root(config.seed);
    timer.start("sampling");
    Matrix example_score, example_kde;
    for (int rep = 0; rep < config.replicates; ++rep) {
        RngStream rep_rng = root.child("replicate", static_cast<std::uint64_t>(rep));
        for (std::size_t si = 0; si < score_sigmas.size(); ++si) {
            auto kernel = std::make_shared<IsotropicGaussian>(score_sigmas[si]);
            const SmoothedScoreModel model(score, kernel, diff.smoothing_samples);
            RngStream rng = rep_rng.child("score", static_cast<std::uint64_t>(si));
            const Matrix samples = reverse_sde_sample(model, diff, n_generate, rng);
            if (rep == 0 && si == score_sigmas.size() / 2) example_score = samples;
            const SampleMetrics m = summarize_samples(samples, data, *manifold);
            MetricRow row;
            row.kernel = kernel->describe();
            row.sigma = score_sigmas[si];
            row.seed = config.seed;
            row.replicate = rep;
            row.dist_to_data_mean = m.mean_dist_data;
            row.dist_to_manifold_mean = m.mean_dist_manifold;
            row.lateral_mean = m.mean_lateral;
            report.rows.push_back(std::move(row));
        }
        for (std::size_t si = 0; si < kde_sigmas.size(); ++si) {
            RngStream rng = rep_rng.child("kde", static_cast<std::uint64_t>(si));
            const Matrix samples = kde_sample(data, kde_sigmas[si], n_generate, rng);
            if (rep == 0 && si == kde_sigmas.size() / 2) example_kde = samples;
            const SampleMetrics m = summarize_samples(samples, data, *manifold);
            MetricRow row;
            std::ostringstream desc;
            desc << "{\"kind\":\"kde\",\"sigma\":" << kde_sigmas[si] << "}";
            row.kernel = desc.str();
            row.sigma = kde_sigmas[si];
            row.seed = config.seed;
            row.replicate = rep;
            row.dist_to_data_mean = m.mean_dist_data;
            row.dist_to_manifold_mean = m.mean_dist_manifold;
            row.lateral_mean = m.mean_lateral;
            report.rows.push_back(std::move(row));
        }
    }

    timer.start("plots");
    auto curve_for = [&](const std::string& tag, const std::vector<double>& sigmas) {
        Matrix curve(static_cast<Index>(sigmas.size()), 2);
        for (std::size_t si = 0; si < sigmas.size(); ++si) {
            std::vector<double> dd, dm;
            for (const auto& row : report.rows) {
                if (row.sigma == sigmas[si] && row.kernel.find(tag) != std::string::npos) {
                    dd.push_back(row.dist_to_data_mean);
                    dm.push_back(row.dist_to_manifold_mean);
                }
            }
            curve(static_cast<Index>(si), 0) = median(dd);
            curve(static_cast<Index>(si), 1) = median(dm);
        }
        return curve;
    };
    emit_svg_lines({{"score smoothing", curve_for("isotropic_gaussian", score_sigmas),
                     "#1f4e9c", "circle"},
                    {"kde", curve_for("\"kde\"", kde_sigmas), "#c23b22", "circle"}},
                   {"Distance to manifold vs distance to data", "mean distance to data",
                    "mean distance to manifold"},
                   (dir / "kde_vs_score.svg").string());
    if (example_score.rows() > 0) {
        emit_svg_scatter({{"training", data.points(), "#c23b22", "triangle"},
                          {"score-smoothed", example_score, "#1f4e9c", "circle"},
                          {"kde", example_kde, "#3c9d4e", "circle"}},
                         {"Generated samples", "x", "y"}, (dir / "samples.svg").string());
        write_samples_csv(dir / "samples_score.csv", example_score);
        write_samples_csv(dir / "samples_kde.csv", example_kde);
    }
}

void run_manifold_choice(const ExperimentConfig& config, RunReport& report, const fs::path& dir,
                         StageTimer& timer) {
    const json& p = config.params;
    timer.start("dataset");
    const double base_r = p.value("base_radius", 1.0);
    const double amp = p.value("amplitude", 0.15);
    const int freq = p.value("frequency", 8);
    const int resolution = p.value("resolution", 1024);
    const ManifoldPtr wavy = make_wavy_circle(base_r, amp, freq, resolution);
    const ManifoldPtr circle = make_circle(base_r);

    RngStream root(config.seed);
    RngStream data_rng = root.child("dataset");
    const int train_n = p.value("train_points", 24);
    const Dataset data(wavy->sample_uniform(train_n, data_rng, true));
    DiffusionConfig diff = config.diffusion;
    diff.schedule = default_ve_schedule(data);
    const auto score = make_score(data, diff.schedule);
    const auto iso_sigmas = sigma_list(p, "sigmas", {0.1, 0.25, 1.0});
    const double adapted_sigma = p.value("adapted_sigma", 0.15);
    const int n_generate = p.value("samples", config.full_scale ? 500 : 100);
    const double mu_eps = diff.schedule.mu_sigma(diff.epsilon).mu;

    std::vector<std::pair<std::string, KernelPtr>> kernels;
    for (double s : iso_sigmas)
        kernels.emplace_back("iso", std::make_shared<IsotropicGaussian>(s));
    kernels.emplace_back("wavy_adapted",
                         std::make_shared<LevelSetAdapted>(
                             std::make_shared<IsotropicGaussian>(adapted_sigma), wavy, mu_eps));
    kernels.emplace_back("circle_adapted",
                         std::make_shared<LevelSetAdapted>(
                             std::make_shared<IsotropicGaussian>(adapted_sigma), circle, mu_eps));

    timer.start("sampling");
    std::vector<SvgSeries> scatter{{"training", data.points(), "#c23b22", "triangle"}};
    for (int rep = 0; rep < config.replicates; ++rep) {
        RngStream rep_rng = root.child("replicate", static_cast<std::uint64_t>(rep));
        for (std::size_t ki = 0; ki < kernels.size(); ++ki) {
            const auto& [tag, kernel] = kernels[ki];
            const SmoothedScoreModel model(score, kernel, diff.smoothing_samples);
            RngStream rng = rep_rng.child("kernel", static_cast<std::uint64_t>(ki));
            const Matrix samples = reverse_sde_sample(model, diff, n_generate, rng);
            const SampleMetrics m = summarize_samples(samples, data, *wavy);
            MetricRow row;
            row.kernel = kernel->describe();
            row.sigma = ki < iso_sigmas.size() ? iso_sigmas[ki] : adapted_sigma;
            row.seed = config.seed;
            row.replicate = rep;
            row.dist_to_data_mean = m.mean_dist_data;
            row.dist_to_manifold_mean = m.mean_dist_manifold;
            row.lateral_mean = m.mean_lateral;
            report.rows.push_back(std::move(row));
            if (rep == 0) {
                static const char* colors[] = {"#1f4e9c", "#3c9d4e", "#8e5dab",
                                               "#d98a2b", "#4db6ac"};
                scatter.push_back({tag + " samples", samples,
                                   colors[ki % 5], "circle"});
                write_samples_csv(dir / ("samples_" + tag + "_" + std::to_string(ki) + ".csv"),
                                  samples);
            }
        }
    }

    timer.start("plots");
    emit_svg_scatter(scatter, {"Kernel choice selects the interpolating manifold", "x", "y"},
                     (dir / "manifold_choice.svg").string());
}

void run_bump_manifold(const ExperimentConfig& config, RunReport& report, const fs::path& dir,
                       StageTimer& timer) {
    const json& p = config.params;
    const int side = p.value("side", 64);
    const int train_n = p.value("train_points", 16);
    const double circle_r = p.value("circle_radius", 0.5);
    const int proj_nodes = p.value("proj_nodes", config.full_scale ? 1024 : 128);
    const int metric_nodes = p.value("metric_nodes", 1000);
    const int chains = p.value("samples", config.full_scale ? 100 : 16);
    const int iso_smoothing = p.value("iso_smoothing", config.full_scale ? 50000 : 5000);
    const int adapted_smoothing = p.value("adapted_smoothing", 1000);
    const auto iso_sigmas = sigma_list(p, "sigmas", {1.8, 2.2, 2.6});
    const auto adapted_sigmas = sigma_list(p, "adapted_sigmas", {3.5, 4.2, 5.0});
    std::vector<double> etas = {p.value("eta", 0.2)};
    if (p.contains("eta_list")) etas = p.at("eta_list").get<std::vector<double>>();

    RngStream root(config.seed);
    for (std::size_t ei = 0; ei < etas.size(); ++ei) {
        const double eta = etas[ei];
        timer.start("dataset");
        const ManifoldPtr kernel_manifold = make_bump_curve(eta, side, circle_r, proj_nodes);
        const ManifoldPtr metric_manifold = make_bump_curve(eta, side, circle_r, metric_nodes);
        Matrix train(train_n, static_cast<Index>(side) * side);
        constexpr double kTwoPi = 6.283185307179586476925286766559;
        for (int i = 0; i < train_n; ++i)
            train.row(i) = bump_image(eta, side, circle_r, kTwoPi * i / train_n).transpose();
        const Dataset data(train);
        DiffusionConfig diff = config.diffusion;
        diff.schedule = default_ve_schedule(data);
        const auto score = make_score(data, diff.schedule);

        auto run_one = [&](const std::string& tag, const KernelPtr& kernel, double sigma,
                           int smoothing, int rep) {
            const SmoothedScoreModel model(score, kernel, smoothing);
            RngStream rng = root.child(tag + "/" + std::to_string(eta) + "/" +
                                           std::to_string(sigma),
                                       static_cast<std::uint64_t>(rep));
            const Matrix samples = reverse_sde_sample(model, diff, chains, rng);
            const SampleMetrics m = summarize_samples(samples, data, *metric_manifold);
            double aniso_sum = 0.0;
            int aniso_n = 0;
            for (Index i = 0; i < samples.rows(); ++i) {
                try {
                    aniso_sum += anisotropy(samples.row(i).transpose(), side);
                    ++aniso_n;
                } catch (const std::runtime_error&) {
                    // all-zero after thresholding; skip
                }
            }
            MetricRow row;
            row.kernel = kernel->describe();
            row.sigma = sigma;
            row.seed = config.seed;
            row.replicate = rep;
            row.dist_to_data_mean = m.mean_dist_data;
            row.dist_to_manifold_mean = m.mean_dist_manifold;
            row.lateral_mean = m.mean_lateral;
            if (aniso_n > 0) row.anisotropy_mean = aniso_sum / aniso_n;
            report.rows.push_back(std::move(row));
        };

        timer.start("sampling");
        for (int rep = 0; rep < config.replicates; ++rep) {
            for (double s : iso_sigmas)
                run_one("iso", std::make_shared<IsotropicGaussian>(s), s, iso_smoothing, rep);
            for (double s : adapted_sigmas)
                run_one("adapted",
                        std::make_shared<ShiftedManifoldAdapted>(s, kernel_manifold, proj_nodes),
                        s, adapted_smoothing, rep);
        }
    }

    timer.start("plots");
    auto curve_for = [&](const std::string& tag) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& row : report.rows)
            if (row.kernel.find(tag) != std::string::npos)
                pts.emplace_back(row.dist_to_data_mean, row.dist_to_manifold_mean);
        std::sort(pts.begin(), pts.end());
        Matrix curve(static_cast<Index>(pts.size()), 2);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            curve(static_cast<Index>(i), 0) = pts[i].first;
            curve(static_cast<Index>(i), 1) = pts[i].second;
        }
        return curve;
    };
    const Matrix iso_curve = curve_for("isotropic_gaussian");
    const Matrix adapted_curve = curve_for("shifted_manifold_adapted");
    if (iso_curve.rows() + adapted_curve.rows() > 0) {
        std::vector<SvgSeries> series;
        if (iso_curve.rows() > 0)
            series.push_back({"isotropic", iso_curve, "#1f4e9c", "circle"});
        if (adapted_curve.rows() > 0)
            series.push_back({"manifold-adapted", adapted_curve, "#c23b22", "circle"});
        emit_svg_lines(series,
                       {"Bump-image manifold: distance to manifold vs data",
                        "mean distance to data", "mean distance to manifold"},
                       (dir / "bump_distances.svg").string());
    }
}

void run_affine_verify(const ExperimentConfig& config, RunReport& report, const fs::path& dir,
                       StageTimer& timer) {
    const json& p = config.params;
    timer.start("dataset");
    const int n_train = p.value("train_points", 5);
    Matrix pts(n_train, 2);
    for (int i = 0; i < n_train; ++i) {
        pts(i, 0) = -1.0 + 2.0 * i / (n_train - 1);
        pts(i, 1) = 0.0;
    }
    const Dataset data(pts);
    Matrix a(1, 2);
    a << 0.0, 1.0; // the line y = 0
    const ManifoldPtr line = make_affine(a, Vector::Zero(1));
    const NoiseSchedule schedule = NoiseSchedule::ou(0.0, 1.0);
    const EmpiricalScore score(data, schedule);

    const double h = p.value("h", 0.1);
    const double epsilon = p.value("epsilon", 0.01);
    const int res = p.value("grid_resolution", 64);
    const double lo = p.value("grid_lo", -2.0);
    const double hi = p.value("grid_hi", 2.0);
    Grid grid{{{lo, hi}, {lo, hi}}, {res, res}};

    timer.start("residual");
    const double residual = adapted_residual(score, *line, h, epsilon, grid);
    // Stencil restricted to the tangent axis: the kernel is its own adapted
    // version, so the residual collapses to rounding noise.
    const std::vector<Index> tangent_axis{0};
    const double residual_tangent =
        adapted_residual(score, *line, h, epsilon, grid, &tangent_axis);

    report.scalars["residual"] = residual;
    report.scalars["residual_tangent_only"] = residual_tangent;
    MetricRow row;
    std::ostringstream desc;
    desc << "{\"kind\":\"fixed_stencil\",\"h\":" << h << "}";
    row.kernel = desc.str();
    row.sigma = h;
    row.seed = config.seed;
    row.replicate = 0;
    row.d2_renyi = residual;
    report.rows.push_back(std::move(row));

    timer.start("plots");
    std::ostringstream note;
    note << "residual=" << fmt17(residual) << "\nresidual_tangent_only="
         << fmt17(residual_tangent) << "\n";
    write_text(dir / "residual.txt", note.str());
}

void run_renyi_sweep(const ExperimentConfig& config, RunReport& report, const fs::path& dir,
                     StageTimer& timer) {
    const json& p = config.params;
    timer.start("dataset");
    const Dataset data = circle_dataset(p.value("train_points", 12), p.value("radius", 1.0));
    const ManifoldPtr circle = make_circle(p.value("radius", 1.0));
    DiffusionConfig diff = config.diffusion;
    diff.schedule = default_ve_schedule(data);
    const auto score = make_score(data, diff.schedule);
    const auto sigmas = sigma_list(p, "sigmas", {0.02, 0.06, 0.12});
    const int cell_samples = p.value("cell_samples", config.full_scale ? 2000 : 800);
    const double span = p.value("grid_span", 1.6);
    const int res = p.value("grid_resolution", 96);
    const Grid grid{{{-span, span}, {-span, span}}, {res, res}};
    const double mu_eps = diff.schedule.mu_sigma(diff.epsilon).mu;

    timer.start("grids");
    RngStream root(config.seed);
    for (int rep = 0; rep < config.replicates; ++rep) {
        RngStream rep_rng = root.child("replicate", static_cast<std::uint64_t>(rep));
        for (double s : sigmas) {
            auto base = std::make_shared<IsotropicGaussian>(s);
            const SmoothedScoreModel plain(score, base, cell_samples);
            const SmoothedScoreModel adapted(
                score, std::make_shared<LevelSetAdapted>(base, circle, mu_eps), cell_samples);
            // Same per-point substreams across sigma: paired comparison.
            RngStream plain_rng = rep_rng.child("plain");
            RngStream adapted_rng = rep_rng.child("adapted");
            const GridDensity p_plain = eval_grid_smoothed(plain, diff.epsilon, grid, plain_rng);
            const GridDensity p_adapted =
                eval_grid_smoothed(adapted, diff.epsilon, grid, adapted_rng);
            const RenyiResult d2 = renyi(p_adapted, p_plain, 2.0);
            MetricRow row;
            row.kernel = adapted.kernel()->describe();
            row.sigma = s;
            row.seed = config.seed;
            row.replicate = rep;
            row.d2_renyi = d2.value;
            report.rows.push_back(std::move(row));
        }
    }

    timer.start("plots");
    Matrix curve(static_cast<Index>(sigmas.size()), 2);
    for (std::size_t si = 0; si < sigmas.size(); ++si) {
        std::vector<double> vals;
        for (const auto& row : report.rows)
            if (row.sigma == sigmas[si]) vals.push_back(row.d2_renyi);
        curve(static_cast<Index>(si), 0) = sigmas[si];
        curve(static_cast<Index>(si), 1) = median(vals);
    }
    emit_svg_lines({{"D2(adapted || plain)", curve, "#1f4e9c", "circle"}},
                   {"Renyi divergence vs smoothing scale", "sigma", "D2"},
                   (dir / "renyi_curve.svg").string());
}

void run_custom(const ExperimentConfig& config, RunReport& report, const fs::path& dir,
                StageTimer& timer) {
    const json& p = config.params;
    timer.start("dataset");
    if (!p.contains("dataset"))
        throw ConfigError("custom experiment requires params.dataset");
    const auto& dj = p.at("dataset");
    const std::string format = dj.value("format", "csv");
    const Dataset data = load_dataset(dj.at("path").get<std::string>(),
                                      format == "csv" ? FileFormat::CsvRows : FileFormat::F64Binary,
                                      dj.value("header", false));
    DiffusionConfig diff = config.diffusion;
    diff.schedule = default_ve_schedule(data);
    const auto score = make_score(data, diff.schedule);
    ManifoldPtr manifold;
    if (p.contains("manifold")) manifold = manifold_from_json(p.at("manifold").dump());

    if (!p.contains("kernels") || !p.at("kernels").is_array() || p.at("kernels").empty())
        throw ConfigError("custom experiment requires a nonempty params.kernels list");
    const int n_generate = p.value("samples", 100);

    timer.start("sampling");
    RngStream root(config.seed);
    for (int rep = 0; rep < config.replicates; ++rep) {
        RngStream rep_rng = root.child("replicate", static_cast<std::uint64_t>(rep));
        int ki = 0;
        for (const auto& kj : p.at("kernels")) {
            const KernelPtr kernel = kernel_from_json(kj.dump());
            const SmoothedScoreModel model(score, kernel, diff.smoothing_samples);
            RngStream rng = rep_rng.child("kernel", static_cast<std::uint64_t>(ki));
            const Matrix samples = reverse_sde_sample(model, diff, n_generate, rng);
            MetricRow row;
            row.kernel = kernel->describe();
            row.sigma = kj.value("sigma", 0.0);
            row.seed = config.seed;
            row.replicate = rep;
            const SampleMetrics m =
                manifold ? summarize_samples(samples, data, *manifold) : SampleMetrics{};
            if (manifold) {
                row.dist_to_data_mean = m.mean_dist_data;
                row.dist_to_manifold_mean = m.mean_dist_manifold;
                row.lateral_mean = m.mean_lateral;
            } else {
                double acc = 0.0;
                for (Index i = 0; i < samples.rows(); ++i)
                    acc += dist_to_set(samples.row(i).transpose(), data.points());
                row.dist_to_data_mean = acc / static_cast<double>(samples.rows());
            }
            if (rep == 0)
                write_samples_csv(dir / ("samples_k" + std::to_string(ki) + ".csv"), samples);
            report.rows.push_back(std::move(row));
            ++ki;
        }
    }
}

} // namespace

ExperimentConfig ExperimentConfig::from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid experiment JSON: ") + e.what());
    }
    ExperimentConfig out;
    try {
        out.name = j.at("name").get<std::string>();
        out.seed = j.value("seed", std::uint64_t{1});
        out.replicates = j.value("replicates", 5);
        out.out_dir = j.value("out_dir", std::string("runs"));
        out.full_scale = j.value("full", false);
        if (j.contains("diffusion"))
            out.diffusion = diffusion_config_from_json(j.at("diffusion").dump());
        else {
            out.diffusion.schedule = NoiseSchedule::ve_geometric(0.01, 4.0, 9.0);
            out.diffusion.n_steps = 100;
            out.diffusion.epsilon = 0.01;
            out.diffusion.smoothing_samples = 1000;
        }
        out.params = j.value("params", json::object());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid experiment JSON: ") + e.what());
    }
    if (out.replicates < 1) throw ConfigError("replicates must be >= 1");
    return out;
}

std::string ExperimentConfig::to_json() const {
    json j;
    j["name"] = name;
    j["seed"] = seed;
    j["replicates"] = replicates;
    j["out_dir"] = out_dir;
    j["full"] = full_scale;
    j["diffusion"] = json::parse(diffusion_config_to_json(diffusion));
    j["params"] = params;
    return j.dump(2);
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
    std::ostringstream os;
    os << "kernel,sigma,seed,replicate,dist_to_data_mean,dist_to_manifold_mean,lateral_mean,"
          "nll,anisotropy_mean,d2_renyi\n";
    auto cell = [](double v) { return std::isnan(v) ? std::string() : fmt17(v); };
    for (const auto& r : rows) {
        os << csv_quote(r.kernel) << "," << fmt17(r.sigma) << "," << r.seed << "," << r.replicate
           << "," << cell(r.dist_to_data_mean) << "," << cell(r.dist_to_manifold_mean) << ","
           << cell(r.lateral_mean) << "," << cell(r.nll) << "," << cell(r.anisotropy_mean) << ","
           << cell(r.d2_renyi) << "\n";
    }
    return os.str();
}

RunReport run_experiment(const ExperimentConfig& config) {
    const auto wall_begin = std::chrono::steady_clock::now();
    RunReport report;
    report.experiment = config.name;
    report.seed = config.seed;
    report.build_id = kBuildId;
    const std::string config_json = config.to_json();
    report.config_hash = fnv1a64(config_json);

    const fs::path parent = fs::path(config.out_dir) / config.name;
    std::error_code ec;
    fs::create_directories(parent, ec);
    if (ec) throw IoError("cannot create output directory '" + parent.string() + "'");
    const fs::path dir = parent / timestamp_dir(parent);
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "'");
    report.output_directory = dir.string();

    StageTimer timer(report.stage_seconds);
    try {
        if (config.name == "circle_nll_sweep") {
            run_circle_nll_sweep(config, report, dir, timer);
        } else if (config.name == "kde_vs_score") {
            run_kde_vs_score(config, report, dir, timer);
        } else if (config.name == "manifold_choice") {
            run_manifold_choice(config, report, dir, timer);
        } else if (config.name == "bump_manifold") {
            run_bump_manifold(config, report, dir, timer);
        } else if (config.name == "affine_verify") {
            run_affine_verify(config, report, dir, timer);
        } else if (config.name == "renyi_sweep") {
            run_renyi_sweep(config, report, dir, timer);
        } else if (config.name == "custom") {
            run_custom(config, report, dir, timer);
        } else {
            throw ConfigError("unknown experiment '" + config.name + "'");
        }
        timer.flush();
    } catch (...) {
        // Flush partial outputs so aborted stages leave evidence behind.
        timer.flush();
        write_text(dir / "metrics.csv", metrics_csv(report.rows));
        throw;
    }

    write_text(dir / "metrics.csv", metrics_csv(report.rows));
    write_text(dir / "config.json", config_json);
    const auto wall_end = std::chrono::steady_clock::now();
    report.wall_seconds = std::chrono::duration<double>(wall_end - wall_begin).count();

    json rep;
    rep["experiment"] = report.experiment;
    rep["config_hash"] = report.config_hash;
    rep["seed"] = report.seed;
    rep["build_id"] = report.build_id;
    rep["rows"] = report.rows.size();
    rep["wall_seconds"] = report.wall_seconds;
    rep["stage_seconds"] = report.stage_seconds;
    rep["scalars"] = report.scalars;
    write_text(dir / "report.json", rep.dump(2));
    return report;
}

} // namespace geoscore
