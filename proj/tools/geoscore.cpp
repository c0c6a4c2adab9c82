// Command-line front end: sampling, KDE baseline, likelihoods, divergences,
// the affine verification and the named experiments.

#include <CLI11.hpp>

#include "geoscore/dataset.hpp"
#include "geoscore/errors.hpp"
#include "geoscore/experiment.hpp"
#include "geoscore/grid_density.hpp"
#include "geoscore/metrics.hpp"
#include "geoscore/renyi.hpp"
#include "geoscore/rng.hpp"
#include "geoscore/sampler.hpp"
#include "geoscore/svg.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace {

using namespace geoscore;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

struct DatasetArgs {
    std::string path;
    std::string format = "csv";
    bool header = false;
    int circle_n = 0;
    double radius = 1.0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--dataset", path, "dataset file (one point per row)");
        cmd->add_option("--format", format, "dataset format: csv|bin")
            ->check(CLI::IsMember({"csv", "bin"}));
        cmd->add_flag("--header", header, "skip one CSV header line");
        cmd->add_option("--circle", circle_n, "use n uniformly spaced points on a circle");
        cmd->add_option("--radius", radius, "circle radius");
    }

    Dataset load() const {
        if (circle_n > 0) return circle_dataset(circle_n, radius);
        if (path.empty()) throw ConfigError("need --dataset or --circle");
        return load_dataset(path, format == "csv" ? FileFormat::CsvRows : FileFormat::F64Binary,
                            header);
    }
};

struct ScheduleArgs {
    std::string kind = "ve";
    double alpha = 0.0;
    double sigma_min = 0.01;
    double sigma_max = 0.0; // 0: derive from data diameter
    double horizon = 9.0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--schedule", kind, "noise schedule: ve|ou")
            ->check(CLI::IsMember({"ve", "ou"}));
        cmd->add_option("--alpha", alpha, "OU drift coefficient");
        cmd->add_option("--sigma-min", sigma_min, "VE minimum noise scale");
        cmd->add_option("--sigma-max", sigma_max, "VE maximum noise scale (0: 2x data diameter)");
        cmd->add_option("--T", horizon, "diffusion horizon");
    }

    NoiseSchedule build(const Dataset& data) const {
        if (kind == "ou") return NoiseSchedule::ou(alpha, horizon);
        const double smax = sigma_max > 0.0 ? sigma_max : std::max(2.0 * data.diameter(), 0.02);
        return NoiseSchedule::ve_geometric(sigma_min, smax, horizon);
    }
};

struct DiffusionArgs {
    int steps = 100;
    double epsilon = 0.01;
    int corrector_steps = 0;
    double snr = 0.16;
    int smoothing_samples = 1000;
    bool log_grid = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--steps", steps, "integration steps");
        cmd->add_option("--eps", epsilon, "early stopping time");
        cmd->add_option("--corrector-steps", corrector_steps, "Langevin corrector steps");
        cmd->add_option("--snr", snr, "corrector signal-to-noise ratio");
        cmd->add_option("--smoothing-samples", smoothing_samples, "kernel samples per evaluation");
        cmd->add_flag("--log-grid", log_grid, "log-spaced time grid (denser near eps)");
    }

    DiffusionConfig build(const NoiseSchedule& schedule) const {
        DiffusionConfig out;
        out.schedule = schedule;
        out.n_steps = steps;
        out.epsilon = epsilon;
        out.corrector_steps = corrector_steps;
        out.corrector_snr = snr;
        out.smoothing_samples = smoothing_samples;
        out.log_time_grid = log_grid;
        out.validate();
        return out;
    }
};

KernelPtr build_kernel(const std::string& kernel_json, double sigma) {
    if (!kernel_json.empty()) return kernel_from_json(kernel_json);
    return std::make_shared<IsotropicGaussian>(sigma);
}

void write_matrix(const Matrix& m, const std::string& path, const std::string& format) {
    const Dataset as_dataset(m);
    save_dataset(as_dataset, path,
                 format == "bin" ? FileFormat::F64Binary : FileFormat::CsvRows);
}

int dispatch(CLI::App& app, int argc, char** argv) {
    // sample ---------------------------------------------------------------
    auto* sample = app.add_subcommand("sample", "reverse-SDE sampling with a smoothed score");
    DatasetArgs sample_data;
    ScheduleArgs sample_sched;
    DiffusionArgs sample_diff;
    sample_data.attach(sample);
    sample_sched.attach(sample);
    sample_diff.attach(sample);
    std::string sample_kernel;
    double sample_sigma = 0.0;
    int sample_n = 100;
    std::uint64_t sample_seed = 1;
    std::string sample_out = "samples.csv";
    std::string sample_out_format = "csv";
    std::string sample_traj;
    sample->add_option("--kernel", sample_kernel, "kernel JSON descriptor");
    sample->add_option("--sigma", sample_sigma, "isotropic smoothing scale (shorthand)");
    sample->add_option("-n,--n", sample_n, "number of samples");
    sample->add_option("--seed", sample_seed, "random seed");
    sample->add_option("--out", sample_out, "output file");
    sample->add_option("--out-format", sample_out_format, "csv|bin")
        ->check(CLI::IsMember({"csv", "bin"}));
    sample->add_option("--traj", sample_traj, "dump one probability-flow trajectory to CSV");

    // kde -------------------------------------------------------------------
    auto* kde = app.add_subcommand("kde", "kernel density estimate sampling");
    DatasetArgs kde_data;
    kde_data.attach(kde);
    double kde_sigma = 0.1;
    int kde_n = 100;
    std::uint64_t kde_seed = 1;
    std::string kde_out = "kde_samples.csv";
    kde->add_option("--sigma", kde_sigma, "bandwidth")->required();
    kde->add_option("-n,--n", kde_n, "number of samples");
    kde->add_option("--seed", kde_seed, "random seed");
    kde->add_option("--out", kde_out, "output file");

    // nll --------------------------------------------------------------------
    auto* nll_cmd = app.add_subcommand("nll", "mean NLL via the probability-flow ODE");
    DatasetArgs nll_data;
    ScheduleArgs nll_sched;
    DiffusionArgs nll_diff;
    nll_data.attach(nll_cmd);
    nll_sched.attach(nll_cmd);
    nll_diff.attach(nll_cmd);
    std::string nll_kernel;
    double nll_sigma = 0.0;
    int nll_eval_circle = 0;
    std::string nll_eval_path;
    std::uint64_t nll_seed = 1;
    nll_cmd->add_option("--kernel", nll_kernel, "kernel JSON descriptor");
    nll_cmd->add_option("--sigma", nll_sigma, "isotropic smoothing scale (shorthand)");
    nll_cmd->add_option("--eval-circle", nll_eval_circle,
                        "evaluate at n equispaced points on the data circle");
    nll_cmd->add_option("--eval", nll_eval_path, "evaluation points CSV");
    nll_cmd->add_option("--seed", nll_seed, "random seed");

    // renyi -------------------------------------------------------------------
    auto* renyi_cmd = app.add_subcommand("renyi", "Renyi divergence between grid densities");
    std::string renyi_p, renyi_q;
    double renyi_order = 2.0;
    renyi_cmd->add_option("--p", renyi_p, "numerator grid density file")->required();
    renyi_cmd->add_option("--q", renyi_q, "reference grid density file")->required();
    renyi_cmd->add_option("--order", renyi_order, "divergence order q >= 1");

    // verify-affine -------------------------------------------------------------
    auto* verify = app.add_subcommand("verify-affine",
                                      "log-domain smoothing exactness on an affine subspace");
    double verify_h = 0.1;
    double verify_eps = 0.01;
    int verify_res = 64;
    double verify_lo = -2.0, verify_hi = 2.0;
    int verify_train = 5;
    double verify_tolerance = 1e-8;
    std::string verify_out = "runs";
    verify->add_option("--out", verify_out, "output directory");
    verify->add_option("--stencil-h", verify_h, "stencil step");
    verify->add_option("--eps", verify_eps, "early stopping time");
    verify->add_option("--grid-res", verify_res, "grid resolution per axis");
    verify->add_option("--grid-lo", verify_lo, "grid lower bound");
    verify->add_option("--grid-hi", verify_hi, "grid upper bound");
    verify->add_option("--train-points", verify_train, "on-manifold training points");
    verify->add_option("--tolerance", verify_tolerance, "pass threshold on the residual");

    // estimate-k -------------------------------------------------------------
    auto* estk = app.add_subcommand("estimate-k", "kernel-vs-manifold diagnostics (K, K_max)");
    std::string estk_kernel, estk_manifold, estk_probes;
    int estk_probe_n = 32;
    int estk_samples = 256;
    std::uint64_t estk_seed = 1;
    estk->add_option("--kernel", estk_kernel, "kernel JSON descriptor")->required();
    estk->add_option("--manifold", estk_manifold, "manifold JSON descriptor")->required();
    estk->add_option("--probes", estk_probes, "probe points CSV (default: sampled on manifold)");
    estk->add_option("--probe-count", estk_probe_n, "number of sampled probes");
    estk->add_option("--samples", estk_samples, "kernel draws per probe");
    estk->add_option("--seed", estk_seed, "random seed");

    // experiment -----------------------------------------------------------------
    auto* exp = app.add_subcommand("experiment", "run a named experiment scenario");
    std::string exp_name;
    std::string exp_config;
    std::uint64_t exp_seed = 1;
    int exp_replicates = 0;
    std::string exp_out;
    bool exp_full = false;
    std::vector<std::string> exp_sets;
    exp->add_option("name", exp_name,
                    "circle_nll_sweep|kde_vs_score|manifold_choice|bump_manifold|"
                    "affine_verify|renyi_sweep|custom");
    exp->add_option("--config", exp_config, "experiment config JSON file");
    auto* exp_seed_opt = exp->add_option("--seed", exp_seed, "random seed");
    exp->add_option("--replicates", exp_replicates, "replicate count");
    exp->add_option("--out", exp_out, "output directory");
    exp->add_flag("--full", exp_full, "full-scale sample counts");
    exp->add_option("--set", exp_sets, "override params entry, key=json");

    app.require_subcommand(1);
    app.parse(argc, argv);

    if (sample->parsed()) {
        const Dataset data = sample_data.load();
        const NoiseSchedule schedule = sample_sched.build(data);
        const DiffusionConfig diff = sample_diff.build(schedule);
        const auto score = std::make_shared<EmpiricalScore>(data, schedule);
        const KernelPtr kernel = build_kernel(sample_kernel, sample_sigma);
        const SmoothedScoreModel model(score, kernel, diff.smoothing_samples);
        RngStream rng(sample_seed);
        const Matrix samples = reverse_sde_sample(model, diff, sample_n, rng);
        write_matrix(samples, sample_out, sample_out_format);
        if (!sample_traj.empty()) {
            RngStream traj_rng(sample_seed);
            const Trajectory traj = reverse_sde_trajectory(model, diff, traj_rng);
            Matrix dump(static_cast<Index>(traj.times.size()), data.dim() + 1);
            for (std::size_t i = 0; i < traj.times.size(); ++i) {
                dump(static_cast<Index>(i), 0) = traj.times[i];
                dump.row(static_cast<Index>(i)).tail(data.dim()) = traj.states[i].transpose();
            }
            write_matrix(dump, sample_traj, "csv");
        }
        std::printf("wrote %d samples to %s\n", sample_n, sample_out.c_str());
        return kExitOk;
    }

    if (kde->parsed()) {
        const Dataset data = kde_data.load();
        RngStream rng(kde_seed);
        const Matrix samples = kde_sample(data, kde_sigma, kde_n, rng);
        write_matrix(samples, kde_out, "csv");
        std::printf("wrote %d samples to %s\n", kde_n, kde_out.c_str());
        return kExitOk;
    }

    if (nll_cmd->parsed()) {
        const Dataset data = nll_data.load();
        const NoiseSchedule schedule = nll_sched.build(data);
        const DiffusionConfig diff = nll_diff.build(schedule);
        const auto score = std::make_shared<EmpiricalScore>(data, schedule);
        const KernelPtr kernel = build_kernel(nll_kernel, nll_sigma);
        const SmoothedScoreModel model(score, kernel, diff.smoothing_samples);
        Matrix eval_points;
        if (!nll_eval_path.empty()) {
            eval_points = load_dataset(nll_eval_path, FileFormat::CsvRows).points();
        } else if (nll_eval_circle > 0) {
            eval_points = circle_dataset(nll_eval_circle, nll_data.radius).points();
        } else {
            throw ConfigError("need --eval or --eval-circle");
        }
        RngStream rng(nll_seed);
        const double value = nll(model, diff, eval_points, rng);
        std::printf("nll %.10g\n", value);
        return kExitOk;
    }

    if (renyi_cmd->parsed()) {
        const GridDensity p = load_grid_density(renyi_p);
        const GridDensity q = load_grid_density(renyi_q);
        const RenyiResult r = renyi(p, q, renyi_order);
        std::printf("D_%g %.10g (floored points: %lld)\n", renyi_order, r.value,
                    static_cast<long long>(r.floored_points));
        return kExitOk;
    }

    if (verify->parsed()) {
        ExperimentConfig config;
        config.name = "affine_verify";
        config.out_dir = verify_out;
        config.diffusion.schedule = NoiseSchedule::ou(0.0, 1.0);
        config.diffusion.epsilon = verify_eps;
        config.replicates = 1;
        config.params["h"] = verify_h;
        config.params["epsilon"] = verify_eps;
        config.params["grid_resolution"] = verify_res;
        config.params["grid_lo"] = verify_lo;
        config.params["grid_hi"] = verify_hi;
        config.params["train_points"] = verify_train;
        const RunReport report = run_experiment(config);
        const double residual = report.scalars.at("residual");
        std::printf("residual %.3e (tolerance %.3e)\n", residual, verify_tolerance);
        return residual < verify_tolerance ? kExitOk : kExitNumerical;
    }

    if (estk->parsed()) {
        const KernelPtr kernel = kernel_from_json(estk_kernel);
        const ManifoldPtr manifold = manifold_from_json(estk_manifold);
        RngStream rng(estk_seed);
        Matrix probes;
        if (!estk_probes.empty()) {
            probes = load_dataset(estk_probes, FileFormat::CsvRows).points();
        } else {
            RngStream probe_rng = rng.child("probes");
            probes = manifold->sample_uniform(estk_probe_n, probe_rng, true);
        }
        const KernelDiagnostics diag = estimate_K(*kernel, *manifold, probes, estk_samples, rng);
        std::printf("K %.10g\nK_max %.10g\nprobes %d\n", diag.K, diag.K_max, diag.probe_count);
        return kExitOk;
    }

    if (exp->parsed()) {
        ExperimentConfig config;
        if (!exp_config.empty()) {
            std::ifstream in(exp_config);
            if (!in) throw IoError("cannot open '" + exp_config + "'");
            std::stringstream ss;
            ss << in.rdbuf();
            config = ExperimentConfig::from_json(ss.str());
            if (!exp_name.empty()) config.name = exp_name;
        } else {
            if (exp_name.empty()) throw ConfigError("experiment needs a name or --config");
            config.name = exp_name;
            config.diffusion.schedule = NoiseSchedule::ve_geometric(0.01, 4.0, 9.0);
            config.diffusion.n_steps = 100;
            config.diffusion.epsilon = 0.01;
            config.diffusion.smoothing_samples = 1000;
        }
        if (exp_seed_opt->count() > 0) config.seed = exp_seed;
        if (exp_replicates > 0) config.replicates = exp_replicates;
        if (!exp_out.empty()) config.out_dir = exp_out;
        if (exp_full) config.full_scale = true;
        for (const auto& kv : exp_sets) {
            const auto pos = kv.find('=');
            if (pos == std::string::npos) throw ConfigError("--set expects key=json");
            try {
                config.params[kv.substr(0, pos)] = nlohmann::json::parse(kv.substr(pos + 1));
            } catch (const nlohmann::json::exception&) {
                config.params[kv.substr(0, pos)] = kv.substr(pos + 1);
            }
        }
        const RunReport report = run_experiment(config);
        std::printf("experiment %s: %zu rows in %.1fs -> %s\n", report.experiment.c_str(),
                    report.rows.size(), report.wall_seconds, report.output_directory.c_str());
        if (config.name == "affine_verify" &&
            report.scalars.at("residual") >= 1e-8)
            return kExitNumerical;
        return kExitOk;
    }

    return kExitConfig;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"score-smoothed diffusion sampling and geometry diagnostics"};
    try {
        return dispatch(app, argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const CapabilityError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical abort: %s\n", e.what());
        return kExitNumerical;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return kExitIo;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumerical;
    }
}
