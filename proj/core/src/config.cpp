#include "geoscore/config.hpp"

#include "geoscore/errors.hpp"

#include <json.hpp>

namespace geoscore {

using nlohmann::json;

void DiffusionConfig::validate() const {
    if (n_steps < 1) throw ConfigError("n_steps must be >= 1");
    if (!(epsilon > 0.0 && epsilon < schedule.horizon()))
        throw ConfigError("epsilon must lie in (0, T)");
    if (corrector_steps < 0) throw ConfigError("corrector_steps must be >= 0");
    if (!(corrector_snr > 0.0)) throw ConfigError("corrector_snr must be > 0");
    if (smoothing_samples < 1) throw ConfigError("smoothing_samples must be >= 1");
}

std::string diffusion_config_to_json(const DiffusionConfig& config) {
    json j;
    json sched;
    if (config.schedule.kind() == NoiseSchedule::Kind::OU) {
        sched["kind"] = "ou";
        sched["alpha"] = config.schedule.alpha();
    } else {
        sched["kind"] = "ve_geometric";
        sched["sigma_min"] = config.schedule.sigma_min();
        sched["sigma_max"] = config.schedule.sigma_max();
    }
    sched["T"] = config.schedule.horizon();
    j["schedule"] = sched;
    j["n_steps"] = config.n_steps;
    j["epsilon"] = config.epsilon;
    j["corrector_steps"] = config.corrector_steps;
    j["corrector_snr"] = config.corrector_snr;
    j["smoothing_samples"] = config.smoothing_samples;
    j["log_time_grid"] = config.log_time_grid;
    return j.dump(2);
}

DiffusionConfig diffusion_config_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid config JSON: ") + e.what());
    }
    DiffusionConfig config;
    try {
        const json& sched = j.at("schedule");
        const std::string kind = sched.at("kind").get<std::string>();
        const double T = sched.at("T").get<double>();
        if (kind == "ou") {
            config.schedule = NoiseSchedule::ou(sched.at("alpha").get<double>(), T);
        } else if (kind == "ve_geometric") {
            config.schedule = NoiseSchedule::ve_geometric(sched.at("sigma_min").get<double>(),
                                                          sched.at("sigma_max").get<double>(), T);
        } else {
            throw ConfigError("unknown schedule kind '" + kind + "'");
        }
        config.n_steps = j.value("n_steps", config.n_steps);
        config.epsilon = j.value("epsilon", config.epsilon);
        config.corrector_steps = j.value("corrector_steps", config.corrector_steps);
        config.corrector_snr = j.value("corrector_snr", config.corrector_snr);
        config.smoothing_samples = j.value("smoothing_samples", config.smoothing_samples);
        config.log_time_grid = j.value("log_time_grid", config.log_time_grid);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid config JSON: ") + e.what());
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    config.validate();
    return config;
}

} // namespace geoscore
