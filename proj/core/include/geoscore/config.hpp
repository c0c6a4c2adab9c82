#pragma once

#include "geoscore/schedule.hpp"

#include <string>

namespace geoscore {

// Reverse-process run parameters shared by the samplers and the likelihood
// integrator.
struct DiffusionConfig {
    NoiseSchedule schedule = NoiseSchedule::ou(0.0, 1.0);
    int n_steps = 100;
    double epsilon = 0.01;
    int corrector_steps = 0;
    double corrector_snr = 0.16;
    int smoothing_samples = 1000;
    bool log_time_grid = false;

    void validate() const;
};

// JSON round-trip mirroring the field names above. The schedule is encoded
// as {"kind":"ou","alpha":..,"T":..} or
// {"kind":"ve_geometric","sigma_min":..,"sigma_max":..,"T":..}.
std::string diffusion_config_to_json(const DiffusionConfig& config);
DiffusionConfig diffusion_config_from_json(const std::string& json_text);

} // namespace geoscore
