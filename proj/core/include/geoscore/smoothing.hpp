#pragma once

#include "geoscore/empirical_score.hpp"
#include "geoscore/kernels.hpp"

#include <memory>

namespace geoscore {

class RngStream;

enum class SmoothingMode { MonteCarlo, Quadrature };

// Fixed displacement set with weights: evaluating at x + offsets gives
// common-random-number smoothing across different x (location-independent
// kernels only).
struct FrozenSmoothing {
    Matrix offsets;
    Vector weights; // sums to 1
};

// Kernel-smoothed empirical score model: averages of the exact score, its
// log-density and its divergence over kernel draws around the query point.
class SmoothedScoreModel {
public:
    SmoothedScoreModel(std::shared_ptr<const EmpiricalScore> score, KernelPtr kernel,
                       int n_samples, SmoothingMode mode = SmoothingMode::MonteCarlo);

    const EmpiricalScore& empirical() const { return *score_; }
    const KernelPtr& kernel() const { return kernel_; }
    int n_samples() const { return n_samples_; }
    SmoothingMode mode() const { return mode_; }
    Index dim() const { return score_->dim(); }
    // True when no smoothing is applied (delta kernel).
    bool pass_through() const { return delta_; }

    Vector smoothed_score(double t, const Vector& x, RngStream& rng) const;
    double smoothed_log_density(double t, const Vector& x, RngStream& rng) const;
    // Kernel average of the score divergence. Valid only for
    // location-independent kernels, where smoothing and differentiation
    // commute.
    double smoothed_divergence(double t, const Vector& x, RngStream& rng) const;

    // Draws (or takes quadrature nodes for) a reusable displacement set.
    FrozenSmoothing freeze(RngStream& rng) const;
    // Evaluates the smoothed quantities at x + offsets; any output may be null.
    void evaluate_frozen(double t, const Vector& x, const FrozenSmoothing& frozen, Vector* score,
                         double* divergence, double* log_density) const;

private:
    void accumulate(double t, const Vector& x, RngStream& rng, Vector* score, double* divergence,
                    double* log_density) const;
    bool fast_score_gaussian(double t, const Vector& x, RngStream& rng, Vector& out) const;
    bool fast_score_shifted(double t, const Vector& x, RngStream& rng, Vector& out) const;

    std::shared_ptr<const EmpiricalScore> score_;
    KernelPtr kernel_;
    int n_samples_;
    SmoothingMode mode_;
    bool delta_ = false;

    struct FastPathState;
    std::shared_ptr<FastPathState> fast_; // lazy caches, see smoothing.cpp
};

} // namespace geoscore
