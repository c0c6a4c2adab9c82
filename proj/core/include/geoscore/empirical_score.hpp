#pragma once

#include "geoscore/dataset.hpp"
#include "geoscore/schedule.hpp"

#include <span>

namespace geoscore {

// max(v) + log(sum exp(v - max)); overflow-free for any finite inputs.
double lse(std::span<const double> values);

struct ScoreEvaluation {
    double log_density;
    Vector score;
    double laplacian;
    Vector responsibilities; // softmax weights, nonnegative, sum to 1
};

// Exact noised-mixture quantities of the training set:
//   log p_t(x) = LSE({-|x - mu_t x_i|^2 / 2 sigma_t^2}) - log N - (d/2) log(2 pi sigma_t^2)
// with the score and Laplacian of log p_t in closed form from the same
// softmax weights. One fused pass computes all three.
class EmpiricalScore {
public:
    EmpiricalScore(Dataset dataset, NoiseSchedule schedule);

    const Dataset& dataset() const { return dataset_; }
    const NoiseSchedule& schedule() const { return schedule_; }
    Index dim() const { return dataset_.dim(); }
    const Vector& point_sqnorm() const { return point_sqnorm_; }

    ScoreEvaluation evaluate(double t, const Vector& x) const;
    double log_density(double t, const Vector& x) const;
    Vector score(double t, const Vector& x) const;
    // Laplacian of log p_t, i.e. the divergence of the score field.
    double score_divergence(double t, const Vector& x) const;

    // Row-wise evaluation for query batches. Any output pointer may be null.
    // scores, if given, must be preallocated to the shape of y.
    void evaluate_batch(double t, const Matrix& y, Vector* log_densities, Matrix* scores,
                        Vector* laplacians) const;

private:
    void check_query(double t, Index dim) const;

    Dataset dataset_;
    NoiseSchedule schedule_;
    Vector point_sqnorm_;
};

} // namespace geoscore
