#include "geoscore/empirical_score.hpp"

#include "geoscore/errors.hpp"

#include <cmath>

namespace geoscore {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

double lse(std::span<const double> values) {
    if (values.empty()) throw DomainError("lse of an empty list");
    double m = values[0];
    for (double v : values)
        if (v > m) m = v;
    double acc = 0.0;
    for (double v : values) acc += std::exp(v - m);
    return m + std::log(acc);
}

EmpiricalScore::EmpiricalScore(Dataset dataset, NoiseSchedule schedule)
    : dataset_(std::move(dataset)), schedule_(std::move(schedule)) {
    point_sqnorm_ = dataset_.points().rowwise().squaredNorm();
}

void EmpiricalScore::check_query(double t, Index dim) const {
    if (dim != dataset_.dim()) throw DomainError("query dimension does not match dataset");
    if (!(t > 0.0) || t > schedule_.horizon()) throw DomainError("t must lie in (0, T]");
}

ScoreEvaluation EmpiricalScore::evaluate(double t, const Vector& x) const {
    check_query(t, x.size());
    const auto [mu, sigma] = schedule_.mu_sigma(t);
    if (!(sigma > 0.0)) throw DomainError("sigma_t must be positive");
    const double s2 = sigma * sigma;
    const Index n = dataset_.size();
    const Index d = dataset_.dim();

    // m_i = mu x_i - x, computed directly to avoid cancellation in |m_i|^2.
    Matrix diffs = mu * dataset_.points();
    diffs.rowwise() -= x.transpose();
    const Vector sq = diffs.rowwise().squaredNorm();
    const Vector exponents = -sq / (2.0 * s2);

    const double m = exponents.maxCoeff();
    Vector w = (exponents.array() - m).exp();
    const double total = w.sum();
    const double log_mix = m + std::log(total);
    w /= total;

    ScoreEvaluation out;
    out.log_density = log_mix - std::log(static_cast<double>(n)) -
                      0.5 * static_cast<double>(d) * std::log(kTwoPi * s2);
    out.score = diffs.transpose() * w / s2;
    const double mean_sq = w.dot(sq);
    out.laplacian = -static_cast<double>(d) / s2 + mean_sq / (s2 * s2) - out.score.squaredNorm();
    out.responsibilities = std::move(w);
    return out;
}

double EmpiricalScore::log_density(double t, const Vector& x) const {
    return evaluate(t, x).log_density;
}

Vector EmpiricalScore::score(double t, const Vector& x) const {
    return evaluate(t, x).score;
}

double EmpiricalScore::score_divergence(double t, const Vector& x) const {
    return evaluate(t, x).laplacian;
}

void EmpiricalScore::evaluate_batch(double t, const Matrix& y, Vector* log_densities,
                                    Matrix* scores, Vector* laplacians) const {
    check_query(t, y.cols());
    const auto [mu, sigma] = schedule_.mu_sigma(t);
    const double s2 = sigma * sigma;
    const Index rows = y.rows();
    const Index n = dataset_.size();
    const Index d = dataset_.dim();

    // |y_r - mu x_i|^2 = |y_r|^2 - 2 mu <y_r, x_i> + mu^2 |x_i|^2
    Matrix exponents = y * dataset_.points().transpose(); // rows x n
    exponents *= 2.0 * mu;
    const Vector y_sqnorm = y.rowwise().squaredNorm();
    exponents.colwise() -= y_sqnorm;
    exponents.rowwise() -= (mu * mu * point_sqnorm_).transpose();
    exponents /= 2.0 * s2; // now r_i = -|m_i|^2 / (2 s2)

    const Vector row_max = exponents.rowwise().maxCoeff();
    Matrix w = (exponents.colwise() - row_max).array().exp();
    const Vector row_sum = w.rowwise().sum();

    if (log_densities) {
        const double c = -std::log(static_cast<double>(n)) -
                         0.5 * static_cast<double>(d) * std::log(kTwoPi * s2);
        *log_densities = row_max.array() + row_sum.array().log() + c;
    }
    if (scores || laplacians) {
        w.array().colwise() /= row_sum.array();
        Matrix mean_point = w * dataset_.points(); // rows x d
        if (laplacians || scores) {
            Matrix score_mat = (mu * mean_point - y) / s2;
            if (laplacians) {
                // sum_i w_i |m_i|^2 = -2 s2 sum_i w_i r_i
                const Vector mean_sq = -2.0 * s2 * (w.array() * exponents.array()).rowwise().sum();
                *laplacians = (-static_cast<double>(d) / s2 + mean_sq.array() / (s2 * s2) -
                               score_mat.rowwise().squaredNorm().array())
                                  .matrix();
            }
            if (scores) *scores = std::move(score_mat);
        }
    }
}

} // namespace geoscore
