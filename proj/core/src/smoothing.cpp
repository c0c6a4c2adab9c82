#include "geoscore/smoothing.hpp"

#include "geoscore/errors.hpp"
#include "geoscore/rng.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <mutex>
#include <vector>

namespace geoscore {

namespace {

constexpr Index kReduceBlock = 512;

// The low-rank score paths pay O(N^2) per draw instead of O(d); they only
// win when the ambient dimension dominates.
constexpr Index kFastPathMinDim = 256;

// Factor F with F F^T = gram. Gram matrices of smooth point families are
// typically rank-deficient, which makes plain LDLT report a numerical issue;
// clamping the pivots at zero and verifying the reconstruction is the
// reliable gate.
Matrix psd_cholesky_factor(const Matrix& gram) {
    Eigen::LDLT<Matrix> ldlt(gram);
    Vector diag = ldlt.vectorD();
    for (Index i = 0; i < diag.size(); ++i) diag[i] = std::sqrt(std::max(0.0, diag[i]));
    Matrix l = ldlt.matrixL();
    const Matrix scaled = l * diag.asDiagonal();
    Matrix factor = ldlt.transpositionsP().transpose() * scaled;
    const double scale = std::max(1.0, gram.cwiseAbs().maxCoeff());
    if (((factor * factor.transpose()) - gram).cwiseAbs().maxCoeff() > 1e-8 * scale)
        return Matrix();
    return factor;
}

// Pairwise combination in a fixed tree; deterministic regardless of how the
// per-block partials were produced.
template <typename T>
T pairwise_combine(std::vector<T>& parts) {
    std::size_t n = parts.size();
    while (n > 1) {
        const std::size_t half = (n + 1) / 2;
        for (std::size_t i = 0; i + half < n; ++i) parts[i] += parts[i + half];
        n = half;
    }
    return parts[0];
}

} // namespace

// Lazily-built state for the low-rank score paths. For a location batch the
// softmax weights depend on a draw z only through the dataset (or node-table)
// inner products, whose joint law is N(0, Gram); sampling those directly and
// adding the orthogonal-complement mean from its exact law reproduces the
// naive estimator's distribution at O(N) per draw instead of O(d).
struct SmoothedScoreModel::FastPathState {
    std::once_flag iso_once;
    bool iso_ready = false;
    Matrix data_chol; // F with F F^T = X X^T
    Eigen::LDLT<Matrix> data_gram_ldlt;

    std::once_flag shifted_once;
    bool shifted_ready = false;
    const ParametricCurve* curve = nullptr;
    Matrix node_chol; // K x K factor of the node Gram
    Matrix node_gram;
    Matrix node_data_dot; // K x N
};

SmoothedScoreModel::SmoothedScoreModel(std::shared_ptr<const EmpiricalScore> score,
                                       KernelPtr kernel, int n_samples, SmoothingMode mode)
    : score_(std::move(score)), kernel_(std::move(kernel)), n_samples_(n_samples), mode_(mode) {
    if (!score_) throw DomainError("smoothed model needs an empirical score");
    if (!kernel_) throw DomainError("smoothed model needs a kernel");
    if (n_samples_ < 1) throw DomainError("n_samples must be >= 1");
    if (mode_ == SmoothingMode::Quadrature && !kernel_->has_nodes())
        throw CapabilityError("quadrature mode requires a kernel with nodes");
    const auto* iso = dynamic_cast<const IsotropicGaussian*>(kernel_.get());
    delta_ = iso != nullptr && iso->sigma() == 0.0;
    fast_ = std::make_shared<FastPathState>();
}

bool SmoothedScoreModel::fast_score_gaussian(double t, const Vector& x, RngStream& rng,
                                             Vector& out) const {
    const auto* iso = dynamic_cast<const IsotropicGaussian*>(kernel_.get());
    if (!iso || iso->sigma() <= 0.0 || mode_ != SmoothingMode::MonteCarlo) return false;
    const Matrix& data = score_->dataset().points();
    const Index n_data = data.rows();
    const Index d = data.cols();
    if (d < kFastPathMinDim || n_data * 4 > d) return false;

    std::call_once(fast_->iso_once, [&] {
        const Matrix gram = data * data.transpose();
        fast_->data_gram_ldlt.compute(gram);
        if (fast_->data_gram_ldlt.info() != Eigen::Success) return;
        fast_->data_chol = psd_cholesky_factor(gram);
        fast_->iso_ready = fast_->data_chol.size() > 0;
    });
    if (!fast_->iso_ready) return false;

    const auto [mu, sigma_t] = score_->schedule().mu_sigma(t);
    const double s2 = sigma_t * sigma_t;
    const double sigma = iso->sigma();
    const Vector data_dot_x = data * x;
    const Vector base_exponent =
        (2.0 * mu * data_dot_x - mu * mu * score_->point_sqnorm()) / (2.0 * s2);
    const double g_scale = mu * sigma / s2;

    const Index n = n_samples_;
    std::vector<Vector> w_parts, g_parts;
    Matrix eta, g_block, exponents;
    for (Index start = 0; start < n; start += kReduceBlock) {
        const Index block = std::min<Index>(kReduceBlock, n - start);
        eta.resize(block, n_data);
        rng.fill_normal(eta.data(), static_cast<std::size_t>(eta.size()));
        g_block.noalias() = eta * fast_->data_chol.transpose();
        exponents = g_scale * g_block;
        exponents.rowwise() += base_exponent.transpose();
        const Vector row_max = exponents.rowwise().maxCoeff();
        Matrix w = (exponents.colwise() - row_max).array().exp();
        const Vector row_sum = w.rowwise().sum();
        w.array().colwise() /= row_sum.array();
        w_parts.push_back(w.colwise().sum().transpose());
        g_parts.push_back(g_block.colwise().sum().transpose());
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    const Vector w_mean = pairwise_combine(w_parts) * inv_n;
    const Vector g_mean = pairwise_combine(g_parts) * inv_n;

    // Mean of the draws' noise: the span component is exact algebra on the
    // sampled Gram coordinates; the orthogonal component is drawn from its
    // own law N(0, P_perp / n).
    Vector zeta(d);
    rng.fill_normal(zeta.data(), static_cast<std::size_t>(d));
    const Vector span_coeff = fast_->data_gram_ldlt.solve(g_mean);
    const Vector zeta_span_coeff = fast_->data_gram_ldlt.solve(data * zeta);
    const Vector z_mean = data.transpose() * span_coeff +
                          (zeta - data.transpose() * zeta_span_coeff) / std::sqrt(static_cast<double>(n));
    out = (mu * (data.transpose() * w_mean) - x) / s2 - (sigma / s2) * z_mean;
    return true;
}

bool SmoothedScoreModel::fast_score_shifted(double t, const Vector& x, RngStream& rng,
                                            Vector& out) const {
    const auto* shifted = dynamic_cast<const ShiftedManifoldAdapted*>(kernel_.get());
    if (!shifted || mode_ != SmoothingMode::MonteCarlo) return false;
    const Matrix& data = score_->dataset().points();
    const Index d = data.cols();
    if (d < kFastPathMinDim) return false;

    std::call_once(fast_->shifted_once, [&] {
        const auto* curve = dynamic_cast<const ParametricCurve*>(shifted->manifold().get());
        if (!curve) return;
        const Matrix& nodes = curve->nodes();
        fast_->node_gram = nodes * nodes.transpose();
        fast_->node_chol = psd_cholesky_factor(fast_->node_gram);
        if (fast_->node_chol.size() == 0) return;
        fast_->node_data_dot = nodes * data.transpose();
        fast_->curve = curve;
        fast_->shifted_ready = true;
    });
    if (!fast_->shifted_ready) return false;

    const auto [mu, sigma_t] = score_->schedule().mu_sigma(t);
    const double s2 = sigma_t * sigma_t;
    const double sigma = shifted->sigma();
    const Matrix& nodes = fast_->curve->nodes();
    const Index n_nodes = nodes.rows();
    const Index n_data = data.rows();

    // Anchor projection of x (same arithmetic as the node search).
    const Vector node_dot_x = nodes * x;
    const Vector node_sqnorm = fast_->node_gram.diagonal();
    Index anchor = 0;
    double best = node_sqnorm[0] - 2.0 * node_dot_x[0];
    for (Index k = 1; k < n_nodes; ++k) {
        const double v = node_sqnorm[k] - 2.0 * node_dot_x[k];
        if (v < best) {
            best = v;
            anchor = k;
        }
    }

    // Distance table for y = node_k + delta against the noised data, with
    // delta = x - node_anchor. Constant-in-(k, i) terms are dropped; they
    // cancel in the softmax.
    const Vector node_dot_delta = node_dot_x - fast_->node_gram.col(anchor);
    const Vector data_dot_delta = data * x - fast_->node_data_dot.row(anchor).transpose();
    Matrix exponents(n_nodes, n_data); // -(distance^2)/(2 s2) up to a constant
    for (Index k = 0; k < n_nodes; ++k) {
        for (Index i = 0; i < n_data; ++i) {
            const double dist_sq = node_sqnorm[k] + 2.0 * node_dot_delta[k] -
                                   2.0 * mu * (fast_->node_data_dot(k, i) + data_dot_delta[i]);
            exponents(k, i) = -dist_sq / (2.0 * s2);
        }
    }
    Matrix node_weights(n_nodes, n_data);
    for (Index k = 0; k < n_nodes; ++k) {
        const double m = exponents.row(k).maxCoeff();
        node_weights.row(k) = (exponents.row(k).array() - m).exp();
        node_weights.row(k) /= node_weights.row(k).sum();
    }

    // Draw node indices: argmin_k (node_score_k - 2 sigma <z, node_k>), the
    // node search for p + sigma z with p = node_anchor.
    const Vector node_score = node_sqnorm - 2.0 * fast_->node_gram.col(anchor);
    Vector counts = Vector::Zero(n_nodes);
    Matrix eta, g_block;
    const Index n = n_samples_;
    for (Index start = 0; start < n; start += kReduceBlock) {
        const Index block = std::min<Index>(kReduceBlock, n - start);
        eta.resize(block, n_nodes);
        rng.fill_normal(eta.data(), static_cast<std::size_t>(eta.size()));
        g_block.noalias() = eta * fast_->node_chol.transpose();
        for (Index j = 0; j < block; ++j) {
            Index pick = 0;
            double lowest = node_score[0] - 2.0 * sigma * g_block(j, 0);
            for (Index k = 1; k < n_nodes; ++k) {
                const double v = node_score[k] - 2.0 * sigma * g_block(j, k);
                if (v < lowest) {
                    lowest = v;
                    pick = k;
                }
            }
            counts[pick] += 1.0;
        }
    }
    counts /= static_cast<double>(n);

    const Vector w_mean = node_weights.transpose() * counts; // N
    const Vector delta = x - nodes.row(anchor).transpose();
    const Vector node_mean = nodes.transpose() * counts;
    out = (mu * (data.transpose() * w_mean) - delta - node_mean) / s2;
    return true;
}

void SmoothedScoreModel::accumulate(double t, const Vector& x, RngStream& rng, Vector* score,
                                    double* divergence, double* log_density) const {
    if (delta_) {
        const ScoreEvaluation e = score_->evaluate(t, x);
        if (score) *score = e.score;
        if (divergence) *divergence = e.laplacian;
        if (log_density) *log_density = e.log_density;
        return;
    }
    if (score && !divergence && !log_density) {
        if (fast_score_gaussian(t, x, rng, *score)) return;
        if (fast_score_shifted(t, x, rng, *score)) return;
    }
    if (mode_ == SmoothingMode::Quadrature) {
        const auto nodes = kernel_->nodes(x);
        Matrix points(static_cast<Index>(nodes.size()), x.size());
        Vector weights(static_cast<Index>(nodes.size()));
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            points.row(static_cast<Index>(i)) = nodes[i].first.transpose();
            weights[static_cast<Index>(i)] = nodes[i].second;
        }
        Vector lds(points.rows()), laps(points.rows());
        Matrix scores;
        if (score) scores.resize(points.rows(), x.size());
        score_->evaluate_batch(t, points, log_density ? &lds : nullptr, score ? &scores : nullptr,
                               divergence ? &laps : nullptr);
        if (score) *score = scores.transpose() * weights;
        if (divergence) *divergence = weights.dot(laps);
        if (log_density) *log_density = weights.dot(lds);
        return;
    }

    const Index n = n_samples_;
    std::vector<Vector> score_parts;
    std::vector<double> div_parts, ld_parts;
    Matrix draws, scores;
    Vector lds, laps;
    for (Index start = 0; start < n; start += kReduceBlock) {
        const Index block = std::min<Index>(kReduceBlock, n - start);
        kernel_->draw_batch(x, block, rng, draws);
        if (score) scores.resize(block, x.size());
        score_->evaluate_batch(t, draws, log_density ? &lds : nullptr, score ? &scores : nullptr,
                               divergence ? &laps : nullptr);
        if (score) score_parts.push_back(scores.colwise().sum().transpose());
        if (divergence) div_parts.push_back(laps.sum());
        if (log_density) ld_parts.push_back(lds.sum());
    }
    const double inv = 1.0 / static_cast<double>(n);
    if (score) *score = pairwise_combine(score_parts) * inv;
    if (divergence) *divergence = pairwise_combine(div_parts) * inv;
    if (log_density) *log_density = pairwise_combine(ld_parts) * inv;
}

Vector SmoothedScoreModel::smoothed_score(double t, const Vector& x, RngStream& rng) const {
    Vector out;
    accumulate(t, x, rng, &out, nullptr, nullptr);
    return out;
}

double SmoothedScoreModel::smoothed_log_density(double t, const Vector& x, RngStream& rng) const {
    double out = 0.0;
    accumulate(t, x, rng, nullptr, nullptr, &out);
    return out;
}

double SmoothedScoreModel::smoothed_divergence(double t, const Vector& x, RngStream& rng) const {
    if (!kernel_->location_independent())
        throw CapabilityError(
            "smoothed divergence needs a location-independent kernel (divergence and "
            "smoothing do not commute otherwise)");
    double out = 0.0;
    accumulate(t, x, rng, nullptr, &out, nullptr);
    return out;
}

FrozenSmoothing SmoothedScoreModel::freeze(RngStream& rng) const {
    if (!kernel_->location_independent())
        throw CapabilityError("frozen displacement sets need a location-independent kernel");
    FrozenSmoothing out;
    const Index d = score_->dim();
    const Vector origin = Vector::Zero(d);
    if (delta_) {
        out.offsets = Matrix::Zero(1, d);
        out.weights = Vector::Ones(1);
        return out;
    }
    if (mode_ == SmoothingMode::Quadrature) {
        const auto nodes = kernel_->nodes(origin);
        out.offsets.resize(static_cast<Index>(nodes.size()), d);
        out.weights.resize(static_cast<Index>(nodes.size()));
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            out.offsets.row(static_cast<Index>(i)) = nodes[i].first.transpose();
            out.weights[static_cast<Index>(i)] = nodes[i].second;
        }
        return out;
    }
    kernel_->draw_batch(origin, n_samples_, rng, out.offsets);
    out.weights = Vector::Constant(n_samples_, 1.0 / static_cast<double>(n_samples_));
    return out;
}

void SmoothedScoreModel::evaluate_frozen(double t, const Vector& x, const FrozenSmoothing& frozen,
                                         Vector* score, double* divergence,
                                         double* log_density) const {
    const Index n = frozen.offsets.rows();
    std::vector<Vector> score_parts;
    std::vector<double> div_parts, ld_parts;
    Matrix points, scores;
    Vector lds, laps;
    for (Index start = 0; start < n; start += kReduceBlock) {
        const Index block = std::min<Index>(kReduceBlock, n - start);
        points = frozen.offsets.middleRows(start, block);
        points.rowwise() += x.transpose();
        if (score) scores.resize(block, x.size());
        score_->evaluate_batch(t, points, log_density ? &lds : nullptr, score ? &scores : nullptr,
                               divergence ? &laps : nullptr);
        const auto w = frozen.weights.segment(start, block);
        if (score) score_parts.push_back(scores.transpose() * w);
        if (divergence) div_parts.push_back(w.dot(laps));
        if (log_density) ld_parts.push_back(w.dot(lds));
    }
    if (score) *score = pairwise_combine(score_parts);
    if (divergence) *divergence = pairwise_combine(div_parts);
    if (log_density) *log_density = pairwise_combine(ld_parts);
}

} // namespace geoscore
