#include "vpgmm/gmm_core.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>

#include "vpgmm/rng.hpp"

namespace vpgmm {

namespace {

constexpr double kLn2Pi = 1.8378770664093454835606594728112;
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kEmptyComponentFloor = 1e-12;

std::string dim_error(const char* where, long got, long want) {
    return std::string(where) + ": dimension mismatch, got " + std::to_string(got) +
           ", expected " + std::to_string(want);
}

} // namespace

double apply_spd_jitter(Eigen::MatrixXd& sigma) {
    sigma = ((sigma + sigma.transpose()) * 0.5).eval();
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() == Eigen::Success) return 0.0;

    const double scale = sigma.diagonal().cwiseAbs().mean();
    const double base = scale > 0.0 ? scale : 1.0;
    for (double eps = 1e-9; eps <= 1e-3; eps *= 10.0) {
        Eigen::MatrixXd candidate = sigma;
        candidate.diagonal().array() += eps * base;
        llt.compute(candidate);
        if (llt.info() == Eigen::Success) {
            sigma = candidate;
            return eps;
        }
    }
    throw DegeneracyError("apply_spd_jitter: covariance not repairable within jitter cap 1e-3");
}

void GmmParams::refresh_cache() {
    const int j_count = components();
    const int d = dim();
    precisions.assign(j_count, Eigen::MatrixXd());
    log_dets.resize(j_count);
    for (int j = 0; j < j_count; ++j) {
        Eigen::LLT<Eigen::MatrixXd> llt(covariances[j]);
        if (llt.info() != Eigen::Success)
            throw DegeneracyError("GmmParams: covariance of component " + std::to_string(j + 1) +
                                  " is not positive definite");
        log_dets[j] = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        precisions[j] = llt.solve(Eigen::MatrixXd::Identity(d, d));
    }
}

void GmmParams::validate() const {
    const int j_count = components();
    if (j_count < 1) throw ValidationError("GmmParams: no components");
    if (static_cast<int>(means.size()) != j_count ||
        static_cast<int>(covariances.size()) != j_count ||
        static_cast<int>(precisions.size()) != j_count || log_dets.size() != j_count)
        throw ValidationError("GmmParams: inconsistent component counts");
    if ((weights.array() < 0.0).any())
        throw ValidationError("GmmParams: negative weight");
    if (std::abs(weights.sum() - 1.0) > 1e-12)
        throw ValidationError("GmmParams: weights sum to " + std::to_string(weights.sum()));
    const int d = dim();
    for (int j = 0; j < j_count; ++j) {
        if (means[j].size() != d || covariances[j].rows() != d || covariances[j].cols() != d)
            throw ValidationError("GmmParams: component " + std::to_string(j + 1) + " has wrong shape");
        if ((covariances[j] - covariances[j].transpose()).cwiseAbs().maxCoeff() > 1e-10)
            throw ValidationError("GmmParams: covariance of component " + std::to_string(j + 1) +
                                  " is not symmetric");
        Eigen::LLT<Eigen::MatrixXd> llt(covariances[j]);
        if (llt.info() != Eigen::Success)
            throw ValidationError("GmmParams: covariance of component " + std::to_string(j + 1) +
                                  " is not positive definite");
        const double residual =
            (precisions[j] * covariances[j] - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff();
        if (residual > 1e-8)
            throw ValidationError("GmmParams: stale precision cache for component " +
                                  std::to_string(j + 1));
    }
}

double gaussian_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                       const Eigen::MatrixXd& precision, double log_det) {
    const long d = x.size();
    if (mean.size() != d) throw ValidationError(dim_error("gaussian_logpdf", mean.size(), d));
    if (precision.rows() != d || precision.cols() != d)
        throw ValidationError(dim_error("gaussian_logpdf", precision.rows(), d));
    const Eigen::VectorXd diff = x - mean;
    const double quad = diff.dot(precision * diff);
    return -0.5 * quad - 0.5 * (static_cast<double>(d) * kLn2Pi + log_det);
}

double gmm_logpdf(const Eigen::VectorXd& x, const GmmParams& params) {
    const int j_count = params.components();
    Eigen::VectorXd log_terms(j_count);
    for (int j = 0; j < j_count; ++j) {
        const double logn = gaussian_logpdf(x, params.means[j], params.precisions[j], params.log_dets[j]);
        log_terms[j] = params.weights[j] > 0.0
                           ? std::log(params.weights[j]) + logn
                           : -std::numeric_limits<double>::infinity();
    }
    const double top = log_terms.maxCoeff();
    if (!std::isfinite(top)) return -std::numeric_limits<double>::infinity();
    return top + std::log((log_terms.array() - top).exp().sum());
}

double gmm_pdf(const Eigen::VectorXd& x, const GmmParams& params) {
    return std::exp(gmm_logpdf(x, params));
}

EStepResult responsibilities_from_logdens(const Eigen::MatrixXd& log_dens) {
    const long rows = log_dens.rows();
    const long cols = log_dens.cols();
    EStepResult result;
    result.q.resize(rows, cols);
    result.loglik = 0.0;
    for (long i = 0; i < rows; ++i) {
        const double top = log_dens.row(i).maxCoeff();
        if (!std::isfinite(top))
            throw DegeneracyError("e_step: all component densities underflowed for observation " +
                                  std::to_string(i + 1));
        const Eigen::ArrayXd shifted = (log_dens.row(i).array() - top).exp();
        const double total = shifted.sum();
        result.q.row(i) = (shifted / total).matrix();
        result.loglik += top + std::log(total);
    }
    return result;
}

bool loglik_converged(double loglik, double prev_loglik, double tol) {
    return std::abs(loglik - prev_loglik) / (1.0 + std::abs(loglik)) < tol;
}

EStepResult e_step(const Eigen::MatrixXd& data, const GmmParams& params) {
    const long n = data.rows();
    const int d = params.dim();
    if (data.cols() != d) throw ValidationError(dim_error("e_step", data.cols(), d));
    const int j_count = params.components();

    Eigen::MatrixXd log_dens(n, j_count);
    for (int j = 0; j < j_count; ++j) {
        const Eigen::MatrixXd centered = data.rowwise() - params.means[j].transpose();
        const Eigen::VectorXd quad =
            (centered * params.precisions[j]).cwiseProduct(centered).rowwise().sum();
        const double log_norm = -0.5 * (static_cast<double>(d) * kLn2Pi + params.log_dets[j]);
        const double log_w = params.weights[j] > 0.0 ? std::log(params.weights[j])
                                                     : -std::numeric_limits<double>::infinity();
        log_dens.col(j) = (-0.5 * quad.array() + log_norm + log_w).matrix();
    }
    return responsibilities_from_logdens(log_dens);
}

GmmParams m_step(const Eigen::MatrixXd& data, const Eigen::MatrixXd& q,
                 const GmmParams& prev_params, const EmOptions& options) {
    const long n = data.rows();
    const int d = static_cast<int>(data.cols());
    const int j_count = static_cast<int>(q.cols());
    if (q.rows() != n) throw ValidationError(dim_error("m_step", q.rows(), n));

    GmmParams next;
    next.weights.resize(j_count);
    next.means.assign(j_count, Eigen::VectorXd(d));
    next.covariances.assign(j_count, Eigen::MatrixXd(d, d));

    std::vector<int> starved;
    for (int j = 0; j < j_count; ++j) {
        const double total_resp = q.col(j).sum();
        next.weights[j] = total_resp / static_cast<double>(n);
        if (total_resp < kEmptyComponentFloor) {
            starved.push_back(j);
            continue;
        }
        for (int a = 0; a < d; ++a)
            next.means[j][a] = data.col(a).dot(q.col(j)) / total_resp;

        const Eigen::VectorXd& center =
            options.use_updated_mean ? next.means[j] : prev_params.means[j];
        const Eigen::MatrixXd centered = data.rowwise() - center.transpose();
        const Eigen::MatrixXd weighted = centered.array().colwise() * q.col(j).array();
        next.covariances[j] = (weighted.transpose() * centered) / total_resp;
        apply_spd_jitter(next.covariances[j]);
    }

    if (!starved.empty()) {
        // Reseed at the observation the current mixture explains worst.
        long worst = 0;
        double worst_logpdf = std::numeric_limits<double>::infinity();
        for (long i = 0; i < n; ++i) {
            const double lp = gmm_logpdf(data.row(i).transpose(), prev_params);
            if (lp < worst_logpdf) {
                worst_logpdf = lp;
                worst = i;
            }
        }
        for (int j : starved) {
            next.means[j] = data.row(worst).transpose();
            next.covariances[j] = prev_params.covariances[j];
            next.weights[j] = 1.0 / static_cast<double>(n);
        }
        next.weights /= next.weights.sum();
    }

    next.refresh_cache();
    return next;
}

GmmParams init_params(const Dims& dims, std::span<const double> capacities, std::uint64_t seed) {
    dims.validate();
    if (static_cast<int>(capacities.size()) != dims.num_farms)
        throw ValidationError("init_params: need one capacity per farm");
    const int d = dims.dim();
    const int j_count = dims.num_components;

    Rng rng(derive_seed(seed, {0x696e6974ULL}));
    GmmParams params;
    params.weights = Eigen::VectorXd::Constant(j_count, 1.0 / j_count);
    params.means.assign(j_count, Eigen::VectorXd(d));
    params.covariances.assign(j_count, Eigen::MatrixXd::Zero(d, d));
    for (int j = 0; j < j_count; ++j) {
        for (int a = 0; a < d; ++a) {
            const double cap = capacities[static_cast<std::size_t>(a / dims.num_periods)];
            params.means[j][a] = rng.uniform(0.0, cap);
            params.covariances[j](a, a) = cap * cap / 16.0;
        }
    }
    params.refresh_cache();
    return params;
}

FitResult fit_centralized(const Eigen::MatrixXd& data, const GmmParams& init,
                          const EmOptions& options, const IterationObserver& observer) {
    init.validate();
    FitResult result;
    result.params = init;
    if (std::isinf(options.tol)) { // immediate convergence, no work at all
        result.converged = true;
        return result;
    }

    double prev_loglik = 0.0;
    while (true) {
        EStepResult es;
        try {
            es = e_step(data, result.params);
        } catch (const DegeneracyError& e) {
            throw DegeneracyError(std::string(e.what()) + " (iteration " +
                                  std::to_string(result.iterations) + ")");
        }
        result.loglik_trace.push_back(es.loglik);
        if (result.loglik_trace.size() > 1 && loglik_converged(es.loglik, prev_loglik, options.tol)) {
            result.converged = true;
            break;
        }
        if (result.iterations >= options.max_iter) break;
        try {
            result.params = m_step(data, es.q, result.params, options);
        } catch (const DegeneracyError& e) {
            throw DegeneracyError(std::string(e.what()) + " (iteration " +
                                  std::to_string(result.iterations) + ")");
        }
        ++result.iterations;
        if (observer) observer(result.iterations, result.params);
        prev_loglik = es.loglik;
    }
    return result;
}

ConditionalGmm conditional_params(const GmmParams& params, const Dims& dims,
                                  const Eigen::VectorXd& y_v0, int v0, int m, int t) {
    const int farms = dims.num_farms;
    const int periods = dims.num_periods;
    if (params.dim() != dims.dim())
        throw ValidationError(dim_error("conditional_params", params.dim(), dims.dim()));
    if (y_v0.size() != farms)
        throw ValidationError(dim_error("conditional_params", y_v0.size(), farms));
    if (v0 < 1 || v0 > periods || t < 1 || t > periods)
        throw ValidationError("conditional_params: period index out of range");
    if (t == v0)
        throw ValidationError("conditional_params: target period equals conditioning period");
    if (m < 1 || m > farms) throw ValidationError("conditional_params: farm index out of range");

    const int j_count = params.components();
    const int target = flat_index(m, t, periods);
    std::vector<int> cond(farms);
    for (int n = 1; n <= farms; ++n) cond[n - 1] = flat_index(n, v0, periods);

    ConditionalGmm out;
    out.farm = m;
    out.period = t;
    out.weights.resize(j_count);
    out.means.resize(j_count);
    out.variances.resize(j_count);

    Eigen::VectorXd log_factor(j_count);
    for (int j = 0; j < j_count; ++j) {
        Eigen::VectorXd mu_cond(farms);
        Eigen::MatrixXd sigma_cond(farms, farms);
        Eigen::VectorXd sigma_cross(farms); // row (m,t) of Sigma restricted to the v0 block
        for (int a = 0; a < farms; ++a) {
            mu_cond[a] = params.means[j][cond[a]];
            sigma_cross[a] = params.covariances[j](target, cond[a]);
            for (int b = 0; b < farms; ++b)
                sigma_cond(a, b) = params.covariances[j](cond[a], cond[b]);
        }

        Eigen::LLT<Eigen::MatrixXd> llt(sigma_cond);
        if (llt.info() != Eigen::Success)
            throw DegeneracyError("conditional_params: conditioning block of component " +
                                  std::to_string(j + 1) + " is singular");

        const Eigen::VectorXd residual = y_v0 - mu_cond;
        const Eigen::VectorXd solved = llt.solve(residual);
        out.means[j] = params.means[j][target] + sigma_cross.dot(solved);
        const double var =
            params.covariances[j](target, target) - sigma_cross.dot(llt.solve(sigma_cross));
        if (!(var > 0.0))
            throw DegeneracyError("conditional_params: non-positive conditional variance for component " +
                                  std::to_string(j + 1));
        out.variances[j] = var;

        const double cond_log_det =
            2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        const double quad = residual.dot(solved);
        const double logn =
            -0.5 * quad - 0.5 * (static_cast<double>(farms) * kLn2Pi + cond_log_det);
        log_factor[j] = params.weights[j] > 0.0
                            ? std::log(params.weights[j]) + logn
                            : -std::numeric_limits<double>::infinity();
    }

    const double top = log_factor.maxCoeff();
    if (!std::isfinite(top))
        throw DegeneracyError("conditional_params: all component factors underflowed");
    const Eigen::ArrayXd shifted = (log_factor.array() - top).exp();
    out.weights = (shifted / shifted.sum()).matrix();
    return out;
}

double conditional_pdf(const ConditionalGmm& c, double x) {
    double density = 0.0;
    for (int j = 0; j < c.weights.size(); ++j) {
        const double z = x - c.means[j];
        density += c.weights[j] * std::exp(-0.5 * z * z / c.variances[j]) /
                   std::sqrt(kTwoPi * c.variances[j]);
    }
    return density;
}

double conditional_cdf(const ConditionalGmm& c, double x) {
    double prob = 0.0;
    for (int j = 0; j < c.weights.size(); ++j) {
        const double z = (x - c.means[j]) / std::sqrt(2.0 * c.variances[j]);
        prob += c.weights[j] * 0.5 * std::erfc(-z);
    }
    return prob;
}

double conditional_quantile(const ConditionalGmm& c, double p, double prob_tol) {
    if (p <= 0.0 || p >= 1.0)
        throw ValidationError("conditional_quantile: probability must be in (0, 1)");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < c.weights.size(); ++j) {
        const double sd = std::sqrt(c.variances[j]);
        lo = std::min(lo, c.means[j] - 14.0 * sd);
        hi = std::max(hi, c.means[j] + 14.0 * sd);
    }
    for (int iter = 0; iter < 400; ++iter) {
        const double mid = 0.5 * (lo + hi);
        const double f = conditional_cdf(c, mid);
        if (std::abs(f - p) <= prob_tol) return mid;
        (f < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace vpgmm
