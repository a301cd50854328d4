#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <vector>

#include "vpgmm/common.hpp"

namespace vpgmm {

/// Full mixture parameter set {w_j, mu_j, Sigma_j} with cached precision
/// matrices and log-determinants. The cache is refreshed whenever the
/// covariances change; all density evaluations go through the cache.
struct GmmParams {
    Eigen::VectorXd weights;                  // J
    std::vector<Eigen::VectorXd> means;       // J vectors of length D (MW)
    std::vector<Eigen::MatrixXd> covariances; // J matrices D x D (MW^2)
    std::vector<Eigen::MatrixXd> precisions;  // cached inverses
    Eigen::VectorXd log_dets;                 // cached log|Sigma_j|

    int components() const { return static_cast<int>(weights.size()); }
    int dim() const { return means.empty() ? 0 : static_cast<int>(means[0].size()); }

    /// Recomputes precisions and log-determinants from the covariances.
    /// Requires every covariance to already satisfy the SPD policy.
    void refresh_cache();

    /// Checks weight normalization, symmetry, positive definiteness and
    /// cache consistency; throws ValidationError on violation.
    void validate() const;
};

/// SPD repair: symmetrize, then add eps*mean(diag)*I starting at eps=1e-9,
/// escalating tenfold until Cholesky succeeds. Throws DegeneracyError if
/// eps would exceed 1e-3. Returns the eps actually applied (0 if none).
double apply_spd_jitter(Eigen::MatrixXd& sigma);

/// E-step posteriors, one row per observation, rows sum to 1.
struct Responsibilities {
    Eigen::MatrixXd q; // I x J
};

struct EStepResult {
    Eigen::MatrixXd q;  // I x J responsibilities
    double loglik;      // sum_i log sum_j w_j N(y_i; theta_j)
};

struct EmOptions {
    double tol = 1e-8;       // relative log-likelihood change
    int max_iter = 500;
    bool use_updated_mean = false; // false: scatter about the previous mean
};

struct FitResult {
    GmmParams params;
    int iterations = 0;              // number of M-steps performed
    std::vector<double> loglik_trace; // log-likelihood of theta^k, k = 0..
    bool converged = false;
};

/// Scalar conditional mixture of one farm's output at one period given
/// all farms' outputs at the conditioning period.
struct ConditionalGmm {
    int farm = 0;
    int period = 0;
    Eigen::VectorXd weights;   // J, sums to 1
    Eigen::VectorXd means;     // J (MW)
    Eigen::VectorXd variances; // J (MW^2), all positive
};

/// log N(x; mean, Sigma) evaluated through the precision matrix:
/// -(1/2) (x-mu)' Phi (x-mu) - (1/2) (D ln 2pi + log|Sigma|).
double gaussian_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                       const Eigen::MatrixXd& precision, double log_det);

double gmm_logpdf(const Eigen::VectorXd& x, const GmmParams& params);
double gmm_pdf(const Eigen::VectorXd& x, const GmmParams& params);

/// Log-space E-step with per-row max subtraction. data is I x D.
EStepResult e_step(const Eigen::MatrixXd& data, const GmmParams& params);

/// Builds responsibilities and the log-likelihood from an I x J matrix of
/// per-observation per-component log w_j + log N_j values. Shared by the
/// centralized and the distributed paths so both normalize identically.
EStepResult responsibilities_from_logdens(const Eigen::MatrixXd& log_dens);

/// Relative convergence test shared by both fitting paths.
bool loglik_converged(double loglik, double prev_loglik, double tol);

/// One M-step. By default the covariance scatter is taken about the
/// previous iteration's mean (options.use_updated_mean switches to the
/// freshly updated one). Components whose total responsibility falls
/// below 1e-12 are reseeded at the observation with the lowest mixture
/// density under prev_params.
GmmParams m_step(const Eigen::MatrixXd& data, const Eigen::MatrixXd& q,
                 const GmmParams& prev_params, const EmOptions& options = {});

/// Deterministic initialization from a shared seed: means uniform per
/// coordinate in [0, capacity of the owning farm], covariances
/// diag(capacity^2/16), uniform weights. Needs no raw data, so every
/// party can derive the same theta^0 locally.
GmmParams init_params(const Dims& dims, std::span<const double> capacities,
                      std::uint64_t seed);

using IterationObserver = std::function<void(int iteration, const GmmParams&)>;

/// Plaintext EM on assembled data; the ground-truth oracle for the
/// distributed fit. The observer, when set, sees theta after every M-step.
FitResult fit_centralized(const Eigen::MatrixXd& data, const GmmParams& init,
                          const EmOptions& options = {},
                          const IterationObserver& observer = {});

/// Conditional parameters of farm m's output at period t given all farms'
/// outputs at period v0 (Eq. of the joint Gaussian conditioning identity,
/// dense solve on the sliced covariance). Plaintext oracle for the
/// private forecast.
ConditionalGmm conditional_params(const GmmParams& params, const Dims& dims,
                                  const Eigen::VectorXd& y_v0, int v0, int m, int t);

/// Density and CDF of a scalar mixture; quantile by bisection to the
/// requested probability tolerance.
double conditional_pdf(const ConditionalGmm& c, double x);
double conditional_cdf(const ConditionalGmm& c, double x);
double conditional_quantile(const ConditionalGmm& c, double p, double prob_tol = 1e-8);

} // namespace vpgmm
