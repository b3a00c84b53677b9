#pragma once

#include "sila/frames.hpp"
#include "sila/segmentation.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <utility>

namespace sila {

/// Squared-exponential kernel with per-axis lengthscales plus Gaussian noise.
struct GpHyper {
  double lengthscale_a = 1.0;
  double lengthscale_b = 1.0;
  double signal_var = 1.0;
  double noise_var = 0.01;

  void validate() const;
  bool operator==(const GpHyper&) const = default;
};

struct GpConfig {
  /// Pseudo-inputs per GP.
  int num_inducing = 15;
  int max_iters = 200;
  /// Stop when an accepted step improves the objective by less than
  /// rel_tol * max(1, |objective|).
  double rel_tol = 1e-6;
  double min_noise_var = 1e-6;
  /// Initial noise variance; defaults to a tenth of the target second moment.
  std::optional<double> init_noise_var;
  std::uint64_t seed = 0;
};

/// Pseudo-input (FITC) GP regressor from R^2 to R. Holds the Gaussian
/// posterior over the latent values at the pseudo-inputs; prediction
/// factors are always re-derived from that posterior.
class SparseGP {
 public:
  SparseGP() = default;

  /// Posterior for fixed pseudo-inputs and hyperparameters. extra_noise,
  /// when non-empty, adds per-point noise variance.
  static SparseGP fit(const Eigen::MatrixX2d& X, const Eigen::VectorXd& y, const Eigen::MatrixX2d& Z,
                      const GpHyper& hyper, const Eigen::VectorXd& extra_noise = {});
  /// Rebuilds a GP from a stored posterior. Throws DataError when the
  /// pieces are inconsistent.
  static SparseGP from_posterior(Eigen::MatrixX2d Z, const GpHyper& hyper, Eigen::VectorXd inducing_mean,
                                 Eigen::MatrixXd inducing_cov);

  bool trained() const { return Z_.rows() > 0; }
  int num_inducing() const { return static_cast<int>(Z_.rows()); }
  const Eigen::MatrixX2d& pseudo_inputs() const { return Z_; }
  const GpHyper& hyper() const { return hyper_; }
  const Eigen::VectorXd& inducing_mean() const { return mu_u_; }
  const Eigen::MatrixXd& inducing_cov() const { return sigma_u_; }

  /// Predictive mean and variance (noise included) at p.
  std::pair<double, double> predict(const Vec2& p) const;

  bool operator==(const SparseGP& o) const {
    return Z_ == o.Z_ && hyper_ == o.hyper_ && mu_u_ == o.mu_u_ && sigma_u_ == o.sigma_u_;
  }

 private:
  void derive_caches();

  Eigen::MatrixX2d Z_;
  GpHyper hyper_;
  Eigen::VectorXd mu_u_;
  Eigen::MatrixXd sigma_u_;
  Eigen::VectorXd w_;   // Kmm^-1 mu_u
  Eigen::MatrixXd C_;   // Kmm^-1 Sigma_u Kmm^-1 - Kmm^-1
};

/// Squared-exponential Gram matrix between the rows of A and B (no jitter).
Eigen::MatrixXd se_kernel(const Eigen::MatrixX2d& A, const Eigen::MatrixX2d& B, const GpHyper& hyper);

/// FITC log marginal likelihood. When grad is non-null it receives the
/// gradient w.r.t. [log l_a, log l_b, log signal_var, log noise_var,
/// z_1a, z_1b, ..., z_Ma, z_Mb]. nullopt when a factorization fails.
std::optional<double> sparse_log_marginal(const Eigen::MatrixX2d& X, const Eigen::VectorXd& y,
                                          const Eigen::VectorXd& extra_noise, const Eigen::MatrixX2d& Z,
                                          const GpHyper& hyper, Eigen::VectorXd* grad = nullptr);

/// Seeded k-means (k-means++ start) centres of the rows of X.
Eigen::MatrixX2d kmeans_centres(const Eigen::MatrixX2d& X, int k, std::uint64_t seed);

/// Fits one GP: pseudo-inputs from k-means (or the warm start), then
/// joint gradient ascent on the marginal likelihood. With at most
/// num_inducing distinct inputs, the pseudo-inputs are the distinct inputs
/// and only the hyperparameters are optimized (an exact GP).
SparseGP train_gp(const Eigen::MatrixX2d& X, const Eigen::VectorXd& y, const Eigen::VectorXd& extra_noise,
                  const GpConfig& cfg, const SparseGP* warm_start = nullptr);

/// Velocity field over the common frame: one GP per velocity component.
struct FlowField {
  SparseGP gp_a;
  SparseGP gp_b;
  long training_count = 0;

  bool trained() const { return gp_a.trained() && gp_b.trained(); }
  bool operator==(const FlowField&) const = default;
};

struct VelocityPrediction {
  Vec2 mean = Vec2::Zero();
  Vec2 var = Vec2::Zero();
};

FlowField train_flowfield(std::span<const FlowSample> data, const GpConfig& cfg);
VelocityPrediction predict_velocity(const FlowField& ff, const Vec2& p);
/// Sum over samples and both axes of the predictive log density.
double log_likelihood(const FlowField& ff, std::span<const FlowSample> data);
/// Refits on the new data together with surrogate observations at the old
/// pseudo-inputs (posterior means as targets, posterior variances as extra
/// noise), warm-started from the old hyperparameters and pseudo-inputs.
/// Empty d2 returns ff_old unchanged.
FlowField incremental_update(const FlowField& ff_old, std::span<const FlowSample> d2, const GpConfig& cfg);
/// Posterior means of both components at gp_a's pseudo-inputs. Stands in
/// for raw data when a field has to be merged into another.
std::vector<FlowSample> surrogate_samples(const FlowField& ff);

/// Largest relative error |a - f| / max(|a|, |f|, 1e-4) between analytic
/// and central-difference (step 1e-5) gradients of the marginal likelihood,
/// over both axes, at the initial parameters with min(num_inducing, n/2)
/// k-means pseudo-inputs. nullopt when every axis has constant targets.
std::optional<double> gradient_check(const GpConfig& cfg, std::span<const FlowSample> data);

}  // namespace sila
