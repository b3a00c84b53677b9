#include "sila/gp_flow.hpp"

#include "sila/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace sila {

namespace {

// Diagonal jitter relative to signal_var: tried from the first value up,
// the smallest one that factorizes wins.
constexpr double kJitterLadder[] = {1e-10, 1e-8, 1e-6, 1e-4};
constexpr double kMinSeparation = 1e-8;
constexpr double kMinLengthscale = 1e-3;
constexpr double kMaxLengthscale = 1e3;
constexpr double kMinSignalVar = 1e-10;
constexpr double kMaxVar = 1e6;

Eigen::LLT<Eigen::MatrixXd> factor_kmm(const Eigen::MatrixXd& Kmm, double signal_var) {
  Eigen::LLT<Eigen::MatrixXd> llt;
  for (double j : kJitterLadder) {
    Eigen::MatrixXd K = Kmm;
    K.diagonal().array() += j * signal_var;
    llt.compute(K);
    if (llt.info() == Eigen::Success) break;
  }
  return llt;
}

void check_inputs(const Eigen::MatrixX2d& X, const Eigen::VectorXd& y, const Eigen::VectorXd& extra) {
  if (X.rows() == 0) throw DataError("GP training data is empty");
  if (y.size() != X.rows()) throw DataError("GP targets and inputs differ in length");
  if (extra.size() != 0 && extra.size() != X.rows()) throw DataError("GP extra noise has wrong length");
  if (!X.allFinite() || !y.allFinite() || !extra.allFinite()) throw DataError("GP data is not finite");
  if (extra.size() != 0 && (extra.array() < 0.0).any()) throw DataError("GP extra noise is negative");
}

void check_separation(const Eigen::MatrixX2d& Z) {
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < Z.rows(); ++j) {
      if ((Z.row(i) - Z.row(j)).norm() < kMinSeparation) {
        throw DataError(fmt::format("pseudo-inputs {} and {} coincide", i, j));
      }
    }
  }
}

Eigen::MatrixX2d distinct_rows(const Eigen::MatrixX2d& X) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::pair{X(a, 0), X(a, 1)} < std::pair{X(b, 0), X(b, 1)};
  });
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i : order) {
    bool dup = false;
    for (auto it = keep.rbegin(); it != keep.rend(); ++it) {
      if (X(i, 0) - X(*it, 0) > kMinSeparation) break;
      if ((X.row(i) - X.row(*it)).norm() < kMinSeparation) {
        dup = true;
        break;
      }
    }
    if (!dup) keep.push_back(i);
  }
  Eigen::MatrixX2d out(static_cast<Eigen::Index>(keep.size()), 2);
  for (std::size_t k = 0; k < keep.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = X.row(keep[k]);
  return out;
}

GpHyper clamp_hyper(GpHyper h, double min_noise) {
  h.lengthscale_a = std::clamp(h.lengthscale_a, kMinLengthscale, kMaxLengthscale);
  h.lengthscale_b = std::clamp(h.lengthscale_b, kMinLengthscale, kMaxLengthscale);
  h.signal_var = std::clamp(h.signal_var, kMinSignalVar, kMaxVar);
  h.noise_var = std::clamp(h.noise_var, min_noise, kMaxVar);
  return h;
}

GpHyper initial_hyper(const Eigen::MatrixX2d& X, const Eigen::VectorXd& y, const GpConfig& cfg) {
  GpHyper h;
  const Eigen::Vector2d range = X.colwise().maxCoeff() - X.colwise().minCoeff();
  h.lengthscale_a = range(0) > 0.0 ? 0.3 * range(0) : 1.0;
  h.lengthscale_b = range(1) > 0.0 ? 0.3 * range(1) : 1.0;
  const double second_moment = y.squaredNorm() / static_cast<double>(y.size());
  h.signal_var = std::max(second_moment, 1e-4);
  h.noise_var = cfg.init_noise_var.value_or(0.1 * h.signal_var);
  return clamp_hyper(h, cfg.min_noise_var);
}

Eigen::VectorXd pack(const GpHyper& h, const Eigen::MatrixX2d& Z, bool with_z) {
  Eigen::VectorXd theta(4 + (with_z ? 2 * Z.rows() : 0));
  theta(0) = std::log(h.lengthscale_a);
  theta(1) = std::log(h.lengthscale_b);
  theta(2) = std::log(h.signal_var);
  theta(3) = std::log(h.noise_var);
  if (with_z) {
    for (Eigen::Index j = 0; j < Z.rows(); ++j) {
      theta(4 + 2 * j) = Z(j, 0);
      theta(5 + 2 * j) = Z(j, 1);
    }
  }
  return theta;
}

void unpack(const Eigen::VectorXd& theta, GpHyper& h, Eigen::MatrixX2d& Z, bool with_z) {
  h.lengthscale_a = std::exp(theta(0));
  h.lengthscale_b = std::exp(theta(1));
  h.signal_var = std::exp(theta(2));
  h.noise_var = std::exp(theta(3));
  if (with_z) {
    for (Eigen::Index j = 0; j < Z.rows(); ++j) {
      Z(j, 0) = theta(4 + 2 * j);
      Z(j, 1) = theta(5 + 2 * j);
    }
  }
}

void project(Eigen::VectorXd& theta, double min_noise) {
  theta(0) = std::clamp(theta(0), std::log(kMinLengthscale), std::log(kMaxLengthscale));
  theta(1) = std::clamp(theta(1), std::log(kMinLengthscale), std::log(kMaxLengthscale));
  theta(2) = std::clamp(theta(2), std::log(kMinSignalVar), std::log(kMaxVar));
  theta(3) = std::clamp(theta(3), std::log(min_noise), std::log(kMaxVar));
}

struct Objective {
  const Eigen::MatrixX2d& X;
  const Eigen::VectorXd& y;
  const Eigen::VectorXd& extra;
  Eigen::MatrixX2d Z;
  bool with_z;

  std::optional<double> operator()(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) {
    GpHyper h;
    unpack(theta, h, Z, with_z);
    Eigen::VectorXd full;
    auto v = sparse_log_marginal(X, y, extra, Z, h, grad ? &full : nullptr);
    if (v && grad) *grad = full.head(theta.size());
    if (v && !std::isfinite(*v)) return std::nullopt;
    return v;
  }
};

// Projected gradient ascent with Barzilai-Borwein steps and Armijo
// backtracking; every accepted step increases the objective.
Eigen::VectorXd maximize(Objective& f, Eigen::VectorXd theta, const GpConfig& cfg) {
  project(theta, cfg.min_noise_var);
  Eigen::VectorXd g;
  auto value = f(theta, &g);
  if (!value) throw DataError("GP marginal likelihood cannot be evaluated at the initial parameters");
  Eigen::VectorXd prev_theta, prev_g;
  double step = 0.0;
  for (int it = 0; it < cfg.max_iters; ++it) {
    if (!g.allFinite() || g.norm() == 0.0) break;
    if (it == 0) {
      step = 0.1 / g.norm();
    } else {
      const Eigen::VectorXd s = theta - prev_theta;
      const Eigen::VectorXd yk = prev_g - g;  // gradient change of the minimized negative objective
      const double sy = s.dot(yk);
      step = sy > 0.0 ? s.squaredNorm() / sy : 1.0 / g.norm();
      step = std::clamp(step, 1e-10, 1e4);
    }
    bool accepted = false;
    Eigen::VectorXd cand, cand_g;
    std::optional<double> cand_value;
    for (int ls = 0; ls < 40; ++ls) {
      cand = theta + step * g;
      project(cand, cfg.min_noise_var);
      const double predicted = g.dot(cand - theta);
      if (predicted <= 0.0) break;
      cand_value = f(cand, &cand_g);
      if (cand_value && *cand_value >= *value + 1e-4 * predicted && cand_g.allFinite()) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const double gain = *cand_value - *value;
    prev_theta = theta;
    prev_g = g;
    theta = cand;
    g = cand_g;
    value = cand_value;
    if (gain <= cfg.rel_tol * std::max(1.0, std::abs(*value))) break;
  }
  return theta;
}

}  // namespace

void GpHyper::validate() const {
  for (double v : {lengthscale_a, lengthscale_b, signal_var, noise_var}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DataError("GP hyperparameters must be positive and finite");
  }
}

Eigen::MatrixXd se_kernel(const Eigen::MatrixX2d& A, const Eigen::MatrixX2d& B, const GpHyper& h) {
  Eigen::MatrixXd K(A.rows(), B.rows());
  const double ia = 1.0 / (h.lengthscale_a * h.lengthscale_a);
  const double ib = 1.0 / (h.lengthscale_b * h.lengthscale_b);
  for (Eigen::Index j = 0; j < B.rows(); ++j) {
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      const double da = A(i, 0) - B(j, 0);
      const double db = A(i, 1) - B(j, 1);
      K(i, j) = h.signal_var * std::exp(-0.5 * (da * da * ia + db * db * ib));
    }
  }
  return K;
}

std::optional<double> sparse_log_marginal(const Eigen::MatrixX2d& X, const Eigen::VectorXd& y,
                                          const Eigen::VectorXd& extra_noise, const Eigen::MatrixX2d& Z,
                                          const GpHyper& h, Eigen::VectorXd* grad) {
  const Eigen::Index n = X.rows();
  const Eigen::Index m = Z.rows();
  const Eigen::MatrixXd Kmm = se_kernel(Z, Z, h);
  const Eigen::MatrixXd Kmn = se_kernel(Z, X, h);
  Eigen::LLT<Eigen::MatrixXd> lm = factor_kmm(Kmm, h.signal_var);
  if (lm.info() != Eigen::Success) return std::nullopt;
  const Eigen::MatrixXd V = lm.matrixL().solve(Kmn);

  Eigen::VectorXd lam(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    lam(i) = std::max(h.signal_var - V.col(i).squaredNorm(), 0.0) + h.noise_var +
             (extra_noise.size() ? extra_noise(i) : 0.0);
  }
  const Eigen::VectorXd inv_lam = lam.cwiseInverse();
  const Eigen::MatrixXd V_il = V * inv_lam.asDiagonal();
  Eigen::MatrixXd Bm = V_il * V.transpose();
  Bm.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> lb(Bm);
  if (lb.info() != Eigen::Success) return std::nullopt;

  const Eigen::VectorXd y_il = y.cwiseProduct(inv_lam);
  const Eigen::VectorXd beta = lb.matrixL().solve(V * y_il);
  const double quad = y.dot(y_il) - beta.squaredNorm();
  const double logdet = lam.array().log().sum() + 2.0 * lb.matrixLLT().diagonal().array().log().sum();
  const double value =
      -0.5 * quad - 0.5 * logdet - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  if (grad == nullptr) return value;

  // alpha = Sigma^-1 y, diag(Sigma^-1), and R_ii = alpha_i^2 - (Sigma^-1)_ii.
  const Eigen::VectorXd gam = lb.matrixU().solve(beta);
  const Eigen::VectorXd alpha = y_il - (V.transpose() * gam).cwiseProduct(inv_lam);
  const Eigen::MatrixXd U = lb.matrixL().solve(V);
  Eigen::VectorXd r_diag(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sinv = inv_lam(i) - U.col(i).squaredNorm() * inv_lam(i) * inv_lam(i);
    r_diag(i) = alpha(i) * alpha(i) - sinv;
  }

  // B = Kmm^-1 Kmn; P = B (alpha alpha^T - Sigma^-1 - diag(R)); S = P B^T.
  const Eigen::MatrixXd B = lm.matrixU().solve(V);
  const Eigen::MatrixXd B_il = B * inv_lam.asDiagonal();
  const Eigen::MatrixXd W = lb.matrixU().solve(U * inv_lam.asDiagonal());  // Bm^-1 V Lambda^-1
  Eigen::MatrixXd P = (B * alpha) * alpha.transpose() - B_il + (B_il * V.transpose()) * W;
  P -= B * r_diag.asDiagonal();
  Eigen::MatrixXd S = P * B.transpose();
  S = 0.5 * (S + S.transpose()).eval();

  const Eigen::MatrixXd PK = P.cwiseProduct(Kmn);
  const Eigen::MatrixXd SK = S.cwiseProduct(Kmm);
  grad->setZero(4 + 2 * m);
  const double inv_l2[2] = {1.0 / (h.lengthscale_a * h.lengthscale_a),
                            1.0 / (h.lengthscale_b * h.lengthscale_b)};
  for (int d = 0; d < 2; ++d) {
    double tn = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        const double diff = Z(j, d) - X(i, d);
        tn += PK(j, i) * diff * diff;
      }
    }
    double tm = 0.0;
    for (Eigen::Index l = 0; l < m; ++l) {
      for (Eigen::Index j = 0; j < m; ++j) {
        const double diff = Z(j, d) - Z(l, d);
        tm += SK(j, l) * diff * diff;
      }
    }
    (*grad)(d) = 0.5 * (2.0 * tn - tm) * inv_l2[d];
  }
  (*grad)(2) = 0.5 * (2.0 * PK.sum() - SK.sum() + h.signal_var * r_diag.sum());
  (*grad)(3) = 0.5 * h.noise_var * r_diag.sum();
  for (Eigen::Index j = 0; j < m; ++j) {
    for (int d = 0; d < 2; ++d) {
      double g = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) g += PK(j, i) * (X(i, d) - Z(j, d));
      for (Eigen::Index l = 0; l < m; ++l) g -= SK(j, l) * (Z(l, d) - Z(j, d));
      (*grad)(4 + 2 * j + d) = g * inv_l2[d];
    }
  }
  return value;
}

SparseGP SparseGP::fit(const Eigen::MatrixX2d& X, const Eigen::VectorXd& y, const Eigen::MatrixX2d& Z,
                       const GpHyper& hyper, const Eigen::VectorXd& extra_noise) {
  check_inputs(X, y, extra_noise);
  hyper.validate();
  if (Z.rows() == 0) throw DataError("sparse GP needs at least one pseudo-input");
  check_separation(Z);
  const Eigen::MatrixXd Kmm = se_kernel(Z, Z, hyper);
  const Eigen::MatrixXd Kmn = se_kernel(Z, X, hyper);
  Eigen::LLT<Eigen::MatrixXd> lm = factor_kmm(Kmm, hyper.signal_var);
  if (lm.info() != Eigen::Success) throw InternalError("pseudo-input Gram matrix is not positive definite");
  const Eigen::MatrixXd V = lm.matrixL().solve(Kmn);
  Eigen::VectorXd inv_lam(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double lam = std::max(hyper.signal_var - V.col(i).squaredNorm(), 0.0) + hyper.noise_var +
                       (extra_noise.size() ? extra_noise(i) : 0.0);
    inv_lam(i) = 1.0 / lam;
  }
  Eigen::MatrixXd Bm = V * inv_lam.asDiagonal() * V.transpose();
  Bm.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> lb(Bm);
  if (lb.info() != Eigen::Success) throw InternalError("FITC inner matrix is not positive definite");
  const Eigen::VectorXd beta = lb.matrixL().solve(V * y.cwiseProduct(inv_lam));

  SparseGP gp;
  gp.Z_ = Z;
  gp.hyper_ = hyper;
  const Eigen::MatrixXd L = lm.matrixL();
  gp.mu_u_ = L * lb.matrixU().solve(beta);
  const Eigen::MatrixXd Lt = L.transpose();
  gp.sigma_u_ = L * lb.solve(Lt);
  gp.sigma_u_ = 0.5 * (gp.sigma_u_ + gp.sigma_u_.transpose()).eval();
  gp.derive_caches();
  return gp;
}

SparseGP SparseGP::from_posterior(Eigen::MatrixX2d Z, const GpHyper& hyper, Eigen::VectorXd inducing_mean,
                                  Eigen::MatrixXd inducing_cov) {
  hyper.validate();
  const Eigen::Index m = Z.rows();
  if (m == 0) throw DataError("sparse GP needs at least one pseudo-input");
  if (inducing_mean.size() != m || inducing_cov.rows() != m || inducing_cov.cols() != m) {
    throw DataError("GP posterior dimensions do not match the pseudo-inputs");
  }
  if (!Z.allFinite() || !inducing_mean.allFinite() || !inducing_cov.allFinite()) {
    throw DataError("GP posterior is not finite");
  }
  check_separation(Z);
  SparseGP gp;
  gp.Z_ = std::move(Z);
  gp.hyper_ = hyper;
  gp.mu_u_ = std::move(inducing_mean);
  gp.sigma_u_ = std::move(inducing_cov);
  gp.derive_caches();
  return gp;
}

void SparseGP::derive_caches() {
  Eigen::LLT<Eigen::MatrixXd> lm = factor_kmm(se_kernel(Z_, Z_, hyper_), hyper_.signal_var);
  if (lm.info() != Eigen::Success) throw DataError("pseudo-input Gram matrix is not positive definite");
  w_ = lm.solve(mu_u_);
  const Eigen::MatrixXd Kinv = lm.solve(Eigen::MatrixXd::Identity(Z_.rows(), Z_.rows()));
  C_ = Kinv * sigma_u_ * Kinv - Kinv;
}

std::pair<double, double> SparseGP::predict(const Vec2& p) const {
  if (!trained()) throw DataError("GP is not trained");
  Eigen::MatrixX2d q(1, 2);
  q.row(0) = p.transpose();
  const Eigen::VectorXd k = se_kernel(Z_, q, hyper_).col(0);
  const double mean = k.dot(w_);
  const double latent = std::max(hyper_.signal_var + k.dot(C_ * k), 0.0);
  return {mean, latent + hyper_.noise_var};
}

Eigen::MatrixX2d kmeans_centres(const Eigen::MatrixX2d& X, int k, std::uint64_t seed) {
  const Eigen::MatrixX2d pts = distinct_rows(X);
  const Eigen::Index n = pts.rows();
  if (k < 1) throw DataError("k-means needs k >= 1");
  if (n <= k) return pts;
  std::mt19937_64 rng(seed);
  Eigen::MatrixX2d C(k, 2);
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  C.row(0) = pts.row(first(rng));
  Eigen::VectorXd d2 = (pts.rowwise() - C.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    std::uniform_real_distribution<double> u(0.0, d2.sum());
    double r = u(rng);
    Eigen::Index pick = n - 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d2(i) <= 0.0) continue;
      r -= d2(i);
      if (r <= 0.0) {
        pick = i;
        break;
      }
    }
    while (d2(pick) <= 0.0) --pick;
    C.row(c) = pts.row(pick);
    d2 = d2.cwiseMin((pts.rowwise() - C.row(c)).rowwise().squaredNorm());
  }
  std::vector<int> label(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < 50; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      (C.rowwise() - pts.row(i)).rowwise().squaredNorm().minCoeff(&best);
      if (label[static_cast<std::size_t>(i)] != static_cast<int>(best)) {
        label[static_cast<std::size_t>(i)] = static_cast<int>(best);
        changed = true;
      }
    }
    if (!changed) break;
    Eigen::MatrixX2d sum = Eigen::MatrixX2d::Zero(k, 2);
    Eigen::VectorXi count = Eigen::VectorXi::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sum.row(label[static_cast<std::size_t>(i)]) += pts.row(i);
      ++count(label[static_cast<std::size_t>(i)]);
    }
    for (int c = 0; c < k; ++c) {
      if (count(c) > 0) C.row(c) = sum.row(c) / count(c);
    }
  }
  // Means of different clusters practically never coincide; if they do,
  // fall back to the distinct data points closest to each centre.
  try {
    check_separation(C);
  } catch (const DataError&) {
    for (int c = 0; c < k; ++c) {
      Eigen::Index best = 0;
      (pts.rowwise() - C.row(c)).rowwise().squaredNorm().minCoeff(&best);
      C.row(c) = pts.row(best);
    }
    check_separation(C);
  }
  return C;
}

SparseGP train_gp(const Eigen::MatrixX2d& X, const Eigen::VectorXd& y, const Eigen::VectorXd& extra_noise,
                  const GpConfig& cfg, const SparseGP* warm_start) {
  check_inputs(X, y, extra_noise);
  if (cfg.num_inducing < 1) throw DataError("num_inducing must be >= 1");
  const Eigen::MatrixX2d distinct = distinct_rows(X);
  const bool exact = distinct.rows() <= cfg.num_inducing;
  Eigen::MatrixX2d Z;
  if (exact) {
    Z = distinct;
  } else if (warm_start != nullptr && warm_start->num_inducing() == cfg.num_inducing) {
    Z = warm_start->pseudo_inputs();
  } else {
    Z = kmeans_centres(X, cfg.num_inducing, cfg.seed);
  }
  const GpHyper init = warm_start != nullptr ? clamp_hyper(warm_start->hyper(), cfg.min_noise_var)
                                             : initial_hyper(X, y, cfg);
  Objective f{X, y, extra_noise, Z, !exact};
  const Eigen::VectorXd theta = maximize(f, pack(init, Z, !exact), cfg);
  GpHyper h;
  unpack(theta, h, Z, !exact);
  try {
    return SparseGP::fit(X, y, Z, h, extra_noise);
  } catch (const DataError&) {
    if (exact) throw;
    // Optimized pseudo-inputs collapsed onto each other; keep the
    // hyperparameters and fall back to the k-means placement.
    return SparseGP::fit(X, y, kmeans_centres(X, cfg.num_inducing, cfg.seed), h, extra_noise);
  }
}

namespace {

struct AxisData {
  Eigen::MatrixX2d X;
  Eigen::VectorXd va;
  Eigen::VectorXd vb;
};

AxisData to_matrices(std::span<const FlowSample> data) {
  AxisData d;
  const auto n = static_cast<Eigen::Index>(data.size());
  d.X.resize(n, 2);
  d.va.resize(n);
  d.vb.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = data[static_cast<std::size_t>(i)];
    d.X.row(i) = s.p.transpose();
    d.va(i) = s.v(0);
    d.vb(i) = s.v(1);
  }
  if (!d.X.allFinite() || !d.va.allFinite() || !d.vb.allFinite()) throw DataError("flow data is not finite");
  return d;
}

double log_normal(double x, double mean, double var) {
  const double r = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + r * r / var);
}

SparseGP update_axis(const SparseGP& old, const Eigen::MatrixX2d& X2, const Eigen::VectorXd& y2,
                     const GpConfig& cfg) {
  const Eigen::Index m = old.num_inducing();
  const Eigen::Index n = m + X2.rows();
  Eigen::MatrixX2d X(n, 2);
  Eigen::VectorXd y(n);
  Eigen::VectorXd extra = Eigen::VectorXd::Zero(n);
  X.topRows(m) = old.pseudo_inputs();
  y.head(m) = old.inducing_mean();
  extra.head(m) = old.inducing_cov().diagonal().cwiseMax(0.0);
  X.bottomRows(X2.rows()) = X2;
  y.tail(X2.rows()) = y2;
  return train_gp(X, y, extra, cfg, &old);
}

}  // namespace

FlowField train_flowfield(std::span<const FlowSample> data, const GpConfig& cfg) {
  if (data.empty()) throw DataError("train_flowfield: empty data");
  const AxisData d = to_matrices(data);
  FlowField ff;
  ff.gp_a = train_gp(d.X, d.va, {}, cfg);
  ff.gp_b = train_gp(d.X, d.vb, {}, cfg);
  ff.training_count = static_cast<long>(data.size());
  return ff;
}

VelocityPrediction predict_velocity(const FlowField& ff, const Vec2& p) {
  if (!ff.trained()) throw DataError("flow field is not trained");
  const auto [ma, va] = ff.gp_a.predict(p);
  const auto [mb, vb] = ff.gp_b.predict(p);
  return {Vec2(ma, mb), Vec2(va, vb)};
}

double log_likelihood(const FlowField& ff, std::span<const FlowSample> data) {
  if (data.empty()) throw DataError("log_likelihood: empty data");
  double total = 0.0;
  for (const auto& s : data) {
    const auto pred = predict_velocity(ff, s.p);
    total += log_normal(s.v(0), pred.mean(0), pred.var(0)) + log_normal(s.v(1), pred.mean(1), pred.var(1));
  }
  return total;
}

FlowField incremental_update(const FlowField& ff_old, std::span<const FlowSample> d2, const GpConfig& cfg) {
  if (!ff_old.trained()) throw DataError("incremental_update: flow field is not trained");
  if (d2.empty()) return ff_old;
  const AxisData d = to_matrices(d2);
  FlowField ff;
  ff.gp_a = update_axis(ff_old.gp_a, d.X, d.va, cfg);
  ff.gp_b = update_axis(ff_old.gp_b, d.X, d.vb, cfg);
  ff.training_count = ff_old.training_count + static_cast<long>(d2.size());
  return ff;
}

std::vector<FlowSample> surrogate_samples(const FlowField& ff) {
  if (!ff.trained()) throw DataError("surrogate_samples: flow field is not trained");
  std::vector<FlowSample> out;
  const auto& Z = ff.gp_a.pseudo_inputs();
  for (Eigen::Index j = 0; j < Z.rows(); ++j) {
    const Vec2 p = Z.row(j).transpose();
    out.push_back({p, predict_velocity(ff, p).mean});
  }
  return out;
}

std::optional<double> gradient_check(const GpConfig& cfg, std::span<const FlowSample> data) {
  if (data.empty()) return std::nullopt;
  const AxisData d = to_matrices(data);
  const int m = std::max(1, std::min(cfg.num_inducing, static_cast<int>(data.size()) / 2));
  const Eigen::MatrixX2d Z0 = kmeans_centres(d.X, m, cfg.seed);
  std::optional<double> worst;
  for (const Eigen::VectorXd* y : {&d.va, &d.vb}) {
    if ((y->array() - y->mean()).square().sum() < 1e-14) continue;
    const Eigen::VectorXd none;
    Objective f{d.X, *y, none, Z0, true};
    const Eigen::VectorXd theta = pack(initial_hyper(d.X, *y, cfg), Z0, true);
    Eigen::VectorXd g;
    if (!f(theta, &g)) throw InternalError("gradient_check: likelihood failed at the initial parameters");
    constexpr double h = 1e-5;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      Eigen::VectorXd tp = theta, tm = theta;
      tp(k) += h;
      tm(k) -= h;
      const auto fp = f(tp, nullptr);
      const auto fm = f(tm, nullptr);
      if (!fp || !fm) throw InternalError("gradient_check: likelihood failed near the initial parameters");
      const double fd = (*fp - *fm) / (2.0 * h);
      const double err = std::abs(g(k) - fd) / std::max({std::abs(g(k)), std::abs(fd), 1e-4});
      worst = std::max(worst.value_or(0.0), err);
    }
  }
  return worst;
}

}  // namespace sila
