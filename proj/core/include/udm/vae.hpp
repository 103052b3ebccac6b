#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "udm/rng.hpp"

namespace udm {

/// What embed() returns: the full (mu, second-moment) concatenation or the
/// mean alone. mu_and_var is the default reading of the latent code.
enum class EmbeddingKind { mu_and_var, mu_only };

/// Second half of the embedding: the variance vector or its square root.
enum class SecondMomentKind { variance, stddev };

struct VaeConfig {
  int input_dim = 0;
  int hidden_dim = 500;
  int latent_dim = 50;
  double learning_rate = 1e-3;
  int batch_size = 32;
  int epochs = 300;
  std::uint64_t seed = 0;
  bool standardize = true;
  EmbeddingKind embedding = EmbeddingKind::mu_and_var;
  SecondMomentKind second_moment = SecondMomentKind::variance;

  void validate() const;  // raises invalid_config
};

/// Single-hidden-layer Gaussian VAE. Encoder emits (mu, log variance),
/// decoder is tanh hidden + linear output in standardized feature space.
struct VaeModel {
  VaeConfig config;

  Eigen::MatrixXd w1;        // hidden x input
  Eigen::VectorXd b1;        // hidden
  Eigen::MatrixXd w_mu;      // latent x hidden
  Eigen::VectorXd b_mu;      // latent
  Eigen::MatrixXd w_logvar;  // latent x hidden
  Eigen::VectorXd b_logvar;  // latent
  Eigen::MatrixXd w2;        // hidden x latent
  Eigen::VectorXd b2;        // hidden
  Eigen::MatrixXd w3;        // input x hidden
  Eigen::VectorXd b3;        // input
  Eigen::VectorXd feat_mean; // input
  Eigen::VectorXd feat_std;  // input

  int input_dim() const { return static_cast<int>(w1.cols()); }
  int hidden_dim() const { return static_cast<int>(w1.rows()); }
  int latent_dim() const { return static_cast<int>(w_mu.rows()); }
  int embedding_dim() const;

  Eigen::VectorXd standardize(const Eigen::VectorXd& x) const;
};

/// Zero-weight model of the given shape (weights and biases all zero,
/// identity standardization). Mostly useful in tests.
VaeModel make_zero_vae(const VaeConfig& cfg);

/// (mu, variance) of q(z|x). Variance is exp(logvar), strictly positive.
std::pair<Eigen::VectorXd, Eigen::VectorXd> encode(const VaeModel& model,
                                                   const Eigen::VectorXd& x);

/// z = mu + sqrt(var) * eps with eps drawn from rng.
Eigen::VectorXd reparameterize(const Eigen::VectorXd& mu,
                               const Eigen::VectorXd& var, Rng& rng);

/// Deterministic variant used by tests and the trainer: eps is supplied.
Eigen::VectorXd reparameterize_with(const Eigen::VectorXd& mu,
                                    const Eigen::VectorXd& var,
                                    const Eigen::VectorXd& eps);

/// Reconstruction in standardized feature space.
Eigen::VectorXd decode(const VaeModel& model, const Eigen::VectorXd& z);

/// KL(N(mu, diag(var)) || N(0, I)) = 1/2 sum(var + mu^2 - 1 - ln var).
double kl_gaussian(const Eigen::VectorXd& mu, const Eigen::VectorXd& var);

struct LossParts {
  double total = 0;
  double recon = 0;
  double kl = 0;
};

/// Single-sample loss estimate: 1/2 ||x_std - x_hat||^2 + KL.
LossParts loss(const VaeModel& model, const Eigen::VectorXd& x, Rng& rng);

/// Loss with the sampling noise pinned (test hook for gradient checks).
LossParts loss_with_eps(const VaeModel& model, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& eps);

struct VaeGradients {
  Eigen::MatrixXd w1, w_mu, w_logvar, w2, w3;
  Eigen::VectorXd b1, b_mu, b_logvar, b2, b3;
};

/// Mean loss over a batch (columns of `x_batch`, raw feature space) and, if
/// `grads` is non-null, the analytic gradients of that mean. `eps_batch`
/// must hold one noise column per sample. This is the exact computation the
/// trainer steps on, exposed so the finite-difference check can pin it down.
LossParts loss_gradients(const VaeModel& model, const Eigen::MatrixXd& x_batch,
                         const Eigen::MatrixXd& eps_batch, VaeGradients* grads);

struct VaeTrainResult {
  VaeModel model;
  std::vector<double> epoch_loss;  // mean total loss per epoch
};

/// Trains with Adam on mean per-batch loss. `features` holds one instance
/// per column. Standardization statistics come from these columns only.
/// Deterministic given (data, config, seed).
VaeTrainResult train_vae(const Eigen::MatrixXd& features, const VaeConfig& cfg);

/// Latent embedding: [mu; var] by default (length 2 * latent_dim), subject
/// to the config's embedding/second_moment switches. Pure, no sampling.
Eigen::VectorXd embed(const VaeModel& model, const Eigen::VectorXd& x);

/// JSON serialization, format "udm-vae-v1". Round-trips exactly.
void save_vae(const VaeModel& model, const std::filesystem::path& path);
VaeModel load_vae(const std::filesystem::path& path);

}  // namespace udm
