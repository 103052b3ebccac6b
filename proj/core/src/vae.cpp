#include "udm/vae.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "udm/errors.hpp"
#include "udm/log.hpp"

namespace udm {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void check_dim(const char* what, Eigen::Index got, Eigen::Index want) {
  if (got != want) {
    raise(errc::dimension_mismatch, std::string(what) + " has length " +
                                        std::to_string(got) + ", expected " +
                                        std::to_string(want));
  }
}

void check_variance(const VectorXd& var) {
  if ((var.array() <= 0.0).any()) {
    raise(errc::non_positive_variance, "variance vector must be > 0 elementwise");
  }
}

MatrixXd glorot_init(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  MatrixXd w(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      w(i, j) = rng.uniform(-bound, bound);
    }
  }
  return w;
}

// Adam over a fixed list of parameter tensors.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<MatrixXd*> mats, std::vector<VectorXd*> vecs,
                double lr)
      : mats_(std::move(mats)), vecs_(std::move(vecs)), lr_(lr) {
    for (auto* m : mats_) {
      m_mats_.push_back(MatrixXd::Zero(m->rows(), m->cols()));
      v_mats_.push_back(MatrixXd::Zero(m->rows(), m->cols()));
    }
    for (auto* v : vecs_) {
      m_vecs_.push_back(VectorXd::Zero(v->size()));
      v_vecs_.push_back(VectorXd::Zero(v->size()));
    }
  }

  void step(const std::vector<const MatrixXd*>& mat_grads,
            const std::vector<const VectorXd*>& vec_grads) {
    ++t_;
    const double correction1 = 1.0 - std::pow(kBeta1, t_);
    const double correction2 = 1.0 - std::pow(kBeta2, t_);
    for (std::size_t i = 0; i < mats_.size(); ++i) {
      auto& m = m_mats_[i];
      auto& v = v_mats_[i];
      const auto& g = *mat_grads[i];
      m = kBeta1 * m + (1.0 - kBeta1) * g;
      v = kBeta2 * v.array().matrix() + (1.0 - kBeta2) * g.array().square().matrix();
      mats_[i]->array() -= lr_ * (m.array() / correction1) /
                           ((v.array() / correction2).sqrt() + kEps);
    }
    for (std::size_t i = 0; i < vecs_.size(); ++i) {
      auto& m = m_vecs_[i];
      auto& v = v_vecs_[i];
      const auto& g = *vec_grads[i];
      m = kBeta1 * m + (1.0 - kBeta1) * g;
      v = kBeta2 * v.array().matrix() + (1.0 - kBeta2) * g.array().square().matrix();
      vecs_[i]->array() -= lr_ * (m.array() / correction1) /
                           ((v.array() / correction2).sqrt() + kEps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  std::vector<MatrixXd*> mats_;
  std::vector<VectorXd*> vecs_;
  std::vector<MatrixXd> m_mats_, v_mats_;
  std::vector<VectorXd> m_vecs_, v_vecs_;
  double lr_;
  long t_ = 0;
};

nlohmann::json matrix_to_json(const MatrixXd& m) {
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j2 = 0; j2 < m.cols(); ++j2) data.push_back(m(i, j2));
  }
  j["data"] = data;  // row-major
  return j;
}

MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    raise(errc::invalid_config, "weight matrix size mismatch in model file");
  }
  MatrixXd m(rows, cols);
  std::size_t idx = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = data[idx++];
  }
  return m;
}

nlohmann::json vector_to_json(const VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

VectorXd vector_from_json(const nlohmann::json& j) {
  const auto data = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(data.data(),
                                    static_cast<Eigen::Index>(data.size()));
}

}  // namespace

void VaeConfig::validate() const {
  if (input_dim < 1) raise(errc::invalid_config, "input_dim must be >= 1");
  if (hidden_dim < 1) raise(errc::invalid_config, "hidden_dim must be >= 1");
  if (latent_dim < 1) raise(errc::invalid_config, "latent_dim must be >= 1");
  if (!(learning_rate > 0)) raise(errc::invalid_config, "learning_rate must be > 0");
  if (batch_size < 1) raise(errc::invalid_config, "batch_size must be >= 1");
  if (epochs < 1) raise(errc::invalid_config, "epochs must be >= 1");
}

int VaeModel::embedding_dim() const {
  return config.embedding == EmbeddingKind::mu_only ? latent_dim()
                                                    : 2 * latent_dim();
}

VectorXd VaeModel::standardize(const VectorXd& x) const {
  return (x - feat_mean).cwiseQuotient(feat_std);
}

VaeModel make_zero_vae(const VaeConfig& cfg) {
  cfg.validate();
  VaeModel m;
  m.config = cfg;
  const int d = cfg.input_dim, h = cfg.hidden_dim, z = cfg.latent_dim;
  m.w1 = MatrixXd::Zero(h, d);
  m.b1 = VectorXd::Zero(h);
  m.w_mu = MatrixXd::Zero(z, h);
  m.b_mu = VectorXd::Zero(z);
  m.w_logvar = MatrixXd::Zero(z, h);
  m.b_logvar = VectorXd::Zero(z);
  m.w2 = MatrixXd::Zero(h, z);
  m.b2 = VectorXd::Zero(h);
  m.w3 = MatrixXd::Zero(d, h);
  m.b3 = VectorXd::Zero(d);
  m.feat_mean = VectorXd::Zero(d);
  m.feat_std = VectorXd::Ones(d);
  return m;
}

std::pair<VectorXd, VectorXd> encode(const VaeModel& model, const VectorXd& x) {
  check_dim("input", x.size(), model.input_dim());
  const VectorXd xs = model.standardize(x);
  const VectorXd h = (model.w1 * xs + model.b1).array().tanh();
  VectorXd mu = model.w_mu * h + model.b_mu;
  VectorXd var = (model.w_logvar * h + model.b_logvar).array().exp();
  return {std::move(mu), std::move(var)};
}

VectorXd reparameterize(const VectorXd& mu, const VectorXd& var, Rng& rng) {
  VectorXd eps(mu.size());
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = rng.normal();
  return reparameterize_with(mu, var, eps);
}

VectorXd reparameterize_with(const VectorXd& mu, const VectorXd& var,
                             const VectorXd& eps) {
  check_dim("variance", var.size(), mu.size());
  check_dim("noise", eps.size(), mu.size());
  check_variance(var);
  return mu.array() + var.array().sqrt() * eps.array();
}

VectorXd decode(const VaeModel& model, const VectorXd& z) {
  check_dim("latent", z.size(), model.latent_dim());
  const VectorXd h = (model.w2 * z + model.b2).array().tanh();
  return model.w3 * h + model.b3;
}

double kl_gaussian(const VectorXd& mu, const VectorXd& var) {
  check_dim("variance", var.size(), mu.size());
  check_variance(var);
  return 0.5 * (var.array() + mu.array().square() - 1.0 - var.array().log()).sum();
}

LossParts loss(const VaeModel& model, const VectorXd& x, Rng& rng) {
  VectorXd eps(model.latent_dim());
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = rng.normal();
  return loss_with_eps(model, x, eps);
}

LossParts loss_with_eps(const VaeModel& model, const VectorXd& x,
                        const VectorXd& eps) {
  return loss_gradients(model, x, eps, nullptr);
}

LossParts loss_gradients(const VaeModel& model, const MatrixXd& x_batch,
                         const MatrixXd& eps_batch, VaeGradients* grads) {
  check_dim("input rows", x_batch.rows(), model.input_dim());
  check_dim("noise rows", eps_batch.rows(), model.latent_dim());
  check_dim("noise cols", eps_batch.cols(), x_batch.cols());
  const auto batch = x_batch.cols();
  if (batch == 0) raise(errc::empty_training_set, "empty batch");
  const double inv_batch = 1.0 / static_cast<double>(batch);

  // Forward, everything in standardized space.
  const MatrixXd xs =
      (x_batch.colwise() - model.feat_mean).array().colwise() /
      model.feat_std.array();
  const MatrixXd h1 = ((model.w1 * xs).colwise() + model.b1).array().tanh();
  const MatrixXd mu = (model.w_mu * h1).colwise() + model.b_mu;
  const MatrixXd logvar = (model.w_logvar * h1).colwise() + model.b_logvar;
  const MatrixXd sd = (0.5 * logvar).array().exp();
  const MatrixXd z = mu.array() + sd.array() * eps_batch.array();
  const MatrixXd h2 = ((model.w2 * z).colwise() + model.b2).array().tanh();
  const MatrixXd x_hat = (model.w3 * h2).colwise() + model.b3;

  const MatrixXd residual = x_hat - xs;
  LossParts parts;
  parts.recon = 0.5 * residual.squaredNorm() * inv_batch;
  parts.kl = 0.5 *
             (logvar.array().exp() + mu.array().square() - 1.0 - logvar.array())
                 .sum() *
             inv_batch;
  parts.total = parts.recon + parts.kl;

  if (grads == nullptr) return parts;

  // Backward pass for the mean-over-batch loss.
  const MatrixXd g_xhat = residual * inv_batch;
  grads->w3 = g_xhat * h2.transpose();
  grads->b3 = g_xhat.rowwise().sum();
  const MatrixXd g_h2 = model.w3.transpose() * g_xhat;
  const MatrixXd g_a2 = g_h2.array() * (1.0 - h2.array().square());
  grads->w2 = g_a2 * z.transpose();
  grads->b2 = g_a2.rowwise().sum();
  const MatrixXd g_z = model.w2.transpose() * g_a2;
  const MatrixXd g_mu = g_z + mu * inv_batch;
  const MatrixXd g_logvar =
      (g_z.array() * eps_batch.array() * sd.array() * 0.5) +
      (logvar.array().exp() - 1.0) * (0.5 * inv_batch);
  grads->w_mu = g_mu * h1.transpose();
  grads->b_mu = g_mu.rowwise().sum();
  grads->w_logvar = g_logvar * h1.transpose();
  grads->b_logvar = g_logvar.rowwise().sum();
  const MatrixXd g_h1 =
      model.w_mu.transpose() * g_mu + model.w_logvar.transpose() * g_logvar;
  const MatrixXd g_a1 = g_h1.array() * (1.0 - h1.array().square());
  grads->w1 = g_a1 * xs.transpose();
  grads->b1 = g_a1.rowwise().sum();
  return parts;
}

VaeTrainResult train_vae(const MatrixXd& features, const VaeConfig& cfg_in) {
  VaeConfig cfg = cfg_in;
  if (cfg.input_dim == 0) cfg.input_dim = static_cast<int>(features.rows());
  cfg.validate();
  if (features.cols() == 0) {
    raise(errc::empty_training_set, "no training instances");
  }
  check_dim("feature rows", features.rows(), cfg.input_dim);

  Rng rng(cfg.seed);
  VaeModel model = make_zero_vae(cfg);
  model.w1 = glorot_init(cfg.hidden_dim, cfg.input_dim, rng);
  model.w_mu = glorot_init(cfg.latent_dim, cfg.hidden_dim, rng);
  model.w_logvar = glorot_init(cfg.latent_dim, cfg.hidden_dim, rng);
  model.w2 = glorot_init(cfg.hidden_dim, cfg.latent_dim, rng);
  model.w3 = glorot_init(cfg.input_dim, cfg.hidden_dim, rng);

  if (cfg.standardize) {
    model.feat_mean = features.rowwise().mean();
    const MatrixXd centered = features.colwise() - model.feat_mean;
    model.feat_std =
        (centered.array().square().rowwise().sum() /
         static_cast<double>(features.cols()))
            .sqrt();
    // Constant dimensions carry no signal; leave them unscaled.
    for (Eigen::Index i = 0; i < model.feat_std.size(); ++i) {
      if (model.feat_std[i] < 1e-12) model.feat_std[i] = 1.0;
    }
  }

  AdamOptimizer adam(
      {&model.w1, &model.w_mu, &model.w_logvar, &model.w2, &model.w3},
      {&model.b1, &model.b_mu, &model.b_logvar, &model.b2, &model.b3},
      cfg.learning_rate);

  const auto n = features.cols();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  VaeTrainResult result;
  result.epoch_loss.reserve(static_cast<std::size_t>(cfg.epochs));
  VaeGradients grads;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_total = 0;
    Eigen::Index covered = 0;
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index size = std::min<Eigen::Index>(cfg.batch_size, n - start);
      MatrixXd batch(features.rows(), size);
      for (Eigen::Index j = 0; j < size; ++j) {
        batch.col(j) = features.col(order[static_cast<std::size_t>(start + j)]);
      }
      MatrixXd eps(cfg.latent_dim, size);
      for (Eigen::Index j = 0; j < size; ++j) {
        for (int i = 0; i < cfg.latent_dim; ++i) eps(i, j) = rng.normal();
      }
      const LossParts parts = loss_gradients(model, batch, eps, &grads);
      if (!std::isfinite(parts.total)) {
        raise(errc::non_finite_loss,
              "loss became non-finite at epoch " + std::to_string(epoch) +
                  ", batch offset " + std::to_string(start) +
                  " (recon=" + std::to_string(parts.recon) +
                  ", kl=" + std::to_string(parts.kl) + ")");
      }
      adam.step({&grads.w1, &grads.w_mu, &grads.w_logvar, &grads.w2, &grads.w3},
                {&grads.b1, &grads.b_mu, &grads.b_logvar, &grads.b2, &grads.b3});
      epoch_total += parts.total * static_cast<double>(size);
      covered += size;
    }
    result.epoch_loss.push_back(epoch_total / static_cast<double>(covered));
  }

  const int window = std::min<int>(3, cfg.epochs);
  const auto mean_over = [&](std::size_t begin) {
    double acc = 0;
    for (int i = 0; i < window; ++i) acc += result.epoch_loss[begin + static_cast<std::size_t>(i)];
    return acc / window;
  };
  const double head = mean_over(0);
  const double tail = mean_over(result.epoch_loss.size() - static_cast<std::size_t>(window));
  if (tail > head) {
    log_warn("vae training loss did not improve (first ", window,
             " epochs mean ", head, ", last ", window, " epochs mean ", tail, ")");
  }
  result.model = std::move(model);
  return result;
}

Eigen::VectorXd embed(const VaeModel& model, const VectorXd& x) {
  auto [mu, var] = encode(model, x);
  if (model.config.embedding == EmbeddingKind::mu_only) return mu;
  VectorXd out(2 * model.latent_dim());
  out.head(model.latent_dim()) = mu;
  if (model.config.second_moment == SecondMomentKind::stddev) {
    out.tail(model.latent_dim()) = var.array().sqrt();
  } else {
    out.tail(model.latent_dim()) = var;
  }
  return out;
}

void save_vae(const VaeModel& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["version"] = "udm-vae-v1";
  j["config"] = {
      {"input_dim", model.config.input_dim},
      {"hidden_dim", model.config.hidden_dim},
      {"latent_dim", model.config.latent_dim},
      {"learning_rate", model.config.learning_rate},
      {"batch_size", model.config.batch_size},
      {"epochs", model.config.epochs},
      {"seed", model.config.seed},
      {"standardize", model.config.standardize},
      {"embedding",
       model.config.embedding == EmbeddingKind::mu_only ? "mu_only" : "mu_and_var"},
      {"second_moment",
       model.config.second_moment == SecondMomentKind::stddev ? "stddev" : "var"},
  };
  j["feat_mean"] = vector_to_json(model.feat_mean);
  j["feat_std"] = vector_to_json(model.feat_std);
  j["weights"] = {
      {"w1", matrix_to_json(model.w1)},       {"b1", vector_to_json(model.b1)},
      {"w_mu", matrix_to_json(model.w_mu)},   {"b_mu", vector_to_json(model.b_mu)},
      {"w_logvar", matrix_to_json(model.w_logvar)},
      {"b_logvar", vector_to_json(model.b_logvar)},
      {"w2", matrix_to_json(model.w2)},       {"b2", vector_to_json(model.b2)},
      {"w3", matrix_to_json(model.w3)},       {"b3", vector_to_json(model.b3)},
  };
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(errc::io_error, "cannot write model file " + path.string());
  out << j.dump(2) << "\n";
  if (!out) raise(errc::io_error, "write failed for " + path.string());
}

VaeModel load_vae(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(errc::io_error, "cannot open model file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    raise(errc::invalid_config, "model parse error: " + std::string(e.what()));
  }
  if (j.value("version", "") != "udm-vae-v1") {
    raise(errc::invalid_config, "unsupported model version in " + path.string());
  }
  VaeModel model;
  const auto& c = j.at("config");
  model.config.input_dim = c.at("input_dim").get<int>();
  model.config.hidden_dim = c.at("hidden_dim").get<int>();
  model.config.latent_dim = c.at("latent_dim").get<int>();
  model.config.learning_rate = c.at("learning_rate").get<double>();
  model.config.batch_size = c.at("batch_size").get<int>();
  model.config.epochs = c.at("epochs").get<int>();
  model.config.seed = c.at("seed").get<std::uint64_t>();
  model.config.standardize = c.at("standardize").get<bool>();
  model.config.embedding = c.value("embedding", "mu_and_var") == "mu_only"
                               ? EmbeddingKind::mu_only
                               : EmbeddingKind::mu_and_var;
  model.config.second_moment = c.value("second_moment", "var") == "stddev"
                                   ? SecondMomentKind::stddev
                                   : SecondMomentKind::variance;
  model.feat_mean = vector_from_json(j.at("feat_mean"));
  model.feat_std = vector_from_json(j.at("feat_std"));
  const auto& w = j.at("weights");
  model.w1 = matrix_from_json(w.at("w1"));
  model.b1 = vector_from_json(w.at("b1"));
  model.w_mu = matrix_from_json(w.at("w_mu"));
  model.b_mu = vector_from_json(w.at("b_mu"));
  model.w_logvar = matrix_from_json(w.at("w_logvar"));
  model.b_logvar = vector_from_json(w.at("b_logvar"));
  model.w2 = matrix_from_json(w.at("w2"));
  model.b2 = vector_from_json(w.at("b2"));
  model.w3 = matrix_from_json(w.at("w3"));
  model.b3 = vector_from_json(w.at("b3"));
  return model;
}

}  // namespace udm
