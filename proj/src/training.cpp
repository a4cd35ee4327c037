/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "varassim/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "varassim/array_io.hpp"
#include "varassim/config_io.hpp"
#include "varassim/errors.hpp"
#include "varassim/stencils.hpp"

namespace varassim {

using ad::Var;

std::string to_string(ModelKind kind) { return kind == ModelKind::fourdvarnet ? "fourdvarnet" : "unet_direct"; }

ModelKind model_kind_from_string(const std::string & s) {
  if (s == "fourdvarnet") return ModelKind::fourdvarnet;
  if (s == "unet_direct") return ModelKind::unet_direct;
  throw ConfigError("unknown model kind '" + s + "'");
}

void ModelConfig::validate() const {
  if (kind == ModelKind::fourdvarnet) {
    cost.validate();
    solver.validate();
  } else {
    unet.validate();
  }
}

bool ModelConfig::needs_sst() const {
  return kind == ModelKind::fourdvarnet ? cost.needs_sst() : unet.use_sst;
}

std::string to_string(SelectionMetric m) { return m == SelectionMetric::val_mse ? "val_mse" : "val_mu"; }

SelectionMetric selection_metric_from_string(const std::string & s) {
  if (s == "val_mse") return SelectionMetric::val_mse;
  if (s == "val_mu") return SelectionMetric::val_mu;
  throw ConfigError("unknown selection metric '" + s + "'");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (!(learning_rate >= 0.0)) throw ConfigError("train.learning_rate must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(nu_x >= 0.0) || !(nu_grad >= 0.0) || !(nu_phi >= 0.0)) throw ConfigError("loss weights must be >= 0");
  if (nu_x + nu_grad + nu_phi <= 0.0) throw ConfigError("at least one loss weight must be > 0");
  if (patience < 0) throw ConfigError("train.patience must be >= 0");
  if (crop_size < 0 || crop_size % 2 != 0) throw ConfigError("train.crop_size must be an even number >= 0");
  if (max_batches_per_epoch < 0) throw ConfigError("train.max_batches_per_epoch must be >= 0");
  if (!(grad_clip >= 0.0)) throw ConfigError("train.grad_clip must be >= 0");
}

// ---------------------------------------------------------------------------
// Units

Normalizer Normalizer::fit(const std::vector<Sample> & samples) {
  Normalizer n;
  double s = 0, ss = 0, t = 0, tt = 0, count = 0, count_sst = 0;
  for (const Sample & w : samples) {
    for (double v : w.truth.values().values()) s += v, ss += v * v, count += 1;
    if (w.obs.sst) {
      for (double v : w.obs.sst->values().values()) t += v, tt += v * v, count_sst += 1;
    }
  }
  auto finish = [](double sum, double sum_sq, double c, double & mean, double & std) {
    if (c == 0) return;
    mean = sum / c;
    std = std::sqrt(std::max(sum_sq / c - mean * mean, 0.0));
    if (!(std > 1e-12)) std = 1.0;
  };
  finish(s, ss, count, n.ssh_mean, n.ssh_std);
  finish(t, tt, count_sst, n.sst_mean, n.sst_std);
  return n;
}

WindowObs Normalizer::normalize(const ObservationSet & obs) const {
  WindowObs w = WindowObs::from(obs);
  for (std::size_t i = 0; i < w.y_ssh.size(); ++i) {
    w.y_ssh[i] = w.mask[i] != 0.0 ? (w.y_ssh[i] - ssh_mean) / ssh_std : 0.0;
  }
  w.y_coarse = ssh_to_model(w.y_coarse);
  if (w.y_sst) {
    for (std::size_t i = 0; i < w.y_sst->size(); ++i) (*w.y_sst)[i] = ((*w.y_sst)[i] - sst_mean) / sst_std;
  }
  return w;
}

Tensor Normalizer::ssh_to_model(const Tensor & ssh) const {
  Tensor out = ssh;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (out[i] - ssh_mean) / ssh_std;
  return out;
}

Tensor Normalizer::ssh_from_model(const Tensor & ssh) const {
  Tensor out = ssh;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] * ssh_std + ssh_mean;
  return out;
}

namespace {

// The SQG relation is stated in physical units; in model units its transfer
// scale picks up the ratio of the SSH and SST scales.
ModelConfig model_units(const TrainedModel & m) {
  ModelConfig c = m.config;
  if (auto * s = std::get_if<SqgConfig>(&c.cost.mm)) s->transfer_scale *= m.norm.ssh_std / m.norm.sst_std;
  return c;
}

Tensor crop(const Tensor & t, int y0, int x0, int size) {
  const int n = t.dim(0), w = t.dim(2);
  Tensor out({n, size, size});
  for (int c = 0; c < n; ++c)
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j) out(c, i, j) = t[(static_cast<std::size_t>(c) * t.dim(1) + y0 + i) * w + x0 + j];
  return out;
}

}  // namespace

TrainedModel init_model(const ModelConfig & config, int time_steps, double dx, std::uint64_t seed) {
  config.validate();
  TrainedModel m;
  m.config = config;
  m.time_steps = time_steps;
  m.dx = dx;
  Rng rng(seed);
  if (config.kind == ModelKind::fourdvarnet) {
    init_cost_params(m.params, config.cost, time_steps, rng);
    init_solver_params(m.params, config.solver, StateLayout{config.cost.formulation, time_steps}.channels(), rng);
  } else {
    init_unet_direct(m.params, config.unet, time_steps, rng);
  }
  return m;
}

Tensor truth_state(const WindowObs & obs, const Tensor & truth_ssh, StateKind kind) {
  const StateLayout layout{kind, obs.time_steps()};
  const std::size_t plane = obs.y_coarse.size();
  const Tensor anomaly = truth_ssh - obs.y_coarse;
  Tensor out({layout.channels(), obs.width(), obs.width()});
  std::copy(obs.y_coarse.data(), obs.y_coarse.data() + plane, out.data());
  std::copy(anomaly.data(), anomaly.data() + plane, out.data() + plane);
  std::copy(anomaly.data(), anomaly.data() + plane, out.data() + 2 * plane);
  if (kind == StateKind::ssh_sst) {
    if (!obs.y_sst) throw ConfigError("SSH-SST truth state needs SST observations");
    std::copy(obs.y_sst->data(), obs.y_sst->data() + plane, out.data() + 3 * plane);
  }
  return out;
}

TrainingWindow prepare_window(const Sample & sample, const TrainedModel & model) {
  if (model.config.needs_sst() && !sample.obs.sst) throw ConfigError("model needs SST observations");
  TrainingWindow w;
  w.obs = model.norm.normalize(sample.obs);
  w.truth_ssh = model.norm.ssh_to_model(sample.truth.values());
  if (model.config.kind == ModelKind::fourdvarnet) {
    w.truth_state = truth_state(w.obs, w.truth_ssh, model.config.cost.formulation);
  }
  return w;
}

TrainingWindow crop_window(const TrainingWindow & w, int y0, int x0, int size) {
  const int width = w.obs.width();
  if (size < 1 || y0 < 0 || x0 < 0 || y0 + size > width || x0 + size > width) {
    throw DimensionError("crop of side " + std::to_string(size) + " at (" + std::to_string(y0) + ", " +
                         std::to_string(x0) + ") exceeds a " + std::to_string(width) + "-cell window");
  }
  TrainingWindow c;
  c.obs.y_ssh = crop(w.obs.y_ssh, y0, x0, size);
  c.obs.mask = crop(w.obs.mask, y0, x0, size);
  c.obs.y_coarse = crop(w.obs.y_coarse, y0, x0, size);
  if (w.obs.y_sst) c.obs.y_sst = crop(*w.obs.y_sst, y0, x0, size);
  c.obs.dx = w.obs.dx;
  c.truth_ssh = crop(w.truth_ssh, y0, x0, size);
  if (!w.truth_state.empty()) c.truth_state = crop(w.truth_state, y0, x0, size);
  return c;
}

// ---------------------------------------------------------------------------
// Losses

namespace terms {

Var loss_x(const Var & truth_ssh, const Var & recon_ssh) { return ad::sum_sq(recon_ssh - truth_ssh); }

Var loss_grad_x(const Var & truth_ssh, const Var & recon_ssh) {
  const Var d = recon_ssh - truth_ssh;
  return ad::sum_sq(ad::apply(stencils::diff_x_op(), d)) + ad::sum_sq(ad::apply(stencils::diff_y_op(), d));
}

Var loss_phi(const Var & truth_state, const Var & recon_state, const ParamSet & params, const PriorConfig & prior) {
  return prior_residual_sq(truth_state, params, prior) + prior_residual_sq(recon_state, params, prior);
}

Forward forward(const WindowObs & obs, const ParamSet & params, const ModelConfig & config, bool training) {
  if (config.kind == ModelKind::unet_direct) {
    std::optional<ad::NoGradGuard> guard;
    if (!training) guard.emplace();
    return {unet_direct(obs, params, config.unet), Var()};
  }
  const StateLayout layout{config.cost.formulation, obs.time_steps()};
  const int t = layout.time_steps;
  Tensor x0({layout.channels(), obs.width(), obs.width()});
  const std::size_t plane = obs.y_coarse.size();
  std::copy(obs.y_coarse.data(), obs.y_coarse.data() + plane, x0.data());
  if (layout.kind == StateKind::ssh_sst) {
    if (!obs.y_sst) throw ConfigError("SSH-SST formulation needs SST observations");
    std::copy(obs.y_sst->data(), obs.y_sst->data() + plane, x0.data() + 3 * plane);
  }
  const PreparedCost cost(obs, params, config.cost);
  const Var x = solve(Var::constant(std::move(x0)), cost, params, config.solver, training);
  return {ad::slice(x, layout.coarse(), t) + ad::slice(x, layout.anomaly_rec(), t), x};
}

LossTerms total_loss(const std::vector<TrainingWindow> & batch, const ParamSet & params, const ModelConfig & config,
                     const TrainConfig & train) {
  Var lx = Var::constant(Tensor::scalar(0.0));
  Var lg = lx, lp = lx;
  const bool with_phi = config.kind == ModelKind::fourdvarnet && config.cost.prior.kind != PriorKind::identity &&
                        train.nu_phi > 0.0;
  for (const TrainingWindow & w : batch) {
    const Forward f = forward(w.obs, params, config, true);
    const Var truth = Var::constant(w.truth_ssh);
    lx = lx + loss_x(truth, f.ssh);
    lg = lg + loss_grad_x(truth, f.ssh);
    if (with_phi) lp = lp + loss_phi(Var::constant(w.truth_state), f.state, params, config.cost.prior);
  }
  const Var total = ad::scale(lx, train.nu_x) + ad::scale(lg, train.nu_grad) + ad::scale(lp, train.nu_phi);
  return {total, lx, lg, lp};
}

}  // namespace terms

double loss_x(const SpaceTimeField & truth, const SpaceTimeField & recon) {
  require_same_shape(truth.values(), recon.values(), "loss_x");
  return (recon.values() - truth.values()).sum_sq();
}

double loss_grad_x(const SpaceTimeField & truth, const SpaceTimeField & recon) {
  require_same_shape(truth.values(), recon.values(), "loss_grad_x");
  const Tensor d = recon.values() - truth.values();
  return stencils::diff_x(d).sum_sq() + stencils::diff_y(d).sum_sq();
}

double loss_phi(const State & truth, const State & recon, const ParamSet & params, const PriorConfig & prior) {
  if (kind_of(truth) != kind_of(recon)) throw ConfigError("loss_phi: truth and reconstruction kinds differ");
  return prior_residual_sq(pack_state(truth), params, prior) + prior_residual_sq(pack_state(recon), params, prior);
}

// ---------------------------------------------------------------------------
// Inference and selection

SpaceTimeField reconstruct(const ObservationSet & obs, const TrainedModel & model) {
  const ModelConfig config = model_units(model);
  const WindowObs w = model.norm.normalize(obs);
  const terms::Forward f = terms::forward(w, model.params, config, false);
  return SpaceTimeField(obs.grid(), model.norm.ssh_from_model(f.ssh.value()), "ssh_rec",
                        obs.ssh_alongtrack.units());
}

Tensor reconstruct_state(const ObservationSet & obs, const TrainedModel & model) {
  if (model.config.kind != ModelKind::fourdvarnet) throw ConfigError("only the variational model has a state");
  const ModelConfig config = model_units(model);
  const WindowObs w = model.norm.normalize(obs);
  return terms::forward(w, model.params, config, false).state.value();
}

ValidationScore validation_score(const std::vector<Sample> & samples, const TrainedModel & model) {
  if (samples.empty()) throw ConfigError("validation split is empty");
  double err = 0.0, sum = 0.0, sum_sq = 0.0, n = 0.0;
  for (const Sample & s : samples) {
    const Tensor e = reconstruct(s.obs, model).values() - s.truth.values();
    err += e.sum_sq();
    sum += s.truth.values().sum();
    sum_sq += s.truth.values().sum_sq();
    n += static_cast<double>(e.size());
  }
  const double mean = sum / n;
  const double var = std::max(sum_sq / n - mean * mean, 1e-300);
  return {err / n, 1.0 - std::sqrt(err / n) / std::sqrt(var)};
}

int select_best(const std::vector<EpochRecord> & history, SelectionMetric metric) {
  int best = -1;
  for (int i = 0; i < static_cast<int>(history.size()); ++i) {
    if (best < 0) {
      best = i;
      continue;
    }
    const bool better = metric == SelectionMetric::val_mse ? history[i].val_mse < history[best].val_mse
                                                           : history[i].val_mu > history[best].val_mu;
    if (better) best = i;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Optimization

namespace {

struct Adam {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::map<std::string, Tensor> m, v;
  long step = 0;

  void update(ParamSet & params, const std::vector<std::string> & names, const std::vector<Var> & grads, double lr) {
    ++step;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t k = 0; k < names.size(); ++k) {
      const Tensor & g = grads[k].value();
      Tensor & mk = m.try_emplace(names[k], g.shape()).first->second;
      Tensor & vk = v.try_emplace(names[k], g.shape()).first->second;
      Tensor p = params.value(names[k]);
      for (std::size_t i = 0; i < p.size(); ++i) {
        mk[i] = beta1 * mk[i] + (1.0 - beta1) * g[i];
        vk[i] = beta2 * vk[i] + (1.0 - beta2) * g[i] * g[i];
        p[i] -= lr * (mk[i] / c1) / (std::sqrt(vk[i] / c2) + eps);
      }
      params.set(names[k], std::move(p));
    }
  }
};

std::vector<std::string> trainable_names(const ParamSet & params, const std::vector<std::string> & prefixes) {
  if (prefixes.empty()) return params.names("");
  std::vector<std::string> out;
  for (const std::string & n : params.names("")) {
    for (const std::string & p : prefixes) {
      if (n.rfind(p, 0) == 0) {
        out.push_back(n);
        break;
      }
    }
  }
  return out;
}

void require_finite(double v, int epoch, const char * term) {
  if (!std::isfinite(v)) {
    throw NumericalError("training diverged at epoch " + std::to_string(epoch) + ": " + term + " is not finite");
  }
}

}  // namespace

TrainedModel train(const Dataset & data, TrainedModel init, const TrainConfig & cfg, const Validator & validator,
                   std::ostream * log) {
  cfg.validate();
  init.config.validate();
  if (data.train.empty() || data.validation.empty()) throw ConfigError("training needs non-empty train and validation splits");

  TrainedModel model = std::move(init);
  model.train = cfg;
  model.norm = Normalizer::fit(data.train);
  model.history.clear();
  model.best_epoch = -1;
  const ModelConfig config = model_units(model);

  std::vector<TrainingWindow> windows;
  windows.reserve(data.train.size());
  for (const Sample & s : data.train) windows.push_back(prepare_window(s, model));
  const int width = windows.front().obs.width();
  if (cfg.crop_size > width) throw ConfigError("train.crop_size exceeds the window width");

  const std::vector<std::string> names = trainable_names(model.params, cfg.trainable);
  if (names.empty()) throw ConfigError("no trainable parameters match train.trainable");
  Adam adam;
  Rng rng(cfg.seed);
  ParamSet best = model.params.clone();
  int stall = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(windows.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    int n_batches = static_cast<int>((order.size() + cfg.batch_size - 1) / cfg.batch_size);
    if (cfg.max_batches_per_epoch > 0) n_batches = std::min(n_batches, cfg.max_batches_per_epoch);

    EpochRecord rec;
    rec.epoch = epoch;
    double seen = 0.0;
    for (int b = 0; b < n_batches; ++b) {
      std::vector<TrainingWindow> batch;
      for (std::size_t k = b * cfg.batch_size; k < std::min(order.size(), std::size_t(b + 1) * cfg.batch_size); ++k) {
        const TrainingWindow & w = windows[order[k]];
        if (cfg.crop_size > 0 && cfg.crop_size < width) {
          std::uniform_int_distribution<int> offset(0, width - cfg.crop_size);
          const int y0 = offset(rng), x0 = offset(rng);
          batch.push_back(crop_window(w, y0, x0, cfg.crop_size));
        } else {
          batch.push_back(w);
        }
      }
      const terms::LossTerms loss = terms::total_loss(batch, model.params, config, cfg);
      require_finite(loss.x.value().item(), epoch, "loss_x");
      require_finite(loss.grad_x.value().item(), epoch, "loss_grad_x");
      require_finite(loss.phi.value().item(), epoch, "loss_phi");

      std::vector<Var> vars;
      for (const std::string & n : names) vars.push_back(model.params.at(n));
      std::vector<Var> grads = ad::grad(loss.total, vars);
      double norm_sq = 0.0;
      for (std::size_t k = 0; k < grads.size(); ++k) {
        const double s = grads[k].value().sum_sq();
        if (!std::isfinite(s)) {
          throw NumericalError("training diverged at epoch " + std::to_string(epoch) + ": gradient of parameter group '" +
                               param_group(names[k]) + "' is not finite");
        }
        norm_sq += s;
      }
      if (cfg.grad_clip > 0.0 && std::sqrt(norm_sq) > cfg.grad_clip) {
        const double f = cfg.grad_clip / std::sqrt(norm_sq);
        for (Var & g : grads) g = Var::constant(g.value() * f);
      }
      adam.update(model.params, names, grads, cfg.learning_rate);

      rec.loss += loss.total.value().item();
      rec.loss_x += loss.x.value().item();
      rec.loss_grad_x += loss.grad_x.value().item();
      rec.loss_phi += loss.phi.value().item();
      seen += static_cast<double>(batch.size());
    }
    rec.loss /= seen;
    rec.loss_x /= seen;
    rec.loss_grad_x /= seen;
    rec.loss_phi /= seen;

    const ValidationScore score = validator ? validator(epoch, model) : validation_score(data.validation, model);
    rec.val_mse = score.mse;
    rec.val_mu = score.mu;
    model.history.push_back(rec);
    if (log) *log << config::to_json(rec).dump() << '\n' << std::flush;

    if (select_best(model.history, cfg.selection) == static_cast<int>(model.history.size()) - 1) {
      best = model.params.clone();
      model.best_epoch = epoch;
      stall = 0;
    } else if (cfg.patience > 0 && ++stall >= cfg.patience) {
      break;
    }
  }
  model.params = std::move(best);
  return model;
}

// ---------------------------------------------------------------------------
// Persistence

void save_model(const TrainedModel & model, const std::filesystem::path & path) {
  Archive a;
  a.kind = "model";
  Json history = Json::array();
  for (const EpochRecord & r : model.history) history.push_back(config::to_json(r));
  a.meta = {{"model", config::to_json(model.config)},
            {"train", config::to_json(model.train)},
            {"time_steps", model.time_steps},
            {"dx", model.dx},
            {"normalizer", config::to_json(model.norm)},
            {"history", history},
            {"best_epoch", model.best_epoch},
            {"data_hash", model.data_hash}};
  for (const std::string & n : model.params.names("")) a.arrays[n] = model.params.value(n);
  write_archive(path, a);
}

TrainedModel load_model(const std::filesystem::path & path) {
  const Archive a = read_archive(path, "model");
  TrainedModel m;
  try {
    m.config = config::parse(a.meta.at("model"), ModelConfig{}, "model");
    m.train = config::parse(a.meta.at("train"), TrainConfig{}, "train");
    m.norm = config::parse(a.meta.at("normalizer"), Normalizer{}, "normalizer");
    m.time_steps = a.meta.at("time_steps").get<int>();
    m.dx = a.meta.at("dx").get<double>();
    m.best_epoch = a.meta.at("best_epoch").get<int>();
    m.data_hash = a.meta.at("data_hash").get<std::string>();
    for (const Json & r : a.meta.at("history")) m.history.push_back(config::parse(r, EpochRecord{}, "history"));
  } catch (const Json::exception & e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  for (const auto & [name, t] : a.arrays) m.params.add(name, t);
  return m;
}

}  // namespace varassim
