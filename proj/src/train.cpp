#include "badit/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "badit/random.hpp"

namespace badit::harness {

namespace {

enum Stream : std::uint64_t { kRouter = 11, kShuffle = 12, kDog = 13, kIsolated = 14 };

struct Sample {
  const TaskData* task;
  std::size_t row;
};

void validate(const TrainConfig& cfg) {
  if (cfg.epochs == 0 || cfg.batch_size == 0)
    throw Error(ErrorKind::InvalidParameter, "epochs and batch_size must be positive");
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate))
    throw Error(ErrorKind::InvalidParameter, "learning_rate must be positive");
  if (cfg.regroup_interval == 0) throw Error(ErrorKind::InvalidParameter, "regroup_interval must be >= 1");
  if (!(cfg.eps_g > 0.0)) throw Error(ErrorKind::InvalidParameter, "eps_g must be positive");
}

void sgd_step(moe::MoeLoraLayer& layer, const moe::LayerGradients& g, double lr) {
  ExpertBank& bank = layer.bank();
  for (std::size_t k = 0; k < bank.k(); ++k) {
    LoraExpert& e = bank.expert(k);
    DenseMatrix da = g.grad_a[k];
    da *= lr;
    e.a -= da;
    DenseMatrix db = g.grad_b[k];
    db *= lr;
    e.b -= db;
    bank.routing()[k] -= lr * g.grad_alpha[k];
  }
  if (g.grad_router) {
    DenseMatrix dr = *g.grad_router;
    dr *= lr;
    *layer.router() -= dr;
  }
}

class Trainer {
 public:
  Trainer(moe::MoeLoraLayer layer, const TrainConfig& cfg, TrainResult* out)
      : layer_(std::move(layer)), cfg_(cfg), out_(out) {}

  moe::MoeLoraLayer& layer() { return layer_; }

  void run(const std::vector<Sample>& samples, std::size_t stage, std::uint64_t shuffle_seed,
           bool track) {
    std::vector<std::size_t> perm(samples.size());
    for (std::size_t ep = 0; ep < cfg_.epochs; ++ep) {
      ++epoch_;
      std::iota(perm.begin(), perm.end(), 0);
      Rng rng(derive_seed(shuffle_seed, ep));
      std::shuffle(perm.begin(), perm.end(), rng);
      const std::size_t first_event = out_ ? out_->events.size() : 0;
      std::size_t batch = 0;
      for (std::size_t start = 0; start < samples.size(); start += cfg_.batch_size, ++batch) {
        const std::size_t stop = std::min(samples.size(), start + cfg_.batch_size);
        const auto grads = batch_gradients(samples, perm, start, stop);
        sgd_step(layer_, grads, cfg_.learning_rate);
        if (track && (batches_seen_++ % cfg_.regroup_interval) == 0) event(grads, stage, batch);
      }
      if (track && out_) close_epoch(first_event);
    }
  }

 private:
  moe::LayerGradients batch_gradients(const std::vector<Sample>& samples,
                                      const std::vector<std::size_t>& perm, std::size_t start,
                                      std::size_t stop) const {
    moe::LayerGradients total = moe::LayerGradients::zeros_like(layer_);
    const double inv = 1.0 / static_cast<double>(stop - start);
    for (std::size_t p = start; p < stop; ++p) {
      const Sample& s = samples[perm[p]];
      const auto x = s.task->train_x.row(s.row);
      const auto y = s.task->train_y.row(s.row);
      std::vector<double> u = moe::forward(layer_, x);
      for (std::size_t i = 0; i < u.size(); ++i) u[i] = (u[i] - y[i]) * inv;
      total += moe::backward(layer_, x, u);
    }
    return total;
  }

  void event(const moe::LayerGradients& grads, std::size_t stage, std::size_t batch) {
    const auto batch_vecs = dog::normalize(dog::extract_rank1_gradients(grads.grad_a, grads.grad_b),
                                           cfg_.eps_g);
    AngleEvent ev;
    ev.stage = stage;
    ev.epoch = epoch_;
    ev.batch = batch;
    dog::GroupingPolicy pi = dog::GroupingPolicy::identity(cfg_.k, cfg_.r);
    if (cfg_.dog_enabled) {
      dog::DogOptions opts{cfg_.max_iter, cfg_.mode, derive_seed(cfg_.seed, kDog, events_++)};
      dog::DogResult res = dog::dog_run(batch_vecs, cfg_.k, cfg_.r, opts);
      for (std::size_t i = 0; i < res.policy.components(); ++i)
        if (res.policy.expert_of(i) != i / cfg_.r) ++ev.moved;
      ev.dog_iterations = res.iterations;
      auto outcome = moe::regroup_layer(layer_, res.policy);
      layer_ = std::move(outcome.layer);
      if (out_) {
        for (auto& w : res.warnings) note(std::move(w));
        if (outcome.warning) note(std::move(*outcome.warning));
      }
      pi = std::move(res.policy);
    }
    const dog::GradientAngles ang = dog::gradient_angles(batch_vecs, pi);
    ev.intra_deg = ang.intra_deg;
    ev.inter_deg = ang.inter_deg;
    if (out_) out_->events.push_back(ev);
  }

  void note(std::string w) {
    if (std::find(out_->warnings.begin(), out_->warnings.end(), w) == out_->warnings.end())
      out_->warnings.push_back(std::move(w));
  }

  void close_epoch(std::size_t first_event) {
    EpochAngles ea;
    ea.epoch = epoch_;
    double si = 0.0, se = 0.0;
    std::size_t ni = 0, ne = 0;
    for (std::size_t e = first_event; e < out_->events.size(); ++e) {
      const AngleEvent& ev = out_->events[e];
      if (ev.intra_deg) si += *ev.intra_deg, ++ni;
      if (ev.inter_deg) se += *ev.inter_deg, ++ne;
    }
    if (ni) ea.intra_deg = si / static_cast<double>(ni);
    if (ne) ea.inter_deg = se / static_cast<double>(ne);
    out_->epoch_angles.push_back(ea);
  }

  moe::MoeLoraLayer layer_;
  TrainConfig cfg_;
  TrainResult* out_;
  std::size_t epoch_ = 0;
  std::size_t batches_seen_ = 0;
  std::uint64_t events_ = 0;
};

std::vector<Sample> samples_of(const TaskData& t) {
  std::vector<Sample> s;
  for (std::size_t i = 0; i < t.train_x.rows(); ++i) s.push_back({&t, i});
  return s;
}

void require_permutation(const std::vector<std::size_t>& order, std::size_t t) {
  std::vector<bool> seen(t, false);
  if (order.size() != t) throw Error(ErrorKind::InvalidParameter, "order is not a permutation of the tasks");
  for (std::size_t v : order) {
    if (v >= t || seen[v]) throw Error(ErrorKind::InvalidParameter, "order is not a permutation of the tasks");
    seen[v] = true;
  }
}

TrainResult empty_result(const moe::MoeLoraLayer& layer) {
  TrainResult r{{}, {}, {}, {}, layer.bank().residual_checksum(), 0, {}, layer};
  return r;
}

}  // namespace

moe::MoeLoraLayer make_layer(const SyntheticTaskSet& tasks, const TrainConfig& cfg) {
  ExpertBank bank = decompose(tasks.base, cfg.k, cfg.r, cfg.scale);
  if (cfg.gate_mode == moe::GateMode::ScalarAlpha) return moe::MoeLoraLayer(std::move(bank));
  Rng rng(derive_seed(cfg.seed, kRouter));
  const double sd = 1.0 / std::sqrt(static_cast<double>(bank.cols()));
  DenseMatrix router = gaussian_matrix(bank.cols(), bank.k(), rng, sd);
  return moe::MoeLoraLayer(std::move(bank), std::move(router), cfg.top_k);
}

double score(const moe::MoeLoraLayer& layer, const TaskData& task) {
  const DenseMatrix& x = task.eval_x;
  const DenseMatrix& y = task.eval_y;
  if (x.rows() == 0) throw Error(ErrorKind::InvalidInput, "empty eval set");
  std::vector<double> mean(y.cols(), 0.0);
  for (std::size_t s = 0; s < y.rows(); ++s)
    for (std::size_t i = 0; i < y.cols(); ++i) mean[i] += y(s, i);
  for (double& v : mean) v /= static_cast<double>(y.rows());
  double err = 0.0, var = 0.0;
  for (std::size_t s = 0; s < x.rows(); ++s) {
    const auto h = moe::forward(layer, x.row(s));
    for (std::size_t i = 0; i < h.size(); ++i) {
      err += (h[i] - y(s, i)) * (h[i] - y(s, i));
      var += (y(s, i) - mean[i]) * (y(s, i) - mean[i]);
    }
  }
  if (var == 0.0) return err == 0.0 ? 100.0 : 0.0;
  return 100.0 * std::max(0.0, 1.0 - err / var);
}

std::vector<double> isolated_baselines(const SyntheticTaskSet& tasks, const TrainConfig& cfg) {
  validate(cfg);
  std::vector<double> out;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    TrainConfig c = cfg;
    c.seed = derive_seed(cfg.seed, kIsolated, t);
    Trainer tr(make_layer(tasks, c), c, nullptr);
    tr.run(samples_of(tasks.tasks[t]), 0, derive_seed(c.seed, kShuffle, 0), false);
    out.push_back(score(tr.layer(), tasks.tasks[t]));
  }
  return out;
}

TrainResult train_sequential(const SyntheticTaskSet& tasks, const std::vector<std::size_t>& order,
                             const TrainConfig& cfg) {
  validate(cfg);
  require_permutation(order, tasks.size());
  const std::size_t t_count = tasks.size();
  moe::MoeLoraLayer init = make_layer(tasks, cfg);
  TrainResult res = empty_result(init);
  res.order = order;
  res.grid.a = DenseMatrix(t_count, t_count);
  Trainer tr(std::move(init), cfg, &res);
  for (std::size_t stage = 0; stage < t_count; ++stage) {
    tr.run(samples_of(tasks.tasks[order[stage]]), stage, derive_seed(cfg.seed, kShuffle, stage), true);
    for (std::size_t col = 0; col < t_count; ++col)
      res.grid.a(stage, col) = score(tr.layer(), tasks.tasks[order[col]]);
  }
  res.layer = tr.layer();
  res.residual_checksum_after = res.layer.bank().residual_checksum();
  if (cfg.compute_baseline) {
    const auto base = isolated_baselines(tasks, cfg);
    std::vector<double> b(t_count);
    for (std::size_t col = 0; col < t_count; ++col) b[col] = base[order[col]];
    res.grid.baseline = std::move(b);
  }
  return res;
}

TrainResult train_mixed(const SyntheticTaskSet& tasks, const TrainConfig& cfg) {
  validate(cfg);
  const std::size_t t_count = tasks.size();
  moe::MoeLoraLayer init = make_layer(tasks, cfg);
  TrainResult res = empty_result(init);
  res.order.resize(t_count);
  std::iota(res.order.begin(), res.order.end(), 0);
  res.grid.a = DenseMatrix(1, t_count);
  std::vector<Sample> all;
  for (const auto& t : tasks.tasks) {
    auto s = samples_of(t);
    all.insert(all.end(), s.begin(), s.end());
  }
  Trainer tr(std::move(init), cfg, &res);
  tr.run(all, 0, derive_seed(cfg.seed, kShuffle, 0), true);
  for (std::size_t t = 0; t < t_count; ++t) res.grid.a(0, t) = score(tr.layer(), tasks.tasks[t]);
  res.layer = tr.layer();
  res.residual_checksum_after = res.layer.bank().residual_checksum();
  if (cfg.compute_baseline) res.grid.baseline = isolated_baselines(tasks, cfg);
  return res;
}

}  // namespace badit::harness
