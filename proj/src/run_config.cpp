#include "badit/run_config.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "badit/matrix_io.hpp"
#include "badit/random.hpp"

namespace badit::harness {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kOrderStream = 21;

template <typename T>
void read_opt(const json& j, const char* key, T& dst) {
  if (!j.contains(key) || j[key].is_null()) return;
  try {
    dst = j[key].get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, std::string("run_config: bad value for '") + key + "': " + e.what());
  }
}

ordered_json opt_number(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

std::string csv_opt(const std::optional<double>& v) { return v ? io::format_double(*v) : ""; }

}  // namespace

RunConfig parse_run_config(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::Format, "run_config: top level must be an object");
  if (j.value("format_version", 1) != 1) throw Error(ErrorKind::Format, "run_config: unsupported format_version");
  RunConfig c;
  if (j.contains("tasks")) {
    const json& t = j["tasks"];
    read_opt(t, "count", c.tasks.count);
    read_opt(t, "input_dim", c.tasks.input_dim);
    read_opt(t, "output_dim", c.tasks.output_dim);
    read_opt(t, "rank", c.tasks.rank);
    read_opt(t, "noise", c.tasks.noise);
    read_opt(t, "train_samples", c.tasks.train_samples);
    read_opt(t, "eval_samples", c.tasks.eval_samples);
    read_opt(t, "rotation_strength", c.tasks.rotation_strength);
    read_opt(t, "input_shift", c.tasks.input_shift);
    read_opt(t, "base_noise", c.tasks.base_noise);
  }
  if (j.contains("model")) {
    const json& m = j["model"];
    read_opt(m, "k", c.train.k);
    read_opt(m, "r", c.train.r);
    read_opt(m, "scale", c.train.scale);
    read_opt(m, "top_k", c.train.top_k);
    std::string gm = moe::to_string(c.train.gate_mode);
    read_opt(m, "gate_mode", gm);
    c.train.gate_mode = moe::parse_gate_mode(gm);
  }
  if (j.contains("training")) {
    const json& t = j["training"];
    std::string setting = to_string(c.setting);
    read_opt(t, "setting", setting);
    c.setting = parse_setting(setting);
    read_opt(t, "epochs", c.train.epochs);
    read_opt(t, "batch_size", c.train.batch_size);
    read_opt(t, "learning_rate", c.train.learning_rate);
    read_opt(t, "baseline", c.train.compute_baseline);
    if (t.contains("order") && !t["order"].is_null()) {
      std::vector<std::size_t> order;
      read_opt(t, "order", order);
      c.order = std::move(order);
    }
  }
  if (j.contains("dog")) {
    const json& d = j["dog"];
    read_opt(d, "enabled", c.train.dog_enabled);
    read_opt(d, "max_iter", c.train.max_iter);
    read_opt(d, "eps_g", c.train.eps_g);
    read_opt(d, "regroup_interval", c.train.regroup_interval);
    std::string mode = dog::to_string(c.train.mode);
    read_opt(d, "mode", mode);
    c.train.mode = dog::parse_assign_mode(mode);
  }
  if (j.contains("seeds")) {
    read_opt(j, "seeds", c.seeds);
    if (c.seeds.empty()) throw Error(ErrorKind::InvalidParameter, "run_config: seeds is empty");
  }
  if (c.order && c.order->size() != c.tasks.count)
    throw Error(ErrorKind::InvalidParameter, "run_config: order length differs from task count");
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
  return parse_run_config(j);
}

ordered_json metrics_report(const ScoreGrid& grid, Setting setting, const MetricReference& ref,
                            double tolerance) {
  ordered_json j;
  j["format_version"] = 1;
  j["setting"] = to_string(setting);
  j["stages"] = grid.stages();
  j["tasks"] = grid.tasks();
  j["avg_score"] = metric_avg_score(grid);

  const bool square = grid.stages() == grid.tasks();
  const bool history = square && grid.tasks() >= 2;
  std::optional<double> fwd;
  if (grid.baseline && (setting == Setting::Mixed || square)) fwd = metric_forward(grid, setting);
  j["forward"] = opt_number(fwd);

  std::optional<double> f_as, f_max, bwd;
  if (history) {
    f_as = metric_forget(grid, ForgetVariant::AsWritten);
    f_max = metric_forget(grid, ForgetVariant::MaxOverHistory);
    bwd = metric_backward(grid);
  }
  j["forget"] = {{"as_written", opt_number(f_as)}, {"max_over_history", opt_number(f_max)}};
  j["backward"] = opt_number(bwd);
  if (history) j["backward_plus_forget_as_written"] = *bwd + *f_as;

  if (ref.avg || ref.forget || ref.backward) {
    ordered_json d;
    d["tolerance"] = tolerance;
    if (ref.avg) {
      const double diff = j["avg_score"].get<double>() - *ref.avg;
      d["avg_score"] = {{"reference", *ref.avg}, {"computed", j["avg_score"]}, {"difference", diff}};
    }
    if (ref.forget && history) {
      ordered_json f;
      f["reference"] = *ref.forget;
      f["as_written"] = {{"computed", *f_as}, {"difference", *f_as - *ref.forget}};
      f["max_over_history"] = {{"computed", *f_max}, {"difference", *f_max - *ref.forget}};
      ordered_json which = nullptr;
      if (std::abs(*f_as - *ref.forget) <= tolerance) which = "as_written";
      else if (std::abs(*f_max - *ref.forget) <= tolerance) which = "max_over_history";
      f["reproduced_by"] = which;
      d["forget"] = f;
    }
    if (ref.backward && history) {
      ordered_json b;
      b["reference"] = *ref.backward;
      b["computed"] = *bwd;
      b["difference"] = *bwd - *ref.backward;
      if (ref.forget)
        b["reference_pair_consistent_with_as_written"] = std::abs(*ref.backward + *ref.forget) <= tolerance;
      d["backward"] = b;
    }
    j["discrepancy"] = d;
  }
  return j;
}

std::vector<std::size_t> task_order(const RunConfig& cfg, std::uint64_t seed) {
  if (cfg.order) return *cfg.order;
  std::vector<std::size_t> order(cfg.tasks.count);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, kOrderStream));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

TrainResult execute(const RunConfig& cfg, std::uint64_t seed) {
  TaskSpec spec = cfg.tasks;
  spec.seed = seed;
  const SyntheticTaskSet tasks = make_tasks(spec);
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  if (cfg.setting == Setting::Mixed) return train_mixed(tasks, tc);
  return train_sequential(tasks, task_order(cfg, seed), tc);
}

void write_outputs(const RunConfig& cfg, std::uint64_t seed, const TrainResult& res,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ostringstream os;
    os << "stage,task,score\n";
    if (res.grid.baseline)
      for (std::size_t c = 0; c < res.grid.tasks(); ++c)
        os << 0 << ',' << res.order[c] + 1 << ',' << io::format_double((*res.grid.baseline)[c]) << '\n';
    for (std::size_t s = 0; s < res.grid.stages(); ++s)
      for (std::size_t c = 0; c < res.grid.tasks(); ++c)
        os << s + 1 << ',' << res.order[c] + 1 << ',' << io::format_double(res.grid.a(s, c)) << '\n';
    io::write_text(dir / "scores.csv", os.str());
  }
  {
    std::ostringstream os;
    os << "epoch,intra_deg,inter_deg\n";
    for (const auto& e : res.epoch_angles)
      os << e.epoch << ',' << csv_opt(e.intra_deg) << ',' << csv_opt(e.inter_deg) << '\n';
    io::write_text(dir / "angles.csv", os.str());
  }
  {
    std::ostringstream os;
    os << "stage,epoch,batch,intra_deg,inter_deg,dog_iterations,moved\n";
    for (const auto& e : res.events)
      os << e.stage + 1 << ',' << e.epoch << ',' << e.batch << ',' << csv_opt(e.intra_deg) << ','
         << csv_opt(e.inter_deg) << ',' << e.dog_iterations << ',' << e.moved << '\n';
    io::write_text(dir / "events.csv", os.str());
  }
  ordered_json j = metrics_report(res.grid, cfg.setting);
  j["seed"] = seed;
  j["order"] = res.order;
  j["dog_enabled"] = cfg.train.dog_enabled;
  j["residual_frozen"] = res.residual_checksum_before == res.residual_checksum_after;
  j["warnings"] = res.warnings;
  io::write_text(dir / "metrics.json", j.dump(2) + "\n");
  moe::save_layer(res.layer, dir / "model");
}

bool run_experiment(const RunConfig& cfg, const std::filesystem::path& dir, std::size_t jobs) {
  const std::size_t n = cfg.seeds.size();
  std::vector<char> frozen(n, 0);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        const std::uint64_t seed = cfg.seeds[i];
        const TrainResult res = execute(cfg, seed);
        write_outputs(cfg, seed, res, n == 1 ? dir : dir / ("seed_" + std::to_string(seed)));
        frozen[i] = res.residual_checksum_before == res.residual_checksum_after;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, n);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return std::all_of(frozen.begin(), frozen.end(), [](char f) { return f != 0; });
}

}  // namespace badit::harness
