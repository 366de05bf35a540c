// badit: decompose / reconstruct / dog / train / metrics / analyze / gen
//
// Exit codes: 0 ok, 1 usage, 2 validation or I/O, 3 numeric invariant failure.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "badit/analysis.hpp"
#include "badit/bad.hpp"
#include "badit/dog.hpp"
#include "badit/matrix_io.hpp"
#include "badit/moe.hpp"
#include "badit/planted.hpp"
#include "badit/random.hpp"
#include "badit/run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace badit;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kValidation = 2;
constexpr int kInvariant = 3;
constexpr double kInvariantTol = 1e-10;

ordered_json matrix_json(const DenseMatrix& m) {
  ordered_json rows = ordered_json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

void emit(const ordered_json& j, const std::optional<fs::path>& out) {
  if (out) {
    if (out->has_parent_path()) fs::create_directories(out->parent_path());
    io::write_text(*out, j.dump(2) + "\n");
  } else {
    std::cout << j.dump(2) << "\n";
  }
}

struct DecomposeArgs {
  fs::path input;
  fs::path out;
  std::size_t k = 8;
  std::size_t r = 4;
  double scale = 1.0;
};

int cmd_decompose(const DecomposeArgs& a) {
  const DenseMatrix w = io::read_matrix(a.input);
  const ExpertBank bank = decompose(w, a.k, a.r, a.scale);
  save_bank(bank, a.out);
  const OrthogonalityReport rep = pairwise_orthogonality(bank);
  const double err = frobenius_norm(reconstruct(bank) - w) / std::max(frobenius_norm(w), 1e-300);
  ordered_json j;
  j["format_version"] = 1;
  j["k"] = a.k;
  j["r"] = a.r;
  j["scale"] = a.scale;
  j["max_offdiag"] = rep.max_offdiag();
  j["zero_experts"] = rep.zero_experts;
  j["normalized"] = matrix_json(rep.normalized);
  j["residual_frobenius"] = frobenius_norm(bank.residual());
  j["reconstruction_relative_error"] = err;
  emit(j, a.out / "ortho.json");
  const bool ok = rep.max_offdiag() <= kInvariantTol && err <= kInvariantTol;
  if (!ok) std::cerr << "badit: orthogonality or reconstruction check failed\n";
  return ok ? kOk : kInvariant;
}

struct ReconstructArgs {
  fs::path bank;
  fs::path out;
  std::optional<fs::path> reference;
};

int cmd_reconstruct(const ReconstructArgs& a) {
  const DenseMatrix w = reconstruct(load_bank(a.bank));
  if (a.out.extension() == ".csv") io::write_csv(a.out, w);
  else io::write_bmat(a.out, w);
  if (!a.reference) return kOk;
  const DenseMatrix ref = io::read_matrix(*a.reference);
  require_same_shape(w, ref, "reference");
  const double err = frobenius_norm(w - ref) / std::max(frobenius_norm(ref), 1e-300);
  std::cout << "relative_error " << io::format_double(err) << "\n";
  return err <= kInvariantTol ? kOk : kInvariant;
}

struct DogArgs {
  fs::path input;
  fs::path out;
  std::size_t k = 8;
  std::size_t r = 4;
  std::size_t max_iter = 10;
  double eps_g = dog::kDefaultEpsG;
  std::string mode = "exact";
  std::uint64_t seed = 0;
  std::optional<fs::path> directions;
};

int cmd_dog(const DogArgs& a) {
  const DenseMatrix raw = io::read_matrix(a.input);
  if (raw.rows() != a.k * a.r)
    throw Error(ErrorKind::ConstraintViolation, "gradient file has " + std::to_string(raw.rows()) +
                                                    " rows, expected r*K = " + std::to_string(a.k * a.r));
  const dog::GradientBatch batch = dog::normalize(raw, a.eps_g);
  const dog::AssignMode mode = dog::parse_assign_mode(a.mode);

  ordered_json j;
  j["format_version"] = 1;
  j["mode"] = dog::to_string(mode);
  j["seed"] = a.seed;
  std::vector<std::string> warnings;
  std::optional<dog::GroupingPolicy> policy;
  double defect = 0.0;
  if (a.directions) {
    const DenseMatrix q = io::read_matrix(*a.directions);
    policy = dog::assign_step(batch, q, a.r, mode);
    j["iterations"] = 0;
    j["objective_trace"] = std::vector<double>{dog::grouping_objective(*policy, batch)};
    j["assignment_score"] = dog::assignment_score(*policy, batch, q);
  } else {
    dog::DogResult res = dog::dog_run(batch, a.k, a.r, {a.max_iter, mode, a.seed});
    policy = res.policy;
    warnings = res.warnings;
    j["iterations"] = res.iterations;
    j["objective_trace"] = res.objective_trace;
    j["converged"] = res.converged;
    if (!res.q.empty()) {
      defect = orthonormality_defect(res.q);
      j["assignment_score"] = dog::assignment_score(*policy, batch, res.q);
      j["q_defect"] = defect;
    }
  }
  if (batch.live_count() == 0) warnings.push_back("all components are dead; assignment is the deterministic fill");
  const dog::GradientAngles ang = dog::gradient_angles(batch, *policy);
  j["intra_deg"] = ang.intra_deg ? ordered_json(*ang.intra_deg) : ordered_json(nullptr);
  j["inter_deg"] = ang.inter_deg ? ordered_json(*ang.inter_deg) : ordered_json(nullptr);
  j["assignment"] = policy->assignment();
  j["dead_components"] = batch.size() - batch.live_count();
  j["warnings"] = warnings;

  fs::create_directories(a.out);
  emit(j, a.out / "dog.json");
  std::ostringstream csv;
  csv << "component_index,old_expert,new_expert\n";
  for (std::size_t i = 0; i < policy->components(); ++i)
    csv << i << ',' << i / a.r << ',' << policy->expert_of(i) << '\n';
  io::write_text(a.out / "assignment.csv", csv.str());
  return defect <= kInvariantTol ? kOk : kInvariant;
}

struct TrainArgs {
  fs::path config;
  fs::path out;
  std::size_t jobs = 1;
  std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& a) {
  harness::RunConfig cfg = harness::load_run_config(a.config);
  if (a.seed) cfg.seeds = {*a.seed};
  const bool frozen = harness::run_experiment(cfg, a.out, a.jobs);
  if (!frozen) std::cerr << "badit: residual changed during training\n";
  return frozen ? kOk : kInvariant;
}

struct MetricsArgs {
  fs::path grid;
  std::optional<fs::path> baseline;
  std::string mode = "sequential";
  std::string forget_variant = "as_written";
  std::optional<double> ref_avg, ref_forget, ref_backward;
  double tolerance = 0.05;
  std::optional<fs::path> out;
};

int cmd_metrics(const MetricsArgs& a) {
  const harness::ScoreGrid grid = harness::load_grid(a.grid, a.baseline);
  const harness::Setting setting = harness::parse_setting(a.mode);
  const harness::ForgetVariant variant = harness::parse_forget_variant(a.forget_variant);
  ordered_json j = harness::metrics_report(grid, setting, {a.ref_avg, a.ref_forget, a.ref_backward}, a.tolerance);
  j["forget_variant"] = harness::to_string(variant);
  bool ok = true;
  if (!j["backward"].is_null()) {
    j["forget_selected"] = harness::metric_forget(grid, variant);
    ok = j["backward_plus_forget_as_written"].get<double>() == 0.0;
  } else {
    j["forget_selected"] = nullptr;
  }
  emit(j, a.out);
  return ok ? kOk : kInvariant;
}

struct AnalyzeArgs {
  fs::path model;
  fs::path config;
  fs::path out;
  double eps = 1e-3;
  double keep = 0.1;
  std::uint64_t seed = 0;
};

int cmd_analyze(const AnalyzeArgs& a) {
  const moe::MoeLoraLayer layer = moe::load_layer(a.model);
  const DenseMatrix w = reconstruct(layer.bank());
  harness::RunConfig cfg = harness::load_run_config(a.config);
  cfg.tasks.seed = a.seed;
  const harness::SyntheticTaskSet tasks = harness::make_tasks(cfg.tasks);
  if (tasks.base.rows() != w.rows() || tasks.base.cols() != w.cols())
    throw Error(ErrorKind::Dimension, "model shape differs from the task dimensions");

  std::vector<DenseMatrix> fishers, grads;
  std::vector<std::vector<bool>> masks;
  for (const auto& t : tasks.tasks) {
    fishers.push_back(harness::fisher_diagonal(w, t.eval_x, t.eval_y));
    grads.push_back(harness::mean_gradient(w, t.eval_x, t.eval_y));
    masks.push_back(harness::activated_neurons(w, t.eval_x, a.eps));
  }
  const auto params = harness::overlap_report(fishers, a.keep, grads);
  const auto neurons = harness::overlap_report(masks);

  ordered_json j;
  j["format_version"] = 1;
  j["tasks"] = tasks.size();
  j["keep_fraction"] = a.keep;
  j["eps"] = a.eps;
  j["parameters"] = {{"units", params.unit_counts.size()},
                     {"histogram", params.histogram},
                     {"positive_rows", params.positive_rows},
                     {"negative_rows", params.negative_rows}};
  j["neurons"] = {{"units", neurons.unit_counts.size()},
                  {"histogram", neurons.histogram},
                  {"active_per_task", [&] {
                     std::vector<std::size_t> c;
                     for (const auto& s : neurons.selected) c.push_back(s.size());
                     return c;
                   }()}};
  fs::create_directories(a.out);
  emit(j, a.out / "overlap.json");
  std::ostringstream csv;
  csv << "kind,unit,task_count\n";
  for (std::size_t u = 0; u < params.unit_counts.size(); ++u) csv << "parameter," << u << ',' << params.unit_counts[u] << '\n';
  for (std::size_t u = 0; u < neurons.unit_counts.size(); ++u) csv << "neuron," << u << ',' << neurons.unit_counts[u] << '\n';
  io::write_text(a.out / "overlap.csv", csv.str());
  return kOk;
}

struct GenArgs {
  std::string kind;
  fs::path out;
  std::size_t rows = 64, cols = 64, k = 4, r = 4, dim = 32;
  double noise = 0.02;
  std::uint64_t seed = 0;
};

int cmd_gen(const GenArgs& a) {
  auto write = [](const fs::path& p, const DenseMatrix& m) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    if (p.extension() == ".csv") io::write_csv(p, m);
    else io::write_bmat(p, m);
  };
  if (a.kind == "matrix") {
    Rng rng(a.seed);
    write(a.out, gaussian_matrix(a.rows, a.cols, rng));
  } else if (a.kind == "planted") {
    const PlantedBundles pb = planted_bundles(a.k, a.r, a.dim, a.noise, a.seed);
    fs::create_directories(a.out);
    io::write_bmat(a.out / "gradients.bmat", pb.raw);
    std::ostringstream os;
    os << "component_index,bundle\n";
    for (std::size_t i = 0; i < pb.labels.size(); ++i) os << i << ',' << pb.labels[i] << '\n';
    io::write_text(a.out / "labels.csv", os.str());
  } else if (a.kind == "adversarial") {
    const AdversarialCase c = greedy_adversarial();
    fs::create_directories(a.out);
    io::write_bmat(a.out / "gradients.bmat", c.raw);
    io::write_bmat(a.out / "directions.bmat", c.q);
  } else if (a.kind == "zeros") {
    write(a.out, DenseMatrix(a.rows, a.cols));
  } else {
    throw Error(ErrorKind::InvalidParameter, "unknown gen kind '" + a.kind + "'");
  }
  return kOk;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DivisionHazard:
      return kInvariant;
    default:
      return kValidation;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BADIT: orthogonal LoRA experts from SVD blocks, with dynamic regrouping"};
  app.require_subcommand(1);

  DecomposeArgs dec;
  auto* s_dec = app.add_subcommand("decompose", "split a matrix into K orthogonal rank-r experts");
  s_dec->add_option("input", dec.input, "matrix (.bmat or .csv)")->required()->check(CLI::ExistingFile);
  s_dec->add_option("--out", dec.out, "bank directory")->required();
  s_dec->add_option("--k", dec.k, "experts")->capture_default_str();
  s_dec->add_option("--r", dec.r, "rank per expert")->capture_default_str();
  s_dec->add_option("--scale", dec.scale, "LoRA scale s")->capture_default_str();

  ReconstructArgs rec;
  auto* s_rec = app.add_subcommand("reconstruct", "materialize residual + routed expert deltas");
  s_rec->add_option("bank", rec.bank, "bank directory")->required()->check(CLI::ExistingDirectory);
  s_rec->add_option("--out", rec.out, "output matrix (.bmat or .csv)")->required();
  s_rec->add_option("--reference", rec.reference, "compare against this matrix")->check(CLI::ExistingFile);

  DogArgs dg;
  auto* s_dog = app.add_subcommand("dog", "group rank-1 gradients into K experts");
  s_dog->add_option("input", dg.input, "raw gradients, rK x (m+n)")->required()->check(CLI::ExistingFile);
  s_dog->add_option("--out", dg.out, "report directory")->required();
  s_dog->add_option("--k", dg.k)->capture_default_str();
  s_dog->add_option("--r", dg.r)->capture_default_str();
  s_dog->add_option("--max-iter", dg.max_iter)->capture_default_str();
  s_dog->add_option("--eps-g", dg.eps_g)->capture_default_str();
  s_dog->add_option("--mode", dg.mode)->check(CLI::IsMember({"exact", "greedy"}))->capture_default_str();
  s_dog->add_option("--seed", dg.seed)->capture_default_str();
  s_dog->add_option("--directions", dg.directions, "fixed d x K directions: one assignment step only")
      ->check(CLI::ExistingFile);

  TrainArgs tr;
  auto* s_train = app.add_subcommand("train", "run toy continual-learning experiments");
  s_train->add_option("config", tr.config, "run_config.json")->required()->check(CLI::ExistingFile);
  s_train->add_option("--out", tr.out, "output directory")->required();
  s_train->add_option("--jobs", tr.jobs, "seeds trained in parallel")->capture_default_str();
  s_train->add_option("--seed", tr.seed, "override the config's seed list");

  MetricsArgs mt;
  auto* s_met = app.add_subcommand("metrics", "continual-learning metrics of a score grid");
  s_met->add_option("grid", mt.grid, "grid CSV, rows = stages")->required()->check(CLI::ExistingFile);
  s_met->add_option("baseline", mt.baseline, "isolated-training scores CSV")->check(CLI::ExistingFile);
  s_met->add_option("--mode", mt.mode)->check(CLI::IsMember({"sequential", "mixed"}))->capture_default_str();
  s_met->add_option("--forget-variant", mt.forget_variant)
      ->check(CLI::IsMember({"as_written", "max_over_history"}))
      ->capture_default_str();
  s_met->add_option("--ref-avg", mt.ref_avg, "reference average score");
  s_met->add_option("--ref-forget", mt.ref_forget, "reference forget rate");
  s_met->add_option("--ref-backward", mt.ref_backward, "reference backward transfer");
  s_met->add_option("--tolerance", mt.tolerance, "match tolerance for references")->capture_default_str();
  s_met->add_option("--out", mt.out, "metrics.json (default: stdout)");

  AnalyzeArgs an;
  auto* s_an = app.add_subcommand("analyze", "Fisher / activation overlap across tasks");
  s_an->add_option("model", an.model, "layer or bank directory")->required()->check(CLI::ExistingDirectory);
  s_an->add_option("config", an.config, "run_config.json describing the tasks")->required()->check(CLI::ExistingFile);
  s_an->add_option("--out", an.out, "report directory")->required();
  s_an->add_option("--eps", an.eps)->capture_default_str();
  s_an->add_option("--keep", an.keep)->capture_default_str();
  s_an->add_option("--seed", an.seed, "task seed")->capture_default_str();

  GenArgs gn;
  auto* s_gen = app.add_subcommand("gen", "write fixture inputs");
  s_gen->add_option("kind", gn.kind)->required()->check(CLI::IsMember({"matrix", "planted", "adversarial", "zeros"}));
  s_gen->add_option("--out", gn.out)->required();
  s_gen->add_option("--rows", gn.rows)->capture_default_str();
  s_gen->add_option("--cols", gn.cols)->capture_default_str();
  s_gen->add_option("--k", gn.k)->capture_default_str();
  s_gen->add_option("--r", gn.r)->capture_default_str();
  s_gen->add_option("--dim", gn.dim)->capture_default_str();
  s_gen->add_option("--noise", gn.noise)->capture_default_str();
  s_gen->add_option("--seed", gn.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*s_dec) return cmd_decompose(dec);
    if (*s_rec) return cmd_reconstruct(rec);
    if (*s_dog) return cmd_dog(dg);
    if (*s_train) return cmd_train(tr);
    if (*s_met) return cmd_metrics(mt);
    if (*s_an) return cmd_analyze(an);
    if (*s_gen) return cmd_gen(gn);
  } catch (const Error& e) {
    std::cerr << "badit: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "badit: " << e.what() << "\n";
    return kValidation;
  }
  return kUsage;
}
