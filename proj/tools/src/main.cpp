#include <CLI11.hpp>

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "refgrad.hpp"
#include "taskforge/checkpoint.hpp"
#include "taskforge/divergence.hpp"
#include "taskforge/errors.hpp"
#include "taskforge/mlp.hpp"
#include "taskforge/objective.hpp"
#include "taskforge/ppm.hpp"
#include "taskforge/rewrite.hpp"
#include "taskforge/rng.hpp"
#include "taskforge/sprites.hpp"
#include "taskforge/tape.hpp"
#include "taskforge/task.hpp"
#include "taskforge/taskspec.hpp"
#include "taskforge/trainer.hpp"

namespace fs = std::filesystem;
using namespace taskforge;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;  // verification / evaluation failure
constexpr int kExitUsage = 2; // bad arguments or unreadable inputs

// --- validate -----------------------------------------------------------------

int cmd_validate(const std::string& path) {
  TaskBundle b;
  try {
    b = load_task_bundle(path);
  } catch (const Error& e) {
    std::cerr << "invalid: " << e.what() << "\n";
    return e.code() == "IoError" ? kExitUsage : kExitFail;
  }
  try {
    ParamStore params;
    for (const auto& [name, layout] : b.layouts) params.declare(name, layout);
    params.init(0);
    compile_objective(b.task, params, b.dists, b.objective);
  } catch (const Error& e) {
    std::cerr << "invalid: " << e.what() << "\n";
    return kExitFail;
  }
  std::cout << "task '" << b.task.name << "': " << b.task.atoms.size()
            << (b.task.atoms.size() == 1 ? " law\n" : " laws\n");
  for (const AtomicTask& a : b.task.atoms) {
    std::cout << "  " << a.name << ": dist="
              << (a.dist.empty() ? "(none)" : a.dist) << " weight=" << a.weight
              << " div=" << a.div.to_string() << " trainable={";
    bool first = true;
    for (const std::string& s : a.trainable) {
      if (!first) std::cout << ", ";
      std::cout << s;
      first = false;
    }
    std::cout << "}\n";
  }
  std::set<std::string> spaces = task_spaces(b.task);
  std::cout << "spaces:";
  for (const std::string& s : spaces) std::cout << " " << s;
  std::cout << "\nOK\n";
  return kExitOk;
}

// --- train ----------------------------------------------------------------------

int cmd_train(const std::string& path, const RunConfig& overrides,
              bool has_steps, bool has_seed, bool has_out, bool has_batch) {
  TaskBundle b;
  try {
    b = load_task_bundle(path);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  RunConfig run = b.run;
  if (has_steps) run.steps = overrides.steps;
  if (has_seed) run.seed = overrides.seed;
  if (has_out) run.out_dir = overrides.out_dir;
  if (has_batch) run.batch = overrides.batch;

  TrainResult r;
  try {
    r = train(b.task, b.layouts, b.dists, b.objective, run);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == "NonFiniteLoss" ? kExitFail : kExitUsage;
  }

  // Keep the task spec next to its artifacts so eval commands can find it.
  if (!run.out_dir.empty()) {
    std::error_code ec;
    fs::copy_file(path, fs::path(run.out_dir) / "taskspec.json",
                  fs::copy_options::overwrite_existing, ec);
  }

  std::int64_t last = r.metrics.empty() ? 0 : r.metrics.back().step;
  std::cout << "trained '" << b.task.name << "' for " << run.steps
            << " steps (batch " << run.batch << ", seed " << run.seed << ")\n";
  for (const MetricRow& m : r.metrics)
    if (m.step == last)
      std::printf("  %-28s %.6g\n", m.atom.c_str(), m.loss);
  if (!r.metrics_path.empty()) std::cout << "metrics: " << r.metrics_path << "\n";
  if (!r.checkpoint_dir.empty())
    std::cout << "checkpoint: " << r.checkpoint_dir << "\n";
  return kExitOk;
}

// --- eval-laws ------------------------------------------------------------------

int cmd_eval_laws(const std::string& ckpt, const std::string& spec, int batch,
                  std::uint64_t seed, bool has_batch, bool has_seed) {
  TaskBundle b;
  Checkpoint c;
  try {
    b = load_task_bundle(spec);
    c = load_checkpoint(ckpt);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  int use_batch = has_batch ? batch : b.eval_batch;
  std::uint64_t use_seed = has_seed ? seed : b.eval_seed;
  LawReport rep;
  try {
    rep = eval_laws(c, b.task, b.dists, b.objective, use_batch, use_seed,
                    b.eval_dists);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  bool finite = std::isfinite(rep.total);
  std::printf("%-28s %12s %8s %10s\n", "law", "divergence", "weight",
              "accuracy");
  for (const LawRow& r : rep.rows) {
    finite = finite && std::isfinite(r.mean_divergence);
    if (r.accuracy >= 0.0)
      std::printf("%-28s %12.6g %8g %10.4f\n", r.atom.c_str(),
                  r.mean_divergence, r.weight, r.accuracy);
    else
      std::printf("%-28s %12.6g %8g %10s\n", r.atom.c_str(),
                  r.mean_divergence, r.weight, "-");
  }
  std::printf("%-28s %12.6g (batch %d, seed %" PRIu64 ", step %" PRId64 ")\n",
              "total", rep.total, use_batch, use_seed, c.step);
  if (!finite) {
    std::cerr << "error: non-finite divergence\n";
    return kExitFail;
  }
  return kExitOk;
}

// --- proof ---------------------------------------------------------------------

int cmd_proof(const std::string& path, bool no_oracle, int samples,
              double tol) {
  ProofScript s;
  try {
    s = load_proof_script(path);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  CheckOptions opts;
  opts.run_oracle = !no_oracle;
  opts.oracle_samples = samples;
  opts.oracle_tol = tol;

  ProofVerdict v = check_proof(s, opts);
  std::cout << "proof '" << s.name << "': " << s.steps.size() << " steps\n";
  int i = 0;
  for (const StepRecord& r : v.steps) {
    std::printf("  step %-2d %-20s %s eq=%d  %016" PRIx64 " -> %016" PRIx64,
                i++, r.rule.c_str(), r.backward ? "<-" : "->", r.eq,
                r.before_hash, r.after_hash);
    if (r.oracle_ran) std::printf("  oracle dev %.3g", r.deviation);
    std::printf("\n");
    for (const std::string& d : r.discharged)
      std::cout << "          discharged " << d << "\n";
  }
  if (v.verified) {
    std::cout << "Verified\n";
    return kExitOk;
  }
  std::cerr << "failed: " << v.failure << "\n";
  return kExitFail;
}

// --- gradcheck -------------------------------------------------------------------

// Reverse-mode gradients against central finite differences (h = 1e-3) of a
// double-precision replica of the forward pass, over random MLPs of up to 4
// layers with dims up to 64, cycling through every divergence. Probes whose
// +/-h evaluations land on different sides of a Relu/LeakyRelu (or L1) kink
// are skipped: a two-sided difference across a kink measures no derivative.
// Relative error uses a 0.01 floor in the denominator so near-zero
// coordinates are held to |ad - fd| <= tol * 0.01 instead of pure ratio.
int cmd_gradcheck(int trials, std::uint64_t seed, double tol, bool verbose) {
  const double h = 1e-3;
  const DivKind kinds[] = {DivKind::L2,  DivKind::L1,      DivKind::BCE,
                           DivKind::CE,  DivKind::KLGauss, DivKind::SSIM};
  const Act hidden_acts[] = {Act::Linear, Act::Relu, Act::LeakyRelu,
                             Act::Sigmoid};
  Rng rng(seed);
  double worst = 0.0;
  std::string worst_at;
  long probes = 0, skipped = 0;

  for (int t = 0; t < trials; ++t) {
    DivKind kind = kinds[t % 6];
    int layers = 1 + int(rng.below(4));
    MlpLayout lay;
    for (int l = 0; l <= layers; ++l) lay.dims.push_back(2 + int(rng.below(63)));
    if (kind == DivKind::KLGauss && lay.dims.back() % 2 != 0)
      lay.dims.back() += 1;
    for (int l = 0; l + 1 < layers; ++l)
      lay.acts.push_back(hidden_acts[rng.below(4)]);
    switch (kind) { // final activation keeps the divergence's domain valid
      case DivKind::L2:
      case DivKind::L1:
        lay.acts.push_back(hidden_acts[rng.below(4)]);
        break;
      case DivKind::CE:
        lay.acts.push_back(Act::Softmax);
        break;
      default:
        lay.acts.push_back(Act::Sigmoid);
        break;
    }

    const int B = 4;
    const int in = lay.in_dim(), out = lay.out_dim();
    ParamStore params;
    params.declare("w", lay);
    params.init(rng.next_u64());
    const Tensor& flat = params.flat("w");
    std::vector<double> flat64(flat.data(), flat.data() + flat.size());

    Tensor X({B, in}), T({B, out});
    for (int b = 0; b < B; ++b) {
      for (int i = 0; i < in; ++i) X.at(b, i) = float(rng.uniform(-1.0, 1.0));
      switch (kind) {
        case DivKind::BCE:
          for (int i = 0; i < out; ++i)
            T.at(b, i) = float(rng.uniform(0.05, 0.95));
          break;
        case DivKind::CE: {
          int c = int(rng.below(std::uint64_t(out)));
          for (int i = 0; i < out; ++i) T.at(b, i) = i == c ? 1.0f : 0.0f;
          break;
        }
        case DivKind::KLGauss:
          for (int i = 0; i < out / 2; ++i)
            T.at(b, i) = float(rng.uniform(-0.5, 0.5));
          for (int i = out / 2; i < out; ++i)
            T.at(b, i) = float(rng.uniform(0.3, 1.2));
          break;
        default:
          for (int i = 0; i < out; ++i) T.at(b, i) = float(rng.uniform(0.0, 1.0));
          break;
      }
    }
    std::vector<std::vector<double>> X64(B), T64(B);
    for (int b = 0; b < B; ++b)
      for (int i = 0; i < in; ++i) X64[std::size_t(b)].push_back(X.at(b, i));
    for (int b = 0; b < B; ++b)
      for (int i = 0; i < out; ++i) T64[std::size_t(b)].push_back(T.at(b, i));

    Divergence div = Divergence::primitive(kind);
    Tape tape;
    NodeId x = tape.leaf(X);
    NodeId p = tape.param_leaf("w", flat);
    NodeId y = mlp_forward(tape, x, p, lay);
    NodeId d = divergence_apply(tape, div, y, tape.leaf(T));
    NodeId loss = tape.mean_batch(d);
    tape.backward(loss);
    const Tensor& grad = tape.param_grads().at("w");

    std::size_t count = flat.size();
    std::set<std::size_t> picked;
    std::size_t want = std::min<std::size_t>(count, 60);
    while (picked.size() < want) picked.insert(rng.below(count));

    std::vector<std::int8_t> sig0, sig1, sig2;
    for (std::size_t idx : picked) {
      ++probes;
      double saved = flat64[idx];
      sig0.clear();
      sig1.clear();
      sig2.clear();
      double base = ref::loss_f64(X64, flat64, lay, div, T64, &sig0);
      (void)base;
      flat64[idx] = saved + h;
      double up = ref::loss_f64(X64, flat64, lay, div, T64, &sig1);
      flat64[idx] = saved - h;
      double dn = ref::loss_f64(X64, flat64, lay, div, T64, &sig2);
      flat64[idx] = saved;
      if (sig0 != sig1 || sig0 != sig2) {
        ++skipped;
        continue;
      }
      double fd = (up - dn) / (2.0 * h);
      double ad = grad.data()[idx];
      double rel =
          std::abs(ad - fd) / std::max({std::abs(ad), std::abs(fd), 0.01});
      if (rel > worst) {
        worst = rel;
        worst_at = "trial " + std::to_string(t) + " (" +
                   divkind_to_string(kind) + ", index " + std::to_string(idx) +
                   ")";
      }
    }
    if (verbose)
      std::printf("trial %-3d %-8s layers=%d worst so far %.3g\n", t,
                  divkind_to_string(kind).c_str(), layers, worst);
  }

  std::printf("gradcheck: %d trials, %ld probes (%ld kink-skipped)\n", trials,
              probes, skipped);
  std::printf("max relative error %.3g at %s (tolerance %g)\n", worst,
              worst_at.c_str(), tol);
  if (worst < tol) {
    std::cout << "OK\n";
    return kExitOk;
  }
  std::cerr << "FAILED\n";
  return kExitFail;
}

// --- gen-data --------------------------------------------------------------------

int cmd_gen_sprites(std::uint64_t seed, const std::string& out, int count,
                    int size) {
  fs::create_directories(out);
  std::vector<SpriteSample> sprites = gen_sprites(count, size, seed);
  std::vector<std::vector<float>> images;
  for (const SpriteSample& s : sprites) images.push_back(s.image);

  int cols = std::max(1, int(std::ceil(std::sqrt(double(count)))));
  write_ppm_grid((fs::path(out) / "sprites.ppm").string(), images, size, size,
                 cols);
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "sprite_%04d.ppm", i);
    write_ppm((fs::path(out) / name).string(), sprites[std::size_t(i)].image.data(),
              size, size);
  }
  std::ofstream csv(fs::path(out) / "labels.csv");
  csv << "index,shape,hue,cs,bc\n";
  const char* shape_names[] = {"ellipse", "rectangle", "triangle"};
  for (int i = 0; i < count; ++i) {
    const SpriteSample& s = sprites[std::size_t(i)];
    char row[128];
    std::snprintf(row, sizeof row, "%d,%s,%d,%.6f,%.6f\n", i,
                  shape_names[int(s.shape)], s.hue_class, s.cs,
                  s.blue_circleness);
    csv << row;
  }
  std::cout << "wrote " << count << " sprites (" << size << "x" << size
            << ") to " << out << "\n";
  return kExitOk;
}

int cmd_gen_toy(std::uint64_t seed, const std::string& out, int count) {
  fs::create_directories(out);
  // Correlated two-variable toy joint: P(d0,a0)=0.4, P(d1,a0)=0.4,
  // P(d1,a1)=0.2 — small enough to enumerate, skewed enough that inverting
  // it is a real test.
  std::ofstream joint(fs::path(out) / "joint.csv");
  joint << "d,a,p\n0,0,0.4\n1,0,0.4\n1,1,0.2\n";
  std::ofstream samples(fs::path(out) / "samples.csv");
  samples << "d,a\n";
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    double u = rng.uniform();
    int d = u < 0.4 ? 0 : 1;
    int a = u < 0.8 ? 0 : 1;
    samples << d << "," << a << "\n";
  }
  std::cout << "wrote joint.csv and " << count << " samples to " << out
            << "\n";
  return kExitOk;
}

// --- stack-eval ------------------------------------------------------------------

int cmd_stack_eval(const std::string& ckpt, std::string spec,
                   std::vector<int> depths, int batch, std::uint64_t seed) {
  if (spec.empty()) {
    // The train command drops taskspec.json next to its artifacts.
    for (const fs::path& cand :
         {fs::path(ckpt) / "taskspec.json",
          fs::path(ckpt).parent_path() / "taskspec.json"}) {
      std::error_code ec;
      if (fs::exists(cand, ec)) {
        spec = cand.string();
        break;
      }
    }
    if (spec.empty()) {
      std::cerr << "error: no task spec found near '" << ckpt
                << "'; pass --spec\n";
      return kExitUsage;
    }
  }
  TaskBundle b;
  Checkpoint c;
  try {
    b = load_task_bundle(spec);
    c = load_checkpoint(ckpt);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  if (!b.has_stack_eval) {
    std::cerr << "error: '" << spec << "' has no stack_eval section\n";
    return kExitUsage;
  }
  if (depths.empty()) depths = {0, 1, 2, 3, 4};
  std::vector<StackDepthReport> reports;
  try {
    reports = stack_eval(c.params, b.dists, b.stack, depths, batch, seed);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  for (const StackDepthReport& r : reports) {
    std::printf("depth %d: mean mse %.6g", r.depth, r.mean_mse);
    if (r.depth > 0) {
      std::printf("  slots [");
      for (std::size_t i = 0; i < r.slot_mse.size(); ++i)
        std::printf("%s%.6g", i ? ", " : "", r.slot_mse[i]);
      std::printf("]");
    }
    if (r.beyond_capacity) std::printf("  (beyond capacity)");
    std::printf("\n");
  }
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"task-specification compiler and training runtime"};
  app.require_subcommand(1);

  // validate
  std::string v_spec;
  CLI::App* validate = app.add_subcommand("validate", "Check a task spec");
  validate->add_option("spec", v_spec, "task spec JSON")->required();

  // train
  std::string t_spec, t_out;
  RunConfig t_over;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a task spec");
  train_cmd->add_option("spec", t_spec, "task spec JSON")->required();
  CLI::Option* t_steps = train_cmd->add_option("--steps", t_over.steps, "step count");
  CLI::Option* t_seed = train_cmd->add_option("--seed", t_over.seed, "run seed");
  CLI::Option* t_outo = train_cmd->add_option("--out", t_out, "output directory");
  CLI::Option* t_batch = train_cmd->add_option("--batch", t_over.batch, "batch size");

  // eval-laws
  std::string e_ckpt, e_spec;
  int e_batch = 512;
  std::uint64_t e_seed = 1;
  CLI::App* eval_cmd =
      app.add_subcommand("eval-laws", "Per-law residuals of a checkpoint");
  eval_cmd->add_option("checkpoint", e_ckpt, "checkpoint directory")->required();
  eval_cmd->add_option("spec", e_spec, "task spec JSON")->required();
  CLI::Option* e_batcho = eval_cmd->add_option("--batch", e_batch, "batch size");
  CLI::Option* e_seedo = eval_cmd->add_option("--seed", e_seed, "eval seed");

  // proof
  std::string p_script;
  bool p_no_oracle = false;
  int p_samples = 100;
  double p_tol = 1e-4;
  CLI::App* proof_cmd = app.add_subcommand("proof", "Replay a proof script");
  proof_cmd->add_option("script", p_script, "proof script JSON")->required();
  proof_cmd->add_flag("--no-oracle", p_no_oracle,
                      "skip the numeric oracle on deterministic steps");
  proof_cmd->add_option("--oracle-samples", p_samples, "oracle sample count");
  proof_cmd->add_option("--oracle-tol", p_tol, "oracle deviation tolerance");

  // gradcheck
  int g_trials = 100;
  std::uint64_t g_seed = 0;
  double g_tol = 1e-3;
  bool g_verbose = false;
  CLI::App* grad_cmd =
      app.add_subcommand("gradcheck", "Reverse-mode vs finite differences");
  grad_cmd->add_option("--trials", g_trials, "random network count");
  grad_cmd->add_option("--seed", g_seed, "draw seed");
  grad_cmd->add_option("--tol", g_tol, "max relative error");
  grad_cmd->add_flag("-v,--verbose", g_verbose, "per-trial progress");

  // gen-data
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "Write synthetic data");
  gen_cmd->require_subcommand(1);
  std::uint64_t d_seed = 0;
  std::string d_out = "data-out";
  int d_count = 64, d_size = 16;
  CLI::App* gen_sprites_cmd =
      gen_cmd->add_subcommand("sprites", "Random sprites as PPM + labels");
  gen_sprites_cmd->add_option("--seed", d_seed, "generator seed");
  gen_sprites_cmd->add_option("--out", d_out, "output directory");
  gen_sprites_cmd->add_option("--count", d_count, "sprite count");
  gen_sprites_cmd->add_option("--size", d_size, "image side (16 or 32)");
  std::uint64_t y_seed = 0;
  std::string y_out = "data-out";
  int y_count = 512;
  CLI::App* gen_toy_cmd =
      gen_cmd->add_subcommand("toy", "Two-bit correlated joint as CSV");
  gen_toy_cmd->add_option("--seed", y_seed, "generator seed");
  gen_toy_cmd->add_option("--out", y_out, "output directory");
  gen_toy_cmd->add_option("--count", y_count, "sample count");

  // stack-eval
  std::string s_ckpt, s_spec;
  std::vector<int> s_depths;
  int s_batch = 100;
  std::uint64_t s_seed = 1;
  CLI::App* stack_cmd =
      app.add_subcommand("stack-eval", "Decode error per stack depth");
  stack_cmd->add_option("checkpoint", s_ckpt, "checkpoint directory")
      ->required();
  stack_cmd->add_option("--depths", s_depths, "depths to probe")
      ->delimiter(',');
  stack_cmd->add_option("--spec", s_spec,
                        "task spec JSON (default: next to the checkpoint)");
  stack_cmd->add_option("--batch", s_batch, "stacks per depth");
  stack_cmd->add_option("--seed", s_seed, "draw seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (validate->parsed()) return cmd_validate(v_spec);
    if (train_cmd->parsed()) {
      t_over.out_dir = t_out;
      return cmd_train(t_spec, t_over, t_steps->count() > 0,
                       t_seed->count() > 0, t_outo->count() > 0,
                       t_batch->count() > 0);
    }
    if (eval_cmd->parsed())
      return cmd_eval_laws(e_ckpt, e_spec, e_batch, e_seed,
                           e_batcho->count() > 0, e_seedo->count() > 0);
    if (proof_cmd->parsed())
      return cmd_proof(p_script, p_no_oracle, p_samples, p_tol);
    if (grad_cmd->parsed())
      return cmd_gradcheck(g_trials, g_seed, g_tol, g_verbose);
    if (gen_cmd->parsed()) {
      if (gen_sprites_cmd->parsed())
        return cmd_gen_sprites(d_seed, d_out, d_count, d_size);
      if (gen_toy_cmd->parsed()) return cmd_gen_toy(y_seed, y_out, y_count);
    }
    if (stack_cmd->parsed())
      return cmd_stack_eval(s_ckpt, s_spec, s_depths, s_batch, s_seed);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
