#include "msgru/cli.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "msgru/config.hpp"
#include "msgru/corrloss.hpp"
#include "msgru/error.hpp"
#include "msgru/gradcheck.hpp"
#include "msgru/ops.hpp"
#include "msgru/tensor_io.hpp"

namespace msgru::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using num::Graph;
using num::ParamStore;
using num::Tensor;
using num::Var;

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr int kDatasetVersion = 1;

namespace {

Tensor random_tensor(num::Shape shape, Rng& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = uniform(rng, lo, hi);
  return t;
}

num::GradCheckOptions check_options(double epsilon, double corrupt) {
  num::GradCheckOptions opt;
  opt.epsilon = epsilon;
  opt.corrupt_analytic = corrupt;
  return opt;
}

GradcheckGroup group_result(std::string name, const num::GradCheckResult& r) {
  return {std::move(name), r.max_rel_error, r.coords_checked, r.worst_param};
}

// A shared shift of every attention score cancels in the softmax, so the
// score bias has an identically zero gradient. Its central difference is pure
// roundoff, so it is held to |analytic| <= 1e-12 instead of the ratio test.
GradcheckGroup with_zero_bias(std::string name, const num::LossBuilder& build, ParamStore& params,
                              num::GradCheckOptions opt) {
  opt.exclude.push_back(attn::kScoreBias);
  auto out = group_result(std::move(name), num::grad_check(build, params, opt));
  Graph g(&params);
  const auto grads = g.backward(build(g));
  const double a = std::abs(grads.at(attn::kScoreBias)[0]) * (1.0 + opt.corrupt_analytic);
  if (a > 1e-12 && a > out.max_rel_error) {
    out.max_rel_error = a * 1e8;  // on the same scale as the ratio floor of 1e-8
    out.worst_param = attn::kScoreBias;
  }
  ++out.coords;
  return out;
}

}  // namespace

train::TrainConfig gradcheck_config() {
  train::TrainConfig c;
  c.variant = train::Variant::full;
  c.channels = {2, 4, 4, 4, 4};
  c.feature_dim = 8;
  c.hidden = 6;
  c.lambda_corr = 0.5;
  c.patch_size = 32;
  return c;
}

std::vector<GradcheckGroup> run_gradcheck(const train::TrainConfig& config, std::uint64_t seed,
                                          const GradcheckSteps& steps, double corrupt) {
  config.validate();
  if (config.hidden > 8) throw ConfigError("gradcheck needs hidden <= 8, got " + std::to_string(config.hidden));
  if (config.patch_size != 32) throw ConfigError("gradcheck needs patch_size 32");
  const auto opt = check_options(steps.smooth, corrupt);
  const auto kinked = check_options(steps.kinked, corrupt);
  const std::size_t hidden = config.hidden;
  const std::size_t fd = config.feature_dim;
  const std::size_t ps = config.patch_size;
  std::vector<GradcheckGroup> out;

  // cnn: projection of the feature vector of one patch
  {
    Rng rng = make_rng(seed, 11);
    ParamStore params;
    const auto cnn = config.cnn();
    features::init_cnn(params, cnn, rng);
    const Tensor patch = random_tensor({ps, ps}, rng, 0.0, 1.0);
    const Tensor proj = random_tensor({fd}, rng, -1.0, 1.0);
    const auto build = [&](Graph& g) { return num::dot(g.constant(proj), features::cnn_forward(g, patch, cnn)); };
    out.push_back(group_result("cnn", num::grad_check(build, params, kinked)));
  }
  // cell: one step, inputs and previous state included as checked leaves
  {
    Rng rng = make_rng(seed, 12);
    ParamStore params;
    encoder::MsGruConfig mc{hidden, fd, 3};
    encoder::init_msgru(params, mc, rng);
    for (std::size_t k = 1; k <= 3; ++k) params["in.x" + std::to_string(k)] = random_tensor({fd}, rng, -1.0, 1.0);
    params["in.h"] = random_tensor({hidden}, rng, -0.5, 0.5);
    std::vector<Tensor> proj;
    for (int k = 0; k < 4; ++k) proj.push_back(random_tensor({hidden}, rng, -1.0, 1.0));
    const auto build = [&](Graph& g) {
      std::vector<Var> x;
      for (std::size_t k = 1; k <= 3; ++k) x.push_back(g.parameter("in.x" + std::to_string(k)));
      const auto s = encoder::cell_forward(g, x, g.parameter("in.h"), mc);
      Var loss = num::dot(g.constant(proj[0]), s.h);
      for (std::size_t k = 0; k < 3; ++k) loss = num::add(loss, num::dot(g.constant(proj[k + 1]), s.branch_h[k]));
      return loss;
    };
    out.push_back(group_result("cell", num::grad_check(build, params, opt)));
  }
  // pearson: the correlation loss over two valid steps and one masked step
  {
    Rng rng = make_rng(seed, 13);
    ParamStore params;
    const std::size_t steps = 3;
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t k = 1; k <= 3; ++k)
        params["in.h" + std::to_string(k) + "." + std::to_string(t)] = random_tensor({hidden}, rng, -1.0, 1.0);
    const std::vector<bool> mask = {true, true, false};
    const auto build = [&](Graph& g) {
      std::vector<encoder::MsGruState> states(steps);
      for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t k = 1; k <= 3; ++k)
          states[t].branch_h.push_back(g.parameter("in.h" + std::to_string(k) + "." + std::to_string(t)));
        states[t].h = states[t].branch_h[0];
      }
      return corr::correlation_loss(g, states, mask);
    };
    out.push_back(group_result("pearson", num::grad_check(build, params, opt)));
  }
  // attention: projection of the context over three slots, the last masked
  {
    Rng rng = make_rng(seed, 14);
    ParamStore params;
    attn::init_attention(params, hidden, rng);
    for (int t = 0; t < 3; ++t) params["in.s" + std::to_string(t)] = random_tensor({hidden}, rng, -1.0, 1.0);
    const Tensor proj = random_tensor({hidden}, rng, -1.0, 1.0);
    const std::vector<bool> mask = {true, true, false};
    const auto build = [&](Graph& g) {
      std::vector<Var> s;
      for (int t = 0; t < 3; ++t) s.push_back(g.parameter("in.s" + std::to_string(t)));
      return num::dot(g.constant(proj), attn::attention_context(g, s, mask).context);
    };
    out.push_back(with_zero_bias("attention", build, params, opt));
  }
  // decode: cross-entropy of one decoder step
  {
    Rng rng = make_rng(seed, 15);
    ParamStore params;
    attn::init_decoder(params, hidden, rng);
    params["in.context"] = random_tensor({hidden}, rng, -1.0, 1.0);
    params["in.h"] = random_tensor({hidden}, rng, -1.0, 1.0);
    const auto build = [&](Graph& g) {
      const auto d = attn::decode(g, g.parameter("in.context"), g.parameter("in.h"), hidden);
      return num::cross_entropy(d.logits, 2);
    };
    out.push_back(group_result("decode", num::grad_check(build, params, opt)));
  }
  // total: the training loss of one two-step sample through every component
  {
    Rng rng = make_rng(seed, 16);
    train::TrainConfig c = config;
    c.seed = seed;
    auto model = train::init_model(c);
    train::SampleInput s;
    s.target = 1;
    for (int t = 0; t < 2; ++t) {
      patching::PatchTriple tr;
      tr.primary = random_tensor({ps, ps}, rng, 0.0, 1.0);
      tr.neighbor = random_tensor({ps, ps}, rng, 0.0, 1.0);
      tr.remote = random_tensor({ps, ps}, rng, 0.0, 1.0);
      s.triples.push_back(std::move(tr));
    }
    const auto build = [&](Graph& g) { return train::forward_sample(g, model, s).loss; };
    out.push_back(with_zero_bias("total", build, model.params, kinked));
  }
  return out;
}

bool AblationResult::any_failed() const {
  for (const auto& row : cells)
    for (const auto& c : row)
      if (c.failed) return true;
  return false;
}

double AblationResult::variant_mean(std::size_t variant, std::size_t horizon) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& c : cells.at(variant)) {
    if (c.failed || c.runs == 0) continue;
    sum += horizon == 2 ? c.accuracy_d2 : c.accuracy_d1;
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

std::size_t AblationResult::ordered_zones() const {
  std::size_t n = 0;
  for (std::size_t z = 0; z < 6; ++z) {
    const auto& a = cells[0][z];
    const auto& b = cells[1][z];
    const auto& c = cells[2][z];
    if (a.failed || b.failed || c.failed) continue;
    if (c.accuracy_d1 >= b.accuracy_d1 && b.accuracy_d1 >= a.accuracy_d1) ++n;
  }
  return n;
}

std::string AblationResult::table(std::size_t horizon) const {
  std::ostringstream os;
  os << "horizon " << train::horizon_name(horizon) << ", mean accuracy over " << seeds.size() << " seed(s)\n";
  os << std::left << std::setw(10) << "variant";
  for (auto z : patching::kAllZones) os << std::right << std::setw(8) << patching::zone_name(z);
  os << std::setw(8) << "mean" << "\n";
  for (std::size_t v = 0; v < 3; ++v) {
    os << std::left << std::setw(10) << train::variant_name(train::kAllVariants[v]) << std::right << std::fixed
       << std::setprecision(3);
    for (const auto& c : cells[v]) {
      if (c.failed) os << std::setw(8) << "FAILED";
      else os << std::setw(8) << (horizon == 2 ? c.accuracy_d2 : c.accuracy_d1);
    }
    os << std::setw(8) << variant_mean(v, horizon) << "\n";
  }
  return os.str();
}

std::string AblationResult::to_json() const {
  json j;
  j["seeds"] = seeds;
  json rows = json::object();
  for (std::size_t v = 0; v < 3; ++v) {
    json row = json::object();
    for (std::size_t z = 0; z < 6; ++z) {
      const auto& c = cells[v][z];
      json cell;
      cell["runs"] = c.runs;
      cell["failed"] = c.failed;
      if (c.failed) cell["error"] = c.error;
      cell["accuracy_d-1"] = c.accuracy_d1;
      cell["accuracy_d-2"] = c.accuracy_d2;
      row[std::string(patching::zone_name(patching::kAllZones[z]))] = cell;
    }
    row["mean_d-1"] = variant_mean(v, 1);
    row["mean_d-2"] = variant_mean(v, 2);
    rows[std::string(train::variant_name(train::kAllVariants[v]))] = row;
  }
  j["variants"] = rows;
  j["ordered_zones"] = ordered_zones();
  return j.dump(1) + "\n";
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw DataError("write failed for '" + path.string() + "'");
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory '" + dir.string() + "': " + ec.message());
}

}  // namespace

AblationResult run_ablation(const synth::Dataset& ds, const std::vector<std::uint64_t>& seeds,
                            const train::TrainConfig& config, const std::optional<fs::path>& out,
                            std::ostream* progress) {
  if (seeds.empty()) throw ConfigError("ablate needs at least one seed");
  AblationResult result;
  result.seeds = seeds;
  for (std::size_t v = 0; v < 3; ++v) {
    for (std::size_t z = 0; z < 6; ++z) {
      auto& cell = result.cells[v][z];
      for (auto seed : seeds) {
        const auto zone = patching::kAllZones[z];
        const std::size_t fold = seed % ds.folds();
        try {
          train::TrainConfig c = config;
          c.variant = train::kAllVariants[v];
          c.seed = seed;
          c.horizon = 1;
          const auto r = train::train_zone(ds, zone, fold, c);
          const auto m2 = train::evaluate(r.model, ds, fold, 2);
          cell.accuracy_d1 += r.metrics.accuracy();
          cell.accuracy_d2 += m2.accuracy();
          ++cell.runs;
          if (out) {
            const fs::path dir = *out / (std::string(train::variant_name(c.variant)) + "_" +
                                         std::string(patching::zone_name(zone)) + "_s" + std::to_string(seed));
            make_dir(dir);
            write_text(dir / "metrics_d-1.json", r.metrics.to_json());
            write_text(dir / "metrics_d-2.json", m2.to_json());
          }
          if (progress) {
            *progress << train::variant_name(c.variant) << " " << patching::zone_name(zone) << " seed " << seed
                      << " fold " << fold << ": d-1 " << r.metrics.accuracy() << ", d-2 " << m2.accuracy()
                      << std::endl;
          }
        } catch (const std::exception& e) {
          cell.failed = true;
          cell.error = e.what();
          if (progress) *progress << "FAILED " << e.what() << std::endl;
        }
      }
      if (cell.runs > 0) {
        cell.accuracy_d1 /= static_cast<double>(cell.runs);
        cell.accuracy_d2 /= static_cast<double>(cell.runs);
      }
    }
  }
  return result;
}

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json entries_json(const config::Entries& e) {
  json j = json::object();
  for (const auto& [k, v] : e) j[k] = v;
  return j;
}

json format_versions() {
  return json{{"checkpoint", train::kCheckpointVersion},
              {"dataset", kDatasetVersion},
              {"tensor", num::kTensorFormatVersion},
              {"tool", kToolVersion}};
}

/// Layered settings: config file lines first, then --set overrides in order.
struct Layers {
  std::string config_path;
  std::vector<std::string> sets;

  std::vector<config::Setting> settings() const {
    std::vector<config::Setting> out;
    if (!config_path.empty()) out = config::read_file(config_path);
    for (const auto& s : sets) out.push_back(config::parse_override(s));
    return out;
  }
};

synth::GenConfig gen_config(const Layers& layers, const std::optional<std::uint64_t>& seed) {
  synth::GenConfig c;
  for (const auto& s : layers.settings()) config::apply(c, s);
  if (seed) c.seed = *seed;
  c.validate();
  return c;
}

train::TrainConfig train_config(train::TrainConfig c, const Layers& layers, const std::optional<std::uint64_t>& seed) {
  for (const auto& s : layers.settings()) config::apply(c, s);
  if (seed) c.seed = *seed;
  c.validate();
  return c;
}

patching::Zone zone_arg(const std::string& name) {
  if (auto z = patching::parse_zone(name)) return *z;
  throw ConfigError("unknown zone '" + name + "' (valid: L1, L2, L3, R1, R2, R3)");
}

train::Variant variant_arg(const std::string& name) {
  if (auto v = train::parse_variant(name)) return *v;
  throw ConfigError("unknown variant '" + name + "' (valid: variant1, variant2, full)");
}

std::size_t horizon_arg(const std::string& name) {
  if (name == "d-1" || name == "1") return 1;
  if (name == "d-2" || name == "2") return 2;
  throw ConfigError("unknown horizon '" + name + "' (valid: d-1, d-2)");
}

std::string joined_args(const std::vector<std::string>& args) {
  std::string s = "msgru";
  for (const auto& a : args) s += " " + a;
  return s;
}

int gen_data(const Layers& layers, const std::optional<std::uint64_t>& seed, const fs::path& out_dir,
             std::ostream& out) {
  const auto c = gen_config(layers, seed);
  const auto ds = synth::generate_dataset(c);
  synth::write_dataset(ds, out_dir);
  std::array<std::size_t, synth::kMaxTimepoints + 1> d_hist{};
  std::array<std::array<std::size_t, 3>, 6> grade_hist{};
  for (const auto& p : ds.patients) {
    ++d_hist[p.timepoints()];
    for (std::size_t z = 0; z < 6; ++z) ++grade_hist[z][p.grades.back()[z]];
  }
  out << "dataset " << out_dir.string() << "\n";
  out << "patients " << ds.patients.size() << ", folds " << ds.folds() << "\n";
  out << "timepoints d:";
  for (std::size_t d = synth::kMinTimepoints; d <= synth::kMaxTimepoints; ++d) out << " " << d << ":" << d_hist[d];
  out << "\nfinal grades (g0 g1 g2):\n";
  for (std::size_t z = 0; z < 6; ++z) {
    out << "  " << patching::zone_name(patching::kAllZones[z]) << " " << grade_hist[z][0] << " " << grade_hist[z][1]
        << " " << grade_hist[z][2] << "\n";
  }
  return kOk;
}

int train_cmd(const std::vector<std::string>& args, const Layers& layers, const std::optional<std::uint64_t>& seed,
              const fs::path& dataset, const std::string& zone_text, const std::string& variant_text, std::size_t fold,
              const fs::path& run_dir, std::ostream& out) {
  const auto zone = zone_arg(zone_text);
  train::TrainConfig base;
  base.variant = variant_arg(variant_text);
  const auto c = train_config(base, layers, seed);
  const std::string started = utc_now();
  const auto ds = synth::read_dataset(dataset);
  const auto r = train::train_zone(ds, zone, fold, c);
  make_dir(run_dir);
  train::save_checkpoint(r.model, run_dir / "checkpoint");
  write_text(run_dir / "metrics.json", r.metrics.to_json());
  json m;
  m["command"] = "train";
  m["argv"] = joined_args(args);
  m["dataset"] = fs::absolute(dataset).string();
  m["dataset_config"] = entries_json(config::entries(ds.config));
  m["zone"] = patching::zone_name(zone);
  m["variant"] = train::variant_name(c.variant);
  m["fold"] = fold;
  m["seed"] = c.seed;
  m["config"] = entries_json(config::entries(c));
  m["started"] = started;
  m["finished"] = utc_now();
  m["artifacts"] = json{{"checkpoint", "checkpoint"}, {"metrics", "metrics.json"}};
  m["formats"] = format_versions();
  write_text(run_dir / "manifest.json", m.dump(1) + "\n");
  out << "zone " << patching::zone_name(zone) << " variant " << train::variant_name(c.variant) << " fold " << fold
      << ": accuracy " << r.metrics.accuracy() << " (" << r.metrics.correct() << "/" << r.metrics.total() << ")\n";
  out << "run directory " << run_dir.string() << "\n";
  return kOk;
}

int eval_cmd(const fs::path& run_dir, const fs::path& dataset, const std::string& horizon_text,
             const std::string& out_file, std::ostream& out) {
  const auto horizon = horizon_arg(horizon_text);
  const auto model = train::load_checkpoint(run_dir / "checkpoint");
  const auto ds = synth::read_dataset(dataset);
  const auto m = train::evaluate(model, ds, model.fold, horizon);
  const fs::path target = out_file.empty() ? run_dir / ("eval_" + train::horizon_name(horizon) + ".json")
                                           : fs::path(out_file);
  write_text(target, m.to_json());
  out << m.to_json();
  return kOk;
}

int ablate_cmd(const std::vector<std::string>& args, const Layers& layers, const fs::path& dataset,
               const std::vector<std::uint64_t>& seeds, const std::string& out_dir, std::ostream& out,
               std::ostream& err) {
  const auto c = train_config(train::TrainConfig{}, layers, std::nullopt);
  const std::string started = utc_now();
  const auto ds = synth::read_dataset(dataset);
  std::optional<fs::path> dir;
  if (!out_dir.empty()) {
    dir = fs::path(out_dir);
    make_dir(*dir);
  }
  const auto r = run_ablation(ds, seeds, c, dir, &err);
  const std::string tables = r.table(1) + "\n" + r.table(2);
  out << tables;
  if (dir) {
    write_text(*dir / "table.txt", tables);
    write_text(*dir / "summary.json", r.to_json());
    json m;
    m["command"] = "ablate";
    m["argv"] = joined_args(args);
    m["dataset"] = fs::absolute(dataset).string();
    m["dataset_config"] = entries_json(config::entries(ds.config));
    m["seeds"] = seeds;
    m["config"] = entries_json(config::entries(c));
    m["started"] = started;
    m["finished"] = utc_now();
    m["artifacts"] = json{{"table", "table.txt"}, {"summary", "summary.json"}};
    m["formats"] = format_versions();
    write_text(*dir / "manifest.json", m.dump(1) + "\n");
  }
  if (r.any_failed()) {
    err << "some cells failed; see the table\n";
    return kData;
  }
  return kOk;
}

int gradcheck_cmd(const Layers& layers, const std::optional<std::uint64_t>& seed,
                  const std::optional<double>& epsilon, double corrupt, std::ostream& out) {
  const auto c = train_config(gradcheck_config(), layers, std::nullopt);
  GradcheckSteps steps;
  if (epsilon) steps = {*epsilon, *epsilon};
  const auto groups = run_gradcheck(c, seed.value_or(0), steps, corrupt);
  bool ok = true;
  for (const auto& g : groups) {
    const bool pass = g.max_rel_error < kGradcheckTolerance;
    ok = ok && pass;
    out << std::left << std::setw(10) << g.name << std::right << " max_rel_error " << std::scientific
        << std::setprecision(3) << g.max_rel_error << std::defaultfloat << "  coords " << g.coords << "  "
        << (pass ? "PASS" : "FAIL") << "  worst " << g.worst_param << "\n";
  }
  return ok ? kOk : kThreshold;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-scale GRU severity progression toolkit", "msgru"};
  app.require_subcommand(1);
  Layers layers;
  std::optional<std::uint64_t> seed;
  std::string out_path;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", layers.config_path, "key = value settings file")->check(CLI::ExistingFile);
    sub->add_option("--set", layers.sets, "key=value override, applied after --config")->take_all();
    sub->add_option("--seed", seed, "random seed");
  };

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  common(gen);
  gen->add_option("--out", out_path, "dataset directory")->required();

  std::string dataset, zone = "L1", variant = "full", horizon = "d-1", run_dir;
  std::size_t fold = 0;
  auto* trn = app.add_subcommand("train", "train one (zone, variant, fold) cell");
  common(trn);
  trn->add_option("--dataset", dataset, "dataset directory")->required();
  trn->add_option("--zone", zone, "L1, L2, L3, R1, R2 or R3");
  trn->add_option("--variant", variant, "variant1, variant2 or full");
  trn->add_option("--fold", fold, "held-out fold");
  trn->add_option("--out", out_path, "run directory")->required();

  auto* evl = app.add_subcommand("eval", "score a trained run on its held-out fold");
  evl->add_option("--run", run_dir, "run directory written by train")->required();
  evl->add_option("--dataset", dataset, "dataset directory")->required();
  evl->add_option("--horizon", horizon, "d-1 or d-2");
  evl->add_option("--out", out_path, "metrics file (default <run>/eval_<horizon>.json)");

  std::vector<std::uint64_t> seeds = {0};
  auto* abl = app.add_subcommand("ablate", "variant x zone x seed matrix at d-1 and d-2");
  common(abl);
  abl->add_option("--dataset", dataset, "dataset directory")->required();
  abl->add_option("--seeds", seeds, "comma-separated training seeds")->delimiter(',');
  abl->add_option("--out", out_path, "directory for per-run metrics and the table");

  std::optional<double> epsilon;
  double corrupt = 0.0;
  auto* gck = app.add_subcommand("gradcheck", "finite-difference check of every module boundary");
  common(gck);
  gck->add_option("--epsilon", epsilon, "one central-difference step for every group (default 1e-4 smooth, 1e-5 behind relu)");
  gck->add_option("--corrupt-gradient", corrupt)->group("");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (gen->parsed()) return gen_data(layers, seed, out_path, out);
    if (trn->parsed()) return train_cmd(args, layers, seed, dataset, zone, variant, fold, out_path, out);
    if (evl->parsed()) return eval_cmd(run_dir, dataset, horizon, out_path, out);
    if (abl->parsed()) return ablate_cmd(args, layers, dataset, seeds, out_path, out, err);
    if (gck->parsed()) return gradcheck_cmd(layers, seed, epsilon, corrupt, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kData;
  } catch (const GeometryError& e) {
    err << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

}  // namespace msgru::cli
