#include "msgru/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "msgru/config.hpp"
#include "msgru/corrloss.hpp"
#include "msgru/error.hpp"
#include "msgru/ops.hpp"
#include "msgru/tensor_io.hpp"

namespace msgru::train {

namespace fs = std::filesystem;
using num::Tensor;

namespace {

constexpr std::array<std::string_view, 3> kVariantNames = {"variant1", "variant2", "full"};

// Stream ids for the different consumers of the training seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kSamplerStream = 2;
constexpr std::uint64_t kBaselineStream = 3;

std::vector<Var> fused_states(const std::vector<encoder::MsGruState>& states) {
  std::vector<Var> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(s.h);
  return out;
}

void accumulate(num::GradMap& into, num::GradMap&& from) {
  if (into.empty()) {
    into = std::move(from);
    return;
  }
  for (auto& [name, g] : from) {
    Tensor& dst = into.at(name);
    for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += g[i];
  }
}

// Cycles through a shuffled list of patients, reshuffling after each pass.
class PatientCycler {
 public:
  PatientCycler(std::vector<std::size_t> members, Rng& rng) : order_(std::move(members)), rng_(&rng) { shuffle(); }

  std::size_t next() {
    if (pos_ == order_.size()) shuffle();
    return order_[pos_++];
  }

 private:
  void shuffle() {
    for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[uniform_index(*rng_, i)]);
    pos_ = 0;
  }

  std::vector<std::size_t> order_;
  Rng* rng_;
  std::size_t pos_ = 0;
};

std::vector<PatientPatches> extract_members(const synth::Dataset& ds, std::span<const std::size_t> members, Zone zone,
                                            std::size_t patch_size) {
  const auto layout = patching::build_zone_layout(ds.config.height, ds.config.width);
  std::vector<PatientPatches> out(ds.patients.size());
  for (auto i : members) out[i] = extract_patient(ds.patients[i], layout, zone, patch_size);
  return out;
}

}  // namespace

std::string_view variant_name(Variant v) { return kVariantNames[static_cast<std::size_t>(v)]; }

std::optional<Variant> parse_variant(std::string_view name) {
  for (std::size_t i = 0; i < kVariantNames.size(); ++i)
    if (kVariantNames[i] == name) return kAllVariants[i];
  return std::nullopt;
}

std::string horizon_name(std::size_t horizon) { return "d-" + std::to_string(horizon); }

void TrainConfig::validate() const {
  if (!(lambda_corr >= 0.0)) throw ConfigError("lambda_corr must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (horizon != 1 && horizon != 2) throw ConfigError("horizon must be d-1 or d-2");
  if (hidden < 2) throw ConfigError("hidden must be at least 2 (correlations need two components)");
  cnn().validate();
}

features::CnnConfig TrainConfig::cnn() const {
  features::CnnConfig c;
  c.channels = channels;
  c.feature_dim = feature_dim;
  c.patch_size = patch_size;
  return c;
}

Wiring build_variant(Variant v) {
  switch (v) {
    case Variant::variant1:
      return {2, false, ContextMode::final_state};
    case Variant::variant2:
      return {3, true, ContextMode::mean};
    case Variant::full:
      return {3, true, ContextMode::attention};
  }
  throw ConfigError("unknown variant");
}

encoder::MsGruConfig Model::encoder_config() const {
  return {config.hidden, config.feature_dim, wiring().branches};
}

Model init_model(const TrainConfig& config, Zone zone, std::size_t fold) {
  config.validate();
  Model m;
  m.config = config;
  m.zone = zone;
  m.fold = fold;
  Rng rng = make_rng(config.seed, kInitStream);
  features::init_cnn(m.params, config.cnn(), rng);
  encoder::init_msgru(m.params, m.encoder_config(), rng);
  if (m.wiring().context == ContextMode::attention) attn::init_attention(m.params, config.hidden, rng);
  attn::init_decoder(m.params, config.hidden, rng);
  return m;
}

std::vector<bool> SampleInput::mask() const {
  std::vector<bool> m(length(), false);
  std::fill_n(m.begin(), triples.size(), true);
  return m;
}

ForwardResult forward_sample(Graph& g, const Model& model, const SampleInput& sample) {
  if (sample.triples.empty()) throw ContractError("sample has no timepoints");
  if (sample.slots != 0 && sample.slots < sample.triples.size()) throw ContractError("sample padded below its length");
  if (sample.target < 0 || sample.target > 2) throw ContractError("target grade outside {0,1,2}");

  const Wiring wiring = model.wiring();
  const auto cnn = model.config.cnn();
  const auto enc = model.encoder_config();

  std::vector<std::vector<Var>> inputs(sample.length());
  for (std::size_t t = 0; t < sample.triples.size(); ++t) {
    const auto& tr = sample.triples[t];
    inputs[t].push_back(features::cnn_forward(g, tr.primary, cnn));
    inputs[t].push_back(features::cnn_forward(g, tr.neighbor, cnn));
    if (wiring.branches == 3) inputs[t].push_back(features::cnn_forward(g, tr.remote, cnn));
  }

  ForwardResult r;
  r.mask = sample.mask();
  r.states = encoder::encode_sequence(g, inputs, r.mask, g.constant(Tensor::zeros({model.config.hidden})), enc);
  const auto fused = fused_states(r.states);
  switch (wiring.context) {
    case ContextMode::attention:
      r.context = attn::attention_context(g, fused, r.mask);
      break;
    case ContextMode::mean:
      r.context = attn::mean_context(g, fused, r.mask);
      break;
    case ContextMode::final_state:
      r.context = attn::final_state_context(g, fused, r.mask);
      break;
  }
  r.decoded = attn::decode(g, r.context.context, r.states.back().h, model.config.hidden);
  r.loss = num::cross_entropy(r.decoded.logits, static_cast<std::size_t>(sample.target));
  if (wiring.correlation) {
    r.corr = corr::correlation_loss(g, r.states, r.mask);
    r.loss = num::add(r.loss, num::scale(g.constant(Tensor::scalar(model.config.lambda_corr)), r.corr));
  }
  return r;
}

Var total_loss(Graph& g, std::span<const Var> logits, std::span<const int> targets,
               std::span<const std::vector<encoder::MsGruState>> states, std::span<const std::vector<bool>> masks,
               const TrainConfig& config) {
  if (logits.empty() || logits.size() != targets.size()) throw ContractError("total_loss: logits/targets mismatch");
  const double inv_n = 1.0 / static_cast<double>(logits.size());
  Var ce;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (targets[i] < 0 || targets[i] > 2) throw ContractError("total_loss: target grade outside {0,1,2}");
    const Var term = num::cross_entropy(logits[i], static_cast<std::size_t>(targets[i]));
    ce = i == 0 ? term : num::add(ce, term);
  }
  Var total = num::scale(g.constant(Tensor::scalar(inv_n)), ce);
  if (!build_variant(config.variant).correlation) return total;
  if (states.size() != logits.size() || masks.size() != logits.size()) {
    throw ContractError("total_loss: one state sequence and mask per sample required");
  }
  Var corr;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const Var term = corr::correlation_loss(g, states[i], masks[i]);
    corr = i == 0 ? term : num::add(corr, term);
  }
  return num::add(total, num::scale(g.constant(Tensor::scalar(config.lambda_corr * inv_n)), corr));
}

PatientPatches extract_patient(const synth::PatientSequence& patient, const patching::ZoneLayout& layout, Zone zone,
                               std::size_t patch_size) {
  // The last image is only ever a target, never an encoder input.
  PatientPatches out;
  out.reserve(patient.timepoints() - 1);
  for (std::size_t t = 0; t + 1 < patient.timepoints(); ++t) {
    out.push_back(patching::extract_patchset(patient.images[t], layout, zone, patch_size));
  }
  return out;
}

SampleInput build_sample(const synth::PatientSequence& patient, const PatientPatches& patches, Zone zone,
                         std::size_t primary_index, std::size_t horizon, Rng& rng) {
  const std::size_t d = patient.timepoints();
  if (horizon < 1 || d <= horizon) throw ContractError("horizon leaves no encoder timepoints");
  const std::size_t steps = d - horizon;
  if (patches.size() < steps) throw ContractError("patient patches do not cover the encoder horizon");
  SampleInput s;
  s.target = patient.grades.back()[patching::zone_index(zone)];
  s.triples.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) s.triples.push_back(patching::sample_triple(patches[t], primary_index, rng));
  return s;
}

double Trainer::step(std::span<const SampleInput> batch) {
  if (batch.empty()) throw ContractError("empty batch");
  num::GradMap grads;
  double loss = 0.0;
  for (const auto& sample : batch) {
    Graph g(&model_->params);
    const auto r = forward_sample(g, *model_, sample);
    loss += r.loss.value().item();
    accumulate(grads, g.backward(r.loss));
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& [name, t] : grads)
    for (auto& v : t.values()) v *= inv;
  num::adam_step(model_->params, grads, adam_, model_->config.lr);
  return loss * inv;
}

std::size_t Metrics::total() const {
  std::size_t n = 0;
  for (const auto& row : confusion)
    for (auto c : row) n += c;
  return n;
}

std::size_t Metrics::correct() const { return confusion[0][0] + confusion[1][1] + confusion[2][2]; }

double Metrics::accuracy() const {
  const auto n = total();
  return n == 0 ? 0.0 : static_cast<double>(correct()) / static_cast<double>(n);
}

double Metrics::precision(int grade) const {
  std::size_t predicted = 0;
  for (int t = 0; t < 3; ++t) predicted += confusion[t][grade];
  return predicted == 0 ? 0.0 : static_cast<double>(confusion[grade][grade]) / static_cast<double>(predicted);
}

std::size_t Metrics::support(int grade) const {
  std::size_t n = 0;
  for (int p = 0; p < 3; ++p) n += confusion[grade][p];
  return n;
}

double Metrics::recall(int grade) const {
  const auto n = support(grade);
  return n == 0 ? 0.0 : static_cast<double>(confusion[grade][grade]) / static_cast<double>(n);
}

std::string Metrics::to_json() const {
  nlohmann::ordered_json j;
  j["zone"] = patching::zone_name(zone);
  j["variant"] = variant_name(variant);
  j["horizon"] = horizon_name(horizon);
  j["fold"] = fold;
  j["accuracy"] = accuracy();
  for (int k = 0; k < 3; ++k) j["precision_g" + std::to_string(k)] = precision(k);
  for (int k = 0; k < 3; ++k) j["recall_g" + std::to_string(k)] = recall(k);
  j["confusion"] = confusion;
  return j.dump(1) + "\n";
}

Metrics score(Zone zone, Variant variant, std::size_t horizon, std::size_t fold, std::span<const int> truth,
              std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw ContractError("score: truth/prediction length mismatch");
  Metrics m;
  m.zone = zone;
  m.variant = variant;
  m.horizon = horizon;
  m.fold = fold;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] > 2 || predicted[i] < 0 || predicted[i] > 2) {
      throw ContractError("score: grade outside {0,1,2}");
    }
    ++m.confusion[truth[i]][predicted[i]];
  }
  return m;
}

int predict_patient(const Model& model, const synth::PatientSequence& patient, const PatientPatches& patches,
                    std::size_t horizon) {
  std::array<int, patching::kPrimaryPatches> votes{};
  const std::uint64_t base = derive_seed(model.config.seed, patient.id);
  for (std::size_t p = 0; p < patching::kPrimaryPatches; ++p) {
    Rng rng = make_rng(base, p);
    const auto sample = build_sample(patient, patches, model.zone, p, horizon, rng);
    Graph g(&model.params);
    const auto r = forward_sample(g, model, sample);
    votes[p] = attn::predicted_grade(attn::distribution(r.decoded));
  }
  return attn::majority_vote(votes);
}

Metrics evaluate_patients(const Model& model, const synth::Dataset& ds, std::span<const std::size_t> members,
                          std::size_t horizon) {
  const auto patches = extract_members(ds, members, model.zone, model.config.patch_size);
  std::vector<int> truth, pred;
  for (auto i : members) {
    truth.push_back(ds.patients[i].grades.back()[patching::zone_index(model.zone)]);
    pred.push_back(predict_patient(model, ds.patients[i], patches[i], horizon));
  }
  return score(model.zone, model.config.variant, horizon, model.fold, truth, pred);
}

Metrics evaluate(const Model& model, const synth::Dataset& ds, std::size_t fold, std::size_t horizon) {
  if (horizon != 1 && horizon != 2) throw ConfigError("horizon must be d-1 or d-2");
  const auto members = ds.fold_members(fold);
  auto m = evaluate_patients(model, ds, members, horizon);
  m.fold = fold;
  return m;
}

TrainResult train_zone(const synth::Dataset& ds, Zone zone, std::size_t fold, const TrainConfig& config) {
  config.validate();
  if (config.patch_size != ds.config.patch_size) {
    throw ConfigError("training patch_size " + std::to_string(config.patch_size) + " differs from dataset patch_size " +
                      std::to_string(ds.config.patch_size));
  }
  const auto members = ds.training_members(fold);
  if (members.empty()) throw DataError("fold " + std::to_string(fold) + " leaves no training patients");

  TrainResult result{init_model(config, zone, fold), {}, {}};
  const auto patches = extract_members(ds, members, zone, config.patch_size);

  Rng rng = make_rng(config.seed, kSamplerStream);
  PatientCycler cycler(members, rng);
  Trainer trainer(result.model);
  std::vector<SampleInput> batch;
  const std::size_t steps = config.iterations * config.epochs;
  result.loss_history.reserve(steps);
  for (std::size_t step = 0; step < steps; ++step) {
    batch.clear();
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const std::size_t i = cycler.next();
      const std::size_t p = uniform_index(rng, patching::kPrimaryPatches);
      batch.push_back(build_sample(ds.patients[i], patches[i], zone, p, config.horizon, rng));
    }
    result.loss_history.push_back(trainer.step(batch));
  }
  result.metrics = evaluate(result.model, ds, fold, config.horizon);
  return result;
}

namespace {

constexpr std::size_t kBaselineFeatures = 17;

Tensor baseline_features(const PatientPatches& patches, std::size_t primary_index, std::size_t steps) {
  Tensor f({kBaselineFeatures});
  for (std::size_t t = 0; t < steps; ++t) {
    const Tensor& p = patches[t].primary[primary_index];
    const std::size_t n = p.dim(0);
    const auto cells = patching::split_rect({0, 0, n, n}, 4, 4);
    double total = 0.0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double s = 0.0;
      for (std::size_t y = cells[c].row; y < cells[c].bottom(); ++y)
        for (std::size_t x = cells[c].col; x < cells[c].right(); ++x) s += p.at(y, x);
      total += s;
      f[c] += s / static_cast<double>(cells[c].height * cells[c].width);
    }
    f[16] += total / static_cast<double>(n * n);
  }
  for (auto& v : f.values()) v /= static_cast<double>(steps);
  return f;
}

}  // namespace

Metrics train_baseline(const synth::Dataset& ds, Zone zone, std::size_t fold, const TrainConfig& config) {
  config.validate();
  const auto train_ids = ds.training_members(fold);
  const auto test_ids = ds.fold_members(fold);
  std::vector<std::size_t> all(train_ids);
  all.insert(all.end(), test_ids.begin(), test_ids.end());
  const auto patches = extract_members(ds, all, zone, ds.config.patch_size);
  auto features_of = [&](std::size_t i, std::size_t p) {
    return baseline_features(patches[i], p, ds.patients[i].timepoints() - config.horizon);
  };

  ParamStore params;
  params["baseline.weight"] = Tensor::zeros({3, kBaselineFeatures});
  params["baseline.bias"] = Tensor::zeros({3});
  num::AdamState adam;
  Rng rng = make_rng(config.seed, kBaselineStream);
  PatientCycler cycler(train_ids, rng);
  for (std::size_t step = 0; step < config.iterations * config.epochs; ++step) {
    Graph g(&params);
    Var loss;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const std::size_t i = cycler.next();
      const std::size_t p = uniform_index(rng, patching::kPrimaryPatches);
      const Var logits = num::add(num::matvec(g.parameter("baseline.weight"), g.constant(features_of(i, p))),
                                  g.parameter("baseline.bias"));
      const Var ce = num::cross_entropy(logits, static_cast<std::size_t>(ds.patients[i].grades.back()[patching::zone_index(zone)]));
      loss = b == 0 ? ce : num::add(loss, ce);
    }
    loss = num::scale(g.constant(Tensor::scalar(1.0 / static_cast<double>(config.batch_size))), loss);
    num::adam_step(params, g.backward(loss), adam, 0.01);
  }

  std::vector<int> truth, pred;
  for (auto i : test_ids) {
    std::array<int, patching::kPrimaryPatches> votes{};
    for (std::size_t p = 0; p < patching::kPrimaryPatches; ++p) {
      const Tensor logits = num::matmul_values(params.at("baseline.weight"), features_of(i, p).reshaped({kBaselineFeatures, 1}));
      attn::GradeDistribution dist{};
      const Tensor probs = num::softmax_values(std::vector<double>{logits[0] + params.at("baseline.bias")[0],
                                                                   logits[1] + params.at("baseline.bias")[1],
                                                                   logits[2] + params.at("baseline.bias")[2]});
      for (int k = 0; k < 3; ++k) dist[k] = probs[k];
      votes[p] = attn::predicted_grade(dist);
    }
    truth.push_back(ds.patients[i].grades.back()[patching::zone_index(zone)]);
    pred.push_back(attn::majority_vote(votes));
  }
  return score(zone, config.variant, config.horizon, fold, truth, pred);
}

void save_checkpoint(const Model& model, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create checkpoint directory '" + dir.string() + "': " + ec.message());
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config::entries(model.config)) cfg[k] = v;
  nlohmann::ordered_json files = nlohmann::ordered_json::object();
  for (const auto& [name, t] : model.params) {
    const std::string file = name + ".msgt";
    num::write_tensor(dir / file, t);
    files[name] = file;
  }
  nlohmann::ordered_json manifest;
  manifest["format"] = "msgru-checkpoint";
  manifest["version"] = kCheckpointVersion;
  manifest["zone"] = patching::zone_name(model.zone);
  manifest["fold"] = model.fold;
  manifest["config"] = cfg;
  manifest["parameters"] = files;
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw DataError("cannot write '" + (dir / "manifest.json").string() + "'");
  out << manifest.dump(1) << '\n';
}

Model load_checkpoint(const fs::path& dir) {
  const fs::path path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint manifest '" + path.string() + "'");
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  try {
    if (m.at("format") != "msgru-checkpoint") throw FormatError(path.string() + ": not a checkpoint manifest");
    if (m.at("version") != kCheckpointVersion) {
      throw FormatError(path.string() + ": unsupported checkpoint version " + m.at("version").dump());
    }
    TrainConfig cfg;
    for (const auto& [k, v] : m.at("config").items()) {
      config::apply(cfg, config::Setting{k, v.get<std::string>(), path.string()});
    }
    const auto zone = patching::parse_zone(m.at("zone").get<std::string>());
    if (!zone) throw FormatError(path.string() + ": unknown zone");
    Model model = init_model(cfg, *zone, m.at("fold").get<std::size_t>());
    const auto& files = m.at("parameters");
    if (files.size() != model.params.size()) {
      throw FormatError(path.string() + ": checkpoint has " + std::to_string(files.size()) +
                        " parameters, config expects " + std::to_string(model.params.size()));
    }
    for (auto& [name, t] : model.params) {
      if (!files.contains(name)) throw FormatError(path.string() + ": missing parameter '" + name + "'");
      Tensor loaded = num::read_tensor(dir / files.at(name).get<std::string>());
      if (loaded.shape() != t.shape()) {
        throw FormatError(path.string() + ": parameter '" + name + "' has shape " + num::to_string(loaded.shape()) +
                          ", config expects " + num::to_string(t.shape()));
      }
      t = std::move(loaded);
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace msgru::train
