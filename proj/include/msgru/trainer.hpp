#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "msgru/adam.hpp"
#include "msgru/attnhead.hpp"
#include "msgru/encoder.hpp"
#include "msgru/features.hpp"
#include "msgru/patching.hpp"
#include "msgru/synthgen.hpp"

namespace msgru::train {

using num::Graph;
using num::ParamStore;
using num::Var;
using patching::Zone;

/// full: three-input cell, correlation loss, attention.
/// variant1: primary+neighbor cell only, no correlation loss, context = last fused state.
/// variant2: three-input cell with correlation loss, context = mean of fused states.
enum class Variant { variant1, variant2, full };

inline constexpr std::array<Variant, 3> kAllVariants = {Variant::variant1, Variant::variant2, Variant::full};

std::string_view variant_name(Variant v);
std::optional<Variant> parse_variant(std::string_view name);

struct TrainConfig {
  Variant variant = Variant::full;
  double lambda_corr = 0.1;
  double lr = 0.001;
  std::size_t batch_size = 30;
  std::size_t iterations = 500;  // optimizer steps per epoch
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  /// The encoder reads the first d - horizon images; 1 or 2.
  std::size_t horizon = 1;
  std::size_t hidden = 32;
  std::size_t feature_dim = 256;
  std::size_t patch_size = 32;
  std::vector<std::size_t> channels = {8, 16, 32, 32, 64};

  void validate() const;
  features::CnnConfig cnn() const;
};

std::string horizon_name(std::size_t horizon);  // "d-1", "d-2"

enum class ContextMode { attention, mean, final_state };

/// Which pieces of the pipeline a variant switches on.
struct Wiring {
  std::size_t branches = 3;
  bool correlation = true;
  ContextMode context = ContextMode::attention;
};

Wiring build_variant(Variant v);

struct Model {
  TrainConfig config;
  Zone zone = Zone::L1;
  std::size_t fold = 0;
  ParamStore params;

  Wiring wiring() const { return build_variant(config.variant); }
  encoder::MsGruConfig encoder_config() const;
};

/// Fresh parameters for every component the variant uses, drawn from config.seed.
Model init_model(const TrainConfig& config, Zone zone = Zone::L1, std::size_t fold = 0);

/// One patch sequence: a triple per valid timepoint, optionally padded with
/// `slots - triples.size()` masked slots, and the grade to predict.
struct SampleInput {
  std::vector<patching::PatchTriple> triples;
  std::size_t slots = 0;  // 0 means no padding
  int target = 0;

  std::size_t length() const { return slots == 0 ? triples.size() : slots; }
  std::vector<bool> mask() const;
};

struct ForwardResult {
  std::vector<encoder::MsGruState> states;
  std::vector<bool> mask;
  attn::ContextVector context;
  attn::DecoderOutput decoded;
  Var corr;   // invalid when the variant has no correlation loss
  Var loss;   // CE + lambda * corr for this sample
};

ForwardResult forward_sample(Graph& g, const Model& model, const SampleInput& sample);

/// CE over the batch (mean of -log p[target]) plus lambda_corr times the
/// mean correlation loss when the variant uses it. One entry per sample.
Var total_loss(Graph& g, std::span<const Var> logits, std::span<const int> targets,
               std::span<const std::vector<encoder::MsGruState>> states, std::span<const std::vector<bool>> masks,
               const TrainConfig& config);

/// Per-timepoint patch sets of one zone for one patient.
using PatientPatches = std::vector<patching::PatchSet>;
PatientPatches extract_patient(const synth::PatientSequence& patient, const patching::ZoneLayout& layout, Zone zone,
                               std::size_t patch_size);

/// Builds the sample for one primary patch index: the encoder sees the first
/// d - horizon timepoints; the target is the zone grade at the last timepoint.
SampleInput build_sample(const synth::PatientSequence& patient, const PatientPatches& patches, Zone zone,
                         std::size_t primary_index, std::size_t horizon, Rng& rng);

/// Adam over per-sample graphs; gradients are averaged over the batch in
/// sample order.
class Trainer {
 public:
  explicit Trainer(Model& model) : model_(&model) {}
  /// Returns the mean batch loss before the update.
  double step(std::span<const SampleInput> batch);
  const num::AdamState& optimizer() const { return adam_; }

 private:
  Model* model_;
  num::AdamState adam_;
};

/// Accuracy plus one-vs-rest precision and recall per grade.
struct Metrics {
  Zone zone = Zone::L1;
  Variant variant = Variant::full;
  std::size_t horizon = 1;
  std::size_t fold = 0;
  std::array<std::array<std::size_t, 3>, 3> confusion{};  // [true][predicted]

  std::size_t total() const;
  std::size_t correct() const;
  double accuracy() const;
  double precision(int grade) const;  // 0 when nothing was predicted as `grade`
  double recall(int grade) const;     // 0 when `grade` never occurs
  std::size_t support(int grade) const;

  /// Fixed key set: zone, variant, horizon, fold, accuracy, precision_g0..g2,
  /// recall_g0..g2, confusion.
  std::string to_json() const;
};

Metrics score(Zone zone, Variant variant, std::size_t horizon, std::size_t fold, std::span<const int> truth,
              std::span<const int> predicted);

/// Patient-level grade: majority vote over the 16 primary patches. Pool
/// draws come from derive_seed(seed, patient id) so predictions do not
/// depend on evaluation order.
int predict_patient(const Model& model, const synth::PatientSequence& patient, const PatientPatches& patches,
                    std::size_t horizon);

Metrics evaluate_patients(const Model& model, const synth::Dataset& ds, std::span<const std::size_t> members,
                          std::size_t horizon);
/// Held-out fold of the model at the given horizon.
Metrics evaluate(const Model& model, const synth::Dataset& ds, std::size_t fold, std::size_t horizon);

struct TrainResult {
  Model model;
  Metrics metrics;  // held-out fold, config.horizon
  std::vector<double> loss_history;
};

TrainResult train_zone(const synth::Dataset& ds, Zone zone, std::size_t fold, const TrainConfig& config);

/// Stand-in reference: per patch, a 4x4 average-pooled primary patch plus its
/// mean, averaged over the encoder timepoints, fed to a softmax-linear
/// classifier; patient grade by majority vote.
Metrics train_baseline(const synth::Dataset& ds, Zone zone, std::size_t fold, const TrainConfig& config);

inline constexpr int kCheckpointVersion = 1;
void save_checkpoint(const Model& model, const std::filesystem::path& dir);
Model load_checkpoint(const std::filesystem::path& dir);

}  // namespace msgru::train
