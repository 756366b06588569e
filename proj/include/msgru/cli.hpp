#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "msgru/synthgen.hpp"
#include "msgru/trainer.hpp"

namespace msgru::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kThreshold = 3 };

inline constexpr double kGradcheckTolerance = 1e-4;

/// The tiny configuration gradcheck runs at unless overridden.
train::TrainConfig gradcheck_config();

struct GradcheckGroup {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t coords = 0;
  std::string worst_param;
};

/// Central-difference steps. Groups behind relu/maxpool (cnn, total) need a
/// small step to avoid crossing kinks; the smooth groups use a larger one so
/// roundoff stays far below their smallest gradients.
struct GradcheckSteps {
  double smooth = 1e-4;
  double kinked = 1e-5;
};

/// One isolated loss per module boundary (cnn, cell, pearson, attention,
/// decode, total) on random inputs drawn from `seed`. `corrupt` scales every
/// analytic gradient by (1 + corrupt) as a negative control.
std::vector<GradcheckGroup> run_gradcheck(const train::TrainConfig& config, std::uint64_t seed,
                                          const GradcheckSteps& steps = {}, double corrupt = 0.0);

/// Mean accuracy per (variant, zone) over the seeds that completed; a cell
/// with a failed run is marked and left out of later aggregates.
struct AblationCell {
  double accuracy_d1 = 0.0;
  double accuracy_d2 = 0.0;
  std::size_t runs = 0;
  bool failed = false;
  std::string error;
};

struct AblationResult {
  std::vector<std::uint64_t> seeds;
  std::array<std::array<AblationCell, 6>, 3> cells{};  // [variant][zone]

  bool any_failed() const;
  /// Mean over zones of one variant at horizon 1 or 2.
  double variant_mean(std::size_t variant, std::size_t horizon) const;
  /// Zones where full >= variant2 >= variant1 at d-1.
  std::size_t ordered_zones() const;
  /// Rows variant1, variant2, full; columns the six zones and their mean.
  std::string table(std::size_t horizon) const;
  std::string to_json() const;
};

/// Seed s trains on every fold but (s mod folds) and is scored on that fold
/// at d-1 and d-2. When `out` is set, each run writes
/// out/<variant>_<zone>_s<seed>/metrics_d-1.json and metrics_d-2.json.
AblationResult run_ablation(const synth::Dataset& ds, const std::vector<std::uint64_t>& seeds,
                            const train::TrainConfig& config, const std::optional<std::filesystem::path>& out,
                            std::ostream* progress = nullptr);

/// Operator entry point; args excludes the program name. Returns an ExitCode.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace msgru::cli
