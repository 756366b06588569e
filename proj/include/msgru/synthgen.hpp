#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "msgru/patching.hpp"
#include "msgru/rng.hpp"
#include "msgru/tensor.hpp"

namespace msgru::synth {

using num::Tensor;
using patching::ZoneLayout;

/// Severity grade (0, 1 or 2) of each zone, indexed by patching::zone_index.
using Grades = std::array<int, 6>;

inline constexpr std::size_t kMinTimepoints = 4;
inline constexpr std::size_t kMaxTimepoints = 13;
inline constexpr double kBaseIntensity = 0.3;
inline constexpr double kOpacityPerGrade = 0.25;
inline constexpr double kCoveragePerGrade = 0.2;

struct GenConfig {
  std::size_t n_patients = 93;
  std::size_t height = 384;
  std::size_t width = 256;
  std::size_t patch_size = 32;
  /// Chance that a middle zone is already involved at the first timepoint.
  double p_spread = 0.25;
  /// Per-step escalation chance of a zone next to an involved zone of at least its grade.
  double p_up = 0.15;
  double sigma_px = 0.15;
  std::uint64_t seed = 2021;
  std::size_t folds = 5;

  void validate() const;
};

struct PatientSequence {
  std::size_t id = 0;
  std::vector<Tensor> images;   // one [height x width] image per timepoint
  std::vector<Grades> grades;   // one grade vector per timepoint

  std::size_t timepoints() const { return images.size(); }
  /// Validity flags when padded to `slots` entries: exactly timepoints() leading trues.
  std::vector<bool> mask(std::size_t slots) const;
};

struct Dataset {
  GenConfig config;
  std::vector<PatientSequence> patients;
  std::vector<std::size_t> fold_of;  // fold index per patient

  std::size_t folds() const { return config.folds; }
  /// Indices (into `patients`) of the held-out patients of `fold`.
  std::vector<std::size_t> fold_members(std::size_t fold) const;
  /// Indices of every patient not in `fold`.
  std::vector<std::size_t> training_members(std::size_t fold) const;
};

/// Grade trajectory over d timepoints. Lower zones start involved (grade 1),
/// middle zones start involved with probability p_spread. Each step a zone
/// below grade 2 escalates by one with probability p_up if an adjacent zone
/// (same lung above/below, or the same level across the midline) is involved
/// and has a grade at least its own. Grades never decrease.
std::vector<Grades> simulate_grades(const GenConfig& config, std::size_t timepoints, Rng& rng);

/// Base noise N(0.3, sigma_px) clipped to [0,1], plus per zone a set of random
/// ellipses covering about 20*g % of the zone that add 0.25*g intensity.
Tensor render_image(const GenConfig& config, const ZoneLayout& layout, const Grades& grades, Rng& rng);

PatientSequence generate_patient(const GenConfig& config, std::size_t patient_id, Rng& rng);
/// Uses the per-patient stream derive_seed(config.seed, patient_id).
PatientSequence generate_patient(const GenConfig& config, std::size_t patient_id);

/// Round-robin assignment after sorting by final-timepoint grades, which
/// stratifies folds by outcome and yields sizes differing by at most one.
std::vector<std::size_t> assign_folds(const std::vector<PatientSequence>& patients, std::size_t folds);

Dataset generate_dataset(const GenConfig& config);

/// Writes manifest.json and pXXXX_tYY.msgt images (YY counts from 01).
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

/// Pearson correlation of final-timepoint grades between two zones across patients.
double final_grade_correlation(const std::vector<PatientSequence>& patients, patching::Zone a, patching::Zone b);

/// Mean over zones of (average correlation with the two neighbor-pool zones
/// minus correlation with the remote-pool zone), at the final timepoint.
double planted_correlation_gap(const std::vector<PatientSequence>& patients, std::size_t height, std::size_t width);

}  // namespace msgru::synth
