#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "msgru/rng.hpp"
#include "msgru/tensor.hpp"

namespace msgru::patching {

using num::Tensor;

/// Upper/middle/lower zone of the left (L) and right (R) lung.
enum class Zone : std::uint8_t { L1, L2, L3, R1, R2, R3 };

inline constexpr std::array<Zone, 6> kAllZones = {Zone::L1, Zone::L2, Zone::L3, Zone::R1, Zone::R2, Zone::R3};
inline constexpr std::size_t kPrimaryPatches = 16;
inline constexpr std::size_t kPoolPatches = 8;

constexpr std::size_t zone_index(Zone z) { return static_cast<std::size_t>(z); }
std::string_view zone_name(Zone z);
std::optional<Zone> parse_zone(std::string_view name);

struct Rect {
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t bottom() const { return row + height; }
  std::size_t right() const { return col + width; }
  bool intersects(const Rect& o) const;
  /// Overlapping or sharing an edge segment.
  bool touches(const Rect& o) const;
  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Splits a rectangle into rows x cols cells with integer edges i*len/n, so
/// the cells tile it exactly even when the extents do not divide evenly.
std::vector<Rect> split_rect(const Rect& r, std::size_t rows, std::size_t cols);

/// Zone rectangles plus, per zone, the boundary strips feeding the neighbor
/// pool (two strips, one grid cell deep) and the remote pool (one strip, two
/// grid cells deep).
struct ZoneLayout {
  std::size_t image_height = 0;
  std::size_t image_width = 0;
  std::array<Rect, 6> zones{};
  std::array<std::vector<Rect>, 6> neighbor_strips{};
  std::array<Rect, 6> remote_strip{};

  const Rect& zone(Zone z) const { return zones[zone_index(z)]; }
  /// Zones whose boundary strips make up the neighbor pool.
  std::array<Zone, 2> neighbor_zones(Zone z) const;
  /// Zone whose far boundary makes up the remote pool.
  Zone remote_zone(Zone z) const;

  std::vector<Rect> primary_cells(Zone z) const;   // 4x4 grid, row-major
  std::vector<Rect> neighbor_cells(Zone z) const;  // 4 per strip
  std::vector<Rect> remote_cells(Zone z) const;    // 2x4
};

/// Left half holds L1..L3 and right half R1..R3, top to bottom. Throws
/// GeometryError unless height % 3 == 0, width % 2 == 0 and each zone spans
/// at least 4 pixels in both directions.
ZoneLayout build_zone_layout(std::size_t image_height, std::size_t image_width);

/// Bilinear (half-pixel centred) crop-and-resize of a rank-2 image.
Tensor crop_resize(const Tensor& image, const Rect& r, std::size_t out_size);

struct PatchSet {
  std::array<Tensor, kPrimaryPatches> primary;
  std::array<Tensor, kPoolPatches> neighbor;
  std::array<Tensor, kPoolPatches> remote;
};

PatchSet extract_patchset(const Tensor& image, const ZoneLayout& layout, Zone zone, std::size_t patch_size);

/// One timepoint's input to the multi-scale cell, with the pool draws kept.
struct PatchTriple {
  Tensor primary;
  Tensor neighbor;
  Tensor remote;
  std::size_t primary_index = 0;
  std::size_t neighbor_index = 0;
  std::size_t remote_index = 0;
};

/// Primary patch at `primary_index`; neighbor and remote drawn uniformly
/// from their pools (neighbor first, then remote).
PatchTriple sample_triple(const PatchSet& patches, std::size_t primary_index, Rng& rng);

}  // namespace msgru::patching
