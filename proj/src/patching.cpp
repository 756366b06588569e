#include "msgru/patching.hpp"

#include <algorithm>
#include <cmath>

#include "msgru/error.hpp"

namespace msgru::patching {

namespace {

constexpr std::array<std::string_view, 6> kZoneNames = {"L1", "L2", "L3", "R1", "R2", "R3"};

// Neighbor pools: the two zones sharing an edge with the concerned zone
// along the chain upper-middle-lower and across the midline (middle zones use
// the zones above and below).
constexpr std::array<std::array<Zone, 2>, 6> kNeighbors = {{
    {Zone::R1, Zone::L2},  // L1
    {Zone::L1, Zone::L3},  // L2
    {Zone::L2, Zone::R3},  // L3
    {Zone::L1, Zone::R2},  // R1
    {Zone::R1, Zone::R3},  // R2
    {Zone::R2, Zone::L3},  // R3
}};

constexpr std::array<Zone, 6> kRemote = {Zone::L3, Zone::R3, Zone::L1, Zone::R3, Zone::L3, Zone::R1};

bool is_left(Zone z) { return zone_index(z) < 3; }
std::size_t level(Zone z) { return zone_index(z) % 3; }

// Strip of `depth` pixels along the side of `of` that faces `toward`.
Rect facing_strip(const Rect& of, Zone of_zone, Zone toward, std::size_t row_depth, std::size_t col_depth) {
  if (is_left(of_zone) != is_left(toward)) {
    // across the midline: inner column
    const std::size_t col = is_left(of_zone) ? of.right() - col_depth : of.col;
    return {of.row, col, of.height, col_depth};
  }
  const std::size_t row = level(toward) < level(of_zone) ? of.row : of.bottom() - row_depth;
  return {row, of.col, row_depth, of.width};
}

}  // namespace

std::string_view zone_name(Zone z) { return kZoneNames[zone_index(z)]; }

std::optional<Zone> parse_zone(std::string_view name) {
  for (std::size_t i = 0; i < kZoneNames.size(); ++i) {
    if (kZoneNames[i] == name) return kAllZones[i];
  }
  return std::nullopt;
}

bool Rect::intersects(const Rect& o) const {
  return row < o.bottom() && o.row < bottom() && col < o.right() && o.col < right();
}

bool Rect::touches(const Rect& o) const {
  const bool rows_overlap = row < o.bottom() && o.row < bottom();
  const bool cols_overlap = col < o.right() && o.col < right();
  const bool rows_meet = row <= o.bottom() && o.row <= bottom();
  const bool cols_meet = col <= o.right() && o.col <= right();
  return (rows_overlap && cols_meet) || (cols_overlap && rows_meet);
}

std::vector<Rect> split_rect(const Rect& r, std::size_t rows, std::size_t cols) {
  std::vector<Rect> cells;
  cells.reserve(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t r0 = r.row + i * r.height / rows;
    const std::size_t r1 = r.row + (i + 1) * r.height / rows;
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t c0 = r.col + j * r.width / cols;
      const std::size_t c1 = r.col + (j + 1) * r.width / cols;
      cells.push_back({r0, c0, r1 - r0, c1 - c0});
    }
  }
  return cells;
}

std::array<Zone, 2> ZoneLayout::neighbor_zones(Zone z) const { return kNeighbors[zone_index(z)]; }

Zone ZoneLayout::remote_zone(Zone z) const { return kRemote[zone_index(z)]; }

std::vector<Rect> ZoneLayout::primary_cells(Zone z) const { return split_rect(zone(z), 4, 4); }

std::vector<Rect> ZoneLayout::neighbor_cells(Zone z) const {
  std::vector<Rect> cells;
  for (const Rect& strip : neighbor_strips[zone_index(z)]) {
    auto part = strip.height > strip.width ? split_rect(strip, 4, 1) : split_rect(strip, 1, 4);
    cells.insert(cells.end(), part.begin(), part.end());
  }
  return cells;
}

std::vector<Rect> ZoneLayout::remote_cells(Zone z) const { return split_rect(remote_strip[zone_index(z)], 2, 4); }

ZoneLayout build_zone_layout(std::size_t image_height, std::size_t image_width) {
  if (image_height % 3 != 0 || image_width % 2 != 0) {
    throw GeometryError("image " + std::to_string(image_height) + "x" + std::to_string(image_width) +
                        " cannot be split into thirds by height and halves by width");
  }
  const std::size_t zh = image_height / 3;
  const std::size_t zw = image_width / 2;
  if (zh < 4 || zw < 4) throw GeometryError("zones must be at least 4x4 pixels");

  ZoneLayout layout;
  layout.image_height = image_height;
  layout.image_width = image_width;
  for (Zone z : kAllZones) {
    layout.zones[zone_index(z)] = {level(z) * zh, is_left(z) ? 0 : zw, zh, zw};
  }
  const std::size_t row_depth = zh / 4;
  const std::size_t col_depth = zw / 4;
  for (Zone z : kAllZones) {
    auto& strips = layout.neighbor_strips[zone_index(z)];
    for (Zone n : kNeighbors[zone_index(z)]) {
      strips.push_back(facing_strip(layout.zone(n), n, z, row_depth, col_depth));
    }
    // Far boundary of the remote zone: the edge facing away from the
    // concerned zone, two grid rows deep.
    const Zone r = kRemote[zone_index(z)];
    const Rect& rz = layout.zone(r);
    const bool take_top = level(r) < level(z);
    layout.remote_strip[zone_index(z)] = {take_top ? rz.row : rz.bottom() - 2 * row_depth, rz.col, 2 * row_depth,
                                          rz.width};
  }
  return layout;
}

Tensor crop_resize(const Tensor& image, const Rect& r, std::size_t out_size) {
  if (image.rank() != 2) throw DimensionError("crop_resize: image must be rank 2, got " + num::to_string(image.shape()));
  if (r.bottom() > image.dim(0) || r.right() > image.dim(1) || r.height == 0 || r.width == 0) {
    throw GeometryError("crop rectangle outside image");
  }
  if (out_size == 0) throw GeometryError("patch size must be positive");
  const std::size_t w = image.dim(1);
  Tensor out({out_size, out_size});
  const double sy = static_cast<double>(r.height) / static_cast<double>(out_size);
  const double sx = static_cast<double>(r.width) / static_cast<double>(out_size);
  auto src_coord = [](std::size_t dst, double s, std::size_t len) {
    const double c = (static_cast<double>(dst) + 0.5) * s - 0.5;
    return std::clamp(c, 0.0, static_cast<double>(len - 1));
  };
  for (std::size_t y = 0; y < out_size; ++y) {
    const double cy = src_coord(y, sy, r.height);
    const auto y0 = static_cast<std::size_t>(cy);
    const std::size_t y1 = std::min(y0 + 1, r.height - 1);
    const double fy = cy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_size; ++x) {
      const double cx = src_coord(x, sx, r.width);
      const auto x0 = static_cast<std::size_t>(cx);
      const std::size_t x1 = std::min(x0 + 1, r.width - 1);
      const double fx = cx - static_cast<double>(x0);
      auto px = [&](std::size_t yy, std::size_t xx) { return image[(r.row + yy) * w + r.col + xx]; };
      const double top = fx == 0.0 ? px(y0, x0) : (1.0 - fx) * px(y0, x0) + fx * px(y0, x1);
      const double bot = fx == 0.0 ? px(y1, x0) : (1.0 - fx) * px(y1, x0) + fx * px(y1, x1);
      out.at(y, x) = fy == 0.0 ? top : (1.0 - fy) * top + fy * bot;
    }
  }
  return out;
}

PatchSet extract_patchset(const Tensor& image, const ZoneLayout& layout, Zone zone, std::size_t patch_size) {
  if (image.rank() != 2 || image.dim(0) != layout.image_height || image.dim(1) != layout.image_width) {
    throw GeometryError("image " + num::to_string(image.shape()) + " does not match layout " +
                        std::to_string(layout.image_height) + "x" + std::to_string(layout.image_width));
  }
  if (zone_index(zone) >= 6) throw GeometryError("unknown zone id");
  PatchSet set;
  const auto primary = layout.primary_cells(zone);
  const auto neighbor = layout.neighbor_cells(zone);
  const auto remote = layout.remote_cells(zone);
  for (std::size_t i = 0; i < kPrimaryPatches; ++i) set.primary[i] = crop_resize(image, primary[i], patch_size);
  for (std::size_t i = 0; i < kPoolPatches; ++i) {
    set.neighbor[i] = crop_resize(image, neighbor[i], patch_size);
    set.remote[i] = crop_resize(image, remote[i], patch_size);
  }
  return set;
}

PatchTriple sample_triple(const PatchSet& patches, std::size_t primary_index, Rng& rng) {
  if (primary_index >= kPrimaryPatches) {
    throw ContractError("primary patch index " + std::to_string(primary_index) + " out of range 0..15");
  }
  PatchTriple t;
  t.primary_index = primary_index;
  t.neighbor_index = uniform_index(rng, kPoolPatches);
  t.remote_index = uniform_index(rng, kPoolPatches);
  t.primary = patches.primary[primary_index];
  t.neighbor = patches.neighbor[t.neighbor_index];
  t.remote = patches.remote[t.remote_index];
  return t;
}

}  // namespace msgru::patching
