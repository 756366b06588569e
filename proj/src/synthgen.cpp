#include "msgru/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "msgru/error.hpp"
#include "msgru/tensor_io.hpp"

namespace msgru::synth {

namespace fs = std::filesystem;
using json = nlohmann::json;
using patching::Zone;
using patching::zone_index;

namespace {

// Zones sharing an edge: vertical chain within a lung, same level across.
constexpr std::array<std::array<int, 3>, 6> kAdjacent = {{
    {1, 3, -1},  // L1: L2, R1
    {0, 2, 4},   // L2: L1, L3, R2
    {1, 5, -1},  // L3: L2, R3
    {4, 0, -1},  // R1: R2, L1
    {3, 5, 1},   // R2: R1, R3, L2
    {4, 2, -1},  // R3: R2, L3
}};

std::string image_name(std::size_t patient, std::size_t t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%04zu_t%02zu.msgt", patient, t + 1);
  return buf;
}

json config_json(const GenConfig& c) {
  return json{{"n_patients", c.n_patients}, {"height", c.height},     {"width", c.width},
              {"patch_size", c.patch_size}, {"p_spread", c.p_spread}, {"p_up", c.p_up},
              {"sigma_px", c.sigma_px},     {"seed", c.seed},         {"folds", c.folds}};
}

GenConfig config_from_json(const json& j) {
  GenConfig c;
  c.n_patients = j.at("n_patients").get<std::size_t>();
  c.height = j.at("height").get<std::size_t>();
  c.width = j.at("width").get<std::size_t>();
  c.patch_size = j.at("patch_size").get<std::size_t>();
  c.p_spread = j.at("p_spread").get<double>();
  c.p_up = j.at("p_up").get<double>();
  c.sigma_px = j.at("sigma_px").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.folds = j.at("folds").get<std::size_t>();
  return c;
}

}  // namespace

void GenConfig::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0,1]");
  };
  prob(p_spread, "p_spread");
  prob(p_up, "p_up");
  if (!(sigma_px >= 0.0)) throw ConfigError("sigma_px must be >= 0");
  if (n_patients == 0) throw ConfigError("n_patients must be positive");
  if (folds < 2 || folds > n_patients) throw ConfigError("folds must lie in [2, n_patients]");
  if (patch_size == 0) throw ConfigError("patch_size must be positive");
  patching::build_zone_layout(height, width);
}

std::vector<bool> PatientSequence::mask(std::size_t slots) const {
  if (slots < timepoints()) throw ContractError("mask: fewer slots than timepoints");
  std::vector<bool> m(slots, false);
  std::fill_n(m.begin(), timepoints(), true);
  return m;
}

std::vector<std::size_t> Dataset::fold_members(std::size_t fold) const {
  if (fold >= folds()) throw DataError("fold " + std::to_string(fold) + " not present (dataset has " +
                                       std::to_string(folds()) + ")");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < patients.size(); ++i)
    if (fold_of[i] == fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> Dataset::training_members(std::size_t fold) const {
  if (fold >= folds()) throw DataError("fold " + std::to_string(fold) + " not present (dataset has " +
                                       std::to_string(folds()) + ")");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < patients.size(); ++i)
    if (fold_of[i] != fold) out.push_back(i);
  return out;
}

std::vector<Grades> simulate_grades(const GenConfig& config, std::size_t timepoints, Rng& rng) {
  std::vector<Grades> out;
  out.reserve(timepoints);
  Grades g{};
  g[zone_index(Zone::L3)] = 1;
  g[zone_index(Zone::R3)] = 1;
  if (bernoulli(rng, config.p_spread)) g[zone_index(Zone::L2)] = 1;
  if (bernoulli(rng, config.p_spread)) g[zone_index(Zone::R2)] = 1;
  out.push_back(g);
  for (std::size_t t = 1; t < timepoints; ++t) {
    Grades next = g;
    for (std::size_t z = 0; z < 6; ++z) {
      // one draw per zone and step keeps the stream layout independent of the grades
      const bool escalate = bernoulli(rng, config.p_up);
      if (g[z] >= 2) continue;
      bool driven = false;
      for (int a : kAdjacent[z]) {
        if (a >= 0 && g[a] >= 1 && g[a] >= g[z]) driven = true;
      }
      if (driven && escalate) ++next[z];
    }
    g = next;
    out.push_back(g);
  }
  return out;
}

Tensor render_image(const GenConfig& config, const ZoneLayout& layout, const Grades& grades, Rng& rng) {
  Tensor img({layout.image_height, layout.image_width});
  for (auto& v : img.values()) {
    const double n = config.sigma_px > 0.0 ? normal(rng, kBaseIntensity, config.sigma_px) : kBaseIntensity;
    v = std::clamp(n, 0.0, 1.0);
  }
  const std::size_t w = layout.image_width;
  for (Zone z : patching::kAllZones) {
    const int g = grades[zone_index(z)];
    if (g <= 0) continue;
    const auto& r = layout.zone(z);
    const std::size_t area = r.height * r.width;
    const auto target = static_cast<std::size_t>(kCoveragePerGrade * g * static_cast<double>(area));
    std::vector<unsigned char> covered(area, 0);
    std::size_t count = 0;
    for (int attempt = 0; attempt < 400 && count < target; ++attempt) {
      const double cy = uniform(rng, 0.0, static_cast<double>(r.height));
      const double cx = uniform(rng, 0.0, static_cast<double>(r.width));
      const double ry = uniform(rng, r.height / 12.0, r.height / 6.0);
      const double rx = uniform(rng, r.width / 12.0, r.width / 6.0);
      const auto y0 = static_cast<std::size_t>(std::max(0.0, std::floor(cy - ry)));
      const auto y1 = static_cast<std::size_t>(std::min<double>(r.height, std::ceil(cy + ry)));
      const auto x0 = static_cast<std::size_t>(std::max(0.0, std::floor(cx - rx)));
      const auto x1 = static_cast<std::size_t>(std::min<double>(r.width, std::ceil(cx + rx)));
      for (std::size_t y = y0; y < y1 && count < target; ++y) {
        for (std::size_t x = x0; x < x1 && count < target; ++x) {
          const double dy = (static_cast<double>(y) + 0.5 - cy) / ry;
          const double dx = (static_cast<double>(x) + 0.5 - cx) / rx;
          if (dy * dy + dx * dx <= 1.0 && !covered[y * r.width + x]) {
            covered[y * r.width + x] = 1;
            ++count;
          }
        }
      }
    }
    const double lift = kOpacityPerGrade * g;
    for (std::size_t y = 0; y < r.height; ++y) {
      for (std::size_t x = 0; x < r.width; ++x) {
        if (!covered[y * r.width + x]) continue;
        double& v = img[(r.row + y) * w + r.col + x];
        v = std::clamp(v + lift, 0.0, 1.0);
      }
    }
  }
  return img;
}

PatientSequence generate_patient(const GenConfig& config, std::size_t patient_id, Rng& rng) {
  const auto layout = patching::build_zone_layout(config.height, config.width);
  PatientSequence p;
  p.id = patient_id;
  const std::size_t d = kMinTimepoints + uniform_index(rng, kMaxTimepoints - kMinTimepoints + 1);
  p.grades = simulate_grades(config, d, rng);
  p.images.reserve(d);
  for (const auto& g : p.grades) p.images.push_back(render_image(config, layout, g, rng));
  return p;
}

PatientSequence generate_patient(const GenConfig& config, std::size_t patient_id) {
  Rng rng = make_rng(config.seed, patient_id);
  return generate_patient(config, patient_id, rng);
}

std::vector<std::size_t> assign_folds(const std::vector<PatientSequence>& patients, std::size_t folds) {
  if (folds == 0) throw ConfigError("folds must be positive");
  std::vector<std::size_t> order(patients.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return patients[a].grades.back() < patients[b].grades.back();
  });
  std::vector<std::size_t> fold_of(patients.size());
  for (std::size_t k = 0; k < order.size(); ++k) fold_of[order[k]] = k % folds;
  return fold_of;
}

Dataset generate_dataset(const GenConfig& config) {
  config.validate();
  Dataset ds;
  ds.config = config;
  ds.patients.reserve(config.n_patients);
  for (std::size_t i = 0; i < config.n_patients; ++i) ds.patients.push_back(generate_patient(config, i));
  ds.fold_of = assign_folds(ds.patients, config.folds);
  return ds;
}

void write_dataset(const Dataset& dataset, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create dataset directory '" + dir.string() + "': " + ec.message());

  json patients = json::array();
  for (std::size_t i = 0; i < dataset.patients.size(); ++i) {
    const auto& p = dataset.patients[i];
    json images = json::array();
    for (std::size_t t = 0; t < p.timepoints(); ++t) {
      const auto name = image_name(p.id, t);
      num::write_tensor(dir / name, p.images[t]);
      images.push_back(name);
    }
    patients.push_back(json{{"id", p.id},
                            {"timepoints", p.timepoints()},
                            {"fold", dataset.fold_of[i]},
                            {"grades", p.grades},
                            {"images", images}});
  }
  const json manifest{{"format", "msgru-dataset"},
                      {"version", 1},
                      {"config", config_json(dataset.config)},
                      {"patients", patients}};
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw DataError("cannot write '" + (dir / "manifest.json").string() + "'");
  out << manifest.dump(1) << '\n';
  if (!out) throw DataError("failed writing '" + (dir / "manifest.json").string() + "'");
}

Dataset read_dataset(const fs::path& dir) {
  const fs::path path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset manifest '" + path.string() + "'");
  Dataset ds;
  try {
    const json m = json::parse(in);
    if (m.at("format") != "msgru-dataset") throw FormatError("not a dataset manifest");
    if (m.at("version") != 1) throw FormatError("unsupported dataset version " + m.at("version").dump());
    ds.config = config_from_json(m.at("config"));
    for (const auto& pj : m.at("patients")) {
      PatientSequence p;
      p.id = pj.at("id").get<std::size_t>();
      p.grades = pj.at("grades").get<std::vector<Grades>>();
      for (const auto& name : pj.at("images")) p.images.push_back(num::read_tensor(dir / name.get<std::string>()));
      if (p.timepoints() != pj.at("timepoints").get<std::size_t>() || p.grades.size() != p.timepoints()) {
        throw DataError("patient " + std::to_string(p.id) + ": timepoint count mismatch");
      }
      if (p.timepoints() < kMinTimepoints || p.timepoints() > kMaxTimepoints) {
        throw DataError("patient " + std::to_string(p.id) + ": timepoints outside [4, 13]");
      }
      for (const auto& g : p.grades)
        for (int v : g)
          if (v < 0 || v > 2) throw DataError("patient " + std::to_string(p.id) + ": grade outside {0,1,2}");
      for (const auto& img : p.images) {
        if (img.rank() != 2 || img.dim(0) != ds.config.height || img.dim(1) != ds.config.width) {
          throw DataError("patient " + std::to_string(p.id) + ": image extents do not match config");
        }
      }
      const auto fold = pj.at("fold").get<std::size_t>();
      if (fold >= ds.config.folds) throw DataError("patient " + std::to_string(p.id) + ": fold out of range");
      ds.fold_of.push_back(fold);
      ds.patients.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return ds;
}

double final_grade_correlation(const std::vector<PatientSequence>& patients, Zone a, Zone b) {
  const double n = static_cast<double>(patients.size());
  double ma = 0, mb = 0;
  for (const auto& p : patients) {
    ma += p.grades.back()[zone_index(a)];
    mb += p.grades.back()[zone_index(b)];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (const auto& p : patients) {
    const double da = p.grades.back()[zone_index(a)] - ma;
    const double db = p.grades.back()[zone_index(b)] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

double planted_correlation_gap(const std::vector<PatientSequence>& patients, std::size_t height, std::size_t width) {
  const auto layout = patching::build_zone_layout(height, width);
  double gap = 0.0;
  for (Zone z : patching::kAllZones) {
    double neighbor = 0.0;
    for (Zone n : layout.neighbor_zones(z)) neighbor += final_grade_correlation(patients, z, n) / 2.0;
    gap += neighbor - final_grade_correlation(patients, z, layout.remote_zone(z));
  }
  return gap / 6.0;
}

}  // namespace msgru::synth
