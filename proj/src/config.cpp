#include "msgru/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>

#include "msgru/error.hpp"

namespace msgru::config {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const Setting& s, const char* what) {
  throw ConfigError(s.origin + ": value '" + s.value + "' for '" + s.key + "' is not " + what);
}

std::size_t to_size(const Setting& s) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.value.data(), s.value.data() + s.value.size(), v);
  if (ec != std::errc() || p != s.value.data() + s.value.size()) bad_value(s, "a non-negative integer");
  return v;
}

std::uint64_t to_u64(const Setting& s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.value.data(), s.value.data() + s.value.size(), v);
  if (ec != std::errc() || p != s.value.data() + s.value.size()) bad_value(s, "a non-negative integer");
  return v;
}

double to_double(const Setting& s) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.value.data(), s.value.data() + s.value.size(), v);
  if (ec != std::errc() || p != s.value.data() + s.value.size()) bad_value(s, "a number");
  return v;
}

std::vector<std::size_t> to_list(const Setting& s) {
  std::vector<std::size_t> out;
  std::string_view rest = s.value;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string item(trim(rest.substr(0, comma)));
    out.push_back(to_size(Setting{s.key, item, s.origin}));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  if (out.empty()) bad_value(s, "a comma-separated list");
  return out;
}

const std::set<std::string, std::less<>> kGenKeys = {"n_patients", "height", "width",  "patch_size", "p_spread",
                                                     "p_up",       "sigma_px", "seed", "folds"};
const std::set<std::string, std::less<>> kTrainKeys = {
    "variant", "lambda_corr", "lr",     "batch_size",  "iterations", "epochs",
    "seed",    "horizon",     "hidden", "feature_dim", "patch_size", "channels"};

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // shortest form that still parses back exactly
  for (int prec = 1; prec <= 17; ++prec) {
    char tmp[40];
    std::snprintf(tmp, sizeof tmp, "%.*g", prec, v);
    double back = 0;
    std::from_chars(tmp, tmp + std::char_traits<char>::length(tmp), back);
    if (back == v) return tmp;
  }
  return buf;
}

std::vector<Setting> read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::vector<Setting> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    std::string_view text = line;
    if (auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = trim(text);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    const std::string origin = path.string() + ":" + std::to_string(lineno);
    if (eq == std::string_view::npos) throw ConfigError(origin + ": expected 'key = value'");
    Setting s{std::string(trim(text.substr(0, eq))), std::string(trim(text.substr(eq + 1))), origin};
    if (s.key.empty()) throw ConfigError(origin + ": empty key");
    out.push_back(std::move(s));
  }
  return out;
}

Setting parse_override(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) throw ConfigError("--set expects key=value, got '" + std::string(text) + "'");
  Setting s{std::string(trim(text.substr(0, eq))), std::string(trim(text.substr(eq + 1))), "--set"};
  if (s.key.empty()) throw ConfigError("--set: empty key");
  return s;
}

bool is_gen_key(std::string_view key) { return kGenKeys.contains(key); }
bool is_train_key(std::string_view key) { return kTrainKeys.contains(key); }

void apply(synth::GenConfig& c, const Setting& s) {
  const auto& k = s.key;
  if (k == "n_patients") c.n_patients = to_size(s);
  else if (k == "height") c.height = to_size(s);
  else if (k == "width") c.width = to_size(s);
  else if (k == "patch_size") c.patch_size = to_size(s);
  else if (k == "p_spread") c.p_spread = to_double(s);
  else if (k == "p_up") c.p_up = to_double(s);
  else if (k == "sigma_px") c.sigma_px = to_double(s);
  else if (k == "seed") c.seed = to_u64(s);
  else if (k == "folds") c.folds = to_size(s);
  else throw ConfigError(s.origin + ": unknown dataset key '" + k + "'");
}

void apply(train::TrainConfig& c, const Setting& s) {
  const auto& k = s.key;
  if (k == "variant") {
    auto v = train::parse_variant(s.value);
    if (!v) bad_value(s, "one of variant1, variant2, full");
    c.variant = *v;
  } else if (k == "lambda_corr") c.lambda_corr = to_double(s);
  else if (k == "lr") c.lr = to_double(s);
  else if (k == "batch_size") c.batch_size = to_size(s);
  else if (k == "iterations") c.iterations = to_size(s);
  else if (k == "epochs") c.epochs = to_size(s);
  else if (k == "seed") c.seed = to_u64(s);
  else if (k == "horizon") {
    if (s.value == "d-1") c.horizon = 1;
    else if (s.value == "d-2") c.horizon = 2;
    else c.horizon = to_size(s);
  } else if (k == "hidden") c.hidden = to_size(s);
  else if (k == "feature_dim") c.feature_dim = to_size(s);
  else if (k == "patch_size") c.patch_size = to_size(s);
  else if (k == "channels") c.channels = to_list(s);
  else throw ConfigError(s.origin + ": unknown training key '" + k + "'");
}

Entries entries(const synth::GenConfig& c) {
  return {{"n_patients", std::to_string(c.n_patients)},
          {"height", std::to_string(c.height)},
          {"width", std::to_string(c.width)},
          {"patch_size", std::to_string(c.patch_size)},
          {"p_spread", format_double(c.p_spread)},
          {"p_up", format_double(c.p_up)},
          {"sigma_px", format_double(c.sigma_px)},
          {"seed", std::to_string(c.seed)},
          {"folds", std::to_string(c.folds)}};
}

Entries entries(const train::TrainConfig& c) {
  std::string channels;
  for (std::size_t i = 0; i < c.channels.size(); ++i) {
    if (i) channels += ',';
    channels += std::to_string(c.channels[i]);
  }
  return {{"variant", std::string(train::variant_name(c.variant))},
          {"lambda_corr", format_double(c.lambda_corr)},
          {"lr", format_double(c.lr)},
          {"batch_size", std::to_string(c.batch_size)},
          {"iterations", std::to_string(c.iterations)},
          {"epochs", std::to_string(c.epochs)},
          {"seed", std::to_string(c.seed)},
          {"horizon", train::horizon_name(c.horizon)},
          {"hidden", std::to_string(c.hidden)},
          {"feature_dim", std::to_string(c.feature_dim)},
          {"patch_size", std::to_string(c.patch_size)},
          {"channels", channels}};
}

}  // namespace msgru::config
