// SPDX-License-Identifier: Apache-2.0
#include "isac/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace isac {

namespace {
std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}
}  // namespace

KeyValueConfig KeyValueConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::invalid_argument("config: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str());
}

KeyValueConfig KeyValueConfig::from_string(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  " has no '='");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  " has an empty key");
    cfg.values_[key] = value;  // later lines override earlier ones
  }
  return cfg;
}

bool KeyValueConfig::has(const std::string& key) const {
  return values_.count(key) > 0;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

std::string KeyValueConfig::get_string(
    const std::string& key, std::optional<std::string> fallback) const {
  const auto it = values_.find(key);
  if (it != values_.end()) return it->second;
  if (fallback) return *fallback;
  throw std::invalid_argument("config: missing key '" + key + "'");
}

double KeyValueConfig::get_double(const std::string& key,
                                  std::optional<double> fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    if (fallback) return *fallback;
    throw std::invalid_argument("config: missing key '" + key + "'");
  }
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(it->second, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' is not a number");
  }
  if (used != it->second.size())
    throw std::invalid_argument("config: key '" + key + "' is not a number");
  return v;
}

int KeyValueConfig::get_int(const std::string& key,
                            std::optional<int> fallback) const {
  const double v = get_double(key, fallback ? std::optional<double>(*fallback)
                                            : std::nullopt);
  if (v != std::floor(v) || std::abs(v) > 2e9)
    throw std::invalid_argument("config: key '" + key + "' is not an integer");
  return int(v);
}

std::uint64_t KeyValueConfig::get_u64(
    const std::string& key, std::optional<std::uint64_t> fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    if (fallback) return *fallback;
    throw std::invalid_argument("config: missing key '" + key + "'");
  }
  try {
    return std::stoull(it->second);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' is not an unsigned integer");
  }
}

bool KeyValueConfig::get_bool(const std::string& key,
                              std::optional<bool> fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    if (fallback) return *fallback;
    throw std::invalid_argument("config: missing key '" + key + "'");
  }
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw std::invalid_argument("config: key '" + key + "' is not a boolean");
}

std::vector<int> KeyValueConfig::target_indices() const {
  std::vector<int> idx;
  for (const auto& [key, value] : values_) {
    if (key.rfind("target.", 0) != 0) continue;
    const auto dot = key.find('.', 7);
    if (dot == std::string::npos) continue;
    const std::string num = key.substr(7, dot - 7);
    if (num.empty() ||
        !std::all_of(num.begin(), num.end(), [](char c) { return std::isdigit(c); }))
      continue;
    const int i = std::stoi(num);
    if (std::find(idx.begin(), idx.end(), i) == idx.end()) idx.push_back(i);
  }
  std::sort(idx.begin(), idx.end());
  return idx;
}

void KeyValueConfig::write(std::ostream& out) const {
  for (const auto& [key, value] : values_) out << key << " = " << value << '\n';
}

GridConfig grid_from_config(const KeyValueConfig& cfg) {
  return GridConfig::make(
      cfg.get_int("grid.n_subcarriers", 64), cfg.get_int("grid.n_symbols", 64),
      cfg.get_double("grid.subcarrier_spacing_hz", 30e3),
      cfg.get_double("grid.symbol_duration_s", 35.677083e-6),
      cfg.get_double("grid.carrier_freq_hz", 5.9e9),
      cfg.get_double("grid.light_speed_mps", kDefaultLightSpeed));
}

ResourceSelection resources_from_config(const KeyValueConfig& cfg) {
  ResourceSelection sel;
  const std::string mode = cfg.get_string("resources.mode", "elementwise");
  if (mode == "elementwise") {
    sel.mode = ResourceMode::elementwise;
    sel.occupancy = cfg.get_double("resources.occupancy", 0.1);
  } else if (mode == "structured") {
    sel.mode = ResourceMode::structured;
    sel.n_sub_used = cfg.get_int("resources.n_sub_used");
    sel.n_sym_used = cfg.get_int("resources.n_sym_used");
  } else {
    throw std::invalid_argument("config: resources.mode must be elementwise or structured");
  }
  return sel;
}

std::uint64_t resource_seed_from_config(const KeyValueConfig& cfg,
                                        std::uint64_t fallback) {
  return cfg.get_u64("resources.seed", fallback);
}

Scene scene_from_config(const KeyValueConfig& cfg, const GridConfig& grid) {
  Scene scene;
  for (int i : cfg.target_indices()) {
    const std::string p = "target." + std::to_string(i) + ".";
    TargetTruth t;
    const bool has_delay = cfg.has(p + "delay_s");
    const bool has_range = cfg.has(p + "range_m");
    if (has_delay && has_range)
      throw std::invalid_argument("config: give " + p + "delay_s or range_m, not both");
    if (has_range)
      t.delay = range_to_delay(grid, cfg.get_double(p + "range_m"));
    else
      t.delay = cfg.get_double(p + "delay_s", 0.0);
    const bool has_doppler = cfg.has(p + "doppler_hz");
    const bool has_velocity = cfg.has(p + "velocity_mps");
    if (has_doppler && has_velocity)
      throw std::invalid_argument("config: give " + p +
                                  "doppler_hz or velocity_mps, not both");
    if (has_velocity)
      t.doppler = velocity_to_doppler(grid, cfg.get_double(p + "velocity_mps"));
    else
      t.doppler = cfg.get_double(p + "doppler_hz", 0.0);
    const double gain_db = cfg.get_double(p + "gain_db", 0.0);
    const double phase = cfg.get_double(p + "phase_rad", 0.0);
    t.gain = std::polar(std::pow(10.0, gain_db / 20.0), phase);
    scene.targets.push_back(t);
  }
  if (scene.targets.empty() && !cfg.get_bool("scene.empty", false)) {
    // desk-scale default: one off-grid target near mid span
    TargetTruth t;
    t.delay = 0.4137 * grid.delay_span();
    t.doppler = 0.1731 * grid.doppler_span();
    t.gain = cplx(1.0, 0.0);
    scene.targets.push_back(t);
  }
  const bool has_snr = cfg.has("noise.snr_db");
  const bool has_sigma2 = cfg.has("noise.sigma2");
  if (has_snr && has_sigma2)
    throw std::invalid_argument("config: give noise.snr_db or noise.sigma2, not both");
  if (has_sigma2)
    scene.noise_power = cfg.get_double("noise.sigma2");
  else
    scene.noise_power = Scene::noise_power_for_snr(
        scene.targets, cfg.get_double("noise.snr_db", 20.0));
  scene.validate(grid);
  return scene;
}

DetectorConfig detector_from_config(const KeyValueConfig& cfg) {
  DetectorConfig det;
  det.refinement_steps = cfg.get_int("detector.refinement_steps", 5);
  det.false_alarm_prob = cfg.get_double("detector.false_alarm_prob", 1e-2);
  det.oversampling = cfg.get_int("detector.oversampling", 4);
  det.max_detections = cfg.get_int("detector.max_detections", 32);
  det.min_detections = cfg.get_int("detector.min_detections", 0);
  const std::string mode = cfg.get_string("detector.global_mode", "block_diagonal");
  if (mode == "block_diagonal")
    det.global_mode = GlobalMode::block_diagonal;
  else if (mode == "full_block")
    det.global_mode = GlobalMode::full_block;
  else
    throw std::invalid_argument(
        "config: detector.global_mode must be block_diagonal or full_block");
  det.step_guard = cfg.get_bool("detector.step_guard", true);
  const std::string corr = cfg.get_string("detector.correlation", "fft");
  if (corr == "fft")
    det.correlation = CorrelationMode::fft;
  else if (corr == "direct")
    det.correlation = CorrelationMode::direct;
  else
    throw std::invalid_argument("config: detector.correlation must be fft or direct");
  if (cfg.has("detector.max_range_m"))
    det.max_range_m = cfg.get_double("detector.max_range_m");
  if (cfg.has("detector.max_velocity_mps"))
    det.max_velocity_mps = cfg.get_double("detector.max_velocity_mps");
  if (det.refinement_steps < 0 || det.oversampling < 1 ||
      det.max_detections < 1 || det.min_detections < 0)
    throw std::invalid_argument("config: detector limits out of range");
  return det;
}

KeyValueConfig snapshot_config(const GridConfig& grid,
                               const ResourceSelection& sel,
                               const Scene& scene, const DetectorConfig& det,
                               std::uint64_t seed) {
  KeyValueConfig out;
  auto put_num = [&](const std::string& k, double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    out.set(k, ss.str());
  };
  put_num("grid.n_subcarriers", grid.n_subcarriers);
  put_num("grid.n_symbols", grid.n_symbols);
  put_num("grid.subcarrier_spacing_hz", grid.subcarrier_spacing);
  put_num("grid.symbol_duration_s", grid.symbol_duration);
  put_num("grid.carrier_freq_hz", grid.carrier_freq);
  put_num("grid.light_speed_mps", grid.light_speed);
  out.set("resources.mode", sel.mode == ResourceMode::elementwise
                                ? "elementwise"
                                : "structured");
  if (sel.mode == ResourceMode::elementwise) {
    put_num("resources.occupancy", sel.occupancy);
  } else {
    put_num("resources.n_sub_used", sel.n_sub_used);
    put_num("resources.n_sym_used", sel.n_sym_used);
  }
  if (scene.targets.empty()) out.set("scene.empty", "true");
  for (std::size_t i = 0; i < scene.targets.size(); ++i) {
    const std::string p = "target." + std::to_string(i) + ".";
    put_num(p + "delay_s", scene.targets[i].delay);
    put_num(p + "doppler_hz", scene.targets[i].doppler);
    put_num(p + "gain_db", 20.0 * std::log10(std::abs(scene.targets[i].gain)));
    put_num(p + "phase_rad", std::arg(scene.targets[i].gain));
  }
  put_num("noise.sigma2", scene.noise_power);
  put_num("detector.refinement_steps", det.refinement_steps);
  put_num("detector.false_alarm_prob", det.false_alarm_prob);
  put_num("detector.oversampling", det.oversampling);
  put_num("detector.max_detections", det.max_detections);
  put_num("detector.min_detections", det.min_detections);
  out.set("detector.global_mode", det.global_mode == GlobalMode::block_diagonal
                                      ? "block_diagonal"
                                      : "full_block");
  out.set("detector.step_guard", det.step_guard ? "true" : "false");
  out.set("detector.correlation",
          det.correlation == CorrelationMode::fft ? "fft" : "direct");
  if (det.max_range_m) put_num("detector.max_range_m", *det.max_range_m);
  if (det.max_velocity_mps)
    put_num("detector.max_velocity_mps", *det.max_velocity_mps);
  out.set("seed", std::to_string(seed));
  return out;
}

}  // namespace isac
