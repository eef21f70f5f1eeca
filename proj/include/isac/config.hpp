// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "isac/detector.hpp"
#include "isac/grid.hpp"
#include "isac/scene.hpp"

namespace isac {

/// Flat key = value configuration with dotted keys and '#' comments.
/// Unknown keys are rejected by the builders, not by the parser.
class KeyValueConfig {
 public:
  static KeyValueConfig from_file(const std::string& path);
  static KeyValueConfig from_string(const std::string& text);

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key,
                         std::optional<std::string> fallback = {}) const;
  double get_double(const std::string& key,
                    std::optional<double> fallback = {}) const;
  int get_int(const std::string& key, std::optional<int> fallback = {}) const;
  std::uint64_t get_u64(const std::string& key,
                        std::optional<std::uint64_t> fallback = {}) const;
  bool get_bool(const std::string& key,
                std::optional<bool> fallback = {}) const;

  /// Indices i appearing as target.<i>.<field>, sorted ascending.
  std::vector<int> target_indices() const;
  const std::map<std::string, std::string>& entries() const {
    return values_;
  }
  void write(std::ostream& out) const;

 private:
  std::map<std::string, std::string> values_;
};

// Builders with desk-scale defaults; throw std::invalid_argument on bad or
// contradictory keys.
GridConfig grid_from_config(const KeyValueConfig& cfg);
ResourceSelection resources_from_config(const KeyValueConfig& cfg);
std::uint64_t resource_seed_from_config(const KeyValueConfig& cfg,
                                        std::uint64_t fallback);
Scene scene_from_config(const KeyValueConfig& cfg, const GridConfig& grid);
DetectorConfig detector_from_config(const KeyValueConfig& cfg);

/// Snapshot of the fully resolved settings, written next to every output.
KeyValueConfig snapshot_config(const GridConfig& grid,
                               const ResourceSelection& sel,
                               const Scene& scene, const DetectorConfig& det,
                               std::uint64_t seed);

}  // namespace isac
