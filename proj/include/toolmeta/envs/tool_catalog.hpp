#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "toolmeta/envs/geometry.hpp"

namespace toolmeta::envs {

enum class Split { train, test };

/// Planar tool: a rectangular handle along +x from the frame origin (the
/// butt end) capped by a rectangular head centred just past the handle tip.
/// `head_angle` skews the head away from perpendicular; at +-pi/2 the head
/// continues straight along the handle.
struct ToolSpec {
  int id = 0;
  std::string name;
  std::string family;
  double handle_length = 0.2;
  double handle_width = 0.02;
  double head_length = 0.08;
  double head_width = 0.03;
  double head_angle = 0.0;
  double grasp_offset = 0.05;  // distance from the butt along the handle
  double mass = 0.3;
  Split split = Split::train;

  Box handle_box() const;
  Box head_box() const;
  Vec2 grasp_point() const { return {grasp_offset, 0.0}; }
  Vec2 head_center() const { return head_box().center; }
  /// Area-weighted centre of the two rectangles, in the tool frame.
  Vec2 centroid() const;
  /// Throws Error when an invariant is violated.
  void validate() const;

  bool operator==(const ToolSpec&) const = default;
};

inline constexpr int kCatalogSize = 36;
inline constexpr int kTrainTools = 27;
inline constexpr int kTestTools = 9;

/// Normalized geometry coordinates used for similarity between tools:
/// handle length/width, head length/width, head angle and grasp ratio,
/// each scaled to [0, 1] over the catalog's parameter ranges.
std::vector<double> geometry_features(const ToolSpec& tool);
double geometry_distance(const ToolSpec& a, const ToolSpec& b);

/// Nine tool families, each contributing three tightly jittered training
/// variants and one held-out variant displaced further from the family
/// base. Deterministic in `seed`.
std::vector<ToolSpec> generate_catalog(std::uint64_t seed);

std::vector<ToolSpec> tools_in_split(const std::vector<ToolSpec>& catalog, Split split);
const ToolSpec& find_tool(const std::vector<ToolSpec>& catalog, int id);

/// Tab-separated catalog file with a versioned header line.
void write_catalog(const std::filesystem::path& path, const std::vector<ToolSpec>& catalog);
std::vector<ToolSpec> read_catalog(const std::filesystem::path& path);

std::string to_string(Split split);

}  // namespace toolmeta::envs
