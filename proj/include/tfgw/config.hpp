#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tfgw/fgw.hpp"
#include "tfgw/graph.hpp"

namespace tfgw {

enum class WeightMode : std::uint8_t { Learned, Uniform };
enum class AlphaMode : std::uint8_t { Learned, Fixed };

struct TrainConfig {
  int epochs = 500;
  /// 0 means full batch.
  int batch_size = 128;
  double learning_rate = 0.01;
  /// Explicit template count; when 0, K = template_multiplier * class count.
  int templates = 0;
  int template_multiplier = 1;
  int gin_layers = 2;
  int gin_hidden = 16;
  std::vector<int> mlp_hidden{128, 128};
  double dropout = 0.0;
  WeightMode template_weights = WeightMode::Learned;
  bool learn_templates = true;
  StructureKind structure = StructureKind::Adjacency;
  AlphaMode alpha_mode = AlphaMode::Learned;
  /// Fixed value, or the starting value when learned.
  double alpha = 0.5;
  std::uint64_t seed = 0;
  int validation_period = 5;
  int threads = 0;
  int cg_max_iterations = 1000;
  double cg_tolerance = 1e-9;
  int cg_restarts = 1;
  double holdout_fraction = 0.1;
  int folds = 10;

  int template_count(int class_count) const;
  CgOptions solver_options() const;
};

/// Throws ValidationError on out-of-range values.
void validate_config(const TrainConfig& config);

/// Applies key=value overrides; unknown keys and malformed values raise ValidationError.
void apply_overrides(TrainConfig& config, const std::map<std::string, std::string>& values);

TrainConfig load_config_file(const std::filesystem::path& file, TrainConfig base = {});

/// Round-trippable key=value form (every key accepted by apply_overrides).
std::map<std::string, std::string> to_key_values(const TrainConfig& config);

std::string format_double(double value);

}  // namespace tfgw
