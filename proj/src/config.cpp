#include "tfgw/config.hpp"

#include <charconv>
#include <sstream>

#include "tfgw/tu_format.hpp"

namespace tfgw {

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) throw ValidationError("config key '" + key + "': cannot parse '" + text + "'");
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ValidationError("config key '" + key + "': expected true or false, got '" + text + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(key, item));
  return out;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

int TrainConfig::template_count(int class_count) const {
  return templates > 0 ? templates : template_multiplier * class_count;
}

CgOptions TrainConfig::solver_options() const {
  CgOptions o;
  o.max_iterations = cg_max_iterations;
  o.relative_tolerance = cg_tolerance;
  o.restarts = cg_restarts;
  o.restart_seed = seed;
  return o;
}

void validate_config(const TrainConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ValidationError("invalid config: " + what);
  };
  require(c.epochs > 0, "epochs must be positive");
  require(c.batch_size >= 0, "batch_size must be >= 0");
  require(c.learning_rate > 0.0, "learning_rate must be positive");
  require(c.templates >= 0, "templates must be >= 0");
  require(c.template_multiplier > 0, "template_multiplier must be positive");
  require(c.gin_layers >= 0, "gin_layers must be >= 0");
  require(c.gin_hidden > 0, "gin_hidden must be positive");
  for (int h : c.mlp_hidden) require(h > 0, "mlp_hidden entries must be positive");
  require(c.dropout == 0.0 || c.dropout == 0.2 || c.dropout == 0.5, "dropout must be one of 0, 0.2, 0.5");
  require(c.alpha >= 0.0 && c.alpha <= 1.0, "alpha must lie in [0, 1]");
  require(c.validation_period > 0, "validation_period must be positive");
  require(c.threads >= 0, "threads must be >= 0");
  require(c.cg_max_iterations > 0, "cg_max_iterations must be positive");
  require(c.cg_tolerance >= 0.0, "cg_tolerance must be >= 0");
  require(c.cg_restarts >= 1, "cg_restarts must be >= 1");
  require(c.holdout_fraction >= 0.0 && c.holdout_fraction < 1.0, "holdout_fraction must lie in [0, 1)");
  require(c.folds >= 2, "folds must be >= 2");
}

void apply_overrides(TrainConfig& c, const std::map<std::string, std::string>& values) {
  if (auto a = values.find("alpha"); a != values.end() && a->second != "learned" && values.count("alpha_init"))
    throw ValidationError("config keys 'alpha_init' and a fixed 'alpha' are mutually exclusive");
  for (const auto& [key, v] : values) {
    if (key == "epochs") c.epochs = parse_number<int>(key, v);
    else if (key == "batch_size") c.batch_size = parse_number<int>(key, v);
    else if (key == "learning_rate") c.learning_rate = parse_number<double>(key, v);
    else if (key == "templates") c.templates = parse_number<int>(key, v);
    else if (key == "template_multiplier") c.template_multiplier = parse_number<int>(key, v);
    else if (key == "gin_layers") c.gin_layers = parse_number<int>(key, v);
    else if (key == "gin_hidden") c.gin_hidden = parse_number<int>(key, v);
    else if (key == "mlp_hidden") c.mlp_hidden = parse_int_list(key, v);
    else if (key == "dropout") c.dropout = parse_number<double>(key, v);
    else if (key == "template_weights") {
      if (v == "learned") c.template_weights = WeightMode::Learned;
      else if (v == "uniform") c.template_weights = WeightMode::Uniform;
      else throw ValidationError("config key 'template_weights': expected learned or uniform");
    } else if (key == "learn_templates") c.learn_templates = parse_bool(key, v);
    else if (key == "structure") c.structure = parse_structure_kind(v);
    else if (key == "alpha") {
      if (v == "learned") {
        c.alpha_mode = AlphaMode::Learned;
      } else {
        c.alpha_mode = AlphaMode::Fixed;
        c.alpha = parse_number<double>(key, v);
      }
    } else if (key == "alpha_init") c.alpha = parse_number<double>(key, v);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
    else if (key == "validation_period") c.validation_period = parse_number<int>(key, v);
    else if (key == "threads") c.threads = parse_number<int>(key, v);
    else if (key == "cg_max_iterations") c.cg_max_iterations = parse_number<int>(key, v);
    else if (key == "cg_tolerance") c.cg_tolerance = parse_number<double>(key, v);
    else if (key == "cg_restarts") c.cg_restarts = parse_number<int>(key, v);
    else if (key == "holdout_fraction") c.holdout_fraction = parse_number<double>(key, v);
    else if (key == "folds") c.folds = parse_number<int>(key, v);
    else throw ValidationError("unknown config key '" + key + "'");
  }
  validate_config(c);
}

TrainConfig load_config_file(const std::filesystem::path& file, TrainConfig base) {
  apply_overrides(base, read_key_values(file));
  return base;
}

std::map<std::string, std::string> to_key_values(const TrainConfig& c) {
  std::map<std::string, std::string> kv;
  kv["epochs"] = std::to_string(c.epochs);
  kv["batch_size"] = std::to_string(c.batch_size);
  kv["learning_rate"] = format_double(c.learning_rate);
  kv["templates"] = std::to_string(c.templates);
  kv["template_multiplier"] = std::to_string(c.template_multiplier);
  kv["gin_layers"] = std::to_string(c.gin_layers);
  kv["gin_hidden"] = std::to_string(c.gin_hidden);
  std::string hidden;
  for (std::size_t i = 0; i < c.mlp_hidden.size(); ++i) hidden += (i ? "," : "") + std::to_string(c.mlp_hidden[i]);
  kv["mlp_hidden"] = hidden;
  kv["dropout"] = format_double(c.dropout);
  kv["template_weights"] = c.template_weights == WeightMode::Learned ? "learned" : "uniform";
  kv["learn_templates"] = c.learn_templates ? "true" : "false";
  kv["structure"] = to_string(c.structure);
  kv["alpha"] = c.alpha_mode == AlphaMode::Learned ? "learned" : format_double(c.alpha);
  if (c.alpha_mode == AlphaMode::Learned) kv["alpha_init"] = format_double(c.alpha);
  kv["seed"] = std::to_string(c.seed);
  kv["validation_period"] = std::to_string(c.validation_period);
  kv["threads"] = std::to_string(c.threads);
  kv["cg_max_iterations"] = std::to_string(c.cg_max_iterations);
  kv["cg_tolerance"] = format_double(c.cg_tolerance);
  kv["cg_restarts"] = std::to_string(c.cg_restarts);
  kv["holdout_fraction"] = format_double(c.holdout_fraction);
  kv["folds"] = std::to_string(c.folds);
  return kv;
}

}  // namespace tfgw
