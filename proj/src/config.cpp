#include "scopesim/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace scopesim {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& v) {
  std::size_t used = 0;
  const double out = std::stod(v, &used);
  if (used != v.size()) throw std::invalid_argument("bad number '" + v + "'");
  return out;
}

int parse_int(const std::string& v) {
  std::size_t used = 0;
  const int out = std::stoi(v, &used);
  if (used != v.size()) throw std::invalid_argument("bad integer '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& v) {
  std::size_t used = 0;
  const unsigned long long out = std::stoull(v, &used);
  if (used != v.size()) throw std::invalid_argument("bad integer '" + v + "'");
  return static_cast<std::uint64_t>(out);
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("bad boolean '" + v + "' (use true/false)");
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define FIELD_DBL(key, expr)                                                      \
  {key, Field{[](const RunConfig& c) { return fmt_double(c.expr); },              \
              [](RunConfig& c, const std::string& v) { c.expr = parse_double(v); }}}
#define FIELD_DEG(key, expr)                                                      \
  {key, Field{[](const RunConfig& c) { return fmt_double(rad_to_deg(c.expr)); },  \
              [](RunConfig& c, const std::string& v) {                            \
                c.expr = deg_to_rad(parse_double(v));                             \
              }}}
#define FIELD_FLT(key, expr)                                                      \
  {key, Field{[](const RunConfig& c) {                                            \
                return fmt_double(static_cast<double>(c.expr));                   \
              },                                                                  \
              [](RunConfig& c, const std::string& v) {                            \
                c.expr = static_cast<float>(parse_double(v));                     \
              }}}
#define FIELD_INT(key, expr)                                                      \
  {key, Field{[](const RunConfig& c) { return std::to_string(c.expr); },          \
              [](RunConfig& c, const std::string& v) { c.expr = parse_int(v); }}}
#define FIELD_U64(key, expr)                                                      \
  {key, Field{[](const RunConfig& c) { return std::to_string(c.expr); },          \
              [](RunConfig& c, const std::string& v) { c.expr = parse_u64(v); }}}
#define FIELD_BOOL(key, expr)                                                     \
  {key, Field{[](const RunConfig& c) {                                            \
                return c.expr ? std::string("true") : std::string("false");       \
              },                                                                  \
              [](RunConfig& c, const std::string& v) { c.expr = parse_bool(v); }}}

const std::map<std::string, Field>& schema() {
  static const std::map<std::string, Field> fields{
      FIELD_U64("master_seed", master_seed),

      FIELD_U64("scenegen.point_count", scene.point_count),
      FIELD_DBL("scenegen.radius_min_mm", scene.cavity_radius_min_mm),
      FIELD_DBL("scenegen.radius_max_mm", scene.cavity_radius_max_mm),
      FIELD_INT("scenegen.landmark_count", scene.landmark_count),
      FIELD_DBL("scenegen.texture_scale", scene.texture_scale),

      FIELD_DBL("demo.path_min_mm", demo.path_length_min_mm),
      FIELD_DBL("demo.path_max_mm", demo.path_length_max_mm),
      FIELD_DBL("demo.goal_distance_mm", demo.goal_distance_mm),
      FIELD_DBL("demo.goal_distance_jitter_mm", demo.goal_distance_jitter_mm),
      FIELD_DEG("demo.aim_error_min_deg", demo.aim_error_min_rad),
      FIELD_DEG("demo.aim_error_max_deg", demo.aim_error_max_rad),
      FIELD_DEG("demo.rot_per_mm_cap_deg", demo.rot_per_mm_cap_rad),
      FIELD_DEG("demo.start_rot_jitter_deg", demo.start_rot_jitter_rad),
      FIELD_DBL("demo.jitter_pos_sigma_mm", demo.jitter_pos_sigma_mm),
      FIELD_DEG("demo.jitter_rot_sigma_deg", demo.jitter_rot_sigma_rad),
      FIELD_INT("demo.sample_count", demo.sample_count),
      FIELD_DBL("demo.duration_s", demo.duration_s),
      FIELD_INT("demo.retry_budget", demo.retry_budget),

      FIELD_INT("trajectory.smooth_window", pre.smooth_window),
      FIELD_DBL("trajectory.d_fixed_mm", pre.d_fixed_mm),

      FIELD_INT("spta.rate", spta.rate),
      FIELD_DBL("spta.epsilon_min", spta.epsilon_min),
      FIELD_DBL("spta.epsilon_max", spta.epsilon_max),
      FIELD_DBL("spta.gamma", spta.gamma_decay),
      FIELD_DBL("spta.cube_margin_mm", spta.cube_margin_mm),
      FIELD_DBL("spta.k_fraction", spta.k_fraction),
      FIELD_DEG("spta.orientation_range_deg", spta.orientation_range_rad),
      FIELD_INT("spta.retry_budget", spta.retry_budget),

      FIELD_DBL("env.pos_threshold_mm", env.pos_threshold_mm),
      FIELD_DEG("env.rot_threshold_deg", env.rot_threshold_rad),
      FIELD_INT("env.max_steps", env.max_steps),
      FIELD_DBL("env.pos_action_limit_mm", env.pos_action_limit_mm),
      FIELD_DEG("env.rot_action_limit_deg", env.rot_action_limit_rad),
      FIELD_BOOL("env.observe_depth", env.observe_depth),
      FIELD_INT("env.obs_width", env.obs_width),
      FIELD_INT("env.obs_height", env.obs_height),
      FIELD_INT("env.splat_radius", env.splat_radius),
      FIELD_DBL("env.focal_at_width_160", env.focal_at_width_160),

      FIELD_FLT("train.ppo_lr", train.ppo_lr),
      FIELD_FLT("train.disc_lr", train.disc_lr),
      FIELD_INT("train.batch_size", train.batch_size),
      FIELD_INT("train.rollout_capacity", train.rollout_capacity),
      FIELD_FLT("train.ppo_clip", train.ppo_clip),
      FIELD_FLT("train.gae_lambda", train.gae_lambda),
      FIELD_FLT("train.discount", train.discount),
      FIELD_FLT("train.entropy_weight", train.entropy_weight),
      FIELD_FLT("train.value_weight", train.value_weight),
      FIELD_INT("train.ppo_epochs", train.ppo_epochs),
      FIELD_INT("train.disc_epochs", train.disc_epochs),
      FIELD_INT("train.disc_steps_per_iter", train.disc_steps_per_iter),
      FIELD_FLT("train.disc_accuracy_cap", train.disc_accuracy_cap),
      FIELD_FLT("train.reward_clip", train.reward_clip),
      FIELD_INT("train.iterations", train.iterations),
      FIELD_FLT("train.bc_lr", train.bc_lr),
      FIELD_INT("train.bc_epochs", train.bc_epochs),
      FIELD_BOOL("train.prior_policy", train.prior_policy),
      FIELD_FLT("train.depth_scale_mm", train.depth_scale_mm),

      FIELD_INT("scenegen.demos_per_train_scene", demos_per_train_scene),
      FIELD_INT("eval.episodes_per_scene", eval_episodes),
  };
  return fields;
}

#undef FIELD_DBL
#undef FIELD_DEG
#undef FIELD_FLT
#undef FIELD_INT
#undef FIELD_U64
#undef FIELD_BOOL

void validate(const RunConfig& c) {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("config: " + what);
  };
  if (c.scene.point_count < 1000) fail("scenegen.point_count must be >= 1000");
  if (c.scene.cavity_radius_min_mm <= 0 ||
      c.scene.cavity_radius_max_mm < c.scene.cavity_radius_min_mm)
    fail("scenegen radius range invalid");
  if (c.demo.path_length_min_mm <= 0 ||
      c.demo.path_length_max_mm < c.demo.path_length_min_mm)
    fail("demo path range invalid");
  if (c.pre.smooth_window < 3 || c.pre.smooth_window % 2 == 0)
    fail("trajectory.smooth_window must be odd and >= 3");
  if (c.pre.d_fixed_mm <= 0) fail("trajectory.d_fixed_mm must be positive");
  if (c.spta.rate < 1) fail("spta.rate must be >= 1");
  if (c.spta.epsilon_min <= 0 || c.spta.epsilon_max > 0.05 ||
      c.spta.epsilon_max < c.spta.epsilon_min)
    fail("spta epsilon range must lie in (0, 0.05]");
  if (c.spta.gamma_decay > 0) fail("spta.gamma must be <= 0 (0 selects -5/L)");
  if (c.env.max_steps < 1) fail("env.max_steps must be >= 1");
  if (c.env.pos_threshold_mm <= 0 || c.env.rot_threshold_rad <= 0)
    fail("env thresholds must be positive");
  if (c.env.pos_action_limit_mm <= 0 || c.env.rot_action_limit_rad <= 0)
    fail("env action limits must be positive");
  if (c.env.obs_width < 8 || c.env.obs_height < 8)
    fail("env observation size too small");
  if (c.train.batch_size < 1 || c.train.rollout_capacity < c.train.batch_size)
    fail("train batch/rollout sizes invalid");
  if (c.train.ppo_lr <= 0 || c.train.disc_lr <= 0 || c.train.bc_lr <= 0)
    fail("learning rates must be positive");
  if (c.train.ppo_clip <= 0 || c.train.ppo_clip >= 1) fail("train.ppo_clip in (0,1)");
  if (c.demos_per_train_scene < 1)
    fail("scenegen.demos_per_train_scene must be >= 1");
  if (c.eval_episodes < 1) fail("eval.episodes_per_scene must be >= 1");
}

}  // namespace

void apply_config_override(RunConfig& config, const std::string& key,
                           const std::string& value) {
  const auto it = schema().find(key);
  if (it == schema().end())
    throw std::invalid_argument("config: unknown key '" + key + "'");
  it->second.set(config, value);
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig config;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t");
    line = line.substr(first, last - first + 1);

    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected 'key = value'");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    const auto key_end = key.find_last_not_of(" \t");
    key = key.substr(0, key_end + 1);
    const auto value_start = value.find_first_not_of(" \t");
    if (value_start == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": missing value");
    value = value.substr(value_start);
    try {
      apply_config_override(config, key, value);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": " +
                                  e.what());
    }
  }
  validate(config);
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str());
}

std::string config_to_text(const RunConfig& config) {
  std::ostringstream out;
  for (const auto& [key, field] : schema())
    out << key << " = " << field.get(config) << "\n";
  return out.str();
}

void save_config(const std::string& path, const RunConfig& config) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config: " + path);
  out << config_to_text(config);
}

}  // namespace scopesim
