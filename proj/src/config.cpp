#include "etrace/config.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace etrace::harness {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(std::string(key), "expected a finite number, got '" + std::string(v) + "'");
  }
  return out;
}

template <class Int>
Int parse_int(std::string_view key, std::string_view v) {
  Int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(std::string(key), "expected an integer, got '" + std::string(v) + "'");
  }
  return out;
}

std::size_t parse_count(std::string_view key, std::string_view v) {
  if (!v.empty() && v.front() == '-') {
    throw ConfigError(std::string(key), "must be non-negative, got '" + std::string(v) + "'");
  }
  return parse_int<std::size_t>(key, v);
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(std::string(key), "expected true/false, got '" + std::string(v) + "'");
}

void require(bool ok, const char* key, const char* what) {
  if (!ok) throw ConfigError(key, what);
}

}  // namespace

ConfigError::ConfigError(std::string key, const std::string& message)
    : std::invalid_argument("config key '" + key + "': " + message), key_(std::move(key)) {}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::string_view to_string(TraceKind k) {
  switch (k) {
    case TraceKind::none: return "none";
    case TraceKind::standard: return "standard";
    case TraceKind::replacing: return "replacing";
    case TraceKind::generalized: return "generalized";
  }
  return "?";
}

std::string_view to_string(PolicyFamily p) {
  return p == PolicyFamily::normal ? "normal" : "student_t";
}

std::string_view to_string(OptimizerKind o) {
  return o == OptimizerKind::plain ? "plain" : "adaptive_moment";
}

TraceKind trace_kind_for(double lambda1, double lambda2) {
  if (lambda1 == 0.0 && lambda2 == 0.0) return TraceKind::none;
  if (lambda2 == 0.0) return TraceKind::standard;
  if (lambda1 == 0.0) return TraceKind::replacing;
  return TraceKind::generalized;
}

TraceKind RunConfig::resolved_trace_kind() const {
  return trace_kind ? *trace_kind : trace_kind_for(lambda1, lambda2);
}

LearnerConfig RunConfig::learner_config() const {
  LearnerConfig c;
  c.gamma = gamma;
  c.alpha = alpha;
  c.eps_clip = eps_clip;
  c.beta_de = beta_de;
  c.beta_td = beta_td;
  c.kappa = kappa;
  c.trace_kind = resolved_trace_kind();
  switch (c.trace_kind) {
    case TraceKind::none:
    case TraceKind::standard:
      c.lambda_max = {lambda1};
      break;
    case TraceKind::replacing:
      c.lambda_max = {lambda2};
      break;
    case TraceKind::generalized:
      c.lambda_max = {lambda1, lambda2};
      break;
  }
  c.optimizer = optimizer;
  c.pearson_samples = pearson_samples;
  c.persist_divergence = persist_divergence;
  c.trace_regularizers = trace_regularizers;
  return c;
}

ModelSpec RunConfig::model_spec(const envs::EnvSpec& env_spec) const {
  ModelSpec m;
  m.state_dim = env_spec.state_dim;
  m.action_dim = env_spec.action_dim;
  m.hidden_width = hidden_width;
  m.hidden_layers = hidden_layers;
  m.family = policy;
  m.layer_norm_affine = layer_norm_affine;
  return m;
}

envs::EnvOptions RunConfig::env_options() const {
  return {max_steps, switch_episode};
}

void RunConfig::validate() const {
  require(!env.empty(), "env", "missing environment name");
  require(envs::is_known_env(env), "env", "unknown environment");
  require(episodes >= 1, "episodes", "must be >= 1");
  require(gamma >= 0.0 && gamma < 1.0, "gamma", "must lie in [0, 1)");
  require(alpha > 0.0, "alpha", "must be > 0");
  require(eps_clip > 0.0, "eps_clip", "must be > 0");
  require(beta_de >= 0.0, "beta_de", "must be >= 0");
  require(beta_td >= 0.0, "beta_td", "must be >= 0");
  require(lambda1 >= 0.0 && lambda1 <= 1.0, "lambda1", "must lie in [0, 1]");
  require(lambda2 >= 0.0 && lambda2 <= 1.0, "lambda2", "must lie in [0, 1]");
  require(kappa >= 0.0, "kappa", "must be >= 0");
  require(hidden_width >= 1, "hidden_width", "must be >= 1");
  require(hidden_layers >= 1, "hidden_layers", "must be >= 1");
  require(pearson_samples >= 1, "pearson_samples", "must be >= 1");
  require(eval_episodes >= 1, "eval_episodes", "must be >= 1");
}

void apply_setting(RunConfig& c, std::string_view key, std::string_view raw) {
  const std::string_view v = trim(raw);
  const std::string k(key);
  if (key == "env") {
    if (v.empty()) throw ConfigError(k, "missing environment name");
    c.env = std::string(v);
  } else if (key == "episodes") {
    c.episodes = parse_count(key, v);
  } else if (key == "max_steps") {
    c.max_steps = parse_count(key, v);
  } else if (key == "gamma") {
    c.gamma = parse_double(key, v);
  } else if (key == "alpha") {
    c.alpha = parse_double(key, v);
  } else if (key == "eps_clip") {
    c.eps_clip = parse_double(key, v);
  } else if (key == "beta_de") {
    c.beta_de = parse_double(key, v);
  } else if (key == "beta_td") {
    c.beta_td = parse_double(key, v);
  } else if (key == "lambda1") {
    c.lambda1 = parse_double(key, v);
  } else if (key == "lambda2") {
    c.lambda2 = parse_double(key, v);
  } else if (key == "kappa") {
    c.kappa = parse_double(key, v);
  } else if (key == "trace_kind") {
    if (v == "auto") c.trace_kind.reset();
    else if (v == "none") c.trace_kind = TraceKind::none;
    else if (v == "standard") c.trace_kind = TraceKind::standard;
    else if (v == "replacing") c.trace_kind = TraceKind::replacing;
    else if (v == "generalized") c.trace_kind = TraceKind::generalized;
    else throw ConfigError(k, "expected auto|none|standard|replacing|generalized");
  } else if (key == "policy") {
    if (v == "normal") c.policy = PolicyFamily::normal;
    else if (v == "student_t") c.policy = PolicyFamily::student_t;
    else throw ConfigError(k, "expected normal|student_t");
  } else if (key == "hidden_width") {
    c.hidden_width = parse_count(key, v);
  } else if (key == "hidden_layers") {
    c.hidden_layers = parse_count(key, v);
  } else if (key == "optimizer") {
    if (v == "plain") c.optimizer = OptimizerKind::plain;
    else if (v == "adaptive_moment") c.optimizer = OptimizerKind::adaptive_moment;
    else throw ConfigError(k, "expected plain|adaptive_moment");
  } else if (key == "pearson_samples") {
    c.pearson_samples = parse_count(key, v);
  } else if (key == "seed") {
    if (!v.empty() && v.front() == '-') throw ConfigError(k, "must be non-negative");
    c.seed = parse_int<std::uint64_t>(key, v);
  } else if (key == "eval_episodes") {
    c.eval_episodes = parse_count(key, v);
  } else if (key == "switch_episode") {
    c.switch_episode = parse_int<long>(key, v);
  } else if (key == "layer_norm_affine") {
    c.layer_norm_affine = parse_bool(key, v);
  } else if (key == "persist_divergence") {
    c.persist_divergence = parse_bool(key, v);
  } else if (key == "trace_regularizers") {
    c.trace_regularizers = parse_bool(key, v);
  } else if (key == "eval_every") {
    c.eval_every = parse_count(key, v);
  } else {
    throw ConfigError(k, "unknown key");
  }
}

RunConfig parse_config_text(std::string_view text, const RunConfig& base) {
  RunConfig c = base;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(std::string(line),
                        "line " + std::to_string(line_no) + " is not of the form key = value");
    }
    apply_setting(c, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  c.validate();
  return c;
}

RunConfig parse_config_file(const std::filesystem::path& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), base);
}

std::string to_config_text(const RunConfig& c) {
  std::ostringstream o;
  o << "env = " << c.env << '\n'
    << "episodes = " << c.episodes << '\n'
    << "max_steps = " << c.max_steps << '\n'
    << "gamma = " << format_double(c.gamma) << '\n'
    << "alpha = " << format_double(c.alpha) << '\n'
    << "eps_clip = " << format_double(c.eps_clip) << '\n'
    << "beta_de = " << format_double(c.beta_de) << '\n'
    << "beta_td = " << format_double(c.beta_td) << '\n'
    << "lambda1 = " << format_double(c.lambda1) << '\n'
    << "lambda2 = " << format_double(c.lambda2) << '\n'
    << "kappa = " << format_double(c.kappa) << '\n'
    << "trace_kind = " << to_string(c.resolved_trace_kind()) << '\n'
    << "policy = " << to_string(c.policy) << '\n'
    << "hidden_width = " << c.hidden_width << '\n'
    << "hidden_layers = " << c.hidden_layers << '\n'
    << "optimizer = " << to_string(c.optimizer) << '\n'
    << "pearson_samples = " << c.pearson_samples << '\n'
    << "seed = " << c.seed << '\n'
    << "eval_episodes = " << c.eval_episodes << '\n'
    << "switch_episode = " << c.switch_episode << '\n'
    << "layer_norm_affine = " << (c.layer_norm_affine ? "true" : "false") << '\n'
    << "persist_divergence = " << (c.persist_divergence ? "true" : "false") << '\n'
    << "trace_regularizers = " << (c.trace_regularizers ? "true" : "false") << '\n'
    << "eval_every = " << c.eval_every << '\n';
  return o.str();
}

}  // namespace etrace::harness
