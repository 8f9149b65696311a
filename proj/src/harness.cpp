#include "etrace/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "etrace/envs.hpp"
#include "etrace/learner.hpp"
#include "etrace/stats.hpp"

namespace etrace::harness {

namespace fs = std::filesystem;

namespace {

constexpr std::array<char, 8> kMagic{'E', 'T', 'R', 'P', 'A', 'R', 'A', 'M'};
constexpr std::uint32_t kParamsVersion = 1;

std::string fixed3(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] =
      std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, 3);
  return std::string(buf.data(), ptr);
}

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  while (true) {
    const auto pos = line.find(sep);
    out.push_back(line.substr(0, pos));
    if (pos == std::string_view::npos) break;
    line = line.substr(pos + 1);
  }
  return out;
}

double to_double(std::string_view s, const std::string& what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::runtime_error(what + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

void set_task_phase(envs::Environment& env, long episode) {
  if (auto* reach = dynamic_cast<envs::PointReachSwitch*>(&env)) {
    reach->set_episode_index(episode);
  }
}

// little-endian primitive I/O
template <class T>
void put(std::ostream& out, T v) {
  std::uint64_t bits;
  if constexpr (std::is_same_v<T, double>) {
    bits = std::bit_cast<std::uint64_t>(v);
  } else {
    bits = static_cast<std::uint64_t>(v);
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.put(static_cast<char>((bits >> (8 * i)) & 0xffU));
  }
}

template <class T>
T get(std::istream& in, const fs::path& path) {
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) {
      throw std::runtime_error("params file truncated: " + path.string());
    }
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  if constexpr (std::is_same_v<T, double>) {
    return std::bit_cast<double>(bits);
  } else {
    return static_cast<T>(bits);
  }
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// --- training ----------------------------------------------------------------

RunResult train(const RunConfig& config, const fs::path& out_dir,
                const std::function<void(const EpisodeRecord&)>& on_episode) {
  config.validate();
  auto env = envs::make_env(config.env, config.env_options());
  const envs::EnvSpec env_spec = env->spec();

  RunResult result;
  result.config = config;
  result.model = config.model_spec(env_spec);
  ActorCritic model(result.model);
  Learner learner(model, config.learner_config(), model.init(derive_seed(config.seed, streams::kInit)),
                  derive_seed(config.seed, streams::kLearner));
  Rng act_rng(derive_seed(config.seed, streams::kAct));
  const std::uint64_t env_seed = derive_seed(config.seed, streams::kEnv);

  std::ofstream csv;
  std::ofstream periodic;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream(out_dir / "resolved.cfg") << to_config_text(config);
    csv.open(out_dir / "train.csv");
    if (!csv) throw std::runtime_error("cannot write " + (out_dir / "train.csv").string());
    csv << kTrainHeader << '\n' << std::flush;
    if (config.eval_every > 0) {
      periodic.open(out_dir / "periodic_eval.csv");
      periodic << "episode,median\n" << std::flush;
    }
  }

  for (std::size_t ep = 0; ep < config.episodes; ++ep) {
    const auto t0 = std::chrono::steady_clock::now();
    EpisodeRecord rec;
    rec.episode = ep;
    double sum_lambda = 0.0;
    double sum_abs_td = 0.0;
    std::size_t n_updates = 0;
    auto record = [&](const StepDiagnostics& d) {
      if (d.rejected) return;
      sum_lambda += d.lambda_d;
      sum_abs_td += std::abs(d.td_error);
      ++n_updates;
    };

    learner.episode_begin();
    std::vector<double> state = env->reset(derive_seed(env_seed, ep));
    // A transition is learned from one step later, once the next action has
    // been drawn, so every update sees a ratio against slightly older
    // parameters except the first of each episode.
    std::optional<Transition> pending;
    for (std::size_t t = 0; t < env_spec.max_steps; ++t) {
      ActionSample a = learner.act(state, act_rng);
      envs::StepResult step = env->step(envs::scale_action(env_spec, a.action));
      rec.ret += step.reward;
      ++rec.steps;
      if (pending) record(learner.step(*pending));
      pending = Transition{std::move(state), std::move(a.action), step.reward, step.next_state,
                           step.terminal, a.log_prob, std::move(a.policy), a.value};
      state = std::move(step.next_state);
      if (step.terminal || step.truncated) break;
    }
    if (pending) record(learner.step(*pending));

    rec.mean_lambda_d = n_updates > 0 ? sum_lambda / static_cast<double>(n_updates) : 1.0;
    rec.mean_abs_td = n_updates > 0 ? sum_abs_td / static_cast<double>(n_updates) : 0.0;
    rec.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.episodes.push_back(rec);

    if (csv.is_open()) {
      csv << rec.episode << ',' << format_double(rec.ret) << ',' << rec.steps << ','
          << format_double(rec.mean_lambda_d) << ',' << format_double(rec.mean_abs_td) << ','
          << fixed3(rec.wall_ms) << '\n'
          << std::flush;
    }
    if (config.eval_every > 0 && (ep + 1) % config.eval_every == 0) {
      const auto ev = evaluate(result.model, learner.params(), config, static_cast<long>(ep + 1));
      if (periodic.is_open()) {
        periodic << ep << ',' << format_double(ev.median) << '\n' << std::flush;
      }
    }
    if (on_episode) on_episode(rec);
  }

  result.params.assign(learner.params().begin(), learner.params().end());
  result.updates = learner.updates();
  result.incidents = learner.incidents();
  if (!out_dir.empty()) save_params(out_dir / "params.bin", result.model, result.params);
  return result;
}

// --- evaluation --------------------------------------------------------------

EvalResult evaluate(const ModelSpec& model_spec, std::span<const double> params,
                    const RunConfig& config, long task_episode) {
  auto env = envs::make_env(config.env, config.env_options());
  const envs::EnvSpec env_spec = env->spec();
  const ActorCritic model(model_spec);
  if (params.size() != model.parameter_count()) {
    throw std::invalid_argument("evaluate: parameter count does not match the model");
  }
  if (model_spec.state_dim != env_spec.state_dim || model_spec.action_dim != env_spec.action_dim) {
    throw std::invalid_argument("evaluate: model does not fit environment " + config.env);
  }
  const long phase = task_episode >= 0 ? task_episode : static_cast<long>(config.episodes);
  const std::uint64_t seed = derive_seed(config.seed, streams::kEval);

  EvalResult out;
  for (std::size_t i = 0; i < config.eval_episodes; ++i) {
    set_task_phase(*env, phase);
    std::vector<double> state = env->reset(derive_seed(seed, i));
    double ret = 0.0;
    std::size_t steps = 0;
    for (std::size_t t = 0; t < env_spec.max_steps; ++t) {
      const auto policy = model.policy(params, state);
      const auto step = env->step(envs::scale_action(env_spec, dist::location(policy)));
      ret += step.reward;
      ++steps;
      state = step.next_state;
      if (step.terminal || step.truncated) break;
    }
    out.returns.push_back(ret);
    out.steps.push_back(steps);
  }
  out.median = stats::median(out.returns);
  return out;
}

void write_eval_csv(const fs::path& path, const EvalResult& result) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kEvalHeader << '\n';
  for (std::size_t i = 0; i < result.returns.size(); ++i) {
    out << i << ',' << format_double(result.returns[i]) << ',' << result.steps[i] << '\n';
  }
}

// --- parameter files ---------------------------------------------------------

void save_params(const fs::path& path, const ModelSpec& model, std::span<const double> params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kParamsVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.state_dim));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.action_dim));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.hidden_width));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.hidden_layers));
  put<std::uint32_t>(out, model.family == PolicyFamily::student_t ? 1U : 0U);
  put<std::uint32_t>(out, model.layer_norm_affine ? 1U : 0U);
  put<std::uint64_t>(out, params.size());
  for (double v : params) put<double>(out, v);
}

SavedParams load_params(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open params file " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw std::runtime_error("not a params file: " + path.string());
  const auto version = get<std::uint32_t>(in, path);
  if (version != kParamsVersion) {
    throw std::runtime_error("unsupported params version " + std::to_string(version));
  }
  SavedParams s;
  s.model.state_dim = get<std::uint32_t>(in, path);
  s.model.action_dim = get<std::uint32_t>(in, path);
  s.model.hidden_width = get<std::uint32_t>(in, path);
  s.model.hidden_layers = get<std::uint32_t>(in, path);
  s.model.family = get<std::uint32_t>(in, path) == 1U ? PolicyFamily::student_t : PolicyFamily::normal;
  s.model.layer_norm_affine = get<std::uint32_t>(in, path) == 1U;
  const auto count = get<std::uint64_t>(in, path);
  if (count != ActorCritic(s.model).parameter_count()) {
    throw std::runtime_error("params file count does not match its model spec: " + path.string());
  }
  s.params.resize(count);
  for (auto& v : s.params) v = get<double>(in, path);
  return s;
}

// --- comparison grid ---------------------------------------------------------

std::string Condition::label() const {
  return format_double(lambda1) + "_" + format_double(lambda2) + "_" + format_double(kappa);
}

std::vector<Condition> default_conditions() {
  return {{0.0, 0.0, 0.0}, {0.9, 0.0, 0.0}, {0.0, 0.9, 0.0},
          {0.9, 0.0, 1.0}, {0.0, 0.9, 1.0}, {0.5, 0.9, 1.0}};
}

std::vector<Condition> parse_conditions(std::string_view text) {
  if (text == "default") return default_conditions();
  std::vector<Condition> out;
  for (auto item : split(text, ',')) {
    const auto parts = split(item, ':');
    if (parts.size() != 3) {
      throw std::invalid_argument("condition '" + std::string(item) +
                                  "' is not of the form lambda1:lambda2:kappa");
    }
    Condition c{to_double(parts[0], "lambda1"), to_double(parts[1], "lambda2"),
                to_double(parts[2], "kappa")};
    out.push_back(c);
  }
  return out;
}

Aggregate summarize(const Condition& condition, std::span<const double> scores) {
  Aggregate agg;
  agg.condition = condition;
  agg.n = scores.size();
  if (scores.empty()) {
    agg.median = agg.q1 = agg.q3 = std::nan("");
  } else {
    agg.median = stats::median(scores);
    agg.q1 = stats::quantile(scores, 0.25);
    agg.q3 = stats::quantile(scores, 0.75);
  }
  return agg;
}

CompareResult compare(const RunConfig& base, const std::vector<Condition>& conditions,
                      const std::vector<std::uint64_t>& seeds, const fs::path& out_dir,
                      std::size_t jobs) {
  if (conditions.empty()) throw std::invalid_argument("compare: no conditions");
  if (seeds.empty()) throw std::invalid_argument("compare: no seeds");

  CompareResult result;
  for (const auto& c : conditions) {
    for (auto seed : seeds) {
      RunRow row;
      row.condition = c;
      row.seed = seed;
      if (!out_dir.empty()) row.dir = out_dir / c.label() / ("seed_" + std::to_string(seed));
      result.runs.push_back(row);
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < result.runs.size(); i = next++) {
      RunRow& row = result.runs[i];
      try {
        RunConfig cfg = base;
        cfg.lambda1 = row.condition.lambda1;
        cfg.lambda2 = row.condition.lambda2;
        cfg.kappa = row.condition.kappa;
        cfg.trace_kind.reset();
        cfg.seed = row.seed;
        const auto run = train(cfg, row.dir);
        const auto ev = evaluate(run.model, run.params, cfg);
        if (!row.dir.empty()) write_eval_csv(row.dir / "eval.csv", ev);
        row.score = ev.median;
        row.incidents = run.incidents;
        row.ok = true;
        row.status = "ok";
      } catch (const std::exception& e) {
        row.ok = false;
        row.status = "failed: " + sanitize(e.what());
      }
    }
  };
  if (jobs == 0) jobs = std::max(1U, std::thread::hardware_concurrency());
  jobs = std::min(jobs, result.runs.size());
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  for (const auto& c : conditions) {
    std::vector<double> scores;
    for (const auto& row : result.runs) {
      if (row.condition == c && row.ok) scores.push_back(row.score);
    }
    result.aggregates.push_back(summarize(c, scores));
  }
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_summary_csv(out_dir / "summary.csv", result);
  }
  return result;
}

void write_summary_csv(const fs::path& path, const CompareResult& result) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "row_type,condition,lambda1,lambda2,kappa,seed,status,score,incidents,n,median,q1,q3\n";
  auto cond = [&](const Condition& c) {
    out << c.label() << ',' << format_double(c.lambda1) << ',' << format_double(c.lambda2) << ','
        << format_double(c.kappa) << ',';
  };
  for (const auto& r : result.runs) {
    out << "run,";
    cond(r.condition);
    out << r.seed << ',' << r.status << ',' << (r.ok ? format_double(r.score) : "") << ','
        << r.incidents << ",,,,\n";
  }
  for (const auto& a : result.aggregates) {
    out << "aggregate,";
    cond(a.condition);
    out << ",,,," << a.n << ',';
    if (a.n > 0) {
      out << format_double(a.median) << ',' << format_double(a.q1) << ',' << format_double(a.q3);
    } else {
      out << ",,";
    }
    out << '\n';
  }
}

// --- learning-curve export ---------------------------------------------------

std::vector<EpisodeRecord> read_train_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kTrainHeader) {
    throw std::runtime_error("unexpected header in " + path.string());
  }
  std::vector<EpisodeRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 6) throw std::runtime_error("malformed row in " + path.string());
    const std::string where = path.string();
    EpisodeRecord r;
    r.episode = static_cast<std::size_t>(to_double(f[0], where));
    r.ret = to_double(f[1], where);
    r.steps = static_cast<std::size_t>(to_double(f[2], where));
    r.mean_lambda_d = to_double(f[3], where);
    r.mean_abs_td = to_double(f[4], where);
    r.wall_ms = to_double(f[5], where);
    out.push_back(r);
  }
  return out;
}

void emit_plotdata(const std::vector<fs::path>& run_dirs, std::ostream& out) {
  out << "condition,seed,episode,return,mean_lambda_d\n";
  for (const auto& dir : run_dirs) {
    const fs::path cfg_path = dir / "resolved.cfg";
    const fs::path csv_path = dir / "train.csv";
    if (!fs::exists(cfg_path)) throw std::runtime_error("missing file " + cfg_path.string());
    if (!fs::exists(csv_path)) throw std::runtime_error("missing file " + csv_path.string());
    const RunConfig cfg = parse_config_file(cfg_path);
    const std::string label = Condition{cfg.lambda1, cfg.lambda2, cfg.kappa}.label();
    for (const auto& r : read_train_csv(csv_path)) {
      out << label << ',' << cfg.seed << ',' << r.episode << ',' << format_double(r.ret) << ','
          << format_double(r.mean_lambda_d) << '\n';
    }
  }
}

}  // namespace etrace::harness
