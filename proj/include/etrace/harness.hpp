#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "etrace/actor_critic.hpp"
#include "etrace/config.hpp"

namespace etrace::harness {

/// splitmix64 of (base, stream); used to give each consumer of randomness
/// in a run its own independent seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Stream ids passed to derive_seed(run seed, id) by train() and evaluate().
/// Episode k of training resets the environment with
/// derive_seed(derive_seed(seed, kEnvStream), k); evaluation episode i with
/// derive_seed(derive_seed(seed, kEvalStream), i).
namespace streams {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kLearner = 2;
inline constexpr std::uint64_t kAct = 3;
inline constexpr std::uint64_t kEnv = 4;
inline constexpr std::uint64_t kEval = 5;
}  // namespace streams

struct EpisodeRecord {
  std::size_t episode = 0;
  double ret = 0.0;
  std::size_t steps = 0;
  double mean_lambda_d = 1.0;
  double mean_abs_td = 0.0;
  double wall_ms = 0.0;
};

struct RunResult {
  RunConfig config;
  ModelSpec model;
  std::vector<double> params;
  std::vector<EpisodeRecord> episodes;
  std::uint64_t updates = 0;
  std::uint64_t incidents = 0;  // rejected learner steps
};

inline constexpr std::string_view kTrainHeader =
    "episode,return,steps,mean_lambda_d,mean_abs_td,wall_ms";
inline constexpr std::string_view kEvalHeader = "episode,return,steps";

/// Runs config.episodes episodes of online learning. With a non-empty
/// out_dir, writes resolved.cfg, then train.csv one flushed line per
/// episode, then params.bin. Rejected learner steps are counted, not fatal.
RunResult train(const RunConfig& config, const std::filesystem::path& out_dir = {},
                const std::function<void(const EpisodeRecord&)>& on_episode = {});

struct EvalResult {
  std::vector<double> returns;
  std::vector<std::size_t> steps;
  double median = 0.0;
};

/// eval_episodes episodes acting at the policy location, no learning.
/// task_episode selects the task phase for reach_switch (< 0: the phase
/// after config.episodes training episodes).
EvalResult evaluate(const ModelSpec& model, std::span<const double> params,
                    const RunConfig& config, long task_episode = -1);

void write_eval_csv(const std::filesystem::path& path, const EvalResult& result);

/// Binary parameter dump: "ETRPARAM", u32 version, the model spec fields,
/// u64 count, then count little-endian doubles.
void save_params(const std::filesystem::path& path, const ModelSpec& model,
                 std::span<const double> params);

struct SavedParams {
  ModelSpec model;
  std::vector<double> params;
};
SavedParams load_params(const std::filesystem::path& path);

struct Condition {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double kappa = 0.0;

  /// e.g. "0.5_0.9_1"; also the run directory name.
  std::string label() const;
  bool operator==(const Condition&) const = default;
};

/// (0,0,0) (0.9,0,0) (0,0.9,0) (0.9,0,1) (0,0.9,1) (0.5,0.9,1)
std::vector<Condition> default_conditions();

/// "default", or comma-separated colon triples such as "0:0:0,0.5:0.9:1".
std::vector<Condition> parse_conditions(std::string_view text);

struct RunRow {
  Condition condition;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string status;
  double score = 0.0;  // evaluation median
  std::uint64_t incidents = 0;
  std::filesystem::path dir;
};

struct Aggregate {
  Condition condition;
  std::size_t n = 0;  // successful runs
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

/// Median and quartiles (type 7) of the successful scores; NaN when empty.
Aggregate summarize(const Condition& condition, std::span<const double> scores);

struct CompareResult {
  std::vector<RunRow> runs;  // condition-major, then seed
  std::vector<Aggregate> aggregates;
};

/// Train + evaluate for every (condition, seed) pair, each in
/// out_dir/<label>/seed_<k>, on up to `jobs` threads (0: hardware
/// concurrency). Writes out_dir/summary.csv. Failed runs are recorded with
/// their error and left out of the aggregates.
CompareResult compare(const RunConfig& base, const std::vector<Condition>& conditions,
                      const std::vector<std::uint64_t>& seeds,
                      const std::filesystem::path& out_dir, std::size_t jobs = 0);

void write_summary_csv(const std::filesystem::path& path, const CompareResult& result);

/// Long-format learning curves from run directories (each holding
/// resolved.cfg and train.csv): condition,seed,episode,return,mean_lambda_d.
void emit_plotdata(const std::vector<std::filesystem::path>& run_dirs, std::ostream& out);

/// Rows of train.csv, parsed back.
std::vector<EpisodeRecord> read_train_csv(const std::filesystem::path& path);

}  // namespace etrace::harness
