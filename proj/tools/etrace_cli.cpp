// etrace: train, evaluate and compare online actor-critic runs.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "etrace/config.hpp"
#include "etrace/harness.hpp"

namespace fs = std::filesystem;
using namespace etrace::harness;

namespace {

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!path.empty()) cfg = parse_config_file(path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError(kv, "override must look like key=value");
    apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    const auto dash = item.find('-');
    if (dash != std::string::npos && dash > 0) {
      const auto lo = std::stoull(item.substr(0, dash));
      const auto hi = std::stoull(item.substr(dash + 1));
      for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    } else {
      seeds.push_back(std::stoull(item));
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return seeds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online actor-critic with adaptive eligibility traces"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "train one run");
  std::string train_config;
  std::optional<std::uint64_t> train_seed;
  std::string train_out = "run";
  std::vector<std::string> train_set;
  bool train_skip_eval = false;
  bool quiet = false;
  train_cmd->add_option("--config", train_config, "config file (key = value)");
  train_cmd->add_option("--seed", train_seed, "overrides the config seed");
  train_cmd->add_option("--out", train_out, "output directory")->capture_default_str();
  train_cmd->add_option("--set", train_set, "key=value override, repeatable");
  train_cmd->add_flag("--no-eval", train_skip_eval, "skip the evaluation after training");
  train_cmd->add_flag("-q,--quiet", quiet, "no per-episode progress");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate saved parameters");
  std::string eval_params;
  std::string eval_config;
  std::string eval_out;
  std::vector<std::string> eval_set;
  eval_cmd->add_option("--params", eval_params, "params.bin")->required();
  eval_cmd->add_option("--config", eval_config, "config file")->required();
  eval_cmd->add_option("--out", eval_out, "write eval.csv here (default: next to params)");
  eval_cmd->add_option("--set", eval_set, "key=value override, repeatable");

  // compare
  auto* cmp_cmd = app.add_subcommand("compare", "train and evaluate a condition grid");
  std::string cmp_config;
  std::string cmp_seeds = "1,2,3,4,5,6,7,8,9,10";
  std::string cmp_conditions = "default";
  std::string cmp_out = "compare";
  std::vector<std::string> cmp_set;
  std::size_t cmp_jobs = 0;
  cmp_cmd->add_option("--config", cmp_config, "base config file");
  cmp_cmd->add_option("--seeds", cmp_seeds, "comma list, ranges like 1-10 allowed")
      ->capture_default_str();
  cmp_cmd->add_option("--conditions", cmp_conditions,
                      "'default' or lambda1:lambda2:kappa triples, comma separated")
      ->capture_default_str();
  cmp_cmd->add_option("--out", cmp_out, "output directory")->capture_default_str();
  cmp_cmd->add_option("--jobs", cmp_jobs, "worker threads (0: all cores)");
  cmp_cmd->add_option("--set", cmp_set, "key=value override, repeatable");

  // plotdata
  auto* plot_cmd = app.add_subcommand("plotdata", "long-format learning curves");
  std::vector<std::string> plot_runs;
  std::string plot_out;
  plot_cmd->add_option("--runs", plot_runs, "run directories");
  plot_cmd->add_option("--out", plot_out, "output file (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      RunConfig cfg = load_config(train_config, train_set);
      if (train_seed) cfg.seed = *train_seed;
      cfg.validate();
      const fs::path out = train_out;
      const auto run = train(cfg, out, [&](const EpisodeRecord& r) {
        if (!quiet) {
          std::cerr << "episode " << r.episode << " return " << r.ret << " steps " << r.steps
                    << " lambda_d " << r.mean_lambda_d << '\n';
        }
      });
      std::cout << "trained " << run.episodes.size() << " episodes, " << run.updates
                << " updates, " << run.incidents << " rejected\n";
      if (!train_skip_eval) {
        const auto ev = evaluate(run.model, run.params, cfg);
        write_eval_csv(out / "eval.csv", ev);
        std::cout << "eval median return " << format_double(ev.median) << " over "
                  << ev.returns.size() << " episodes\n";
      }
    } else if (*eval_cmd) {
      RunConfig cfg = load_config(eval_config, eval_set);
      cfg.validate();
      const auto saved = load_params(eval_params);
      const auto ev = evaluate(saved.model, saved.params, cfg);
      const fs::path out = eval_out.empty() ? fs::path(eval_params).parent_path() : fs::path(eval_out);
      if (!out.empty()) fs::create_directories(out);
      write_eval_csv(out / "eval.csv", ev);
      std::cout << "eval median return " << format_double(ev.median) << " over "
                << ev.returns.size() << " episodes\n";
    } else if (*cmp_cmd) {
      RunConfig cfg = load_config(cmp_config, cmp_set);
      cfg.validate();
      const auto result = compare(cfg, parse_conditions(cmp_conditions), parse_seeds(cmp_seeds),
                                  cmp_out, cmp_jobs);
      for (const auto& a : result.aggregates) {
        std::cout << a.condition.label() << "  n=" << a.n << "  median " << format_double(a.median)
                  << "  q1 " << format_double(a.q1) << "  q3 " << format_double(a.q3) << '\n';
      }
      std::cout << "summary written to " << (fs::path(cmp_out) / "summary.csv").string() << '\n';
    } else if (*plot_cmd) {
      std::vector<fs::path> dirs(plot_runs.begin(), plot_runs.end());
      if (plot_out.empty()) {
        emit_plotdata(dirs, std::cout);
      } else {
        std::ofstream out(plot_out);
        if (!out) throw std::runtime_error("cannot write " + plot_out);
        emit_plotdata(dirs, out);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
