#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "szl/experiment.hpp"
#include "szl/parallel.hpp"

namespace fs = std::filesystem;

namespace {

// --config accepts a file path or the name of a built-in config.
szl::ExperimentConfig resolve_config(const std::string& spec) {
  for (const std::string& name : szl::builtin_config_names())
    if (spec == name) return szl::parse_config(szl::builtin_config_text(name));
  return szl::load_config(spec);
}

void apply_overrides(szl::ExperimentConfig& cfg, long k_min, long k_max) {
  if (k_min > 0) cfg.k_min = k_min;
  if (k_max > 0) cfg.k_max = k_max;
  szl::validate(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Szego kernel states on Legendrian submanifolds: experiments and asymptotic checks"};
  app.require_subcommand(1);

  std::string config;
  std::string out_dir;
  int threads = szl::default_threads();
  long k_min = 0, k_max = 0;
  bool no_cache = false;

  auto* run = app.add_subcommand("run", "run an experiment and write results, report and cache");
  run->add_option("--config", config, "config file or built-in name")->required();
  run->add_option("--out-dir", out_dir, "output directory (default: from config)");
  run->add_option("--threads", threads, "worker threads (default: SZL_THREADS or hardware)")->check(CLI::PositiveNumber);
  run->add_option("--k-min", k_min, "override k_range.min")->check(CLI::PositiveNumber);
  run->add_option("--k-max", k_max, "override k_range.max")->check(CLI::PositiveNumber);
  run->add_flag("--no-cache", no_cache, "ignore and do not write the value cache");

  auto* val = app.add_subcommand("validate", "parse and validate a config");
  val->add_option("--config", config, "config file or built-in name")->required();
  val->add_option("--k-min", k_min, "override k_range.min")->check(CLI::PositiveNumber);
  val->add_option("--k-max", k_max, "override k_range.max")->check(CLI::PositiveNumber);

  std::vector<std::string> kinds{"growth", "profile", "pairing", "decay"};
  auto* plots = app.add_subcommand("emit-plots", "write plot tables from results.json in the output directory");
  plots->add_option("--out-dir", out_dir, "directory holding results.json")->required();
  plots->add_option("--kind", kinds, "growth, profile, pairing, decay (default: all that apply)");

  auto* list = app.add_subcommand("list-builtins", "list built-in Legendrian families and configs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      szl::ExperimentConfig cfg = resolve_config(config);
      apply_overrides(cfg, k_min, k_max);
      szl::RunOptions opt;
      opt.threads = threads;
      opt.out_dir = out_dir.empty() ? fs::path(cfg.output_dir) : fs::path(out_dir);
      opt.use_cache = !no_cache;
      szl::ResultSet rs = szl::run(cfg, opt);
      for (const std::string& line : rs.report_lines) std::cout << line << "\n";
      std::cout << "results written to " << opt.out_dir.string() << "\n";
      return rs.all_passed ? 0 : 2;
    }
    if (val->parsed()) {
      szl::ExperimentConfig cfg = resolve_config(config);
      apply_overrides(cfg, k_min, k_max);
      std::cout << "config " << cfg.id << " is valid (hash " << szl::config_hash(cfg) << ", " << cfg.ks().size()
                << " k values, " << cfg.probes.size() << " probes)\n";
      return 0;
    }
    if (plots->parsed()) {
      szl::ResultSet rs = szl::read_results(out_dir);
      const bool explicit_kinds = plots->count("--kind") > 0;
      int written = 0;
      for (const std::string& kind : kinds) {
        try {
          fs::path f = szl::emit_plot_data(rs, kind, fs::path(out_dir) / "plots");
          std::cout << "wrote " << f.string() << "\n";
          ++written;
        } catch (const szl::Error& e) {
          if (explicit_kinds) throw;
        }
      }
      if (written == 0) throw szl::Error("no plot tables apply to these results");
      return 0;
    }
    if (list->parsed()) {
      std::cout << "legendrian families:\n";
      for (const std::string& n : szl::builtin_names()) std::cout << "  " << n << "\n";
      std::cout << "configs:\n";
      for (const std::string& n : szl::builtin_config_names()) std::cout << "  " << n << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
