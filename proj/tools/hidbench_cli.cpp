// hidbench: run pipeline stages from a config file and render reports.
//
//   hidbench all     --config run.json [--dataset D] [--seed N] [--mock-fixtures DIR] [--out DIR]
//   hidbench ingest|segment|detect|eval ...      (same flags; eval also takes --predictions)
//   hidbench run --stage <stage|all> ...
//   hidbench report metrics.csv [more.csv ...] [--out DIR] [--regime-min-datasets N]

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hidbench/llm/http_backend.hpp"
#include "hidbench/pipeline.hpp"
#include "hidbench/report.hpp"

namespace fs = std::filesystem;
using namespace hidbench;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::string> dataset;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mock_fixtures;
  std::optional<std::string> out;
  std::optional<int> vote_k;
  bool single_shot = false;
  bool trim = false;
  std::optional<std::string> predictions;
  std::string stage = "all";
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_stage) {
  cmd->add_option("--config", f.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--dataset", f.dataset, "Only process this dataset");
  cmd->add_option("--seed", f.seed, "Root seed (overrides config)");
  cmd->add_option("--mock-fixtures", f.mock_fixtures, "Replay responses from this fixture directory")
      ->check(CLI::ExistingDirectory);
  cmd->add_option("--out", f.out, "Output directory (overrides config)");
  cmd->add_option("--vote-k", f.vote_k, "Samples per investigation (1, 3, 5 or 7)");
  cmd->add_flag("--single-shot", f.single_shot, "One investigation sample, no voting");
  cmd->add_flag("--trim-over-budget", f.trim, "Trim window context instead of failing when over budget");
  cmd->add_option("--predictions", f.predictions, "eval: score these event ids instead of the detection report")
      ->check(CLI::ExistingFile);
  if (with_stage)
    cmd->add_option("--stage", f.stage, "ingest, segment, detect, eval or all")
        ->check(CLI::IsMember({"ingest", "segment", "detect", "eval", "all"}));
}

int run_stages(const CommonFlags& f, const std::string& stage) {
  auto cfg = pipeline::RunConfig::load(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (f.mock_fixtures) cfg.mock_fixtures = fs::absolute(*f.mock_fixtures).string();
  if (f.out) cfg.output_dir = *f.out;
  if (f.vote_k) cfg.detection.vote_k = *f.vote_k;
  if (f.single_shot) cfg.detection.majority_voting = false;
  if (f.trim) cfg.trim_over_budget = true;
  cfg.validate();

  pipeline::Runner runner(cfg, [] { return std::make_unique<llm::HttpBackend>(); });
  pipeline::StageOptions opts;
  opts.predictions = f.predictions;
  const auto errors = runner.run(pipeline::stages_from_string(stage), f.dataset, opts);
  for (const auto& e : errors) std::cerr << "error: " << e << "\n";
  return errors.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LLM host intrusion detection evaluation harness"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string chosen_stage;
  for (const char* name : {"ingest", "segment", "detect", "eval", "all"}) {
    auto* cmd = app.add_subcommand(name, std::string(name) == "all" ? std::string("Run every stage in order") : std::string("Run the ") + name + " stage");
    add_common(cmd, flags, false);
    cmd->callback([&, name] { chosen_stage = name; });
  }
  auto* run_cmd = app.add_subcommand("run", "Run the stage given by --stage");
  add_common(run_cmd, flags, true);
  run_cmd->callback([&] { chosen_stage = flags.stage; });

  std::vector<std::string> metric_files;
  std::optional<std::string> report_out;
  std::size_t min_datasets = 9;
  auto* report_cmd = app.add_subcommand("report", "Merge metrics CSV files and render tables");
  report_cmd->add_option("files", metric_files, "Metrics CSV files")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--out", report_out, "Write metrics.csv, report.txt and regimes.csv here");
  report_cmd->add_option("--regime-min-datasets", min_datasets,
                         "Datasets a model needs before a regime is assigned");

  CLI11_PARSE(app, argc, argv);

  try {
    if (report_cmd->parsed()) {
      std::vector<std::vector<report::MetricsRow>> files;
      for (const auto& p : metric_files) files.push_back(report::parse_metrics_csv(text::read_file(p), p));
      const auto rows = report::merge_metrics(files);
      const auto table = report::render_table(rows, min_datasets);
      if (report_out) {
        fs::create_directories(*report_out);
        text::write_file((fs::path(*report_out) / "metrics.csv").string(), report::metrics_csv(rows));
        text::write_file((fs::path(*report_out) / "report.txt").string(), table);
        text::write_file((fs::path(*report_out) / "regimes.csv").string(),
                         report::regimes_csv(report::regimes(rows, min_datasets)));
      }
      std::cout << table;
      return 0;
    }
    return run_stages(flags, chosen_stage);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
