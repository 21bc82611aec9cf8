// Experiment CLI: k-space sampling policies and reconstructors, trained and
// audited on synthetic phantoms.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ksrl/experiment.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
  std::string out;
  bool force = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON config file");
  cmd->add_option("--set", args.overrides, "override, e.g. env.accel=8 (repeatable)");
  cmd->add_option("--seed", args.seed, "root seed override");
  cmd->add_option("--out", args.out, "output directory");
  cmd->add_flag("--force", args.force, "overwrite an existing result directory");
}

int dispatch(const std::string& mode, CommonArgs& args) {
  std::vector<std::string> overrides;
  overrides.push_back("mode=" + mode);
  if (args.seed >= 0) {
    overrides.push_back("seed=" + std::to_string(args.seed));
    overrides.push_back("train.seed=" + std::to_string(args.seed));
  }
  if (!args.out.empty()) overrides.push_back("out=" + args.out);
  if (args.force) overrides.push_back("force=true");
  overrides.insert(overrides.end(), args.overrides.begin(), args.overrides.end());

  std::string error;
  const int code = ksrl::run_from_file(args.config_path, overrides, &error);
  if (code != ksrl::kExitOk) std::cerr << "error: " << error << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sequential k-space sampling: training, baselines and oracle audits"};
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> modes = {
      {"gen-data", "generate and save a phantom dataset"},
      {"pretrain", "pretrain a reconstructor against the terminal heuristic"},
      {"train-l2s", "pretrain, then train the sparse-reward sampler"},
      {"train-l2sr", "alternating sampler/reconstructor training"},
      {"baseline-dense", "dense-reward policy-gradient baseline"},
      {"baseline-random", "uniform random sampling baseline"},
      {"greedy-oracle", "one-step oracle policy with ground-truth access"},
      {"eval", "evaluate saved checkpoints"},
      {"oracle-check", "run the brute-force desk-scale audits"},
  };

  std::vector<CommonArgs> args(modes.size());
  std::vector<std::string> mode_names;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    CLI::App* cmd = app.add_subcommand(modes[i].first, modes[i].second);
    add_common(cmd, args[i]);
    mode_names.push_back(modes[i].first);
  }

  // plot-data reads results.json files and writes CSV
  std::vector<std::string> plot_inputs;
  std::string plot_kind = "histogram";
  std::string plot_out = "plot.csv";
  CLI::App* plot = app.add_subcommand("plot-data", "emit CSV plot data from results files");
  plot->add_option("inputs", plot_inputs, "results.json files")->required();
  plot->add_option("--kind", plot_kind, "histogram | round-curve | ablation");
  plot->add_option("--out", plot_out, "output CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (plot->parsed()) {
      std::vector<nlohmann::json> docs;
      for (const auto& path : plot_inputs) {
        std::ifstream is(path);
        if (!is) {
          std::cerr << "error: cannot open " << path << "\n";
          return ksrl::kExitConfig;
        }
        docs.push_back(nlohmann::json::parse(is));
      }
      ksrl::PlotKind kind;
      if (plot_kind == "histogram")
        kind = ksrl::PlotKind::kHistogram;
      else if (plot_kind == "round-curve")
        kind = ksrl::PlotKind::kRoundCurve;
      else if (plot_kind == "ablation")
        kind = ksrl::PlotKind::kAblation;
      else {
        std::cerr << "error: unknown plot kind '" << plot_kind << "'\n";
        return ksrl::kExitConfig;
      }
      ksrl::emit_plot_data(docs, kind, plot_out);
      return ksrl::kExitOk;
    }

    for (std::size_t i = 0; i < modes.size(); ++i) {
      CLI::App* cmd = app.get_subcommand(mode_names[i]);
      if (cmd->parsed()) {
        std::string mode = modes[i].first;
        if (mode == "train-l2s") mode = "l2s";
        if (mode == "train-l2sr") mode = "l2sr";
        return dispatch(mode, args[i]);
      }
    }
  } catch (const nlohmann::json::parse_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ksrl::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ksrl::kExitFailure;
  }
  return ksrl::kExitFailure;
}
