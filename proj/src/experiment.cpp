#include "ksrl/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "ksrl/oracle.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ksrl {

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.contains(key))
      throw InvalidConfigError("config: unknown key '" + where + key + "'");
  }
}

ExperimentMode parse_mode(const std::string& s) {
  if (s == "gen-data") return ExperimentMode::kGenData;
  if (s == "pretrain") return ExperimentMode::kPretrain;
  if (s == "l2s") return ExperimentMode::kL2s;
  if (s == "l2sr") return ExperimentMode::kL2sr;
  if (s == "baseline-dense") return ExperimentMode::kBaselineDense;
  if (s == "baseline-random") return ExperimentMode::kBaselineRandom;
  if (s == "greedy-oracle") return ExperimentMode::kGreedyOracle;
  if (s == "eval") return ExperimentMode::kEval;
  if (s == "oracle-check") return ExperimentMode::kOracleCheck;
  throw InvalidConfigError("config: unknown mode '" + s + "'");
}

// Atomic write: temp file in the same directory, then rename.
void write_file_atomic(const fs::path& path, const std::string& contents) {
  const fs::path tmp = path.parent_path() / (path.filename().string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + tmp.string());
    os << contents;
    if (!os) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

}  // namespace

MetricConfig parse_metric_config(const json& j) {
  check_keys(j, {"kind", "window", "sigma", "k1", "k2", "dynamic_range"}, "metric.");
  MetricConfig m;
  if (j.contains("kind")) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "ssim")
      m.kind = MetricKind::kSsim;
    else if (kind == "neg_mse")
      m.kind = MetricKind::kNegMse;
    else
      throw InvalidConfigError("config: unknown metric kind '" + kind + "'");
  }
  m.window = j.value("window", m.window);
  m.sigma = j.value("sigma", m.sigma);
  m.k1 = j.value("k1", m.k1);
  m.k2 = j.value("k2", m.k2);
  m.dynamic_range = j.value("dynamic_range", m.dynamic_range);
  return m;
}

EnvConfig parse_env_config(const json& j) {
  check_keys(j, {"n", "accel", "init_accel", "preset", "discount", "reward_mode", "metric"},
             "env.");
  EnvConfig c;
  c.n = j.value("n", c.n);
  c.accel = j.value("accel", c.accel);
  const std::string preset = j.value("preset", std::string("base"));
  if (preset == "base") {
    c.preset = HorizonPreset::kBase;
    c.init_accel = 2.0 * c.accel;
  } else if (preset == "long") {
    c.preset = HorizonPreset::kLong;
    c.init_accel = 8.0 * c.accel;
  } else if (preset == "custom") {
    c.preset = HorizonPreset::kCustom;
    if (!j.contains("init_accel"))
      throw InvalidConfigError("config: custom preset requires env.init_accel");
  } else {
    throw InvalidConfigError("config: unknown horizon preset '" + preset + "'");
  }
  c.init_accel = j.value("init_accel", c.init_accel);
  c.discount = j.value("discount", c.discount);
  const std::string mode = j.value("reward_mode", std::string("sparse"));
  if (mode == "sparse")
    c.reward_mode = RewardMode::kSparse;
  else if (mode == "dense")
    c.reward_mode = RewardMode::kDense;
  else
    throw InvalidConfigError("config: unknown reward mode '" + mode + "'");
  if (j.contains("metric")) c.metric = parse_metric_config(j.at("metric"));
  return c;
}

TrainConfig parse_train_config(const json& j) {
  check_keys(j,
             {"batch_size", "pretrain_iters", "retrain_iters", "a2c_steps", "update_timestep",
              "lr_policy", "lr_recon", "lr_decay", "alternations", "entropy_coef", "value_coef",
              "traj_per_image", "policy_feat_channels", "policy_hidden", "recon_channels",
              "seed"},
             "train.");
  TrainConfig c;
  c.batch_size = j.value("batch_size", c.batch_size);
  c.pretrain_iters = j.value("pretrain_iters", c.pretrain_iters);
  c.retrain_iters = j.value("retrain_iters", c.retrain_iters);
  c.a2c_steps = j.value("a2c_steps", c.a2c_steps);
  c.update_timestep = j.value("update_timestep", c.update_timestep);
  c.lr_policy = j.value("lr_policy", c.lr_policy);
  c.lr_recon = j.value("lr_recon", c.lr_recon);
  c.lr_decay = j.value("lr_decay", c.lr_decay);
  c.alternations = j.value("alternations", c.alternations);
  c.entropy_coef = j.value("entropy_coef", c.entropy_coef);
  c.value_coef = j.value("value_coef", c.value_coef);
  c.traj_per_image = j.value("traj_per_image", c.traj_per_image);
  c.policy_feat_channels = j.value("policy_feat_channels", c.policy_feat_channels);
  c.policy_hidden = j.value("policy_hidden", c.policy_hidden);
  c.recon_channels = j.value("recon_channels", c.recon_channels);
  c.seed = j.value("seed", c.seed);
  return c;
}

PhantomConfig parse_phantom_config(const json& j) {
  check_keys(j,
             {"n", "count", "ellipses_min", "ellipses_max", "intensity_min", "intensity_max",
              "smooth_sigma", "seed"},
             "phantom.");
  PhantomConfig c;
  c.n = j.value("n", c.n);
  c.count = j.value("count", c.count);
  c.ellipses_min = j.value("ellipses_min", c.ellipses_min);
  c.ellipses_max = j.value("ellipses_max", c.ellipses_max);
  c.intensity_min = j.value("intensity_min", c.intensity_min);
  c.intensity_max = j.value("intensity_max", c.intensity_max);
  c.smooth_sigma = j.value("smooth_sigma", c.smooth_sigma);
  c.seed = j.value("seed", c.seed);
  return c;
}

json default_config() {
  return json{
      {"mode", "l2s"},
      {"seed", 0},
      {"out", "results/run"},
      {"force", false},
      {"data", {{"path", "data/phantoms.ksd"}, {"train_frac", 0.6667}, {"val_frac", 0.0}}},
      {"phantom",
       {{"n", 32},
        {"count", 192},
        {"ellipses_min", 2},
        {"ellipses_max", 6},
        {"intensity_min", 0.2},
        {"intensity_max", 0.9},
        {"smooth_sigma", 0.8},
        {"seed", 7}}},
      {"env",
       {{"n", 32},
        {"accel", 4.0},
        {"preset", "base"},
        {"discount", 1.0},
        {"reward_mode", "sparse"},
        {"metric",
         {{"kind", "ssim"},
          {"window", 7},
          {"sigma", 1.5},
          {"k1", 0.01},
          {"k2", 0.03},
          {"dynamic_range", 0.0}}}}},
      {"train",
       {{"batch_size", 8},
        {"pretrain_iters", 400},
        {"retrain_iters", 150},
        {"a2c_steps", 20000},
        {"update_timestep", 0},
        {"lr_policy", 3e-4},
        {"lr_recon", 3e-4},
        {"lr_decay", 3.0},
        {"alternations", 5},
        {"entropy_coef", 0.01},
        {"value_coef", 0.5},
        {"traj_per_image", 1},
        {"policy_feat_channels", 4},
        {"policy_hidden", 32},
        {"recon_channels", 8},
        {"seed", 0}}},
      {"eval", {{"episodes", 0}, {"policy_ckpt", ""}, {"recon_ckpt", ""}}},
      {"oracle", {{"n", 6}, {"instances", 200}, {"seed", 0}}},
  };
}

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw InvalidConfigError("override must have the form key.path=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw InvalidConfigError("override has an empty key segment: " + assignment);
    if (dot == std::string::npos) {
      json value;
      try {
        value = json::parse(raw);
      } catch (const json::parse_error&) {
        value = raw;  // plain string
      }
      (*node)[key] = value;
      break;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

json eval_summary_to_json(const EvalSummary& s) {
  return json{{"episodes", s.episodes},
              {"mean_ssim", s.mean_ssim},
              {"std_ssim", s.std_ssim},
              {"mean_psnr", s.mean_psnr},
              {"std_psnr", s.std_psnr},
              {"per_image_ssim", s.per_image_ssim},
              {"per_image_psnr", s.per_image_psnr},
              {"policy_calls", s.policy_calls},
              {"recon_calls", s.recon_calls}};
}

json train_report_to_json(const TrainReport& r) {
  json phases = json::array();
  for (const auto& p : r.phases)
    phases.push_back(json{{"phase", p.phase}, {"eval", eval_summary_to_json(p.eval)}});
  return json{{"loss_curve", r.loss_curve},
              {"return_curve", r.return_curve},
              {"phases", phases},
              {"lr_schedule", r.lr_schedule},
              {"policy_calls", r.policy_calls},
              {"recon_calls", r.recon_calls},
              {"seed", r.seed}};
}

EvalSummary evaluate_greedy_oracle(const Reconstructor& recon,
                                   const std::vector<RealImage>& images,
                                   const EnvConfig& env_cfg) {
  if (images.empty()) throw InvalidInputError("evaluate_greedy_oracle: empty image set");
  EvalSummary s;
  s.episodes = static_cast<int>(images.size());
  recon.reset_calls();
  Rng rng(0);
  for (const auto& x : images) {
    GreedyOraclePolicy policy(x, recon, env_cfg);
    Trajectory traj = rollout(policy, x, env_cfg, recon, rng, ActionSelect::kArgmax);
    const MetricConfig metric = resolve_metric(env_cfg.metric, x);
    s.per_image_ssim.push_back(similarity(traj.terminal_recon, x, metric));
    s.per_image_psnr.push_back(psnr(traj.terminal_recon, x, metric.dynamic_range));
  }
  s.recon_calls = recon.calls();
  double mean = 0.0;
  for (double v : s.per_image_ssim) mean += v;
  mean /= static_cast<double>(s.per_image_ssim.size());
  double var = 0.0;
  for (double v : s.per_image_ssim) var += (v - mean) * (v - mean);
  s.mean_ssim = mean;
  s.std_ssim = std::sqrt(var / static_cast<double>(s.per_image_ssim.size()));
  std::vector<double> capped = s.per_image_psnr;
  for (auto& v : capped) v = std::min(v, 200.0);
  mean = 0.0;
  for (double v : capped) mean += v;
  mean /= static_cast<double>(capped.size());
  var = 0.0;
  for (double v : capped) var += (v - mean) * (v - mean);
  s.mean_psnr = mean;
  s.std_psnr = std::sqrt(var / static_cast<double>(capped.size()));
  return s;
}

namespace {

struct RunContext {
  json config;
  ExperimentMode mode;
  fs::path out_dir;
  json summary;      // reproducible content
  json timing;       // excluded from reproducibility guarantees
  std::string dataset_hash;
};

Dataset load_or_fail(const json& config) {
  const std::string path = config.at("data").at("path").get<std::string>();
  if (!fs::exists(path))
    throw InvalidConfigError("config: dataset file not found: " + path +
                             " (run gen-data first)");
  return load_dataset(path);
}

void prepare_out_dir(RunContext& ctx) {
  const bool force = ctx.config.value("force", false);
  if (fs::exists(ctx.out_dir / "results.json") && !force)
    throw InvalidConfigError("output directory already has results: " + ctx.out_dir.string() +
                             " (pass --force to overwrite)");
  fs::create_directories(ctx.out_dir);
}

void finish(RunContext& ctx) {
  json results{{"schema", "ksrl-results-v1"},
               {"mode", ctx.config.at("mode")},
               {"config_echo", ctx.config},
               {"config_hash", hex64(fnv1a64(ctx.config.dump().data(), ctx.config.dump().size()))},
               {"dataset_hash", ctx.dataset_hash},
               {"summary", ctx.summary},
               {"timing", ctx.timing}};
  write_file_atomic(ctx.out_dir / "results.json", results.dump(2) + "\n");

  std::ostringstream table;
  table << "mode: " << ctx.config.at("mode").get<std::string>() << "\n"
        << "config_hash: " << results["config_hash"].get<std::string>() << "\n"
        << "dataset_hash: " << ctx.dataset_hash << "\n";
  if (ctx.summary.contains("final_eval")) {
    const json& e = ctx.summary["final_eval"];
    table << "episodes: " << e["episodes"] << "\n"
          << "mean SSIM: " << e["mean_ssim"] << " +- " << e["std_ssim"] << "\n"
          << "mean PSNR: " << e["mean_psnr"] << " +- " << e["std_psnr"] << "\n"
          << "policy calls: " << e["policy_calls"] << ", recon calls: " << e["recon_calls"]
          << "\n";
  }
  if (ctx.summary.contains("all_ok")) table << "audits ok: " << ctx.summary["all_ok"] << "\n";
  write_file_atomic(ctx.out_dir / "summary.txt", table.str());
}

void run_gen_data(RunContext& ctx) {
  const PhantomConfig pcfg = parse_phantom_config(ctx.config.at("phantom"));
  Dataset d = generate_phantoms(pcfg);
  const json& data_cfg = ctx.config.at("data");
  check_keys(data_cfg, {"path", "train_frac", "val_frac"}, "data.");
  assign_splits(d, data_cfg.value("train_frac", 0.6667), data_cfg.value("val_frac", 0.0));
  const std::string path = data_cfg.at("path").get<std::string>();
  if (const fs::path parent = fs::path(path).parent_path(); !parent.empty())
    fs::create_directories(parent);
  save_dataset(d, path);
  ctx.dataset_hash = hex64(d.content_hash());
  ctx.summary = json{{"dataset_path", path},
                     {"count", d.images.size()},
                     {"n", d.n},
                     {"train", d.indices_of(Split::kTrain).size()},
                     {"val", d.indices_of(Split::kVal).size()},
                     {"test", d.indices_of(Split::kTest).size()},
                     {"hash", ctx.dataset_hash}};
}

void run_training_mode(RunContext& ctx) {
  const Dataset data = load_or_fail(ctx.config);
  ctx.dataset_hash = hex64(data.content_hash());
  EnvConfig env_cfg = parse_env_config(ctx.config.at("env"));
  TrainConfig train_cfg = parse_train_config(ctx.config.at("train"));
  if (ctx.config.contains("seed") && !ctx.config.at("train").contains("seed"))
    train_cfg.seed = ctx.config.at("seed").get<std::uint64_t>();
  if (env_cfg.n != data.n) throw InvalidConfigError("config: env.n does not match the dataset");

  TrainedPair result;
  switch (ctx.mode) {
    case ExperimentMode::kL2s:
      result = l2s(data, env_cfg, train_cfg);
      break;
    case ExperimentMode::kL2sr:
      result = l2sr(data, env_cfg, train_cfg);
      break;
    case ExperimentMode::kBaselineDense:
      result = baseline_dense(data, env_cfg, train_cfg);
      break;
    case ExperimentMode::kPretrain: {
      train_cfg.a2c_steps = 0;
      result = l2s(data, env_cfg, train_cfg);
      break;
    }
    default:
      throw InvalidConfigError("run_training_mode: bad mode");
  }

  save_policy_checkpoint(result.policy, (ctx.out_dir / "policy.ckpt").string());
  save_recon_checkpoint(result.recon, (ctx.out_dir / "recon.ckpt").string());

  ctx.summary = json{{"report", train_report_to_json(result.report)}};
  if (!result.report.phases.empty())
    ctx.summary["final_eval"] = eval_summary_to_json(result.report.phases.back().eval);
  json timing = json::array();
  for (const auto& p : result.report.phases)
    timing.push_back(json{{"phase", p.phase}, {"seconds", p.seconds}});
  ctx.timing = json{{"phases", timing}};
}

void run_baseline_random(RunContext& ctx) {
  const Dataset data = load_or_fail(ctx.config);
  ctx.dataset_hash = hex64(data.content_hash());
  EnvConfig env_cfg = parse_env_config(ctx.config.at("env"));
  env_cfg.reward_mode = RewardMode::kSparse;
  TrainConfig train_cfg = parse_train_config(ctx.config.at("train"));
  if (ctx.config.contains("seed") && !ctx.config.at("train").contains("seed"))
    train_cfg.seed = ctx.config.at("seed").get<std::uint64_t>();

  // pretrained terminal-heuristic reconstructor, uniform random sampler
  train_cfg.a2c_steps = 0;
  TrainedPair pre = l2s(data, env_cfg, train_cfg);
  const NeuralReconstructor recon(pre.recon);
  UniformRandomPolicy policy;
  std::vector<RealImage> test = data.images_of(Split::kTest);
  if (test.empty()) test = data.images;
  // the random baseline samples stochastically, so evaluation uses sampled
  // actions under a fixed seed
  EvalSummary s;
  s.episodes = static_cast<int>(test.size());
  policy.reset_calls();
  recon.reset_calls();
  Rng rng(train_cfg.seed);
  for (std::size_t e = 0; e < test.size(); ++e) {
    const RealImage& x = test[e];
    Rng episode_rng = rng.split(static_cast<std::uint64_t>(e));
    Trajectory traj = rollout(policy, x, env_cfg, recon, episode_rng, ActionSelect::kSample);
    const MetricConfig metric = resolve_metric(env_cfg.metric, x);
    s.per_image_ssim.push_back(similarity(traj.terminal_recon, x, metric));
    s.per_image_psnr.push_back(psnr(traj.terminal_recon, x, metric.dynamic_range));
  }
  s.policy_calls = policy.calls();
  s.recon_calls = recon.calls();
  double mean = 0.0;
  for (double v : s.per_image_ssim) mean += v;
  s.mean_ssim = mean / static_cast<double>(s.per_image_ssim.size());
  double var = 0.0;
  for (double v : s.per_image_ssim) var += (v - s.mean_ssim) * (v - s.mean_ssim);
  s.std_ssim = std::sqrt(var / static_cast<double>(s.per_image_ssim.size()));
  std::vector<double> capped = s.per_image_psnr;
  for (auto& v : capped) v = std::min(v, 200.0);
  mean = 0.0;
  for (double v : capped) mean += v;
  s.mean_psnr = mean / static_cast<double>(capped.size());
  var = 0.0;
  for (double v : capped) var += (v - s.mean_psnr) * (v - s.mean_psnr);
  s.std_psnr = std::sqrt(var / static_cast<double>(capped.size()));

  save_recon_checkpoint(pre.recon, (ctx.out_dir / "recon.ckpt").string());
  ctx.summary = json{{"final_eval", eval_summary_to_json(s)},
                     {"report", train_report_to_json(pre.report)}};
}

void run_greedy_oracle(RunContext& ctx) {
  const Dataset data = load_or_fail(ctx.config);
  ctx.dataset_hash = hex64(data.content_hash());
  EnvConfig env_cfg = parse_env_config(ctx.config.at("env"));
  env_cfg.reward_mode = RewardMode::kSparse;
  TrainConfig train_cfg = parse_train_config(ctx.config.at("train"));

  // mixture-pretrained reconstructor, as for the dense-reward methods
  train_cfg.a2c_steps = 0;
  TrainedPair pre = baseline_dense(data, env_cfg, train_cfg);
  const NeuralReconstructor recon(pre.recon);
  std::vector<RealImage> test = data.images_of(Split::kTest);
  if (test.empty()) test = data.images;
  const EvalSummary s = evaluate_greedy_oracle(recon, test, env_cfg);
  save_recon_checkpoint(pre.recon, (ctx.out_dir / "recon.ckpt").string());
  ctx.summary = json{{"final_eval", eval_summary_to_json(s)}};
}

void run_eval(RunContext& ctx) {
  const Dataset data = load_or_fail(ctx.config);
  ctx.dataset_hash = hex64(data.content_hash());
  EnvConfig env_cfg = parse_env_config(ctx.config.at("env"));
  const json& ecfg = ctx.config.at("eval");
  check_keys(ecfg, {"episodes", "policy_ckpt", "recon_ckpt"}, "eval.");
  const std::string rpath = ecfg.value("recon_ckpt", std::string());
  if (rpath.empty()) throw InvalidConfigError("config: eval.recon_ckpt is required");
  const ReconParams rparams = load_recon_checkpoint(rpath);
  const NeuralReconstructor recon(rparams);

  std::vector<RealImage> test = data.images_of(Split::kTest);
  if (test.empty()) test = data.images;
  int episodes = ecfg.value("episodes", 0);
  if (episodes <= 0) episodes = static_cast<int>(test.size());
  const std::uint64_t seed = ctx.config.value("seed", 0);

  EvalSummary s;
  const std::string ppath = ecfg.value("policy_ckpt", std::string());
  if (ppath.empty()) {
    UniformRandomPolicy policy;
    s = evaluate(policy, recon, test, env_cfg, episodes, seed);
  } else {
    const PolicyParams pparams = load_policy_checkpoint(ppath);
    const NeuralPolicy policy(pparams, env_cfg.reward_mode == RewardMode::kSparse
                                           ? PolicyInput::kObsKspace
                                           : PolicyInput::kReconImage);
    s = evaluate(policy, recon, test, env_cfg, episodes, seed);
  }
  ctx.summary = json{{"final_eval", eval_summary_to_json(s)}};
}

void run_oracle_check(RunContext& ctx) {
  const json& ocfg = ctx.config.at("oracle");
  check_keys(ocfg, {"n", "instances", "seed"}, "oracle.");
  const int n = ocfg.value("n", 6);
  const int instances = ocfg.value("instances", 200);
  const std::uint64_t seed = ocfg.value("seed", 0);

  EnvConfig cfg;
  cfg.n = n;
  cfg.accel = 2.0;
  cfg.init_accel = 4.0;
  cfg.preset = HorizonPreset::kBase;
  cfg.reward_mode = RewardMode::kSparse;
  cfg.metric.kind = MetricKind::kNegMse;
  cfg.metric.dynamic_range = 1.0;

  bool all_ok = true;
  json audits = json::array();

  // dense-vs-sparse optimal values on random tiny instances plus the
  // engineered strict-gap instance
  int holds = 0;
  double max_gap = 0.0;
  for (int i = 0; i < instances; ++i) {
    const auto data = make_structured_dataset(n, 4, seed + static_cast<std::uint64_t>(i));
    const OptimalValueReport rep = optimal_value_check(data, cfg);
    if (rep.holds) ++holds;
    max_gap = std::max(max_gap, rep.gap);
  }
  {
    // the shipped strict-gap instance has a fixed geometry
    EnvConfig cfg6 = cfg;
    cfg6.n = 6;
    const auto gap_data = make_adaptive_gap_dataset(6, 1234);
    ConstantReconstructor constant{RealImage(6)};
    const OptimalValueReport rep = optimal_value_check(gap_data, cfg6, &constant);
    const bool ok = rep.holds && rep.gap > 1e-6 && holds == instances;
    audits.push_back(json{{"audit", "optimal_value_inequality"},
                          {"instances", instances + 1},
                          {"holds", holds + (rep.holds ? 1 : 0)},
                          {"engineered_gap", rep.gap},
                          {"ok", ok}});
    all_ok = all_ok && ok;
  }

  // pretraining-distribution comparison on the collision family
  {
    bool family_ok = true;
    bool strict = false;
    EnvConfig cfg6 = cfg;
    cfg6.n = 6;
    for (int i = 0; i < 25; ++i) {
      const auto data = make_collision_dataset(6, 5000 + static_cast<std::uint64_t>(i));
      const MismatchReport rep = mismatch_check(data, cfg6);
      family_ok = family_ok && rep.holds;
      strict = strict ||
               rep.value_terminal_pretrain > rep.value_mixture_pretrain + 1e-6;
    }
    audits.push_back(json{{"audit", "pretraining_distribution"},
                          {"ok", family_ok && strict},
                          {"strict_gap_seen", strict}});
    all_ok = all_ok && family_ok && strict;
  }

  // terminal-gradient estimator vs finite differences
  {
    EnvConfig gcfg = cfg;
    gcfg.n = 8;
    gcfg.metric.kind = MetricKind::kSsim;
    gcfg.metric.window = 7;
    gcfg.metric.dynamic_range = 1.0;
    Rng rng(seed ^ 0x9e37ULL);
    std::vector<RealImage> data;
    for (int i = 0; i < 4; ++i) {
      RealImage img(8);
      for (auto& p : img.pix) p = rng.uniform();
      data.push_back(std::move(img));
    }
    ReconLayout rl;
    rl.n = 8;
    rl.channels = 3;
    ReconParams r = ReconParams::random(rl, rng, 0.2);
    UniformRandomPolicy policy;
    Rng check_rng(seed ^ 0x51ULL);
    const TerminalGradientReport rep = terminal_gradient_check(r, policy, data, gcfg, 64, 1e-4, check_rng);
    const bool ok = rep.max_rel_err < 1e-3;
    audits.push_back(json{{"audit", "terminal_gradient"},
                          {"max_rel_err", rep.max_rel_err},
                          {"coords", rep.coords_checked},
                          {"ok", ok}});
    all_ok = all_ok && ok;
  }

  // call-count audits
  {
    Rng rng(seed ^ 0xc0deULL);
    RealImage x(16);
    for (auto& p : x.pix) p = rng.uniform();
    ZeroFilledReconstructor recon;
    UniformRandomPolicy policy;
    EnvConfig acfg = EnvConfig::base(16, 2.0);
    acfg.metric.dynamic_range = 1.0;
    acfg.reward_mode = RewardMode::kSparse;
    Rng r1 = rng.split(1);
    const CostAuditReport sparse = cost_audit_episode(policy, recon, x, acfg, r1);
    acfg.reward_mode = RewardMode::kDense;
    Rng r2 = rng.split(2);
    const CostAuditReport dense = cost_audit_episode(policy, recon, x, acfg, r2);
    RealImage x8(8);
    for (auto& p : x8.pix) p = rng.uniform();
    EnvConfig gcfg = EnvConfig::base(8, 2.0);
    gcfg.metric.dynamic_range = 1.0;
    const GreedyCostAuditReport greedy = cost_audit_greedy(recon, x8, gcfg);
    const bool ok = sparse.ok && dense.ok && greedy.ok;
    audits.push_back(json{{"audit", "call_counts"},
                          {"sparse_policy", sparse.policy_calls},
                          {"sparse_recon", sparse.recon_calls},
                          {"dense_policy", dense.policy_calls},
                          {"dense_recon", dense.recon_calls},
                          {"greedy_recon", greedy.recon_calls},
                          {"greedy_expected_corrected", greedy.expected_corrected},
                          {"greedy_uncorrected_expression", greedy.uncorrected_expression},
                          {"ok", ok}});
    all_ok = all_ok && ok;
  }

  ctx.summary = json{{"audits", audits}, {"all_ok", all_ok}, {"max_random_gap", max_gap}};
  if (!all_ok) throw AuditFailureError("oracle-check: audit failure");
}

}  // namespace

int run_experiment(json config, std::string* error_message) {
  RunContext ctx;
  bool audit_mode = false;
  try {
    check_keys(config,
               {"mode", "seed", "out", "force", "data", "phantom", "env", "train", "eval",
                "oracle"},
               "");
    ctx.config = std::move(config);
    ctx.mode = parse_mode(ctx.config.at("mode").get<std::string>());
    audit_mode = ctx.mode == ExperimentMode::kOracleCheck;
    // strict validation of every section before any output is written
    if (ctx.config.contains("env")) parse_env_config(ctx.config.at("env"));
    if (ctx.config.contains("train")) parse_train_config(ctx.config.at("train"));
    if (ctx.config.contains("phantom")) parse_phantom_config(ctx.config.at("phantom"));
    if (ctx.config.contains("data"))
      check_keys(ctx.config.at("data"), {"path", "train_frac", "val_frac"}, "data.");
    if (ctx.config.contains("eval"))
      check_keys(ctx.config.at("eval"), {"episodes", "policy_ckpt", "recon_ckpt"}, "eval.");
    if (ctx.config.contains("oracle"))
      check_keys(ctx.config.at("oracle"), {"n", "instances", "seed"}, "oracle.");
    ctx.out_dir = ctx.config.value("out", std::string("results/run"));
    prepare_out_dir(ctx);

    switch (ctx.mode) {
      case ExperimentMode::kGenData:
        run_gen_data(ctx);
        break;
      case ExperimentMode::kPretrain:
      case ExperimentMode::kL2s:
      case ExperimentMode::kL2sr:
      case ExperimentMode::kBaselineDense:
        run_training_mode(ctx);
        break;
      case ExperimentMode::kBaselineRandom:
        run_baseline_random(ctx);
        break;
      case ExperimentMode::kGreedyOracle:
        run_greedy_oracle(ctx);
        break;
      case ExperimentMode::kEval:
        run_eval(ctx);
        break;
      case ExperimentMode::kOracleCheck:
        run_oracle_check(ctx);
        break;
    }
    finish(ctx);
    return kExitOk;
  } catch (const InvalidConfigError& e) {
    if (error_message) *error_message = e.what();
    return kExitConfig;
  } catch (const TrainingDivergedError& e) {
    if (error_message) *error_message = e.what();
    return kExitDiverged;
  } catch (const AuditFailureError& e) {
    if (error_message) *error_message = e.what();
    if (audit_mode) {
      // oracle-check still writes its (failing) report
      try {
        finish(ctx);
      } catch (...) {
      }
    }
    return kExitAuditFailure;
  } catch (const std::exception& e) {
    if (error_message) *error_message = e.what();
    return kExitFailure;
  }
}

int run_from_file(const std::string& config_path, const std::vector<std::string>& overrides,
                  std::string* error_message) {
  json config = default_config();
  try {
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      if (!is) throw InvalidConfigError("config: cannot open " + config_path);
      json file_cfg = json::parse(is);
      config.merge_patch(file_cfg);
    }
    for (const auto& o : overrides) apply_override(config, o);
  } catch (const json::parse_error& e) {
    if (error_message) *error_message = e.what();
    return kExitConfig;
  } catch (const InvalidConfigError& e) {
    if (error_message) *error_message = e.what();
    return kExitConfig;
  }
  return run_experiment(std::move(config), error_message);
}

void emit_plot_data(const std::vector<json>& results, PlotKind kind, const std::string& out_path) {
  if (results.empty()) throw InvalidInputError("emit_plot_data: no results documents");
  std::ostringstream csv;
  for (const json& doc : results)
    if (doc.contains("config_hash"))
      csv << "# config_hash=" << doc["config_hash"].get<std::string>()
          << " dataset_hash=" << doc.value("dataset_hash", std::string()) << "\n";
  switch (kind) {
    case PlotKind::kHistogram: {
      const json& doc = results.front();
      if (!doc.contains("summary") || !doc["summary"].contains("final_eval"))
        throw InvalidInputError("emit_plot_data: results lack a final evaluation");
      const json& e = doc["summary"]["final_eval"];
      csv << "index,ssim,psnr\n";
      const auto& ssim = e.at("per_image_ssim");
      const auto& psnr = e.at("per_image_psnr");
      for (std::size_t i = 0; i < ssim.size(); ++i)
        csv << i << "," << ssim[i].get<double>() << "," << psnr[i].get<double>() << "\n";
      break;
    }
    case PlotKind::kRoundCurve: {
      const json& doc = results.front();
      if (!doc.contains("summary") || !doc["summary"].contains("report"))
        throw InvalidInputError("emit_plot_data: results lack a training report");
      csv << "phase,mean_ssim,std_ssim,mean_psnr\n";
      for (const auto& p : doc["summary"]["report"].at("phases"))
        csv << p.at("phase").get<std::string>() << "," << p["eval"]["mean_ssim"].get<double>()
            << "," << p["eval"]["std_ssim"].get<double>() << ","
            << p["eval"]["mean_psnr"].get<double>() << "\n";
      break;
    }
    case PlotKind::kAblation: {
      csv << "label,mean_ssim,std_ssim\n";
      for (const json& doc : results) {
        if (!doc.contains("summary") || !doc["summary"].contains("final_eval"))
          throw InvalidInputError("emit_plot_data: results lack a final evaluation");
        std::string label = "run";
        if (doc.contains("config_echo") && doc["config_echo"].contains("env"))
          label = "gamma=" + std::to_string(
                                 doc["config_echo"]["env"].value("discount", 1.0));
        csv << label << "," << doc["summary"]["final_eval"]["mean_ssim"].get<double>() << ","
            << doc["summary"]["final_eval"]["std_ssim"].get<double>() << "\n";
      }
      break;
    }
  }
  const fs::path p(out_path);
  if (const fs::path parent = p.parent_path(); !parent.empty()) fs::create_directories(parent);
  write_file_atomic(p, csv.str());
}

}  // namespace ksrl
