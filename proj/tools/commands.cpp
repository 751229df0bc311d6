#include "commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace rpgo::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(RobustMode mode) {
  switch (mode) {
    case RobustMode::None: return "none";
    case RobustMode::Pcm: return "pcm";
    case RobustMode::Gnc: return "gnc";
    case RobustMode::PcmGnc: return "pcm+gnc";
  }
  return "?";
}

RobustMode parse_robust_mode(std::string_view name) {
  if (name == "none") return RobustMode::None;
  if (name == "pcm") return RobustMode::Pcm;
  if (name == "gnc") return RobustMode::Gnc;
  if (name == "pcm+gnc") return RobustMode::PcmGnc;
  throw ConfigError("unknown robust mode '" + std::string(name) + "'");
}

namespace {

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

bool row_failed(const AblationRow& r) { return r.failures > 0 || r.ate.empty(); }

}  // namespace

std::string ablation_summary_csv(std::span<const AblationRow> rows) {
  std::ostringstream os;
  os << "dataset,config,trials,failures,avg_m,std_m\n";
  for (const auto& r : rows) {
    os << r.dataset << ',' << r.config << ',' << r.ate.size() + r.failures << ',' << r.failures << ',';
    if (row_failed(r)) {
      os << "--,--\n";
    } else {
      os << format_double(mean(r.ate)) << ',' << format_double(sample_stddev(r.ate)) << '\n';
    }
  }
  return os.str();
}

std::string ablation_table(std::span<const AblationRow> rows) {
  std::vector<std::array<std::string, 4>> cells{{"Dataset", "Config", "Avg[m]", "Std[m]"}};
  for (const auto& r : rows) {
    if (row_failed(r)) {
      cells.push_back({r.dataset, r.config, "--", "--"});
    } else {
      cells.push_back({r.dataset, r.config, fixed(mean(r.ate)), fixed(sample_stddev(r.ate))});
    }
  }
  std::array<std::size_t, 4> width{};
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < 4; ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream os;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < 4; ++c) {
      const std::string pad(width[c] - row[c].size(), ' ');
      if (c < 2) {
        os << row[c] << pad;
      } else {
        os << pad << row[c];
      }
      os << (c + 1 < 4 ? "  " : "\n");
    }
  }
  return os.str();
}

namespace {

template <class>
struct pose_of;
template <PoseType P>
struct pose_of<G2oGraph<P>> {
  using type = P;
};
template <PoseType P>
struct pose_of<SynthDataset<P>> {
  using type = P;
};

std::string path_in(const std::string& dir, const char* name) { return (fs::path(dir) / name).string(); }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

AlignmentMode parse_align(const std::string& s) {
  if (s == "rigid") return AlignmentMode::Rigid;
  if (s == "sim3") return AlignmentMode::Similarity;
  throw ConfigError("unknown alignment '" + s + "'");
}

const std::map<std::string, Dimension> kDimensions{{"se2", Dimension::SE2}, {"se3", Dimension::SE3}};
const std::map<std::string, TrajectoryShape> kShapes{
    {"grid", TrajectoryShape::Grid}, {"loop", TrajectoryShape::Loop}, {"random-walk", TrajectoryShape::RandomWalk}};
const std::map<std::string, OutlierMode> kOutlierModes{
    {"random-transform", OutlierMode::RandomTransform}, {"wrong-association", OutlierMode::WrongAssociation}};
const std::map<std::string, PcmMetric> kPcmMetrics{
    {"thresholds", PcmMetric::Thresholds}, {"mahalanobis", PcmMetric::Mahalanobis}};

void add_synth_options(CLI::App* app, SynthConfig& cfg) {
  app->add_option("--dimension", cfg.dimension, "se2 or se3")
      ->transform(CLI::CheckedTransformer(kDimensions, CLI::ignore_case))
      ->capture_default_str();
  app->add_option("--shape", cfg.shape, "grid, loop or random-walk")
      ->transform(CLI::CheckedTransformer(kShapes, CLI::ignore_case));
  app->add_option("--poses", cfg.pose_count, "number of poses")->capture_default_str();
  app->add_option("--loops", cfg.true_loop_count, "number of true loop closures")->capture_default_str();
  app->add_option("--outlier-ratio", cfg.outlier_ratio, "fraction of loop closures that are outliers")
      ->capture_default_str();
  app->add_option("--outlier-mode", cfg.outlier_mode, "random-transform or wrong-association")
      ->transform(CLI::CheckedTransformer(kOutlierModes, CLI::ignore_case));
  app->add_option("--sigma-rot", cfg.sigma_rot, "odometry rotation noise [rad]")->capture_default_str();
  app->add_option("--sigma-trans", cfg.sigma_trans, "odometry translation noise [m]")->capture_default_str();
  app->add_option("--loop-radius", cfg.loop_radius, "loop-closure radius [m]")->capture_default_str();
  app->add_option("--min-loop-separation", cfg.min_loop_separation)->capture_default_str();
  app->add_option("--external-sigma-rot", cfg.external_sigma_rot)->capture_default_str();
  app->add_option("--external-sigma-trans", cfg.external_sigma_trans)->capture_default_str();
}

struct BackendOptions {
  std::string robust = "none";
  double pcm_rot = 0.01;
  double pcm_trans = 0.05;
  PcmMetric pcm_metric = PcmMetric::Thresholds;
  bool pcm_incremental = false;
  double gnc_confidence = 0.99;

  PipelineConfig pipeline(RobustMode mode) const {
    PipelineConfig cfg;
    cfg.robust = mode;
    cfg.pcm.rotation_threshold = pcm_rot;
    cfg.pcm.translation_threshold = pcm_trans;
    cfg.pcm.metric = pcm_metric;
    cfg.pcm.use_incremental = pcm_incremental;
    cfg.gnc.confidence = gnc_confidence;
    cfg.pcm.validate();
    cfg.gnc.validate();
    return cfg;
  }
};

void add_backend_options(CLI::App* app, BackendOptions& o, bool robust_list) {
  if (!robust_list) {
    app->add_option("--robust", o.robust, "none, pcm, gnc or pcm+gnc")->capture_default_str();
  }
  app->add_option("--pcm-rot", o.pcm_rot, "PCM rotation threshold [rad]")->capture_default_str();
  app->add_option("--pcm-trans", o.pcm_trans, "PCM translation threshold [m]")->capture_default_str();
  app->add_option("--pcm-metric", o.pcm_metric, "thresholds or mahalanobis")
      ->transform(CLI::CheckedTransformer(kPcmMetrics, CLI::ignore_case));
  app->add_flag("--pcm-incremental", o.pcm_incremental, "incremental PCM");
  app->add_option("--gnc-confidence", o.gnc_confidence, "chi-squared confidence of the GNC threshold")
      ->capture_default_str();
}

template <PoseType P>
ExternalOdomConfig<P> external_config(double info) {
  ExternalOdomConfig<P> cfg;
  cfg.information = info * Matrix<P::kDof>::Identity();
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------
struct SimulateOptions {
  SynthConfig synth;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_simulate(SimulateOptions o, std::ostream& out) {
  o.synth.seed = o.seed;
  o.synth.external_odometry = true;
  const auto any = generate_any(o.synth);
  ensure_dir(o.out);
  std::visit(
      [&](const auto& ds) {
        using P = typename pose_of<std::decay_t<decltype(ds)>>::type;
        write_file(path_in(o.out, "dataset.g2o"), write_g2o(ds.to_g2o()));
        write_file(path_in(o.out, "ground_truth.tum"), write_tum(ds.ground_truth_tum()));
        write_file(path_in(o.out, "external_odometry.tum"), write_tum(ds.external_tum()));
        std::vector<OdometrySample<P>> traj;
        for (std::size_t k = 0; k < ds.ground_truth.size(); ++k) traj.push_back({ds.timestamps[k], ds.ground_truth[k]});
        FeatureStreamConfig fc;
        fc.seed = o.seed;
        write_file(path_in(o.out, "features.csv"), write_feature_csv(generate_feature_stream(traj, fc)));
        std::size_t outliers = 0;
        for (const auto& c : ds.loops) outliers += !c.inlier.value_or(true);
        out << "wrote " << ds.ground_truth.size() << " poses, " << ds.loops.size() << " loop closures ("
            << outliers << " outliers) to " << o.out << '\n';
      },
      any);
  return kSuccess;
}

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------
struct OptimizeOptions {
  std::string input;
  std::string ground_truth;
  BackendOptions backend;
  std::string external_odom;
  double external_odom_info = 100.0;
  double keyframe_dt = 0.2;
  std::string align = "rigid";
  std::string out;
};

json classification(const std::map<std::size_t, bool>& labels, const std::vector<std::size_t>& loop_factors,
                    const std::vector<bool>& accepted) {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < loop_factors.size(); ++i) {
    const auto it = labels.find(loop_factors[i]);
    if (it == labels.end()) continue;
    const bool outlier = !it->second, rejected = !accepted[i];
    tp += outlier && rejected;
    fp += !outlier && rejected;
    tn += !outlier && !rejected;
    fn += outlier && !rejected;
  }
  json c{{"true_positive", tp}, {"false_positive", fp}, {"true_negative", tn}, {"false_negative", fn}};
  c["precision"] = tp + fp ? json(static_cast<double>(tp) / static_cast<double>(tp + fp)) : json(nullptr);
  c["recall"] = tp + fn ? json(static_cast<double>(tp) / static_cast<double>(tp + fn)) : json(nullptr);
  return c;
}

int cmd_optimize(const OptimizeOptions& o, std::ostream& out) {
  const AlignmentMode align = parse_align(o.align);
  const auto mode = parse_robust_mode(o.backend.robust);
  const PipelineConfig cfg = o.backend.pipeline(mode);
  if (!(o.keyframe_dt > 0.0)) throw ConfigError("--keyframe-dt must be > 0");
  const auto parsed = parse_g2o(read_file(o.input));
  std::optional<TumParseResult> external, gt;
  if (!o.external_odom.empty()) external = parse_tum(read_file(o.external_odom));
  if (!o.ground_truth.empty()) gt = parse_tum(read_file(o.ground_truth));

  std::visit(
      [&](const auto& doc) {
        using P = typename pose_of<std::decay_t<decltype(doc)>>::type;
        auto g = to_pose_graph(doc);
        g.validate();
        std::size_t external_factors = 0;
        if (external) {
          const auto stream = samples_from_tum<P>(external->poses);
          external_factors = add_external_odometry<P>(g, stream, o.keyframe_dt, external_config<P>(o.external_odom_info));
        }
        const auto res = run_pipeline(g, cfg);
        if (!std::isfinite(res.optimized.final_error)) throw NumericalFailure("optimization diverged");
        const auto traj = values_to_tum(res.optimized.values, o.keyframe_dt);

        json rep;
        rep["input"] = o.input;
        rep["dimension"] = P::kDof == 3 ? "SE2" : "SE3";
        rep["robust"] = to_string(mode);
        rep["vertices"] = g.initial_values().size();
        rep["factors"] = g.factors().size();
        rep["external_factors"] = external_factors;
        rep["loop_closures"] = res.loop_factors.size();
        std::vector<std::size_t> acc, rej;
        for (std::size_t i = 0; i < res.loop_factors.size(); ++i) {
          (res.accepted[i] ? acc : rej).push_back(res.loop_factors[i]);
        }
        rep["accepted_loop_closures"] = acc;
        rep["rejected_loop_closures"] = rej;
        rep["iterations"] = res.optimized.iterations;
        rep["converged"] = res.optimized.converged;
        rep["initial_error"] = res.optimized.error_trace.empty() ? 0.0 : res.optimized.error_trace.front();
        rep["final_error"] = res.optimized.final_error;
        rep["gnc_outer_iterations"] = res.gnc_outer_iterations;
        if (!doc.labels.empty()) rep["outlier_classification"] = classification(doc.labels, res.loop_factors, res.accepted);
        if (gt) {
          const auto ate = ate_rmse(traj, gt->poses, align);
          rep["align"] = o.align;
          rep["ate_rmse"] = ate.ate_rmse;
          rep["ate_pairs"] = ate.errors.size();
          rep["rank_deficient"] = ate.rank_deficient;
        }
        ensure_dir(o.out);
        write_file(path_in(o.out, "trajectory.tum"), write_tum(traj));
        write_file(path_in(o.out, "report.json"), rep.dump(2) + "\n");
        out << "robust=" << to_string(mode) << " accepted=" << acc.size() << "/" << res.loop_factors.size()
            << " iterations=" << res.optimized.iterations << " final_error=" << format_double(res.optimized.final_error);
        if (gt) out << " ate_rmse=" << format_double(rep["ate_rmse"].get<double>());
        out << '\n';
      },
      parsed.document);
  return kSuccess;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------
struct EvaluateOptions {
  std::string input;
  std::string ground_truth;
  std::string align = "rigid";
  std::string out;
};

int cmd_evaluate(const EvaluateOptions& o, std::ostream& out) {
  const AlignmentMode align = parse_align(o.align);
  const auto est = parse_tum(read_file(o.input));
  const auto ref = parse_tum(read_file(o.ground_truth));
  const auto rep = ate_rmse(est.poses, ref.poses, align);
  out << "ate_rmse " << format_double(rep.ate_rmse) << "\npairs " << rep.errors.size() << "\nscale "
      << format_double(rep.scale) << '\n';
  if (rep.rank_deficient) out << "warning: alignment is rank deficient\n";
  if (!o.out.empty()) {
    json j{{"estimate", o.input},
           {"ground_truth", o.ground_truth},
           {"align", o.align},
           {"ate_rmse", rep.ate_rmse},
           {"pairs", rep.errors.size()},
           {"scale", rep.scale},
           {"rank_deficient", rep.rank_deficient},
           {"non_monotone_timestamps", est.non_monotone + ref.non_monotone}};
    ensure_dir(o.out);
    write_file(path_in(o.out, "evaluation.json"), j.dump(2) + "\n");
  }
  return kSuccess;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------
struct AblateOptions {
  SynthConfig synth;
  std::string input;
  std::string ground_truth;
  BackendOptions backend;
  std::vector<std::string> robust{"none", "pcm", "gnc", "pcm+gnc"};
  std::string external = "off";
  std::string external_odom;
  std::optional<double> external_odom_info;
  double keyframe_dt = 0.2;
  std::size_t trials = 3;
  std::uint64_t seed = 0;
  std::string align = "rigid";
  std::string out;
};

struct AblationConfig {
  RobustMode mode;
  bool external;
  std::string name() const { return to_string(mode) + (external ? "+ext" : ""); }
};

struct TrialRecord {
  std::string dataset, config;
  std::size_t trial;
  std::uint64_t seed;
  std::optional<double> ate;
  std::string error;
};

template <PoseType P>
void run_configs(const PoseGraph<P>& base, std::span<const OdometrySample<P>> stream,
                 const ExternalOdomConfig<P>& ext_cfg, std::span<const TimedPose> gt,
                 const std::vector<AblationConfig>& configs, const AblateOptions& o, AlignmentMode align,
                 const std::string& dataset, std::size_t trial, std::uint64_t seed,
                 std::vector<TrialRecord>& records) {
  for (const auto& c : configs) {
    TrialRecord r{dataset, c.name(), trial, seed, std::nullopt, {}};
    try {
      PoseGraph<P> g = base;
      if (c.external) add_external_odometry<P>(g, stream, o.keyframe_dt, ext_cfg);
      const auto res = run_pipeline(g, o.backend.pipeline(c.mode));
      if (!std::isfinite(res.optimized.final_error)) throw NumericalFailure("optimization diverged");
      const double ate = ate_rmse(values_to_tum(res.optimized.values, o.keyframe_dt), gt, align).ate_rmse;
      if (!std::isfinite(ate)) throw NumericalFailure("non-finite ATE");
      r.ate = ate;
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    records.push_back(std::move(r));
  }
}

std::string shape_name(TrajectoryShape s) {
  for (const auto& [k, v] : kShapes) {
    if (v == s) return k;
  }
  return "?";
}

int cmd_ablate(AblateOptions o, std::ostream& out) {
  if (o.trials < 1) throw ConfigError("--trials must be >= 1");
  if (o.robust.empty()) throw ConfigError("at least one --robust configuration is required");
  if (!(o.keyframe_dt > 0.0)) throw ConfigError("--keyframe-dt must be > 0");
  const AlignmentMode align = parse_align(o.align);
  std::vector<AblationConfig> configs;
  std::vector<bool> ext_modes;
  if (o.external == "off") {
    ext_modes = {false};
  } else if (o.external == "on") {
    ext_modes = {true};
  } else if (o.external == "both") {
    ext_modes = {false, true};
  } else {
    throw ConfigError("--external must be off, on or both");
  }
  for (bool ext : ext_modes) {
    for (const auto& name : o.robust) configs.push_back({parse_robust_mode(name), ext});
  }
  for (const auto& c : configs) o.backend.pipeline(c.mode);
  const bool need_external = o.external != "off";
  if (o.external_odom_info && !(*o.external_odom_info > 0.0)) throw ConfigError("--external-odom-info must be > 0");

  std::vector<TrialRecord> records;
  std::string dataset;
  if (!o.input.empty()) {
    if (o.ground_truth.empty()) throw ConfigError("--input requires --ground-truth");
    if (need_external && o.external_odom.empty()) throw ConfigError("external configurations require --external-odom");
    dataset = fs::path(o.input).stem().string();
    const auto doc = parse_g2o(read_file(o.input)).document;
    const auto gt = parse_tum(read_file(o.ground_truth)).poses;
    std::vector<TimedPose> ext_poses;
    if (need_external) ext_poses = parse_tum(read_file(o.external_odom)).poses;
    std::visit(
        [&](const auto& d) {
          using P = typename pose_of<std::decay_t<decltype(d)>>::type;
          const auto g = to_pose_graph(d);
          const auto stream = samples_from_tum<P>(ext_poses);
          const auto ext_cfg = external_config<P>(o.external_odom_info.value_or(100.0));
          for (std::size_t t = 0; t < o.trials; ++t) {
            run_configs<P>(g, stream, ext_cfg, gt, configs, o, align, dataset, t, o.seed, records);
          }
        },
        doc);
  } else {
    o.synth.external_odometry = need_external;
    o.synth.validate();
    dataset = shape_name(o.synth.shape) + "-" + (o.synth.dimension == Dimension::SE2 ? "se2" : "se3") + "-" +
              std::to_string(o.synth.pose_count);
    o.keyframe_dt = o.synth.dt;
    for (std::size_t t = 0; t < o.trials; ++t) {
      SynthConfig sc = o.synth;
      sc.seed = o.seed + t;
      std::visit(
          [&](const auto& ds) {
            using P = typename pose_of<std::decay_t<decltype(ds)>>::type;
            ExternalOdomConfig<P> ext_cfg;
            ext_cfg.information = o.external_odom_info ? *o.external_odom_info * Matrix<P::kDof>::Identity()
                                                       : ds.external_information;
            run_configs<P>(ds.graph(), std::span<const OdometrySample<P>>(ds.external), ext_cfg,
                           ds.ground_truth_tum(), configs, o, align, dataset, t, sc.seed, records);
          },
          generate_any(sc));
    }
  }

  std::vector<AblationRow> rows;
  for (const auto& c : configs) rows.push_back({dataset, c.name(), {}, 0});
  std::ostringstream trials_csv;
  trials_csv << "dataset,config,trial,seed,ate_rmse,status\n";
  for (const auto& r : records) {
    auto& row = *std::find_if(rows.begin(), rows.end(), [&](const AblationRow& x) { return x.config == r.config; });
    if (r.ate) {
      row.ate.push_back(*r.ate);
    } else {
      ++row.failures;
    }
    trials_csv << r.dataset << ',' << r.config << ',' << r.trial << ',' << r.seed << ','
               << (r.ate ? format_double(*r.ate) : std::string("--")) << ',' << (r.ate ? "ok" : "failed") << '\n';
    if (!r.ate) out << "trial " << r.trial << " " << r.config << " failed: " << r.error << '\n';
  }
  const std::string table = ablation_table(rows);
  ensure_dir(o.out);
  write_file(path_in(o.out, "ablation_trials.csv"), trials_csv.str());
  write_file(path_in(o.out, "ablation_summary.csv"), ablation_summary_csv(rows));
  write_file(path_in(o.out, "ablation_table.txt"), table);
  out << table;
  return kSuccess;
}

// ---------------------------------------------------------------------------
// keyframe-sim
// ---------------------------------------------------------------------------
struct KeyframeSimOptions {
  std::string input;
  std::vector<double> mdsl{25.0, 50.0, 75.0, 100.0, 150.0, 1000.0};
  double max_kf_time = 1.0;
  std::size_t segments = 4;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_keyframe_sim(const KeyframeSimOptions& o, std::ostream& out) {
  if (o.mdsl.empty()) throw ConfigError("--mdsl needs at least one value");
  std::vector<TrackedFeatureFrame> frames;
  if (!o.input.empty()) {
    frames = parse_feature_csv(read_file(o.input), ImageSize{});
  } else {
    StopAndGoConfig sg;
    sg.segments = o.segments;
    const auto s = stop_and_go_trajectory(sg);
    FeatureStreamConfig fc;
    fc.seed = o.seed;
    fc.stationary = s.stationary;
    frames = generate_feature_stream(s.trajectory, fc);
  }
  if (frames.empty()) throw InvalidStream("feature stream is empty");

  std::ostringstream csv;
  csv << "mdsl,keyframe_count,time_triggered,disparity_triggered,tracking_lost,mean_disparity,graph_vertices,graph_edges\n";
  for (double mdsl : o.mdsl) {
    KeyframeConfig kc;
    kc.max_disparity_since_lkf = mdsl;
    kc.max_time_between_keyframes = o.max_kf_time;
    kc.validate();
    const auto rep = replay_keyframes(frames, kc);
    std::size_t by_time = 0, by_disp = 0, lost = 0;
    double disp_sum = 0.0;
    std::size_t disp_n = 0;
    for (std::size_t k = 1; k < rep.keyframes.size(); ++k) {
      const auto& d = rep.decisions[rep.keyframes[k]];
      by_time += d.trigger == KeyframeTrigger::Time;
      by_disp += d.trigger == KeyframeTrigger::Disparity;
      lost += d.trigger == KeyframeTrigger::TrackingLost;
      if (std::isfinite(d.disparity)) {
        disp_sum += d.disparity;
        ++disp_n;
      }
    }
    const std::size_t n = rep.keyframes.size();
    csv << format_double(mdsl) << ',' << n << ',' << by_time << ',' << by_disp << ',' << lost << ','
        << format_double(disp_n ? disp_sum / static_cast<double>(disp_n) : 0.0) << ',' << n << ','
        << (n ? n - 1 : 0) << '\n';
  }
  out << csv.str();
  if (!o.out.empty()) {
    ensure_dir(o.out);
    write_file(path_in(o.out, "keyframes.csv"), csv.str());
  }
  return kSuccess;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust pose-graph optimization tools"};
  app.name("rpgo");
  app.require_subcommand(1);

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset");
  add_synth_options(simulate, sim.synth);
  simulate->add_option("--seed", sim.seed)->capture_default_str();
  simulate->add_option("--out", sim.out, "output directory")->required();

  OptimizeOptions opt;
  auto* optimize_cmd = app.add_subcommand("optimize", "optimize a g2o pose graph");
  optimize_cmd->add_option("--input", opt.input, "g2o file")->required();
  optimize_cmd->add_option("--ground-truth", opt.ground_truth, "TUM ground truth");
  add_backend_options(optimize_cmd, opt.backend, false);
  optimize_cmd->add_option("--external-odom", opt.external_odom, "TUM external odometry stream");
  optimize_cmd->add_option("--external-odom-info", opt.external_odom_info, "isotropic information of external odometry")
      ->capture_default_str();
  optimize_cmd->add_option("--keyframe-dt", opt.keyframe_dt, "seconds between vertex ids")->capture_default_str();
  optimize_cmd->add_option("--align", opt.align, "rigid or sim3")->capture_default_str();
  optimize_cmd->add_option("--out", opt.out, "output directory")->required();

  AblateOptions abl;
  auto* ablate = app.add_subcommand("ablate", "compare robust back-ends over trials");
  add_synth_options(ablate, abl.synth);
  ablate->add_option("--input", abl.input, "g2o file instead of synthetic data");
  ablate->add_option("--ground-truth", abl.ground_truth, "TUM ground truth for --input");
  add_backend_options(ablate, abl.backend, true);
  ablate->add_option("--robust", abl.robust, "comma separated robust modes")->delimiter(',')->capture_default_str();
  ablate->add_option("--external", abl.external, "off, on or both")->capture_default_str();
  ablate->add_option("--external-odom", abl.external_odom, "TUM external odometry for --input");
  ablate->add_option("--external-odom-info", abl.external_odom_info, "isotropic information of external odometry");
  ablate->add_option("--keyframe-dt", abl.keyframe_dt, "seconds between vertex ids for --input")->capture_default_str();
  ablate->add_option("--trials", abl.trials)->capture_default_str();
  ablate->add_option("--seed", abl.seed)->capture_default_str();
  ablate->add_option("--align", abl.align, "rigid or sim3")->capture_default_str();
  ablate->add_option("--out", abl.out, "output directory")->required();

  KeyframeSimOptions kf;
  auto* keyframe = app.add_subcommand("keyframe-sim", "sweep the disparity keyframe threshold");
  keyframe->add_option("--input", kf.input, "feature CSV; default is a synthetic stop-and-go stream");
  keyframe->add_option("--mdsl", kf.mdsl, "disparity thresholds [px]")->delimiter(',');
  keyframe->add_option("--max-kf-time", kf.max_kf_time, "maximum time between keyframes [s]")->capture_default_str();
  keyframe->add_option("--segments", kf.segments, "moving segments of the synthetic stream")->capture_default_str();
  keyframe->add_option("--seed", kf.seed)->capture_default_str();
  keyframe->add_option("--out", kf.out, "output directory");

  EvaluateOptions ev;
  auto* evaluate = app.add_subcommand("evaluate", "absolute trajectory error of a TUM estimate");
  evaluate->add_option("--input", ev.input, "TUM estimate")->required();
  evaluate->add_option("--ground-truth", ev.ground_truth, "TUM ground truth")->required();
  evaluate->add_option("--align", ev.align, "rigid or sim3")->capture_default_str();
  evaluate->add_option("--out", ev.out, "output directory");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kSuccess : kUsage;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim, out);
    if (optimize_cmd->parsed()) return cmd_optimize(opt, out);
    if (ablate->parsed()) return cmd_ablate(abl, out);
    if (keyframe->parsed()) return cmd_keyframe_sim(kf, out);
    if (evaluate->parsed()) return cmd_evaluate(ev, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const BranchAmbiguity& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const Error& e) {
    // Malformed content of an input file: dangling keys, broken chains, bad streams.
    err << "error: " << e.what() << '\n';
    return kIo;
  }
  return kUsage;
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + (argc > 0 ? 1 : 0), argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace rpgo::cli
