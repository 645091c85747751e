// Command-line front end: simulate a scenario into a measurement log, fuse a
// log into a trajectory estimate, and evaluate an estimate against ground
// truth.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "orel/config.hpp"
#include "orel/evaluation.hpp"
#include "orel/io.hpp"
#include "orel/sim.hpp"

namespace {

namespace fs = std::filesystem;

enum ExitCode {
  kOk = 0,
  kConfigError = 2,
  kIoError = 3,
  kDataError = 4,
  kNumericError = 5,
};

void run_simulate(const std::string& config_path, const std::string& out_dir) {
  const orel::ExperimentConfig cfg = orel::load_experiment_config(config_path);
  const orel::SimulationOutput sim = orel::generate(cfg.scenario, cfg.trajectory);

  orel::MeasurementLog log;
  log.header.imu_rate = cfg.scenario.imu_rate;
  log.header.cam_rate = cfg.scenario.cam_rate;
  for (const auto& obj : cfg.scenario.objects) log.header.object_ids.push_back(obj.id);
  log.header.anchor_id = cfg.scenario.anchor_id;
  log.header.gravity = cfg.scenario.imu_noise.gravity;
  log.imu = sim.imu_stream;
  log.frames = sim.frames;

  fs::create_directories(out_dir);
  orel::atomic_write_file(fs::path(out_dir) / "measurements.log",
                          [&](std::ostream& os) { orel::write_measurement_log(os, log); });
  orel::atomic_write_file(fs::path(out_dir) / "groundtruth_imu.tum",
                          [&](std::ostream& os) { orel::write_tum(os, sim.ground_truth); });
  std::vector<std::pair<std::string, orel::Pose>> objects;
  for (const auto& obj : sim.truth_objects) objects.emplace_back(obj.id, obj.pose);
  orel::atomic_write_file(fs::path(out_dir) / "groundtruth_objects.txt",
                          [&](std::ostream& os) { orel::write_object_poses(os, objects); });

  std::cout << "wrote " << log.imu.size() << " IMU records and " << log.frames.size()
            << " frames to " << out_dir << "\n";
}

void run_fuse(const std::string& log_path, const std::string& config_path,
              const std::string& out_dir) {
  const orel::MeasurementLog log = orel::read_measurement_log_file(log_path);
  orel::ExperimentConfig cfg = orel::load_experiment_config(config_path);

  auto sorted = [](std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  if (sorted(cfg.filter.object_ids) != sorted(log.header.object_ids)) {
    throw orel::ParseError("log object ids do not match the config's object list", 0);
  }
  if (cfg.filter.anchor_id != log.header.anchor_id) {
    throw orel::ParseError("log anchor id '" + log.header.anchor_id +
                               "' does not match config anchor '" + cfg.filter.anchor_id + "'",
                           0);
  }
  // The log is authoritative for the gravity convention its data was made with.
  cfg.filter.imu_noise.gravity = log.header.gravity;

  orel::Filter filter = orel::new_filter(cfg.filter);
  const orel::ReplayResult result = orel::replay(log.imu, log.frames, filter, cfg.filter);

  fs::create_directories(out_dir);
  orel::atomic_write_file(fs::path(out_dir) / "estimate.tum",
                          [&](std::ostream& os) { orel::write_tum(os, result.estimate); });
  orel::atomic_write_file(fs::path(out_dir) / "report.txt",
                          [&](std::ostream& os) { orel::write_report(os, result.reports); });

  int applied = 0;
  for (const auto& rep : result.reports) applied += rep.applied ? 1 : 0;
  std::cout << "fused " << log.imu.size() << " IMU records, applied " << applied << "/"
            << result.reports.size() << " frames; estimate written to " << out_dir << "\n";
}

void run_eval(const std::string& est_path, const std::string& gt_path, bool with_scale,
              double max_dt, std::string out_path) {
  const orel::Trajectory est = orel::read_tum_file(est_path);
  const orel::Trajectory gt = orel::read_tum_file(gt_path);
  const std::vector<orel::PairedSample> pairs = orel::associate(est, gt, max_dt);
  const orel::Alignment alignment = orel::align_se3(pairs, with_scale);
  const orel::RmseReport report = orel::rmse(pairs, alignment);

  std::printf("samples         : %d\n", report.n_samples);
  std::printf("pos rmse [m]    : %.6f %.6f %.6f\n", report.pos_rmse.x(), report.pos_rmse.y(),
              report.pos_rmse.z());
  std::printf("euler rmse [deg]: %.4f %.4f %.4f  (roll pitch yaw, z-y-x)\n",
              report.euler_rmse_deg.x(), report.euler_rmse_deg.y(), report.euler_rmse_deg.z());
  std::printf("alignment t     : %.6f %.6f %.6f\n", alignment.transform.p.x(),
              alignment.transform.p.y(), alignment.transform.p.z());
  std::printf("alignment q xyzw: %.6f %.6f %.6f %.6f  scale: %.6f\n", alignment.transform.q.x(),
              alignment.transform.q.y(), alignment.transform.q.z(), alignment.transform.q.w(),
              alignment.scale);

  nlohmann::json j;
  j["n_samples"] = report.n_samples;
  j["pos_rmse_m"] = {report.pos_rmse.x(), report.pos_rmse.y(), report.pos_rmse.z()};
  j["euler_rmse_deg"] = {report.euler_rmse_deg.x(), report.euler_rmse_deg.y(),
                         report.euler_rmse_deg.z()};
  j["euler_convention"] = "zyx (roll, pitch, yaw)";
  j["alignment"] = {
      {"translation", {alignment.transform.p.x(), alignment.transform.p.y(), alignment.transform.p.z()}},
      {"quaternion_xyzw",
       {alignment.transform.q.x(), alignment.transform.q.y(), alignment.transform.q.z(),
        alignment.transform.q.w()}},
      {"scale", alignment.scale},
      {"mode", with_scale ? "sim3" : "se3"},
  };
  if (out_path.empty()) out_path = est_path + ".eval.json";
  orel::atomic_write_file(out_path, [&](std::ostream& os) { os << j.dump(2) << "\n"; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"object-relative visual-inertial state estimation"};
  app.require_subcommand(1);

  std::string config_path, out_dir, log_path, est_path, gt_path, eval_out;
  bool with_scale = false;
  double max_dt = 0.01;

  CLI::App* sim = app.add_subcommand("simulate", "generate a synthetic measurement log");
  sim->add_option("--config", config_path, "experiment config (YAML)")->required();
  sim->add_option("--out", out_dir, "output directory")->required();

  CLI::App* fuse = app.add_subcommand("fuse", "run the filter over a measurement log");
  fuse->add_option("--log", log_path, "measurement log")->required();
  fuse->add_option("--config", config_path, "experiment config (YAML)")->required();
  fuse->add_option("--out", out_dir, "output directory")->required();

  CLI::App* eval = app.add_subcommand("eval", "compare an estimate against ground truth");
  eval->add_option("--est", est_path, "estimated trajectory (TUM)")->required();
  eval->add_option("--gt", gt_path, "ground-truth trajectory (TUM)")->required();
  eval->add_flag("--with-scale", with_scale, "solve Sim(3) instead of SE(3)");
  eval->add_option("--max-dt", max_dt, "association window [s]");
  eval->add_option("--out", eval_out, "machine-readable report path (default: <est>.eval.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (sim->parsed()) run_simulate(config_path, out_dir);
    if (fuse->parsed()) run_fuse(log_path, config_path, out_dir);
    if (eval->parsed()) run_eval(est_path, gt_path, with_scale, max_dt, eval_out);
  } catch (const orel::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const orel::ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const orel::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericError;
  }
  return kOk;
}
