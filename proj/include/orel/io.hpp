#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "orel/propagation.hpp"
#include "orel/trajectory.hpp"
#include "orel/update.hpp"

namespace orel {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, long line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

class IoError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kLogFormatVersion = 1;

struct LogHeader {
  int version = kLogFormatVersion;
  double imu_rate = 0.0;
  double cam_rate = 0.0;
  std::vector<std::string> object_ids;
  std::string anchor_id;
  Vec3 gravity{0.0, 0.0, -9.81};
};

/// Replayable sensor streams plus the header that makes them self-describing.
struct MeasurementLog {
  LogHeader header;
  std::vector<ImuSample> imu;
  std::vector<FrameMeasurement> frames;
};

namespace detail {

/// Shortest representation that round-trips a double exactly.
inline std::string full(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string sig9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline void require_plain_id(const std::string& id) {
  if (id.empty() || id.find_first_of(" \t\r\n") != std::string::npos) {
    throw IoError("object id must be non-empty and whitespace-free: '" + id + "'");
  }
}

}  // namespace detail

inline void write_measurement_log(std::ostream& os, const MeasurementLog& log) {
  os << "ORELLOG " << log.header.version << "\n";
  os << "RATES " << detail::full(log.header.imu_rate) << " " << detail::full(log.header.cam_rate)
     << "\n";
  os << "OBJECTS";
  for (const auto& id : log.header.object_ids) {
    detail::require_plain_id(id);
    os << " " << id;
  }
  os << "\n";
  os << "ANCHOR " << log.header.anchor_id << "\n";
  os << "GRAVITY " << detail::full(log.header.gravity.x()) << " "
     << detail::full(log.header.gravity.y()) << " " << detail::full(log.header.gravity.z()) << "\n";
  for (const auto& u : log.imu) {
    os << "IMU " << detail::full(u.t);
    for (int i = 0; i < 3; ++i) os << " " << detail::full(u.w_m(i));
    for (int i = 0; i < 3; ++i) os << " " << detail::full(u.a_m(i));
    os << "\n";
  }
  for (const auto& f : log.frames) {
    os << "FRAME " << detail::full(f.t) << " " << f.detections.size() << "\n";
    for (const auto& d : f.detections) {
      os << "DET " << d.object_id;
      for (int i = 0; i < 3; ++i) os << " " << detail::full(d.p_co(i));
      os << " " << detail::full(d.q_co.x()) << " " << detail::full(d.q_co.y()) << " "
         << detail::full(d.q_co.z()) << " " << detail::full(d.q_co.w()) << "\n";
    }
  }
}

inline MeasurementLog read_measurement_log(std::istream& is) {
  MeasurementLog log;
  std::string line;
  long line_no = 0;
  bool have_magic = false;
  long pending_dets = 0;
  std::set<std::string> known_ids;
  std::set<std::string> frame_ids;

  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (!have_magic) {
      if (tag != "ORELLOG") throw ParseError("not a measurement log (missing ORELLOG magic)", line_no);
      int version = -1;
      if (!(ss >> version)) throw ParseError("malformed ORELLOG line", line_no);
      if (version != kLogFormatVersion) {
        throw ParseError("unsupported log format version " + std::to_string(version) +
                             " (expected " + std::to_string(kLogFormatVersion) + ")",
                         line_no);
      }
      log.header.version = version;
      have_magic = true;
      continue;
    }
    if (tag == "RATES") {
      if (!(ss >> log.header.imu_rate >> log.header.cam_rate)) {
        throw ParseError("malformed RATES record", line_no);
      }
    } else if (tag == "OBJECTS") {
      std::string id;
      while (ss >> id) {
        if (!known_ids.insert(id).second) throw ParseError("duplicate object id '" + id + "'", line_no);
        log.header.object_ids.push_back(id);
      }
      if (log.header.object_ids.empty()) throw ParseError("OBJECTS record lists no ids", line_no);
    } else if (tag == "ANCHOR") {
      if (!(ss >> log.header.anchor_id)) throw ParseError("malformed ANCHOR record", line_no);
    } else if (tag == "GRAVITY") {
      if (!(ss >> log.header.gravity.x() >> log.header.gravity.y() >> log.header.gravity.z())) {
        throw ParseError("malformed GRAVITY record", line_no);
      }
    } else if (tag == "IMU") {
      if (pending_dets > 0) throw ParseError("IMU record inside a FRAME detection block", line_no);
      ImuSample u;
      if (!(ss >> u.t >> u.w_m.x() >> u.w_m.y() >> u.w_m.z() >> u.a_m.x() >> u.a_m.y() >>
            u.a_m.z())) {
        throw ParseError("malformed IMU record", line_no);
      }
      if (!log.imu.empty() && !(u.t > log.imu.back().t)) {
        throw ParseError("IMU timestamps not strictly increasing", line_no);
      }
      log.imu.push_back(u);
    } else if (tag == "FRAME") {
      if (pending_dets > 0) throw ParseError("FRAME record before previous frame completed", line_no);
      FrameMeasurement f;
      if (!(ss >> f.t >> pending_dets) || pending_dets < 0) {
        throw ParseError("malformed FRAME record", line_no);
      }
      if (!log.frames.empty() && !(f.t > log.frames.back().t)) {
        throw ParseError("frame timestamps not strictly increasing", line_no);
      }
      frame_ids.clear();
      log.frames.push_back(f);
    } else if (tag == "DET") {
      if (log.frames.empty() || pending_dets <= 0) {
        throw ParseError("DET record outside a frame", line_no);
      }
      ObjectPoseMeasurement d;
      double qx, qy, qz, qw;
      if (!(ss >> d.object_id >> d.p_co.x() >> d.p_co.y() >> d.p_co.z() >> qx >> qy >> qz >> qw)) {
        throw ParseError("malformed DET record", line_no);
      }
      if (!known_ids.count(d.object_id)) {
        throw ParseError("detection references unknown object '" + d.object_id + "'", line_no);
      }
      if (!frame_ids.insert(d.object_id).second) {
        throw ParseError("duplicate detection for object '" + d.object_id + "' in one frame", line_no);
      }
      d.t = log.frames.back().t;
      d.q_co = Quat(qw, qx, qy, qz);
      log.frames.back().detections.push_back(d);
      --pending_dets;
    } else {
      throw ParseError("unknown record tag '" + tag + "'", line_no);
    }
  }
  if (!have_magic) throw ParseError("empty or truncated log (missing ORELLOG magic)", line_no);
  if (pending_dets > 0) throw ParseError("truncated frame: missing DET records", line_no);
  if (log.header.object_ids.empty()) throw ParseError("log is missing an OBJECTS record", line_no);
  if (log.header.anchor_id.empty()) throw ParseError("log is missing an ANCHOR record", line_no);
  if (!known_ids.count(log.header.anchor_id)) {
    throw ParseError("anchor id '" + log.header.anchor_id + "' not among object ids", line_no);
  }
  return log;
}

/// TUM trajectory format: "t tx ty tz qx qy qz qw", 9 significant digits.
inline void write_tum(std::ostream& os, const Trajectory& traj) {
  for (const auto& s : traj) {
    os << detail::sig9(s.t) << " " << detail::sig9(s.pose.p.x()) << " "
       << detail::sig9(s.pose.p.y()) << " " << detail::sig9(s.pose.p.z()) << " "
       << detail::sig9(s.pose.q.x()) << " " << detail::sig9(s.pose.q.y()) << " "
       << detail::sig9(s.pose.q.z()) << " " << detail::sig9(s.pose.q.w()) << "\n";
  }
}

inline Trajectory read_tum(std::istream& is) {
  Trajectory traj;
  std::string line;
  long line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    TimedPose s;
    double qx, qy, qz, qw;
    if (!(ss >> s.t >> s.pose.p.x() >> s.pose.p.y() >> s.pose.p.z() >> qx >> qy >> qz >> qw)) {
      throw ParseError("malformed trajectory record", line_no);
    }
    s.pose.q = Quat(qw, qx, qy, qz).normalized();
    if (!traj.empty() && !(s.t > traj.back().t)) {
      throw ParseError("trajectory timestamps not strictly increasing", line_no);
    }
    traj.push_back(s);
  }
  return traj;
}

/// One line per object: "id tx ty tz qx qy qz qw".
inline void write_object_poses(std::ostream& os, const std::vector<std::pair<std::string, Pose>>& objects) {
  for (const auto& [id, pose] : objects) {
    detail::require_plain_id(id);
    os << id << " " << detail::sig9(pose.p.x()) << " " << detail::sig9(pose.p.y()) << " "
       << detail::sig9(pose.p.z()) << " " << detail::sig9(pose.q.x()) << " "
       << detail::sig9(pose.q.y()) << " " << detail::sig9(pose.q.z()) << " "
       << detail::sig9(pose.q.w()) << "\n";
  }
}

inline std::vector<std::pair<std::string, Pose>> read_object_poses(std::istream& is) {
  std::vector<std::pair<std::string, Pose>> objects;
  std::string line;
  long line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string id;
    Pose pose;
    double qx, qy, qz, qw;
    if (!(ss >> id >> pose.p.x() >> pose.p.y() >> pose.p.z() >> qx >> qy >> qz >> qw)) {
      throw ParseError("malformed object pose record", line_no);
    }
    pose.q = Quat(qw, qx, qy, qz).normalized();
    objects.emplace_back(id, pose);
  }
  return objects;
}

/// Line-delimited update report: one FRAME line per camera frame, one DET
/// line per detection.
inline void write_report(std::ostream& os, const std::vector<UpdateReport>& reports) {
  char buf[64];
  for (const auto& rep : reports) {
    std::snprintf(buf, sizeof(buf), "%.6f", rep.t);
    os << "FRAME " << buf << " " << (rep.applied ? "applied" : "skipped") << " "
       << to_string(rep.skip_reason) << " det=" << rep.detections.size()
       << " acc=" << rep.n_accepted << " init=" << rep.n_initialized << "\n";
    for (const auto& d : rep.detections) {
      std::snprintf(buf, sizeof(buf), "%.4g", d.chi2);
      os << "DET " << d.object_id << " " << (d.accepted ? "accepted" : "rejected") << " "
         << to_string(d.reason) << " chi2=" << buf << "\n";
    }
  }
}

/// Writes through a temp file in the same directory, then renames into place.
inline void atomic_write_file(const std::filesystem::path& path,
                              const std::function<void(std::ostream&)>& writer) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open '" + tmp.string() + "' for writing");
    writer(os);
    os.flush();
    if (!os) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline MeasurementLog read_measurement_log_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open log file '" + path.string() + "'");
  return read_measurement_log(is);
}

inline Trajectory read_tum_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open trajectory file '" + path.string() + "'");
  return read_tum(is);
}

}  // namespace orel
