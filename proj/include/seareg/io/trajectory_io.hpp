#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "seareg/submap/submap.hpp"

namespace seareg::io {

namespace detail {

inline std::vector<std::string> splitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  return out;
}

inline double parseDouble(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw Error(Errc::Parse, "bad number '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw Error(Errc::Parse, "bad number '" + s + "'");
  }
}

}  // namespace detail

inline constexpr const char* kPoseCsvHeader = "t,x,y,z,qw,qx,qy,qz";

/// Reads `t,x,y,z,qw,qx,qy,qz` rows (header required) as timed world-from-body poses.
inline std::vector<TimedPose> read_pose_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::Parse, "empty pose CSV");
  const auto header = detail::splitCsv(line);
  const std::vector<std::string> expected{"t", "x", "y", "z", "qw", "qx", "qy", "qz"};
  if (header != expected) throw Error(Errc::Parse, std::string("pose CSV header must be ") + kPoseCsvHeader);
  std::vector<TimedPose> poses;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = detail::splitCsv(line);
    if (f.size() != 8) throw Error(Errc::Parse, "pose CSV row must have 8 fields");
    double v[8];
    for (int i = 0; i < 8; ++i) v[i] = detail::parseDouble(f[static_cast<std::size_t>(i)]);
    const Eigen::Quaterniond q(v[4], v[5], v[6], v[7]);
    if (std::abs(q.norm() - 1.0) > 1e-6) throw Error(Errc::Parse, "pose quaternion is not unit length");
    poses.push_back({v[0], RigidTransform(q, Vec3(v[1], v[2], v[3]))});
  }
  return poses;
}

inline void write_pose_csv(std::ostream& out, const std::vector<TimedPose>& poses) {
  out << kPoseCsvHeader << '\n' << std::setprecision(17);
  for (const auto& p : poses) {
    const auto q = p.world_from_body.quaternion();
    const Vec3& t = p.world_from_body.translation();
    out << p.t << ',' << t.x() << ',' << t.y() << ',' << t.z() << ',' << q.w() << ',' << q.x() << ',' << q.y() << ','
        << q.z() << '\n';
  }
}

inline Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  return Trajectory(read_pose_csv(in));
}

inline void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path);
  write_pose_csv(out, traj.samples());
}

/// Binary scan-line records: t:f64, n:u32, then n x (f32,f32,f32), little-endian.
inline void write_scan_lines(std::ostream& out, const std::vector<ScanLine>& lines) {
  for (const auto& l : lines) {
    const double t = l.t;
    const auto n = static_cast<std::uint32_t>(l.points.size());
    out.write(reinterpret_cast<const char*>(&t), sizeof t);
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    for (const auto& p : l.points) {
      const float xyz[3] = {static_cast<float>(p.x()), static_cast<float>(p.y()), static_cast<float>(p.z())};
      out.write(reinterpret_cast<const char*>(xyz), sizeof xyz);
    }
  }
}

inline std::vector<ScanLine> read_scan_lines(std::istream& in) {
  std::vector<ScanLine> lines;
  while (true) {
    double t;
    if (!in.read(reinterpret_cast<char*>(&t), sizeof t)) {
      if (in.gcount() != 0) throw Error(Errc::Parse, "truncated scan-line record");
      break;
    }
    std::uint32_t n = 0;
    if (!in.read(reinterpret_cast<char*>(&n), sizeof n)) throw Error(Errc::Parse, "truncated scan-line record");
    ScanLine l;
    l.t = t;
    l.points.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      float xyz[3];
      if (!in.read(reinterpret_cast<char*>(xyz), sizeof xyz)) throw Error(Errc::Parse, "truncated scan-line points");
      l.points.emplace_back(xyz[0], xyz[1], xyz[2]);
    }
    lines.push_back(std::move(l));
  }
  return lines;
}

inline void write_scan_lines(const std::string& path, const std::vector<ScanLine>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path);
  write_scan_lines(out, lines);
}

inline std::vector<ScanLine> read_scan_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  return read_scan_lines(in);
}

/// CSV debug form: header `t,x,y,z`, one row per point; consecutive rows with
/// the same t belong to one line. Lines without points are not representable.
inline void write_scan_lines_csv(std::ostream& out, const std::vector<ScanLine>& lines) {
  out << "t,x,y,z\n" << std::setprecision(17);
  for (const auto& l : lines)
    for (const auto& p : l.points) out << l.t << ',' << p.x() << ',' << p.y() << ',' << p.z() << '\n';
}

inline std::vector<ScanLine> read_scan_lines_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::splitCsv(line) != std::vector<std::string>{"t", "x", "y", "z"})
    throw Error(Errc::Parse, "scan-line CSV header must be t,x,y,z");
  std::vector<ScanLine> lines;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = detail::splitCsv(line);
    if (f.size() != 4) throw Error(Errc::Parse, "scan-line CSV row must have 4 fields");
    const double t = detail::parseDouble(f[0]);
    if (lines.empty() || lines.back().t != t) lines.push_back({t, {}});
    lines.back().points.emplace_back(detail::parseDouble(f[1]), detail::parseDouble(f[2]), detail::parseDouble(f[3]));
  }
  return lines;
}

}  // namespace seareg::io
