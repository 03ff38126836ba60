#include "changeret/cloud.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <unordered_map>

#include "changeret/atomic_file.hpp"
#include "changeret/error.hpp"
#include "changeret/kdtree.hpp"

namespace changeret {

const char* to_string(Errc code) {
  switch (code) {
    case Errc::kParse: return "parse error";
    case Errc::kEmptyCloud: return "empty cloud";
    case Errc::kIo: return "I/O error";
    case Errc::kPrecondition: return "precondition violated";
    case Errc::kDegenerate: return "degenerate input";
    case Errc::kMismatch: return "mismatch";
    case Errc::kOutOfRange: return "out of range";
    case Errc::kDuplicateId: return "duplicate id";
    case Errc::kInsufficientData: return "insufficient data";
    case Errc::kConfig: return "config error";
  }
  return "error";
}

void write_atomically(const std::filesystem::path& path, std::ios::openmode mode,
                      const std::function<void(std::ostream&)>& writer) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, mode | std::ios::out | std::ios::trunc);
    if (!os) throw Error(Errc::kIo, "cannot open " + tmp.string() + " for writing");
    writer(os);
    os.flush();
    if (!os) throw Error(Errc::kIo, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(Errc::kIo, "rename to " + path.string() + " failed: " + ec.message());
}

void PointCloud::validate() const {
  for (const auto& p : points) {
    if (!p.allFinite()) throw Error(Errc::kPrecondition, "non-finite point coordinate");
  }
  if (normals.empty()) return;
  if (normals.size() != points.size()) {
    throw Error(Errc::kPrecondition, "normal count differs from point count");
  }
  for (const auto& n : normals) {
    if (!n.allFinite()) throw Error(Errc::kPrecondition, "non-finite normal");
    if (!is_zero_normal(n) && std::abs(n.norm() - 1.0) > 1e-6) {
      throw Error(Errc::kPrecondition, "normal is not unit length");
    }
  }
}

RigidTransform RigidTransform::from_yaw(double radians, const Eigen::Vector3d& t) {
  RigidTransform out;
  out.rotation = Eigen::AngleAxisd(radians, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  out.translation = t;
  return out;
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform out;
  out.rotation = rotation.transpose();
  out.translation = -(out.rotation * translation);
  return out;
}

RigidTransform RigidTransform::operator*(const RigidTransform& other) const {
  RigidTransform out;
  out.rotation = rotation * other.rotation;
  out.translation = rotation * other.translation + translation;
  return out;
}

bool RigidTransform::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const Eigen::Matrix3d err = rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
  if (err.cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(rotation.determinant() - 1.0) <= tol;
}

double RigidTransform::rotation_angle() const {
  const double c = std::clamp((rotation.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

AxisAlignedBox AxisAlignedBox::bounding(const Points& pts) {
  AxisAlignedBox box;
  if (pts.empty()) return box;
  box.min_corner = box.max_corner = pts.front();
  for (const auto& p : pts) {
    box.min_corner = box.min_corner.cwiseMin(p);
    box.max_corner = box.max_corner.cwiseMax(p);
  }
  return box;
}

CloudFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".ply" ? CloudFormat::kPlyAscii : CloudFormat::kXyzText;
}

namespace {

bool parse_doubles(const std::string& line, std::vector<double>& out) {
  out.clear();
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) {
    // strtod accepts "nan"/"inf"; those are rejected below as non-finite
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) return false;
    out.push_back(v);
  }
  return true;
}

void push_row(PointCloud& cloud, const std::vector<double>& v, bool with_normal,
              const std::string& where) {
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(Errc::kParse, where + ": non-finite value");
  }
  cloud.points.emplace_back(v[0], v[1], v[2]);
  if (with_normal) cloud.normals.emplace_back(v[3], v[4], v[5]);
}

PointCloud load_xyz(std::istream& is, const std::string& name) {
  PointCloud cloud;
  std::string line;
  std::vector<double> vals;
  std::size_t lineno = 0;
  int columns = -1;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string where = name + ":" + std::to_string(lineno);
    if (!parse_doubles(line, vals)) throw Error(Errc::kParse, where + ": malformed number");
    if (vals.empty()) continue;
    if (vals.size() != 3 && vals.size() != 6) {
      throw Error(Errc::kParse, where + ": expected 3 or 6 columns");
    }
    if (columns < 0) columns = static_cast<int>(vals.size());
    if (static_cast<int>(vals.size()) != columns) {
      throw Error(Errc::kParse, where + ": inconsistent column count");
    }
    push_row(cloud, vals, columns == 6, where);
  }
  return cloud;
}

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<std::string> properties;
  std::vector<bool> is_list;
};

PointCloud load_ply(std::istream& is, const std::string& name) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("ply", 0) != 0) {
    throw Error(Errc::kParse, name + ": missing 'ply' header");
  }
  std::vector<PlyElement> elements;
  bool ascii = false;
  for (;;) {
    if (!std::getline(is, line)) throw Error(Errc::kParse, name + ": unterminated header");
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "format") {
      std::string fmt;
      ss >> fmt;
      ascii = fmt == "ascii";
    } else if (key == "element") {
      PlyElement el;
      ss >> el.name >> el.count;
      if (!ss) throw Error(Errc::kParse, name + ": bad element line");
      elements.push_back(el);
    } else if (key == "property") {
      if (elements.empty()) throw Error(Errc::kParse, name + ": property before element");
      std::string type;
      ss >> type;
      if (type == "list") {
        std::string count_type, item_type, prop;
        ss >> count_type >> item_type >> prop;
        elements.back().properties.push_back(prop);
        elements.back().is_list.push_back(true);
      } else {
        std::string prop;
        ss >> prop;
        elements.back().properties.push_back(prop);
        elements.back().is_list.push_back(false);
      }
    } else if (key == "end_header") {
      break;
    } else if (key == "comment" || key == "obj_info" || key.empty()) {
      continue;
    } else {
      throw Error(Errc::kParse, name + ": unknown header keyword '" + key + "'");
    }
  }
  if (!ascii) throw Error(Errc::kParse, name + ": only ascii PLY is supported");

  PointCloud cloud;
  bool seen_vertex = false;
  std::vector<double> vals;
  for (const auto& el : elements) {
    if (el.name != "vertex") {
      // skip other elements line by line
      for (std::size_t i = 0; i < el.count; ++i) {
        if (!std::getline(is, line)) throw Error(Errc::kParse, name + ": truncated body");
      }
      continue;
    }
    if (seen_vertex) throw Error(Errc::kParse, name + ": duplicate vertex element");
    seen_vertex = true;
    auto find = [&](const std::string& p) -> int {
      for (std::size_t i = 0; i < el.properties.size(); ++i) {
        if (el.properties[i] == p) return el.is_list[i] ? -2 : static_cast<int>(i);
      }
      return -1;
    };
    const int ix = find("x"), iy = find("y"), iz = find("z");
    const int inx = find("nx"), iny = find("ny"), inz = find("nz");
    if (ix < 0 || iy < 0 || iz < 0) throw Error(Errc::kParse, name + ": vertex lacks x/y/z");
    for (std::size_t i = 0; i < el.properties.size(); ++i) {
      if (el.is_list[i]) throw Error(Errc::kParse, name + ": list property on vertex");
    }
    const bool normals = inx >= 0 && iny >= 0 && inz >= 0;
    for (std::size_t i = 0; i < el.count; ++i) {
      const std::string where = name + ": vertex " + std::to_string(i);
      if (!std::getline(is, line)) throw Error(Errc::kParse, where + ": truncated body");
      if (!parse_doubles(line, vals)) throw Error(Errc::kParse, where + ": malformed number");
      if (vals.size() != el.properties.size()) {
        throw Error(Errc::kParse, where + ": wrong property count");
      }
      std::vector<double> row{vals[ix], vals[iy], vals[iz]};
      if (normals) row.insert(row.end(), {vals[inx], vals[iny], vals[inz]});
      push_row(cloud, row, normals, where);
    }
  }
  if (!seen_vertex) throw Error(Errc::kParse, name + ": no vertex element");
  return cloud;
}

}  // namespace

PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::kIo, "cannot open " + path.string());
  PointCloud cloud = format == CloudFormat::kPlyAscii ? load_ply(is, path.string())
                                                      : load_xyz(is, path.string());
  if (cloud.empty()) throw Error(Errc::kEmptyCloud, path.string() + " contains no points");
  return cloud;
}

PointCloud load_cloud(const std::filesystem::path& path) {
  return load_cloud(path, format_from_path(path));
}

void save_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format) {
  if (cloud.empty()) throw Error(Errc::kEmptyCloud, "refusing to save an empty cloud");
  const bool normals = cloud.has_normals();
  write_atomically(path, std::ios::out, [&](std::ostream& os) {
    os << std::setprecision(17);
    if (format == CloudFormat::kPlyAscii) {
      os << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << "\n"
         << "property double x\nproperty double y\nproperty double z\n";
      if (normals) os << "property double nx\nproperty double ny\nproperty double nz\n";
      os << "end_header\n";
    }
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const auto& p = cloud.points[i];
      os << p.x() << ' ' << p.y() << ' ' << p.z();
      if (normals) {
        const auto& n = cloud.normals[i];
        os << ' ' << n.x() << ' ' << n.y() << ' ' << n.z();
      }
      os << '\n';
    }
  });
}

void save_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  save_cloud(cloud, path, format_from_path(path));
}

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t) {
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(t.apply(p));
  out.normals.reserve(cloud.normals.size());
  for (const auto& n : cloud.normals) out.normals.push_back(t.rotation * n);
  return out;
}

Point3 centroid(const Points& pts) {
  Point3 sum = Point3::Zero();
  for (const auto& p : pts) sum += p;
  return pts.empty() ? sum : Point3(sum / static_cast<double>(pts.size()));
}

namespace {

Point3 orient_normal(Point3 n, double tol) {
  double key = n.z();
  if (std::abs(key) <= tol) key = std::abs(n.x()) > tol ? n.x() : n.y();
  return key < 0.0 ? Point3(-n) : n;
}

}  // namespace

PointCloud estimate_normals(const PointCloud& cloud, double radius, double sign_tie_tolerance) {
  if (!(radius > 0.0)) throw Error(Errc::kPrecondition, "normal radius must be positive");
  PointCloud out;
  out.points = cloud.points;
  out.normals.assign(cloud.size(), Point3::Zero());
  const PointIndex index(cloud.points);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto nbrs = index.radius_search(cloud.points[i], radius);
    if (nbrs.size() < 3) continue;
    Point3 mean = Point3::Zero();
    for (auto j : nbrs) mean += cloud.points[j];
    mean /= static_cast<double>(nbrs.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (auto j : nbrs) {
      const Point3 d = cloud.points[j] - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
    // eigenvalues ascending
    Point3 n = solver.eigenvectors().col(0);
    const double len = n.norm();
    if (!(len > 0.0) || !n.allFinite()) continue;
    out.normals[i] = orient_normal(n / len, sign_tie_tolerance);
  }
  return out;
}

PointCloud voxel_deduplicate(const PointCloud& cloud, double voxel) {
  if (!(voxel > 0.0)) throw Error(Errc::kPrecondition, "voxel size must be positive");
  struct KeyHash {
    std::size_t operator()(const Eigen::Vector3i& k) const {
      std::size_t h = static_cast<std::size_t>(k.x()) * 73856093u;
      h ^= static_cast<std::size_t>(k.y()) * 19349663u;
      h ^= static_cast<std::size_t>(k.z()) * 83492791u;
      return h;
    }
  };
  struct KeyEq {
    bool operator()(const Eigen::Vector3i& a, const Eigen::Vector3i& b) const { return a == b; }
  };
  std::unordered_map<Eigen::Vector3i, bool, KeyHash, KeyEq> seen;
  PointCloud out;
  const bool normals = cloud.has_normals();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3& p = cloud.points[i];
    const Eigen::Vector3i key((p / voxel).array().floor().cast<int>());
    if (!seen.emplace(key, true).second) continue;
    out.points.push_back(p);
    if (normals) out.normals.push_back(cloud.normals[i]);
  }
  return out;
}

}  // namespace changeret
