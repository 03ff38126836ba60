#include "changeret/ics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

#include "changeret/error.hpp"

namespace changeret {

namespace {

constexpr double kDegToRad = M_PI / 180.0;

double entropy_of(const std::vector<double>& bins, double total) {
  double h = 0.0;
  for (double w : bins) {
    if (w <= 0.0) continue;
    const double p = w / total;
    h -= p * std::log(p);
  }
  return h;
}

/// Reusable evaluator of yaw_entropy over one centered cloud.
class EntropyObjective {
 public:
  EntropyObjective(const Points& centered, double bin_width)
      : pts_(centered), bin_width_(bin_width) {
    double r = 0.0;
    for (const auto& p : pts_) r = std::max(r, std::hypot(p.x(), p.y()));
    // bins k cover centres (k + 0.5) * w, k in [-offset, offset)
    offset_ = static_cast<long>(std::ceil(r / bin_width_)) + 2;
    x_.assign(static_cast<std::size_t>(2 * offset_), 0.0);
    y_.assign(x_.size(), 0.0);
  }

  double operator()(double yaw_deg) {
    std::fill(x_.begin(), x_.end(), 0.0);
    std::fill(y_.begin(), y_.end(), 0.0);
    const double c = std::cos(yaw_deg * kDegToRad);
    const double s = std::sin(yaw_deg * kDegToRad);
    for (const auto& p : pts_) {
      add(x_, c * p.x() + s * p.y());
      add(y_, -s * p.x() + c * p.y());
    }
    const double total = static_cast<double>(pts_.size());
    return entropy_of(x_, total) + entropy_of(y_, total);
  }

 private:
  void add(std::vector<double>& bins, double v) const {
    const double u = v / bin_width_ - 0.5;
    const double k = std::floor(u);
    const double t = u - k;
    const auto i = static_cast<std::size_t>(static_cast<long>(k) + offset_);
    bins[i] += 1.0 - t;
    bins[i + 1] += t;
  }

  const Points& pts_;
  double bin_width_;
  long offset_ = 0;
  std::vector<double> x_, y_;
};

Points centered_points(const PointCloud& cloud) {
  const Point3 c = centroid(cloud.points);
  Points out;
  out.reserve(cloud.size());
  for (const auto& p : cloud.points) out.push_back(p - c);
  return out;
}

}  // namespace

void IcsParams::validate() const {
  if (!(resolution_deg > 0.0) || resolution_deg > 90.0) {
    throw Error(Errc::kConfig, "ics resolution must be in (0, 90] degrees");
  }
  const double steps = 90.0 / resolution_deg;
  if (std::abs(steps - std::round(steps)) > 1e-9) {
    throw Error(Errc::kConfig, "ics resolution must divide 90 degrees");
  }
  if (refine_factor < 1) throw Error(Errc::kConfig, "ics refine_factor must be >= 1");
  if (refine_candidates < 1) throw Error(Errc::kConfig, "ics refine_candidates must be >= 1");
  if (!(bin_width > 0.0)) throw Error(Errc::kConfig, "ics bin_width must be positive");
}

Eigen::Vector3d cog_origin(const PointCloud& cloud) {
  if (cloud.empty()) throw Error(Errc::kEmptyCloud, "centroid of an empty cloud");
  return -centroid(cloud.points);
}

double yaw_entropy(const Points& centered, double yaw_deg, double bin_width) {
  EntropyObjective objective(centered, bin_width);
  return objective(yaw_deg);
}

YawEstimate entropy_yaw(const PointCloud& cloud, const IcsParams& params) {
  params.validate();
  if (cloud.size() < 2) throw Error(Errc::kDegenerate, "yaw search needs at least two points");
  const Points pts = centered_points(cloud);
  double extent = 0.0;
  for (const auto& p : pts) extent = std::max(extent, std::hypot(p.x(), p.y()));
  if (!(extent > 0.0)) {
    throw Error(Errc::kDegenerate, "all points share one horizontal position");
  }

  EntropyObjective objective(pts, params.bin_width);
  // integer lattice in fine steps keeps every evaluated angle exactly reproducible
  const long factor = params.refine_factor;
  const long coarse_steps = std::lround(90.0 / params.resolution_deg);
  const long fine_steps = coarse_steps * factor;
  const double fine_deg = 90.0 / static_cast<double>(fine_steps);

  std::vector<double> coarse(static_cast<std::size_t>(coarse_steps));
  double worst = -std::numeric_limits<double>::infinity();
  double coarse_best = std::numeric_limits<double>::infinity();
  for (long k = 0; k < coarse_steps; ++k) {
    coarse[k] = objective(static_cast<double>(k * factor) * fine_deg);
    worst = std::max(worst, coarse[k]);
    coarse_best = std::min(coarse_best, coarse[k]);
  }
  const bool low_contrast =
      worst <= 0.0 || (worst - coarse_best) / worst < params.low_contrast_ratio;

  // narrow dips fall between coarse samples and need not make a coarse local
  // minimum, so the neighborhoods of the lowest few coarse samples are refined
  std::vector<long> order(static_cast<std::size_t>(coarse_steps));
  std::iota(order.begin(), order.end(), 0L);
  std::stable_sort(order.begin(), order.end(), [&](long a, long b) { return coarse[a] < coarse[b]; });
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(params.refine_candidates)));

  std::map<long, double> fine;
  for (long k = 0; k < coarse_steps; ++k) fine.emplace(k * factor, coarse[k]);
  for (long k : order) {
    for (long m = -factor; m <= factor; ++m) {
      const long idx = ((k * factor + m) % fine_steps + fine_steps) % fine_steps;
      if (!fine.count(idx)) fine.emplace(idx, objective(static_cast<double>(idx) * fine_deg));
    }
  }
  // ascending index, so strict improvement keeps the smallest angle on ties
  long best_fine = 0;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [idx, e] : fine) {
    if (e < best) {
      best = e;
      best_fine = idx;
    }
  }

  // quadrant: the unique quarter turn leaving both third moments non-negative
  const double theta = static_cast<double>(best_fine) * fine_deg;
  const double c = std::cos(theta * kDegToRad);
  const double s = std::sin(theta * kDegToRad);
  double m3x = 0.0, m3y = 0.0, m2 = 0.0;
  for (const auto& p : pts) {
    const double x = c * p.x() + s * p.y();
    const double y = -s * p.x() + c * p.y();
    m3x += x * x * x;
    m3y += y * y * y;
    m2 += x * x + y * y;
  }
  const double n = static_cast<double>(pts.size());
  m3x /= n;
  m3y /= n;
  const double tol = 1e-9 * std::pow(m2 / n, 1.5);
  const bool px = m3x >= -tol;
  const bool py = m3y >= -tol;
  // rotating the frame by +90 maps moments (sx, sy) to (sy, -sx)
  int quarter = 0;
  if (px && py) quarter = 0;
  else if (!px && py) quarter = 1;
  else if (!px && !py) quarter = 2;
  else quarter = 3;

  YawEstimate out;
  const long total_idx = best_fine + quarter * fine_steps;
  out.yaw_deg = static_cast<double>(total_idx) * fine_deg;
  out.entropy = best;
  out.low_contrast = low_contrast;
  return out;
}

IcsResult to_ics(const PointCloud& cloud, const IcsParams& params) {
  if (cloud.empty()) throw Error(Errc::kEmptyCloud, "cannot align an empty cloud");
  const YawEstimate yaw = entropy_yaw(cloud, params);
  const Eigen::Vector3d shift = cog_origin(cloud);
  IcsResult out;
  auto& al = out.alignment;
  al.transform = RigidTransform::from_yaw(-yaw.yaw_deg * kDegToRad);
  al.transform.translation = al.transform.rotation * shift;
  al.yaw_deg = yaw.yaw_deg;
  al.entropy = yaw.entropy;
  al.low_contrast = yaw.low_contrast;
  out.cloud = apply_transform(cloud, al.transform);
  return out;
}

IcsResult to_ics(const LocalMap& map, const IcsParams& params) { return to_ics(map.cloud, params); }

}  // namespace changeret
