#include "retrofilter/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Geometry>

#include "retrofilter/errors.hpp"

namespace retrofilter::sensing {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kE2 = kWgs84F * (2.0 - kWgs84F);

void require_valid(const GeodeticCoord& g) {
  if (!(g.lat_deg >= -90.0 && g.lat_deg <= 90.0) || !(g.lon_deg >= -180.0 && g.lon_deg <= 180.0) ||
      !std::isfinite(g.alt_m)) {
    std::ostringstream os;
    os << "geodetic coordinate out of range: lat " << g.lat_deg << ", lon " << g.lon_deg << ", alt "
       << g.alt_m;
    throw Error(ErrorKind::Domain, os.str());
  }
}

Vec3 sensor_position(const StateVector& x, const Vec3& site_ecr, const Mat3& frame) {
  const Vec3 s = frame * (position_of(x) - site_ecr);
  if (!(s.norm() > 0.0)) {
    throw Error(ErrorKind::Domain, "RUV measurement undefined at zero range");
  }
  return s;
}

}  // namespace

Vec3 lla_to_ecr(const GeodeticCoord& g) {
  require_valid(g);
  const double lat = g.lat_deg * kDeg;
  const double lon = g.lon_deg * kDeg;
  const double sin_lat = std::sin(lat);
  const double cos_lat = std::cos(lat);
  const double n = kWgs84A / std::sqrt(1.0 - kE2 * sin_lat * sin_lat);
  return {(n + g.alt_m) * cos_lat * std::cos(lon), (n + g.alt_m) * cos_lat * std::sin(lon),
          (n * (1.0 - kE2) + g.alt_m) * sin_lat};
}

GeodeticCoord ecr_to_lla(const Vec3& p) {
  if (!(p.norm() > 1e5)) {
    throw Error(ErrorKind::Domain, "ecr_to_lla: point too close to Earth's center");
  }
  const double rho = std::hypot(p.x(), p.y());
  const double lon = std::atan2(p.y(), p.x());
  double lat = std::atan2(p.z(), rho * (1.0 - kE2));
  for (int iter = 0; iter < 20; ++iter) {
    const double sin_lat = std::sin(lat);
    const double n = kWgs84A / std::sqrt(1.0 - kE2 * sin_lat * sin_lat);
    const double next = std::atan2(p.z() + kE2 * n * sin_lat, rho);
    const bool converged = std::abs(next - lat) <= 1e-12 * std::max(1.0, std::abs(next));
    lat = next;
    if (converged) {
      const double s = std::sin(lat);
      const double nn = kWgs84A / std::sqrt(1.0 - kE2 * s * s);
      const double alt = rho * std::cos(lat) + p.z() * s - kWgs84A * kWgs84A / nn;
      return {lat / kDeg, lon / kDeg, alt};
    }
  }
  throw Error(ErrorKind::Convergence, "ecr_to_lla: latitude iteration did not converge in 20 steps");
}

Mat3 enu_basis(const GeodeticCoord& site) {
  require_valid(site);
  const double lat = site.lat_deg * kDeg;
  const double lon = site.lon_deg * kDeg;
  Mat3 m;
  m.row(0) << -std::sin(lon), std::cos(lon), 0.0;
  m.row(1) << -std::sin(lat) * std::cos(lon), -std::sin(lat) * std::sin(lon), std::cos(lat);
  m.row(2) << std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat);
  return m;
}

double elevation(const GeodeticCoord& site, const Vec3& target_ecr) {
  const Vec3 los = target_ecr - lla_to_ecr(site);
  const double range = los.norm();
  if (!(range > 0.0)) {
    throw Error(ErrorKind::Domain, "elevation: target coincides with site");
  }
  return std::asin(std::clamp(enu_basis(site).row(2).dot(los) / range, -1.0, 1.0));
}

Mat3 sensor_frame(const Vec3& site_ecr, const Vec3& target_ecr) {
  const Vec3 los = target_ecr - site_ecr;
  if (!(los.norm() > 0.0)) {
    throw Error(ErrorKind::Domain, "sensor_frame: zero baseline between site and target");
  }
  const Vec3 boresight = los.normalized();
  const GeodeticCoord site = ecr_to_lla(site_ecr);
  const Mat3 enu = enu_basis(site);
  const Vec3 up = enu.row(2).transpose();
  Vec3 x_axis = boresight.cross(up);
  if (x_axis.norm() < 1e-9) {
    const Vec3 north = enu.row(1).transpose();
    x_axis = north - north.dot(boresight) * boresight;
  }
  x_axis.normalize();
  const Vec3 y_axis = boresight.cross(x_axis);
  Mat3 frame;
  frame.row(0) = x_axis.transpose();
  frame.row(1) = y_axis.transpose();
  frame.row(2) = boresight.transpose();
  return frame;
}

Vec3 h_ruv(const StateVector& x, const Vec3& site_ecr, const Mat3& frame) {
  const Vec3 s = sensor_position(x, site_ecr, frame);
  const double r = s.norm();
  return {r, s.x() / r, s.y() / r};
}

Eigen::Matrix<double, 3, 6> ruv_jacobian(const StateVector& x, const Vec3& site_ecr,
                                         const Mat3& frame) {
  const Vec3 s = sensor_position(x, site_ecr, frame);
  const double r = s.norm();
  const Vec3 unit = s / r;
  // d(r,u,v)/ds in sensor coordinates.
  Mat3 d_sensor;
  d_sensor.row(0) = unit.transpose();
  d_sensor.row(1) = (Vec3::UnitX() - unit.x() * unit).transpose() / r;
  d_sensor.row(2) = (Vec3::UnitY() - unit.y() * unit).transpose() / r;
  Eigen::Matrix<double, 3, 6> h = Eigen::Matrix<double, 3, 6>::Zero();
  h.leftCols<3>() = d_sensor * frame;
  return h;
}

Vec3 ruv_to_ecr(const Vec3& ruv, const Vec3& site_ecr, const Mat3& frame) {
  const double r = ruv(0);
  const double u = ruv(1);
  const double v = ruv(2);
  const double w2 = 1.0 - u * u - v * v;
  if (!(r > 0.0) || !(w2 > 0.0)) {
    throw Error(ErrorKind::Domain, "ruv_to_ecr: invalid range or direction cosines");
  }
  const Vec3 s(r * u, r * v, r * std::sqrt(w2));
  return site_ecr + frame.transpose() * s;
}

Mat3 ruv_to_ecr_jacobian(const Vec3& ruv, const Mat3& frame) {
  const double r = ruv(0);
  const double u = ruv(1);
  const double v = ruv(2);
  const double w = std::sqrt(1.0 - u * u - v * v);
  Mat3 d;
  d.col(0) << u, v, w;
  d.col(1) << r, 0.0, -r * u / w;
  d.col(2) << 0.0, r, -r * v / w;
  return frame.transpose() * d;
}

void RadarConfig::validate() const {
  if (!(bandwidth_hz > 0.0 && beamwidth_rad > 0.0 && error_slope > 0.0 && ref_snr > 0.0 &&
        ref_range_m > 0.0 && ref_rcs_m2 > 0.0)) {
    throw Error(ErrorKind::Domain, "radar configuration quantities must all be positive");
  }
  require_valid(site);
}

double snr_at(const RadarConfig& cfg, double range_m, double rcs_m2) {
  if (!(range_m > 0.0) || !(rcs_m2 > 0.0)) {
    throw Error(ErrorKind::Domain, "snr_at: range and RCS must be positive");
  }
  const double ratio = cfg.ref_range_m / range_m;
  return cfg.ref_snr * (rcs_m2 / cfg.ref_rcs_m2) * (ratio * ratio) * (ratio * ratio);
}

Mat3 measurement_noise(const RadarConfig& cfg, double snr) {
  if (!(snr > 0.0)) {
    throw Error(ErrorKind::Domain, "measurement_noise: SNR must be positive");
  }
  const double root = std::sqrt(snr);
  const double sigma_r = kSpeedOfLight / (2.0 * cfg.bandwidth_hz * root);
  const double sigma_uv = cfg.beamwidth_rad / (cfg.error_slope * root);
  return Vec3(sigma_r * sigma_r, sigma_uv * sigma_uv, sigma_uv * sigma_uv).asDiagonal();
}

std::optional<RuvMeasurement> simulate_detection(const RadarConfig& cfg, const StateVector& x_true,
                                                 double rcs_m2, double epoch, RandomStream& rng,
                                                 DetectionNoise noise) {
  const Vec3 target = position_of(x_true);
  if (!(elevation(cfg.site, target) > 0.0)) {
    return std::nullopt;
  }
  RuvMeasurement m;
  m.epoch = epoch;
  m.site_ecr = lla_to_ecr(cfg.site);
  m.frame = sensor_frame(m.site_ecr, target);
  const Vec3 truth = h_ruv(x_true, m.site_ecr, m.frame);
  m.noise_cov = measurement_noise(cfg, snr_at(cfg, truth(0), rcs_m2));
  m.z = truth;
  if (noise == DetectionNoise::Sampled) {
    for (int i = 0; i < 3; ++i) {
      m.z(i) += std::sqrt(m.noise_cov(i, i)) * rng.normal();
    }
  }
  return m;
}

}  // namespace retrofilter::sensing
