#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "retrofilter/types.hpp"

namespace retrofilter::sensing {

inline constexpr double kWgs84A = 6378137.0;
inline constexpr double kWgs84F = 1.0 / 298.257223563;
inline constexpr double kSpeedOfLight = 299792458.0;

struct GeodeticCoord {
  double lat_deg = 0.0;
  double lon_deg = 0.0;
  double alt_m = 0.0;
};

/// WGS84 geodetic to ECR Cartesian [m].
Vec3 lla_to_ecr(const GeodeticCoord& g);

/// Inverse of lla_to_ecr by fixed-point iteration on latitude.
GeodeticCoord ecr_to_lla(const Vec3& p);

/// Rows are local East, North and Up (geodetic normal) in ECR.
Mat3 enu_basis(const GeodeticCoord& site);

/// Elevation of `target_ecr` above the local horizontal plane at `site` [rad].
double elevation(const GeodeticCoord& site, const Vec3& target_ecr);

/// Sensor-centered rotation (ECR -> sensor) whose third row points from the
/// site to the target. The first row is the horizontal direction orthogonal
/// to boresight (boresight × local up); a vertical boresight uses local North
/// instead. The second row completes a right-handed frame.
Mat3 sensor_frame(const Vec3& site_ecr, const Vec3& target_ecr);

/// Range and direction cosines (r, u, v) of the state's position in `frame`.
Vec3 h_ruv(const StateVector& x, const Vec3& site_ecr, const Mat3& frame);

/// d h_ruv / d x (velocity columns are zero).
Eigen::Matrix<double, 3, 6> ruv_jacobian(const StateVector& x, const Vec3& site_ecr,
                                         const Mat3& frame);

/// Maps an RUV point back to ECR position.
Vec3 ruv_to_ecr(const Vec3& ruv, const Vec3& site_ecr, const Mat3& frame);

/// d ruv_to_ecr / d (r, u, v).
Mat3 ruv_to_ecr_jacobian(const Vec3& ruv, const Mat3& frame);

struct RadarConfig {
  double bandwidth_hz = 100e6;
  double beamwidth_rad = 1e-3;
  double error_slope = 1.6;
  /// Linear SNR at the reference range and RCS.
  double ref_snr = 1.0;
  double ref_range_m = 2700e3;
  double ref_rcs_m2 = 1.0;
  GeodeticCoord site{};

  /// Throws a domain error unless every physical quantity is positive.
  void validate() const;
};

/// rho0 (rcs / rcs0) (r0 / r)^4.
double snr_at(const RadarConfig& cfg, double range_m, double rcs_m2);

/// diag(sigma_r², sigma_u², sigma_v²) with sigma_r = c / (2 B sqrt(rho)) and
/// sigma_u = sigma_v = beamwidth / (k_m sqrt(rho)).
Mat3 measurement_noise(const RadarConfig& cfg, double snr);

struct RuvMeasurement {
  double epoch = 0.0;
  Vec3 z = Vec3::Zero();
  Mat3 noise_cov = Mat3::Identity();
  /// Site and beam frame the measurement is expressed in.
  Vec3 site_ecr = Vec3::Zero();
  Mat3 frame = Mat3::Identity();
};

/// Explicit seeded source of standard normal draws.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  double normal() { return dist_(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> dist_{0.0, 1.0};
};

enum class DetectionNoise { Sampled, Off };

/// A detection of the true target. The beam frame points at the true
/// position. Returns nullopt when the target is at or below the site horizon.
/// With DetectionNoise::Off no noise is drawn but the nominal covariance is
/// still reported.
std::optional<RuvMeasurement> simulate_detection(const RadarConfig& cfg, const StateVector& x_true,
                                                 double rcs_m2, double epoch, RandomStream& rng,
                                                 DetectionNoise noise = DetectionNoise::Sampled);

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

}  // namespace retrofilter::sensing
