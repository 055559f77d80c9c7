#include "rbpf/filter_types.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "rbpf/kalman.hpp"

namespace rbpf {

namespace {

void require_spd(const Mat3& m, const char* name) {
  if (!is_spd(m, 1e-12)) {
    throw std::invalid_argument(std::string(name) + " must be symmetric positive definite");
  }
}

}  // namespace

void NoiseModel::validate() const {
  require_spd(q_position, "q_position");
  require_spd(q_velocity, "q_velocity");
  require_spd(r_velocity, "r_velocity");
  if (!(sigma_phi > 0.0)) throw std::invalid_argument("sigma_phi must be > 0");
  if (!(sigma_rho > 0.0)) throw std::invalid_argument("sigma_rho must be > 0");
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be > 0");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
}

void FilterConfig::validate() const {
  if (num_particles < 1) throw std::invalid_argument("num_particles must be >= 1");
  noise.validate();
  if (!(resample_threshold >= 0.0 && resample_threshold <= 1.0)) {
    throw std::invalid_argument("resample_threshold must be in [0, 1]");
  }
  if (!(initial_velocity_sigma > 0.0)) {
    throw std::invalid_argument("initial_velocity_sigma must be > 0");
  }
  if (!(outage_inflation >= 1.0)) throw std::invalid_argument("outage_inflation must be >= 1");
  if (!(divergence_spread_m > 0.0)) throw std::invalid_argument("divergence_spread_m must be > 0");
}

}  // namespace rbpf
