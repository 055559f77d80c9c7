#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rbpf/geo.hpp"

namespace rbpf {

/// Double-differenced carrier phase held as an integer count of nanocycles.
///
/// Adding a whole number of cycles changes only the integer count, so the
/// fractional part (the only thing the ambiguity function looks at) is
/// bit-for-bit unchanged. Quantization is 1e-9 cycle, i.e. 0.2 nm on L1.
class CarrierPhase {
 public:
  static constexpr std::int64_t kTicksPerCycle = 1'000'000'000;

  constexpr CarrierPhase() = default;
  static CarrierPhase from_cycles(double cycles);
  static constexpr CarrierPhase from_ticks(std::int64_t ticks) { return CarrierPhase(ticks); }

  constexpr std::int64_t ticks() const { return ticks_; }
  double cycles() const;
  /// floor(cycles), exact.
  std::int64_t whole_cycles() const;
  /// cycles - floor(cycles) in [0, 1), exact function of the fractional ticks.
  double fractional_cycles() const;

  CarrierPhase shifted(std::int64_t whole) const {
    return CarrierPhase(ticks_ + whole * kTicksPerCycle);
  }

  friend constexpr bool operator==(CarrierPhase, CarrierPhase) = default;

 private:
  constexpr explicit CarrierPhase(std::int64_t t) : ticks_(t) {}
  std::int64_t ticks_ = 0;
};

struct DdObservation {
  int sat_id = 0;
  double pseudorange_m = 0.0;  // rho^k
  CarrierPhase carrier;        // Phi^k [cycles]
  double doppler_mps = 0.0;    // DD range-rate
  bool has_pseudorange = false;
  bool has_carrier = false;
  bool has_doppler = false;
};

struct SatelliteObservation {
  SatelliteGeometry geometry;
  DdObservation obs;
};

/// One epoch of DD observations against a pivot (reference) satellite.
/// The pivot does not appear in `satellites`.
struct EpochObservation {
  int epoch_index = 0;
  double time_s = 0.0;
  std::vector<SatelliteObservation> satellites;
  SatelliteGeometry reference;
  double wavelength_m = 0.0;

  bool empty() const { return satellites.empty(); }
  const SatelliteObservation* find(int sat_id) const;
};

struct VelocitySolution {
  Vec3 velocity = Vec3::Zero();  // ECEF [m/s]
  double clock_drift = 0.0;      // common DD range-rate term [m/s]
  std::vector<int> used_sats;
  double residual_rms = 0.0;     // [m/s]
};

}  // namespace rbpf
