#pragma once

#include <optional>
#include <span>
#include <vector>

#include "rbpf/observation.hpp"

namespace rbpf {

/// Pseudorange residual d = rho^k - r^k(x). Throws std::invalid_argument
/// when the observation carries no pseudorange.
double dd_pseudorange_residual(const DdObservation& obs, const EcefPosition& sat,
                               const EcefPosition& ref_sat, const EcefPosition& rover,
                               const EcefPosition& base);

/// Ambiguity function value psi = round(Phi - r/lambda) - (Phi - r/lambda), in [-0.5, 0.5].
///
/// Only the fractional part of Phi enters the computation, so shifting the
/// carrier by any integer leaves the result bit-identical.
double afv(CarrierPhase carrier, double dd_range_m, double wavelength_m);

/// Same as above, evaluated at a rover position. Throws when no carrier is present.
double afv(const DdObservation& obs, const EcefPosition& sat, const EcefPosition& ref_sat,
           const EcefPosition& rover, const EcefPosition& base, double wavelength_m);

/// Gaussian density of psi; throws std::invalid_argument for sigma_phi <= 0.
double carrier_likelihood(double psi, double sigma_phi);

struct LikelihoodOptions {
  double sigma_phi = 0.02;  // [cycles]
  double sigma_rho = 1.0;   // [m]
  bool use_pseudorange = true;
};

struct LikelihoodResult {
  double log_likelihood = 0.0;
  int carrier_sats = 0;
  bool usable() const { return carrier_sats > 0; }
};

/// Log of the product over satellites of the carrier (AFV) density, times a
/// Gaussian pseudorange density when enabled. Epochs without carrier
/// observations return an unusable result instead of throwing.
LikelihoodResult particle_likelihood(const EpochObservation& epoch, const EcefPosition& rover,
                                     const EcefPosition& base, const LikelihoodOptions& opts);

/// Satellites whose |pseudorange residual| at this rover position is <= eta.
/// Satellites without a pseudorange are never returned.
std::vector<int> nlos_gate(const EpochObservation& epoch, const EcefPosition& rover,
                           const EcefPosition& base, double eta);

inline constexpr double kMaxVelocityConditionNumber = 1e8;

/// Least-squares velocity and common range-rate term from DD Doppler:
///   doppler_k = -e_k . v + drift
/// Needs at least four satellites of `subset` with Doppler; returns nullopt
/// otherwise or when the geometry is rank deficient.
std::optional<VelocitySolution> doppler_velocity_ls(const EpochObservation& epoch,
                                                    std::span<const int> subset,
                                                    const EcefPosition& rcv);

/// Uses every satellite of the epoch that has Doppler.
std::optional<VelocitySolution> doppler_velocity_ls(const EpochObservation& epoch,
                                                    const EcefPosition& rcv);

}  // namespace rbpf
