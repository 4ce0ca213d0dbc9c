#pragma once

#include <cstddef>
#include <vector>

#include "fedsched/rng.hpp"

namespace fedsched {

// Uplink channel model. Units: noise_power in normalized watts, bandwidth in
// Hz, model_bits in bits. Squared gains |h|^2 are dimensionless.
struct ChannelParams {
  std::vector<double> sigma;  // per-device Rayleigh scale
  double noise_power = 1.0;
  double bandwidth = 22e6;
  double model_bits = 32.0 * 555178.0;
  double gain_floor = 1e-3;

  std::size_t num_devices() const { return sigma.size(); }
  void validate() const;
};

struct ChannelState {
  std::size_t round = 0;
  std::vector<double> gains;  // |h_n|^2, each >= gain_floor
};

// sigma_n evenly spaced from lo to hi over n devices (lo when n == 1).
std::vector<double> linear_sigma_profile(std::size_t n, double lo, double hi);

// Squared Rayleigh gains: exponential with mean 2 sigma_n^2, clamped below at
// gain_floor. Devices are drawn in index order from the channel stream.
ChannelState draw_channel(const ChannelParams& params, Rng& rng, std::size_t round = 0);

// TDMA uplink time at capacity: model_bits / (B log2(1 + gain P / N0)).
// Returns +inf when power == 0; throws DomainError for negative power or
// non-positive gain.
double comm_time(double gain, double power, const ChannelParams& params);

}  // namespace fedsched
