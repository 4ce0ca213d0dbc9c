#include "fedsched/channel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "fedsched/error.hpp"

namespace fedsched {

void ChannelParams::validate() const {
  std::ostringstream problems;
  if (sigma.empty()) problems << " no devices;";
  for (std::size_t n = 0; n < sigma.size(); ++n) {
    if (!(sigma[n] > 0.0) || !std::isfinite(sigma[n])) {
      problems << " sigma[" << n << "]=" << sigma[n] << " must be > 0;";
      break;
    }
  }
  if (!(noise_power > 0.0)) problems << " noise_power must be > 0;";
  if (!(bandwidth > 0.0)) problems << " bandwidth must be > 0;";
  if (!(model_bits >= 1.0)) problems << " model_bits must be >= 1;";
  if (!(gain_floor > 0.0)) problems << " gain_floor must be > 0;";
  if (!problems.str().empty()) throw ConfigError("invalid channel parameters:" + problems.str());
}

std::vector<double> linear_sigma_profile(std::size_t n, double lo, double hi) {
  std::vector<double> sigma(n, lo);
  if (n < 2) return sigma;
  for (std::size_t i = 0; i < n; ++i) {
    sigma[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return sigma;
}

ChannelState draw_channel(const ChannelParams& params, Rng& rng, std::size_t round) {
  ChannelState state;
  state.round = round;
  state.gains.resize(params.num_devices());
  for (std::size_t n = 0; n < params.num_devices(); ++n) {
    const double mean = 2.0 * params.sigma[n] * params.sigma[n];
    state.gains[n] = std::max(rng.exponential(mean), params.gain_floor);
  }
  return state;
}

double comm_time(double gain, double power, const ChannelParams& params) {
  if (!(power >= 0.0)) {
    std::ostringstream msg;
    msg << "comm_time: power must be >= 0, got " << power;
    throw DomainError(msg.str());
  }
  if (!(gain > 0.0)) {
    std::ostringstream msg;
    msg << "comm_time: gain must be > 0, got " << gain;
    throw DomainError(msg.str());
  }
  if (power == 0.0) return std::numeric_limits<double>::infinity();
  const double bits_per_hz = std::log1p(gain * power / params.noise_power) / std::numbers::ln2;
  return params.model_bits / (params.bandwidth * bits_per_hz);
}

}  // namespace fedsched
