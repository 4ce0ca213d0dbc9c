#include "fedsched/fedavg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fedsched {

std::vector<double> local_sgd(std::span<const double> params, std::size_t device, const Task& task,
                              double gamma, int local_steps, Rng& rng) {
  if (!(gamma > 0.0)) throw DomainError("local_sgd: learning rate must be > 0");
  if (local_steps < 1) throw DomainError("local_sgd: need at least one local step");
  if (device >= task.num_devices()) throw DomainError("local_sgd: device index out of range");

  std::vector<double> y(params.begin(), params.end());
  std::vector<double> grad(y.size());
  for (int step = 0; step < local_steps; ++step) {
    task.stochastic_gradient(device, y, rng, grad);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] -= gamma * grad[i];
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] -= params[i];
    if (!std::isfinite(y[i])) {
      std::ostringstream msg;
      msg << "local training diverged on device " << device;
      throw DivergenceError(device, msg.str());
    }
  }
  return y;
}

GlobalModel aggregate(const GlobalModel& model, std::span<const DeviceUpdate> updates,
                      const ParticipantSet& participants, const SelectionProbs& probs) {
  const std::size_t n = probs.size();
  if (participants.indicator.size() != n) {
    throw ConsistencyError("aggregate: participant set and probabilities disagree on N");
  }
  std::vector<const DeviceUpdate*> by_device(n, nullptr);
  for (const auto& update : updates) {
    if (update.device >= n || !participants.indicator[update.device]) {
      throw ConsistencyError("aggregate: update supplied for a device that was not selected");
    }
    if (by_device[update.device] != nullptr) {
      throw ConsistencyError("aggregate: duplicate update for a device");
    }
    if (update.delta.size() != model.params.size()) {
      throw ConsistencyError("aggregate: update dimension mismatch");
    }
    by_device[update.device] = &update;
  }

  GlobalModel next{model.params, model.round + 1};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t dev = 0; dev < n; ++dev) {
    if (!participants.indicator[dev]) continue;
    if (by_device[dev] == nullptr) {
      std::ostringstream msg;
      msg << "aggregate: missing update for selected device " << dev;
      throw ConsistencyError(msg.str());
    }
    const double weight = inv_n / probs.q()[dev];
    const auto& delta = by_device[dev]->delta;
    for (std::size_t i = 0; i < next.params.size(); ++i) next.params[i] += weight * delta[i];
  }
  return next;
}

}  // namespace fedsched
