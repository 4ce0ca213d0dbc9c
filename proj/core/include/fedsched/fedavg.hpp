#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fedsched/error.hpp"
#include "fedsched/rng.hpp"
#include "fedsched/sampling.hpp"
#include "fedsched/task.hpp"

namespace fedsched {

struct GlobalModel {
  std::vector<double> params;
  std::size_t round = 0;
};

// Thrown when local training leaves the finite range.
class DivergenceError : public NumericError {
 public:
  DivergenceError(std::size_t device, const std::string& what)
      : NumericError(what), device_(device) {}
  std::size_t device() const { return device_; }

 private:
  std::size_t device_;
};

struct DeviceUpdate {
  std::size_t device;
  std::vector<double> delta;  // y_K - y_0
};

// K steps of local SGD on f_device starting from the global parameters.
// Returns y_K - x_t.
std::vector<double> local_sgd(std::span<const double> params, std::size_t device, const Task& task,
                              double gamma, int local_steps, Rng& rng);

// x_{t+1} = x_t + (1/N) sum_n (1_n / q_n) delta_n. Updates must cover exactly
// the selected devices; anything else throws ConsistencyError. Summation runs
// in ascending device order.
GlobalModel aggregate(const GlobalModel& model, std::span<const DeviceUpdate> updates,
                      const ParticipantSet& participants, const SelectionProbs& probs);

}  // namespace fedsched
