#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "fedsched/rng.hpp"

namespace fedsched {

enum class TaskKind { quadratic, softmax };

// Parameters from which a synthetic learning task is generated.
struct TaskSpec {
  TaskKind kind = TaskKind::softmax;
  std::size_t num_devices = 100;
  std::size_t dim = 20;  // features (softmax) or parameter dimension (quadratic)
  std::size_t batch_size = 32;

  // softmax classification on Gaussian class clusters
  std::size_t classes = 10;
  std::size_t samples_per_device = 500;
  double alpha = std::numeric_limits<double>::infinity();  // Dirichlet concentration
  double class_separation = 1.0;
  std::size_t pool_per_class = 1000;
  std::size_t test_per_class = 200;

  // quadratic f_n(x) = 1/2 (x - c_n)^T H_n (x - c_n), H_n diagonal
  double noise = 0.0;  // nu: E||g - grad f_n||^2 = nu^2
  double center_spread = 1.0;
  double curvature_lo = 0.5;
  double curvature_hi = 2.0;

  void validate() const;
};

// A finite-sum objective f(x) = (1/N) sum_n f_n(x) spread over N devices.
class Task {
 public:
  virtual ~Task() = default;

  virtual TaskKind kind() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::size_t num_devices() const = 0;

  // Unbiased stochastic gradient of f_n at x.
  virtual void stochastic_gradient(std::size_t device, std::span<const double> x, Rng& rng,
                                   std::span<double> grad) const = 0;
  // Exact gradient of f_n at x.
  virtual void device_gradient(std::size_t device, std::span<const double> x,
                               std::span<double> grad) const = 0;
  virtual double device_loss(std::size_t device, std::span<const double> x) const = 0;

  // f(x); the default averages device_loss.
  virtual double loss(std::span<const double> x) const;
  virtual std::optional<double> test_accuracy(std::span<const double>) const { return std::nullopt; }
  virtual std::vector<double> initial_params() const { return std::vector<double>(dim(), 0.0); }
  // Upper bound on the smoothness constant L of every f_n.
  virtual double smoothness() const = 0;

  // Largest ||grad f_n(y) - grad f(y)||^2 over devices at y.
  double gradient_divergence(std::span<const double> y) const;
};

class QuadraticTask final : public Task {
 public:
  QuadraticTask(std::vector<std::vector<double>> curvature, std::vector<std::vector<double>> centers,
                double noise);
  static QuadraticTask generate(const TaskSpec& spec, Rng& rng);

  TaskKind kind() const override { return TaskKind::quadratic; }
  std::size_t dim() const override { return dim_; }
  std::size_t num_devices() const override { return curvature_.size(); }
  void stochastic_gradient(std::size_t device, std::span<const double> x, Rng& rng,
                           std::span<double> grad) const override;
  void device_gradient(std::size_t device, std::span<const double> x,
                       std::span<double> grad) const override;
  double device_loss(std::size_t device, std::span<const double> x) const override;
  double smoothness() const override;

  // Exact gradient of f, summed over devices in index order.
  void full_gradient(std::span<const double> x, std::span<double> grad) const;
  std::vector<double> optimum() const;
  double noise() const { return noise_; }

 private:
  std::size_t dim_;
  std::vector<std::vector<double>> curvature_;  // diagonal of H_n
  std::vector<std::vector<double>> centers_;
  double noise_;
};

// Multinomial logistic regression. Parameters are the row-major class
// weight matrix (classes x features) followed by the class biases.
class SoftmaxTask final : public Task {
 public:
  static SoftmaxTask generate(const TaskSpec& spec, Rng& rng);

  TaskKind kind() const override { return TaskKind::softmax; }
  std::size_t dim() const override { return classes_ * (features_ + 1); }
  std::size_t num_devices() const override { return device_samples_.size(); }
  void stochastic_gradient(std::size_t device, std::span<const double> x, Rng& rng,
                           std::span<double> grad) const override;
  void device_gradient(std::size_t device, std::span<const double> x,
                       std::span<double> grad) const override;
  double device_loss(std::size_t device, std::span<const double> x) const override;
  double loss(std::span<const double> x) const override;
  std::optional<double> test_accuracy(std::span<const double> x) const override;
  double smoothness() const override;

  std::size_t classes() const { return classes_; }
  std::size_t features() const { return features_; }
  // Labels of the samples held by a device.
  std::vector<std::size_t> device_labels(std::size_t device) const;

 private:
  SoftmaxTask() = default;

  double sample_loss(std::size_t sample, std::span<const double> x) const;
  // Adds the cross-entropy gradient of one pool sample, scaled by weight.
  void accumulate_gradient(std::size_t sample, std::span<const double> x, double weight,
                           std::span<double> grad, std::vector<double>& logits) const;
  void compute_logits(std::span<const double> features, std::span<const double> x,
                      std::vector<double>& logits) const;

  std::size_t classes_ = 0;
  std::size_t features_ = 0;
  std::size_t batch_size_ = 1;
  std::vector<double> pool_x_;  // pool samples, row-major
  std::vector<std::uint32_t> pool_y_;
  std::vector<double> test_x_;
  std::vector<std::uint32_t> test_y_;
  std::vector<std::vector<std::uint32_t>> device_samples_;  // indices into the pool
  std::vector<double> pool_weight_;  // weight of each pool sample in f
  double smoothness_ = 0.0;
};

// Per-device sample labels. Each device draws class proportions from
// Dir(alpha / classes, ..., alpha / classes), then each sample's class from
// those proportions. alpha == 0 gives a uniformly random single class per
// device; alpha == +inf gives exactly uniform proportions.
std::vector<std::vector<std::size_t>> dirichlet_partition(double alpha, std::size_t classes,
                                                          std::size_t samples_per_device,
                                                          std::size_t num_devices, Rng& rng);

std::unique_ptr<Task> make_task(const TaskSpec& spec, Rng& rng);

}  // namespace fedsched
