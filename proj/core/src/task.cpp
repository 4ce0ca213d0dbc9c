#include "fedsched/task.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fedsched/error.hpp"

namespace fedsched {

void TaskSpec::validate() const {
  std::ostringstream problems;
  if (num_devices < 1) problems << " num_devices must be >= 1;";
  if (dim < 1) problems << " dim must be >= 1;";
  if (batch_size < 1) problems << " batch_size must be >= 1;";
  if (kind == TaskKind::softmax) {
    if (classes < 2) problems << " classes must be >= 2;";
    if (samples_per_device < 1) problems << " samples_per_device must be >= 1;";
    if (!(alpha >= 0.0)) problems << " alpha must be >= 0;";
    if (!(class_separation >= 0.0)) problems << " class_separation must be >= 0;";
    if (pool_per_class < 1) problems << " pool_per_class must be >= 1;";
    if (test_per_class < 1) problems << " test_per_class must be >= 1;";
  } else {
    if (!(noise >= 0.0)) problems << " noise must be >= 0;";
    if (!(center_spread >= 0.0)) problems << " center_spread must be >= 0;";
    if (!(curvature_lo >= 0.0) || !(curvature_hi >= curvature_lo) || !(curvature_hi > 0.0)) {
      problems << " need 0 <= curvature_lo <= curvature_hi, curvature_hi > 0;";
    }
  }
  if (!problems.str().empty()) throw ConfigError("invalid task spec:" + problems.str());
}

double Task::loss(std::span<const double> x) const {
  double total = 0.0;
  for (std::size_t n = 0; n < num_devices(); ++n) total += device_loss(n, x);
  return total / static_cast<double>(num_devices());
}

double Task::gradient_divergence(std::span<const double> y) const {
  const std::size_t d = dim();
  const std::size_t n_dev = num_devices();
  std::vector<std::vector<double>> grads(n_dev, std::vector<double>(d));
  std::vector<double> mean(d, 0.0);
  for (std::size_t n = 0; n < n_dev; ++n) {
    device_gradient(n, y, grads[n]);
    for (std::size_t i = 0; i < d; ++i) mean[i] += grads[n][i];
  }
  for (double& v : mean) v /= static_cast<double>(n_dev);
  double worst = 0.0;
  for (const auto& g : grads) {
    double sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) sq += (g[i] - mean[i]) * (g[i] - mean[i]);
    worst = std::max(worst, sq);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// QuadraticTask

QuadraticTask::QuadraticTask(std::vector<std::vector<double>> curvature,
                             std::vector<std::vector<double>> centers, double noise)
    : dim_(curvature.empty() ? 0 : curvature.front().size()),
      curvature_(std::move(curvature)),
      centers_(std::move(centers)),
      noise_(noise) {
  if (curvature_.empty() || curvature_.size() != centers_.size() || dim_ == 0) {
    throw ConfigError("QuadraticTask: need matching, non-empty curvature and centers");
  }
  for (std::size_t n = 0; n < curvature_.size(); ++n) {
    if (curvature_[n].size() != dim_ || centers_[n].size() != dim_) {
      throw ConfigError("QuadraticTask: inconsistent dimensions");
    }
    for (double h : curvature_[n]) {
      if (!(h >= 0.0)) throw ConfigError("QuadraticTask: curvature must be >= 0");
    }
  }
  if (!(noise_ >= 0.0)) throw ConfigError("QuadraticTask: noise must be >= 0");
}

QuadraticTask QuadraticTask::generate(const TaskSpec& spec, Rng& rng) {
  spec.validate();
  std::vector<double> base(spec.dim);
  for (double& b : base) b = 2.0 * rng.normal();
  std::vector<std::vector<double>> curvature(spec.num_devices, std::vector<double>(spec.dim));
  std::vector<std::vector<double>> centers(spec.num_devices, std::vector<double>(spec.dim));
  for (std::size_t n = 0; n < spec.num_devices; ++n) {
    for (std::size_t i = 0; i < spec.dim; ++i) {
      curvature[n][i] =
          spec.curvature_lo + (spec.curvature_hi - spec.curvature_lo) * rng.uniform();
      centers[n][i] = base[i] + spec.center_spread * rng.normal();
    }
  }
  return QuadraticTask(std::move(curvature), std::move(centers), spec.noise);
}

void QuadraticTask::device_gradient(std::size_t device, std::span<const double> x,
                                    std::span<double> grad) const {
  const auto& h = curvature_[device];
  const auto& c = centers_[device];
  for (std::size_t i = 0; i < dim_; ++i) grad[i] = h[i] * (x[i] - c[i]);
}

void QuadraticTask::stochastic_gradient(std::size_t device, std::span<const double> x, Rng& rng,
                                        std::span<double> grad) const {
  device_gradient(device, x, grad);
  if (noise_ == 0.0) return;
  const double scale = noise_ / std::sqrt(static_cast<double>(dim_));
  for (std::size_t i = 0; i < dim_; ++i) grad[i] += scale * rng.normal();
}

double QuadraticTask::device_loss(std::size_t device, std::span<const double> x) const {
  const auto& h = curvature_[device];
  const auto& c = centers_[device];
  double total = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) total += h[i] * (x[i] - c[i]) * (x[i] - c[i]);
  return 0.5 * total;
}

double QuadraticTask::smoothness() const {
  double l = 0.0;
  for (const auto& h : curvature_) l = std::max(l, *std::max_element(h.begin(), h.end()));
  return l;
}

void QuadraticTask::full_gradient(std::span<const double> x, std::span<double> grad) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  std::vector<double> local(dim_);
  for (std::size_t n = 0; n < curvature_.size(); ++n) {
    device_gradient(n, x, local);
    for (std::size_t i = 0; i < dim_; ++i) grad[i] += local[i];
  }
  for (double& g : grad) g /= static_cast<double>(curvature_.size());
}

std::vector<double> QuadraticTask::optimum() const {
  std::vector<double> x(dim_, 0.0);
  for (std::size_t i = 0; i < dim_; ++i) {
    double weighted = 0.0, total = 0.0;
    for (std::size_t n = 0; n < curvature_.size(); ++n) {
      weighted += curvature_[n][i] * centers_[n][i];
      total += curvature_[n][i];
    }
    x[i] = total > 0.0 ? weighted / total : 0.0;
  }
  return x;
}

// ---------------------------------------------------------------------------
// SoftmaxTask

SoftmaxTask SoftmaxTask::generate(const TaskSpec& spec, Rng& rng) {
  spec.validate();
  SoftmaxTask task;
  task.classes_ = spec.classes;
  task.features_ = spec.dim;
  task.batch_size_ = spec.batch_size;

  const std::size_t f = spec.dim;
  std::vector<double> means(spec.classes * f);
  for (double& m : means) m = spec.class_separation * rng.normal();

  auto fill = [&](std::size_t per_class, std::vector<double>& xs, std::vector<std::uint32_t>& ys) {
    xs.resize(spec.classes * per_class * f);
    ys.resize(spec.classes * per_class);
    for (std::size_t c = 0; c < spec.classes; ++c) {
      for (std::size_t k = 0; k < per_class; ++k) {
        const std::size_t row = c * per_class + k;
        ys[row] = static_cast<std::uint32_t>(c);
        for (std::size_t j = 0; j < f; ++j) xs[row * f + j] = means[c * f + j] + rng.normal();
      }
    }
  };
  fill(spec.pool_per_class, task.pool_x_, task.pool_y_);
  fill(spec.test_per_class, task.test_x_, task.test_y_);

  const auto labels = dirichlet_partition(spec.alpha, spec.classes, spec.samples_per_device,
                                          spec.num_devices, rng);
  task.pool_weight_.assign(task.pool_y_.size(), 0.0);
  const double unit =
      1.0 / (static_cast<double>(spec.num_devices) * static_cast<double>(spec.samples_per_device));
  task.device_samples_.resize(spec.num_devices);
  for (std::size_t n = 0; n < spec.num_devices; ++n) {
    auto& samples = task.device_samples_[n];
    samples.reserve(labels[n].size());
    for (std::size_t label : labels[n]) {
      const std::size_t idx = label * spec.pool_per_class + rng.uniform_index(spec.pool_per_class);
      samples.push_back(static_cast<std::uint32_t>(idx));
      task.pool_weight_[idx] += unit;
    }
  }

  double max_sq = 0.0;
  for (std::size_t row = 0; row < task.pool_y_.size(); ++row) {
    double sq = 1.0;
    for (std::size_t j = 0; j < f; ++j) sq += task.pool_x_[row * f + j] * task.pool_x_[row * f + j];
    max_sq = std::max(max_sq, sq);
  }
  task.smoothness_ = 0.5 * max_sq;
  return task;
}

void SoftmaxTask::compute_logits(std::span<const double> features, std::span<const double> x,
                                 std::vector<double>& logits) const {
  logits.resize(classes_);
  const double* bias = x.data() + classes_ * features_;
  for (std::size_t c = 0; c < classes_; ++c) {
    const double* w = x.data() + c * features_;
    double z = bias[c];
    for (std::size_t j = 0; j < features_; ++j) z += w[j] * features[j];
    logits[c] = z;
  }
}

double SoftmaxTask::sample_loss(std::size_t sample, std::span<const double> x) const {
  std::vector<double> logits;
  compute_logits(std::span(pool_x_).subspan(sample * features_, features_), x, logits);
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double z : logits) total += std::exp(z - top);
  return top + std::log(total) - logits[pool_y_[sample]];
}

void SoftmaxTask::accumulate_gradient(std::size_t sample, std::span<const double> x, double weight,
                                      std::span<double> grad, std::vector<double>& logits) const {
  const auto feat = std::span(pool_x_).subspan(sample * features_, features_);
  compute_logits(feat, x, logits);
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& z : logits) {
    z = std::exp(z - top);
    total += z;
  }
  double* bias_grad = grad.data() + classes_ * features_;
  for (std::size_t c = 0; c < classes_; ++c) {
    double p = logits[c] / total;
    if (c == pool_y_[sample]) p -= 1.0;
    const double scaled = weight * p;
    double* w = grad.data() + c * features_;
    for (std::size_t j = 0; j < features_; ++j) w[j] += scaled * feat[j];
    bias_grad[c] += scaled;
  }
}

void SoftmaxTask::stochastic_gradient(std::size_t device, std::span<const double> x, Rng& rng,
                                      std::span<double> grad) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  const auto& samples = device_samples_[device];
  const double weight = 1.0 / static_cast<double>(batch_size_);
  std::vector<double> logits;
  for (std::size_t b = 0; b < batch_size_; ++b) {
    const std::size_t pick = samples[rng.uniform_index(samples.size())];
    accumulate_gradient(pick, x, weight, grad, logits);
  }
}

void SoftmaxTask::device_gradient(std::size_t device, std::span<const double> x,
                                  std::span<double> grad) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  const auto& samples = device_samples_[device];
  const double weight = 1.0 / static_cast<double>(samples.size());
  std::vector<double> logits;
  for (std::uint32_t s : samples) accumulate_gradient(s, x, weight, grad, logits);
}

double SoftmaxTask::device_loss(std::size_t device, std::span<const double> x) const {
  const auto& samples = device_samples_[device];
  double total = 0.0;
  for (std::uint32_t s : samples) total += sample_loss(s, x);
  return total / static_cast<double>(samples.size());
}

double SoftmaxTask::loss(std::span<const double> x) const {
  double total = 0.0;
  for (std::size_t i = 0; i < pool_weight_.size(); ++i) {
    if (pool_weight_[i] > 0.0) total += pool_weight_[i] * sample_loss(i, x);
  }
  return total;
}

std::optional<double> SoftmaxTask::test_accuracy(std::span<const double> x) const {
  std::vector<double> logits;
  std::size_t correct = 0;
  for (std::size_t row = 0; row < test_y_.size(); ++row) {
    compute_logits(std::span(test_x_).subspan(row * features_, features_), x, logits);
    const auto best = std::max_element(logits.begin(), logits.end()) - logits.begin();
    if (static_cast<std::uint32_t>(best) == test_y_[row]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_y_.size());
}

double SoftmaxTask::smoothness() const { return smoothness_; }

std::vector<std::size_t> SoftmaxTask::device_labels(std::size_t device) const {
  std::vector<std::size_t> labels;
  labels.reserve(device_samples_[device].size());
  for (std::uint32_t s : device_samples_[device]) labels.push_back(pool_y_[s]);
  return labels;
}

// ---------------------------------------------------------------------------

std::vector<std::vector<std::size_t>> dirichlet_partition(double alpha, std::size_t classes,
                                                          std::size_t samples_per_device,
                                                          std::size_t num_devices, Rng& rng) {
  if (!(alpha >= 0.0)) throw DomainError("dirichlet_partition: alpha must be >= 0");
  if (classes < 2) throw DomainError("dirichlet_partition: need at least two classes");

  std::vector<std::vector<std::size_t>> labels(num_devices);
  std::vector<double> cdf(classes);
  for (std::size_t n = 0; n < num_devices; ++n) {
    auto& out = labels[n];
    out.reserve(samples_per_device);
    if (alpha == 0.0) {
      out.assign(samples_per_device, static_cast<std::size_t>(rng.uniform_index(classes)));
      continue;
    }
    if (std::isinf(alpha)) {
      for (std::size_t s = 0; s < samples_per_device; ++s) {
        out.push_back(static_cast<std::size_t>(rng.uniform_index(classes)));
      }
      continue;
    }
    // Dirichlet proportions from normalized log-gamma variates.
    const double shape = alpha / static_cast<double>(classes);
    std::vector<double> logs(classes);
    for (double& l : logs) l = rng.log_gamma_variate(shape);
    const double top = *std::max_element(logs.begin(), logs.end());
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      total += std::exp(logs[c] - top);
      cdf[c] = total;
    }
    for (std::size_t s = 0; s < samples_per_device; ++s) {
      const double u = rng.uniform() * total;
      auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      out.push_back(std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), classes - 1));
    }
  }
  return labels;
}

std::unique_ptr<Task> make_task(const TaskSpec& spec, Rng& rng) {
  if (spec.kind == TaskKind::quadratic) {
    return std::make_unique<QuadraticTask>(QuadraticTask::generate(spec, rng));
  }
  return std::make_unique<SoftmaxTask>(SoftmaxTask::generate(spec, rng));
}

}  // namespace fedsched
