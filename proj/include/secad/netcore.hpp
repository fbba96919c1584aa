#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace secad {

// Parameter storage with a fixed base alignment. Vectorized Eigen kernels
// peel differently depending on alignment, so a fixed base keeps results
// bitwise reproducible across runs.
using ParamBuffer = std::vector<double, Eigen::aligned_allocator<double>>;

// Named, shaped segments laid out contiguously in one flat buffer of doubles.
class ParameterStore {
 public:
  struct Segment {
    std::string name;
    std::vector<int> shape;
    std::size_t offset = 0;
    std::size_t size = 0;
  };

  // Appends a zero-initialized segment and returns its offset.
  std::size_t add(const std::string& name, std::vector<int> shape);

  bool contains(const std::string& name) const noexcept;
  const Segment& segment(const std::string& name) const;
  const std::vector<Segment>& segments() const noexcept { return segments_; }

  std::span<double> view(const std::string& name);
  std::span<const double> view(const std::string& name) const;

  std::size_t size() const noexcept { return values_.size(); }
  ParamBuffer& values() noexcept { return values_; }
  const ParamBuffer& values() const noexcept { return values_; }

  bool same_layout(const ParameterStore& other) const noexcept;
  bool all_finite() const noexcept;

 private:
  std::vector<Segment> segments_;
  ParamBuffer values_;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.99;
  double epsilon = 1e-8;

  static AdamState for_params(const ParameterStore& params, double lr = 1e-4, double beta1 = 0.5,
                              double beta2 = 0.99, double epsilon = 1e-8);
};

// One bias-corrected Adam update in place.
void adam_step(ParameterStore& params, std::span<const double> grads, AdamState& state);

// A differentiable scalar program: returns the value and, when `grads` is
// non-empty, accumulates the exact reverse-mode gradient into it (layout of
// `params`, zeroed by the caller).
using LossProgram = std::function<double(const ParameterStore& params, std::span<double> grads)>;

struct ValueAndGrad {
  double value = 0.0;
  ParamBuffer grads;
};

ValueAndGrad evaluate_with_gradients(const LossProgram& loss, const ParameterStore& params);
double evaluate(const LossProgram& loss, const ParameterStore& params);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Central differences on `samples` coordinates chosen by seed; the relative
// error denominator is max(|analytic|, |numeric|, 1e-8).
GradCheckReport finite_diff_report(const LossProgram& loss, const ParameterStore& params, double eps,
                                   std::size_t samples, std::uint64_t seed);
double finite_diff_check(const LossProgram& loss, const ParameterStore& params, double eps, std::size_t samples,
                         std::uint64_t seed);

}  // namespace secad
