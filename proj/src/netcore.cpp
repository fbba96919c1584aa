#include "secad/netcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "secad/error.hpp"

namespace secad {

std::size_t ParameterStore::add(const std::string& name, std::vector<int> shape) {
  if (contains(name)) throw ContractError("duplicate parameter segment '" + name + "'");
  std::size_t count = 1;
  for (int d : shape) {
    if (d <= 0) throw ContractError("segment '" + name + "' has a non-positive dimension");
    count *= static_cast<std::size_t>(d);
  }
  Segment seg{name, std::move(shape), values_.size(), count};
  values_.resize(values_.size() + count, 0.0);
  segments_.push_back(std::move(seg));
  return segments_.back().offset;
}

bool ParameterStore::contains(const std::string& name) const noexcept {
  return std::any_of(segments_.begin(), segments_.end(), [&](const Segment& s) { return s.name == name; });
}

const ParameterStore::Segment& ParameterStore::segment(const std::string& name) const {
  for (const auto& s : segments_)
    if (s.name == name) return s;
  throw ContractError("no parameter segment '" + name + "'");
}

std::span<double> ParameterStore::view(const std::string& name) {
  const auto& s = segment(name);
  return {values_.data() + s.offset, s.size};
}

std::span<const double> ParameterStore::view(const std::string& name) const {
  const auto& s = segment(name);
  return {values_.data() + s.offset, s.size};
}

bool ParameterStore::same_layout(const ParameterStore& other) const noexcept {
  if (segments_.size() != other.segments_.size()) return false;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const auto &a = segments_[i], &b = other.segments_[i];
    if (a.name != b.name || a.shape != b.shape || a.offset != b.offset) return false;
  }
  return true;
}

bool ParameterStore::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

AdamState AdamState::for_params(const ParameterStore& params, double lr, double beta1, double beta2,
                                double epsilon) {
  AdamState s;
  s.m.assign(params.size(), 0.0);
  s.v.assign(params.size(), 0.0);
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = epsilon;
  return s;
}

void adam_step(ParameterStore& params, std::span<const double> grads, AdamState& state) {
  const std::size_t n = params.size();
  if (grads.size() != n || state.m.size() != n || state.v.size() != n)
    throw ContractError("adam_step: parameter, gradient and moment layouts differ");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  auto& theta = params.values();
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    theta[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

ValueAndGrad evaluate_with_gradients(const LossProgram& loss, const ParameterStore& params) {
  ValueAndGrad out;
  out.grads.assign(params.size(), 0.0);
  out.value = loss(params, out.grads);
  return out;
}

double evaluate(const LossProgram& loss, const ParameterStore& params) { return loss(params, {}); }

GradCheckReport finite_diff_report(const LossProgram& loss, const ParameterStore& params, double eps,
                                   std::size_t samples, std::uint64_t seed) {
  if (!(eps > 0)) throw ValidationError("finite-difference step must be positive");
  if (samples > params.size()) throw ValidationError("more samples requested than parameters");
  const auto analytic = evaluate_with_gradients(loss, params).grads;

  std::vector<std::size_t> order(params.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  GradCheckReport report;
  ParameterStore probe = params;
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t i = order[s];
    const double base = params.values()[i];
    probe.values()[i] = base + eps;
    const double up = evaluate(loss, probe);
    probe.values()[i] = base - eps;
    const double down = evaluate(loss, probe);
    probe.values()[i] = base;
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > report.max_rel_error || s == 0) {
      report.max_rel_error = std::max(report.max_rel_error, rel);
      if (rel >= report.max_rel_error) {
        report.worst_index = i;
        report.analytic = analytic[i];
        report.numeric = numeric;
      }
    }
  }
  return report;
}

double finite_diff_check(const LossProgram& loss, const ParameterStore& params, double eps, std::size_t samples,
                         std::uint64_t seed) {
  return finite_diff_report(loss, params, eps, samples, seed).max_rel_error;
}

}  // namespace secad
