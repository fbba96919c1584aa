#include "secad/tape.hpp"

#include <cmath>

#include "secad/error.hpp"
#include "secad/fieldops.hpp"

namespace secad {

Var Tape::push(double value, const char* op, std::uint32_t a, double da, std::uint32_t b, double db) {
  nodes_.push_back(Node{value, a, b, da, db, -1, op});
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::constant(double v) { return push(v, "constant"); }

Var Tape::input(double v, std::size_t slot) {
  Var out = push(v, "input");
  nodes_.back().slot = static_cast<std::int64_t>(slot);
  return out;
}

Var Tape::add(Var a, Var b) { return push(value(a) + value(b), "add", a.id, 1.0, b.id, 1.0); }
Var Tape::sub(Var a, Var b) { return push(value(a) - value(b), "sub", a.id, 1.0, b.id, -1.0); }
Var Tape::mul(Var a, Var b) { return push(value(a) * value(b), "mul", a.id, value(b), b.id, value(a)); }

Var Tape::div(Var a, Var b) {
  const double vb = value(b);
  const double q = value(a) / vb;
  return push(q, "div", a.id, 1.0 / vb, b.id, -q / vb);
}

Var Tape::scale(Var a, double k) { return push(value(a) * k, "scale", a.id, k); }
Var Tape::add_const(Var a, double k) { return push(value(a) + k, "add_const", a.id, 1.0); }

Var Tape::softplus(Var a) {
  const double x = value(a);
  return push(secad::softplus(x), "softplus", a.id, secad::sigmoid(x));
}

Var Tape::sigmoid(Var a) {
  const double s = secad::sigmoid(value(a));
  return push(s, "sigmoid", a.id, s * (1.0 - s));
}

Var Tape::exp(Var a) {
  const double e = std::exp(value(a));
  return push(e, "exp", a.id, e);
}

Var Tape::tanh(Var a) {
  const double t = std::tanh(value(a));
  return push(t, "tanh", a.id, 1.0 - t * t);
}

Var Tape::sqrt(Var a) {
  const double r = std::sqrt(value(a));
  return push(r, "sqrt", a.id, r > 0 ? 0.5 / r : 0.0);
}

Var Tape::clamp(Var a, double lo, double hi) {
  const double x = value(a);
  if (x < lo) return push(lo, "clamp", a.id, 0.0);
  if (x > hi) return push(hi, "clamp", a.id, 0.0);
  return push(x, "clamp", a.id, 1.0);
}

Var Tape::max(Var a, Var b) {
  const bool first = value(a) >= value(b);
  return push(first ? value(a) : value(b), "max", a.id, first ? 1.0 : 0.0, b.id, first ? 0.0 : 1.0);
}

Var Tape::min(Var a, Var b) {
  const bool first = value(a) <= value(b);
  return push(first ? value(a) : value(b), "min", a.id, first ? 1.0 : 0.0, b.id, first ? 0.0 : 1.0);
}

Var Tape::abs(Var a) {
  const double x = value(a);
  return push(std::abs(x), "abs", a.id, x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0));
}

Var Tape::norm2(Var a, Var b) {
  const double x = value(a), y = value(b);
  const double r = std::sqrt(x * x + y * y);
  if (r == 0.0) return push(0.0, "norm2", a.id, 0.0, b.id, 0.0);
  return push(r, "norm2", a.id, x / r, b.id, y / r);
}

void Tape::backward(Var out, std::span<double> grads) const {
  for (std::uint32_t i = 0; i <= out.id; ++i) {
    if (!std::isfinite(nodes_[i].value))
      throw NumericalError(std::string("non-finite value produced by primitive '") + nodes_[i].op + "'");
  }
  std::vector<double> adj(out.id + 1, 0.0);
  adj[out.id] = 1.0;
  for (std::int64_t i = out.id; i >= 0; --i) {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    const double g = adj[static_cast<std::size_t>(i)];
    if (g == 0.0) continue;
    if (n.slot >= 0) {
      grads[static_cast<std::size_t>(n.slot)] += g;
      continue;
    }
    if (n.da != 0.0) adj[n.a] += g * n.da;
    if (n.db != 0.0) adj[n.b] += g * n.db;
  }
}

}  // namespace secad
