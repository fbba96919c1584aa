#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace secad {

class Tape;

// Handle to a scalar node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  double value() const;
};

// Scalar reverse-mode recorder over the fixed primitive set used by the
// model: affine arithmetic, softplus, clamp, sigmoid, exp, min/max, abs,
// 2-norm. Subgradients: max/min route to the winning argument (ties to
// the first), clamp is flat outside [lo, hi], |x| and the 2-norm have
// zero gradient at the origin.
class Tape {
 public:
  Var constant(double v);
  Var input(double v, std::size_t slot);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var scale(Var a, double k);
  Var add_const(Var a, double k);
  Var neg(Var a) { return scale(a, -1.0); }
  Var softplus(Var a);
  Var sigmoid(Var a);
  Var exp(Var a);
  Var tanh(Var a);
  Var sqrt(Var a);
  Var clamp(Var a, double lo, double hi);
  Var max(Var a, Var b);
  Var min(Var a, Var b);
  Var abs(Var a);
  Var norm2(Var a, Var b);

  double value(Var v) const { return nodes_[v.id].value; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Reverse sweep from `out`; adds d out / d input into grads[slot]. Throws
  // NumericalError naming the first primitive that produced a non-finite value.
  void backward(Var out, std::span<double> grads) const;

 private:
  struct Node {
    double value;
    std::uint32_t a, b;
    double da, db;
    std::int64_t slot;  // >= 0 for inputs
    const char* op;
  };
  Var push(double value, const char* op, std::uint32_t a = 0, double da = 0.0, std::uint32_t b = 0,
           double db = 0.0);
  std::vector<Node> nodes_;
};

inline double Var::value() const { return tape->value(*this); }

inline Var operator+(Var a, Var b) { return a.tape->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.tape->mul(a, b); }
inline Var operator/(Var a, Var b) { return a.tape->div(a, b); }
inline Var operator*(Var a, double k) { return a.tape->scale(a, k); }
inline Var operator*(double k, Var a) { return a.tape->scale(a, k); }
inline Var operator+(Var a, double k) { return a.tape->add_const(a, k); }
inline Var operator-(Var a, double k) { return a.tape->add_const(a, -k); }
inline Var operator-(Var a) { return a.tape->neg(a); }

}  // namespace secad
