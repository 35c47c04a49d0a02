#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace woodfit::ad {

class Tape;

/// Scalar recorded on a Tape. Copies refer to the same node.
struct Var {
  Tape* tape = nullptr;
  std::size_t index = 0;
  double value = 0.0;
};

/// Linear tape of scalar operations with at most two parents per node.
/// Reverse sweep in recording order gives adjoints of every node.
class Tape {
 public:
  Var variable(double value) { return push(value, {}, {}, 0); }

  Var push(double value, std::array<std::size_t, 2> parents, std::array<double, 2> partials,
           int n_parents) {
    nodes_.push_back({parents, partials, n_parents});
    return {this, nodes_.size() - 1, value};
  }

  /// d output / d node for every node recorded so far.
  const std::vector<double>& gradient(const Var& output) {
    if (output.tape != this) throw std::invalid_argument("ad: variable from another tape");
    adjoint_.assign(nodes_.size(), 0.0);
    adjoint_[output.index] = 1.0;
    for (std::size_t i = output.index + 1; i-- > 0;) {
      const double a = adjoint_[i];
      if (a == 0.0) continue;
      const Node& n = nodes_[i];
      for (int k = 0; k < n.n_parents; ++k) adjoint_[n.parents[k]] += a * n.partials[k];
    }
    return adjoint_;
  }

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::array<std::size_t, 2> parents;
    std::array<double, 2> partials;
    int n_parents;
  };
  std::vector<Node> nodes_;
  std::vector<double> adjoint_;
};

inline Var operator+(Var a, Var b) { return a.tape->push(a.value + b.value, {a.index, b.index}, {1.0, 1.0}, 2); }
inline Var operator-(Var a, Var b) { return a.tape->push(a.value - b.value, {a.index, b.index}, {1.0, -1.0}, 2); }
inline Var operator*(Var a, Var b) {
  return a.tape->push(a.value * b.value, {a.index, b.index}, {b.value, a.value}, 2);
}
inline Var operator/(Var a, Var b) {
  const double q = a.value / b.value;
  return a.tape->push(q, {a.index, b.index}, {1.0 / b.value, -q / b.value}, 2);
}
inline Var operator+(Var a, double c) { return a.tape->push(a.value + c, {a.index, 0}, {1.0, 0.0}, 1); }
inline Var operator-(Var a, double c) { return a + (-c); }
inline Var operator*(Var a, double c) { return a.tape->push(a.value * c, {a.index, 0}, {c, 0.0}, 1); }
inline Var operator*(double c, Var a) { return a * c; }
inline Var operator-(Var a) { return a * -1.0; }

inline Var sqrt(Var a) {
  const double s = std::sqrt(a.value);
  return a.tape->push(s, {a.index, 0}, {0.5 / s, 0.0}, 1);
}
inline Var square(Var a) { return a.tape->push(a.value * a.value, {a.index, 0}, {2.0 * a.value, 0.0}, 1); }
inline Var sin(Var a) { return a.tape->push(std::sin(a.value), {a.index, 0}, {std::cos(a.value), 0.0}, 1); }
inline Var cos(Var a) { return a.tape->push(std::cos(a.value), {a.index, 0}, {-std::sin(a.value), 0.0}, 1); }
inline Var exp(Var a) {
  const double e = std::exp(a.value);
  return a.tape->push(e, {a.index, 0}, {e, 0.0}, 1);
}

}  // namespace woodfit::ad
