#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "avf/matrix.hpp"

namespace avf {

/// A named learnable matrix with its gradient buffer.
template <typename T>
struct Param {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;
};

/// Ordered collection of named parameters. Insertion order is the iteration
/// order everywhere (optimizer, serialization, gradcheck report).
template <typename T>
class ModelParams {
public:
  Param<T>& add(const std::string& name, Matrix<T> value) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    Matrix<T> grad(value.rows(), value.cols());
    entries_.push_back(Param<T>{name, std::move(value), std::move(grad)});
    index_.emplace(name, entries_.size() - 1);
    return entries_.back();
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Param<T>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return entries_[it->second];
  }
  const Param<T>& at(const std::string& name) const {
    return const_cast<ModelParams*>(this)->at(name);
  }

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t scalar_count() const noexcept {
    std::size_t n = 0;
    for (const auto& p : entries_) n += p.value.size();
    return n;
  }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  void zero_grad() {
    for (auto& p : entries_) p.grad.fill(T(0));
  }

private:
  // deque keeps element addresses stable across add().
  std::deque<Param<T>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

template <typename T>
class Tape;

/// Handle to a node on a Tape.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Matrix<T>& value() const { return tape->value(id); }
  const Matrix<T>& grad() const { return tape->grad(id); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Linear record of a computation for reverse-mode differentiation. Nodes are
/// appended in evaluation order, so reverse insertion order is a valid
/// topological order and backward() visits each node once.
template <typename T>
class Tape {
public:
  using Backward = std::function<void(Tape&, const Matrix<T>& upstream)>;

  /// With record_grad = false no backward closures are kept (inference).
  explicit Tape(bool record_grad = true) : record_(record_grad) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return record_; }

  Var<T> constant(Matrix<T> value) { return push(std::move(value), false, {}, nullptr); }

  Var<T> param(Param<T>& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Var<T>{this, it->second};
    Var<T> v = push(p.value, record_, {}, &p);
    param_nodes_.emplace(&p, v.id);
    return v;
  }

  /// Append an op result. `backward` receives the node's upstream gradient and
  /// must route it to the parents through add_grad().
  Var<T> make(Matrix<T> value, std::initializer_list<Var<T>> parents, Backward backward) {
    return make_impl(std::move(value), parents.begin(), parents.end(), std::move(backward));
  }
  Var<T> make(Matrix<T> value, const std::vector<Var<T>>& parents, Backward backward) {
    return make_impl(std::move(value), parents.begin(), parents.end(), std::move(backward));
  }

  /// Id the next node will receive; lets a closure refer to its own output.
  std::size_t next_id() const noexcept { return nodes_.size(); }

  const Matrix<T>& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix<T>& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  void add_grad(std::size_t id, const Matrix<T>& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.empty() && !n.value.empty()) {
      n.grad = g;
    } else {
      accumulate(n.grad, g);
    }
  }
  void add_grad(Var<T> v, const Matrix<T>& g) { add_grad(v.id, g); }

  /// Reverse sweep from a 1x1 loss; parameter gradients are added into the
  /// owning Param::grad buffers.
  void backward(Var<T> loss) {
    if (loss.value().size() != 1) {
      throw DimensionError("backward: loss must be 1x1, got " + loss.value().shape());
    }
    if (!record_) throw ConfigError("backward: tape was created without gradient recording");
    if (!nodes_[loss.id].requires_grad) return;
    nodes_[loss.id].grad = Matrix<T>(1, 1, T(1));
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty()) continue;
      // Closures only touch parents, which have smaller ids than i.
      if (n.backward) n.backward(*this, n.grad);
      if (n.param) accumulate(n.param->grad, n.grad);
    }
  }

  /// ReLU activation-pattern fingerprint. Two evaluations with equal
  /// fingerprints took the same branch at every ReLU.
  void note_relu(const Matrix<T>& pre) {
    for (std::size_t i = 0; i < pre.size(); ++i) {
      relu_hash_ = (relu_hash_ ^ static_cast<std::uint64_t>(pre[i] > T(0))) * 0x100000001b3ULL;
      const T a = std::abs(pre[i]);
      if (a < relu_min_margin_) relu_min_margin_ = a;
    }
  }
  std::uint64_t relu_fingerprint() const noexcept { return relu_hash_; }
  T relu_min_margin() const noexcept { return relu_min_margin_; }

private:
  struct Node {
    Matrix<T> value;
    Matrix<T> grad;
    Backward backward;
    Param<T>* param = nullptr;
    bool requires_grad = false;
  };

  template <typename It>
  Var<T> make_impl(Matrix<T> value, It first, It last, Backward backward) {
    bool needs = false;
    if (record_) {
      for (It p = first; p != last; ++p) needs = needs || nodes_[p->id].requires_grad;
    }
    return push(std::move(value), needs, needs ? std::move(backward) : Backward{}, nullptr);
  }

  Var<T> push(Matrix<T> value, bool requires_grad, Backward backward, Param<T>* param) {
    nodes_.push_back(Node{std::move(value), Matrix<T>{}, std::move(backward), param, requires_grad});
    return Var<T>{this, nodes_.size() - 1};
  }

  bool record_;
  std::deque<Node> nodes_;
  std::unordered_map<const Param<T>*, std::size_t> param_nodes_;
  std::uint64_t relu_hash_ = 0xcbf29ce484222325ULL;
  T relu_min_margin_ = std::numeric_limits<T>::infinity();
};

} // namespace avf
