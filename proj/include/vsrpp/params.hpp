#pragma once

#include "vsrpp/autograd.hpp"

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

namespace vsrpp {

/// Ordered store of uniquely named tensors.
template <typename Scalar>
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Tensor<Scalar> value;
  };

  void add(std::string name, Tensor<Scalar> value) {
    if (index_.count(name)) throw UsageError("duplicate parameter name '" + name + "'");
    index_.emplace(name, entries_.size());
    entries_.push_back({std::move(name), std::move(value)});
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Tensor<Scalar>& at(const std::string& name) { return entries_[lookup(name)].value; }
  const Tensor<Scalar>& at(const std::string& name) const { return entries_[lookup(name)].value; }

  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  /// Exact number of learnable scalars.
  Index param_count() const {
    Index n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  template <typename Other>
  ParameterStore<Other> cast() const {
    ParameterStore<Other> out;
    for (const auto& e : entries_) out.add(e.name, e.value.template cast<Other>());
    return out;
  }

  friend bool operator==(const ParameterStore& a, const ParameterStore& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    for (size_t i = 0; i < a.entries_.size(); ++i) {
      if (a.entries_[i].name != b.entries_[i].name || !(a.entries_[i].value == b.entries_[i].value)) return false;
    }
    return true;
  }

 private:
  size_t lookup(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw UsageError("unknown parameter '" + name + "'");
    return it->second;
  }

  std::vector<Entry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

using ModelWeights = ParameterStore<float>;

/// Binds stored parameters into a graph for one forward pass. Without a
/// graph (or for names rejected by `trainable`) parameters enter as
/// constants.
template <typename Scalar>
class ParamBinder {
 public:
  explicit ParamBinder(const ParameterStore<Scalar>& store, Graph<Scalar>* graph = nullptr,
                       std::function<bool(const std::string&)> trainable = {})
      : store_(store), graph_(graph), trainable_(std::move(trainable)) {}

  Var<Scalar> operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    const bool train = graph_ && (!trainable_ || trainable_(name));
    Var<Scalar> v = train ? graph_->parameter(name, store_.at(name), true) : Var<Scalar>::constant(store_.at(name));
    bound_.emplace(name, v);
    return v;
  }

  const ParameterStore<Scalar>& store() const { return store_; }

 private:
  const ParameterStore<Scalar>& store_;
  Graph<Scalar>* graph_;
  std::function<bool(const std::string&)> trainable_;
  std::unordered_map<std::string, Var<Scalar>> bound_;
};

}  // namespace vsrpp
