// pmtl/numeric/param.hpp

// Copyright 2026  The pmtl Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "pmtl/common.hpp"

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace pmtl {

template <class T>
struct Param {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;
};

/// Ordered collection of named parameters. Insertion order is the
/// serialization order and the deterministic gradient-reduction order.
template <class T>
class ParamStore {
 public:
  /// Adds a zero-initialized parameter and returns its index.
  std::size_t add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    if (rows < 1 || cols < 1) throw DimensionError("parameter '" + name + "' must have positive shape");
    if (index_.count(name)) throw ValidationError("duplicate parameter name '" + name + "'");
    index_[name] = params_.size();
    params_.push_back({name, Matrix<T>::Zero(rows, cols), Matrix<T>::Zero(rows, cols)});
    return params_.size() - 1;
  }

  std::size_t size() const { return params_.size(); }
  Param<T>& operator[](std::size_t i) { return params_[i]; }
  const Param<T>& operator[](std::size_t i) const { return params_[i]; }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValidationError("unknown parameter '" + name + "'");
    return it->second;
  }
  Param<T>& at(const std::string& name) { return params_[index_of(name)]; }
  const Param<T>& at(const std::string& name) const { return params_[index_of(name)]; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad() {
    for (auto& p : params_) p.grad.setZero();
  }

  std::size_t num_values() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

  template <class U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& p : params_) {
      auto i = out.add(p.name, p.value.rows(), p.value.cols());
      out[i].value = p.value.template cast<U>();
      out[i].grad = p.grad.template cast<U>();
    }
    return out;
  }

 private:
  std::vector<Param<T>> params_;
  std::map<std::string, std::size_t> index_;
};

/// Symmetric uniform init in +-sqrt(6 / (fan_in + fan_out)).
template <class T, class Rng>
void glorot_uniform(Matrix<T>& w, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<T>(dist(rng));
}

}  // namespace pmtl
