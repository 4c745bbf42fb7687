// Copyright 2026 The pianoloud Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Core>
#include <vector>

#include "pianoloud/error.hpp"

namespace pianoloud {

/// Weighted least-squares projection of `values` onto non-decreasing
/// sequences (pool adjacent violators).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> isotonic_regression(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& values,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& weights) {
  if (values.size() != weights.size()) throw DomainError("isotonic: weight count mismatch");
  struct Pool {
    Scalar mean;
    Scalar weight;
    Eigen::Index count;
  };
  std::vector<Pool> pools;
  pools.reserve(static_cast<std::size_t>(values.size()));
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (!(weights[i] > Scalar(0))) throw DomainError("isotonic: weights must be positive");
    pools.push_back({values[i], weights[i], 1});
    while (pools.size() > 1 && pools[pools.size() - 2].mean > pools.back().mean) {
      const Pool b = pools.back();
      pools.pop_back();
      Pool& a = pools.back();
      const Scalar w = a.weight + b.weight;
      a.mean = (a.mean * a.weight + b.mean * b.weight) / w;
      a.weight = w;
      a.count += b.count;
    }
  }
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(values.size());
  Eigen::Index at = 0;
  for (const Pool& p : pools) {
    out.segment(at, p.count).setConstant(p.mean);
    at += p.count;
  }
  return out;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> isotonic_regression(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& values) {
  return isotonic_regression<Scalar>(
      values, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Ones(values.size()));
}

}  // namespace pianoloud
