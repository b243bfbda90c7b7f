// Copyright 2026 The MelCap Authors. All Rights Reserved.
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

#ifndef MELCAP_ACTIVATIONS_HPP_
#define MELCAP_ACTIVATIONS_HPP_

#include <cmath>
#include <stdexcept>

namespace melcap {

/// Snake activation: snake(x, a) = x + sin^2(a x) / a, a > 0.  Periodic
/// nonlinearity with derivative 1 + sin(2 a x), bounded in [0, 2] — the
/// property that keeps networks built from it Lipschitz.
inline double snake(double x, double a) {
  if (!(a > 0.0)) throw std::invalid_argument("snake: parameter a must be positive");
  const double s = std::sin(a * x);
  return x + s * s / a;
}

/// Analytic derivative of snake: 1 + sin(2 a x).
inline double snake_derivative(double x, double a) {
  if (!(a > 0.0)) throw std::invalid_argument("snake_derivative: parameter a must be positive");
  return 1.0 + std::sin(2.0 * a * x);
}

}  // namespace melcap

#endif  // MELCAP_ACTIVATIONS_HPP_
