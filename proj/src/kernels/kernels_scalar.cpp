// Copyright 2026 The Spreadcast Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "spreadcast/kernels.hpp"

namespace spreadcast::kernels::scalar {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double squared_distance(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void gemv(ConstMatrixView a, const double* x, double* y) {
  for (std::size_t r = 0; r < a.rows; ++r) y[r] += dot(a.data + r * a.cols, x, a.cols);
}

void gemv_t(ConstMatrixView a, const double* x, double* y) {
  for (std::size_t r = 0; r < a.rows; ++r) axpy(x[r], a.data + r * a.cols, y, a.cols);
}

void ger(MatrixView a, const double* u, const double* v) {
  for (std::size_t r = 0; r < a.rows; ++r) axpy(u[r], v, a.data + r * a.cols, a.cols);
}

}  // namespace

const KernelTable kTable{&dot, &axpy, &squared_distance, &gemv, &gemv_t, &ger};

}  // namespace spreadcast::kernels::scalar
