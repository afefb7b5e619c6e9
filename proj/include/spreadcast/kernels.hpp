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

#pragma once

// Dense double-precision inner loops used by the LSTM, the correlation
// filter and the clustering distance matrix. Each kernel has a portable
// scalar reference and an AVX2+FMA variant; the variant is picked once at
// startup from cpuid and can be pinned with SPREADCAST_ISA=scalar|avx2.

#include <cstddef>
#include <span>
#include <string_view>

namespace spreadcast::kernels {

enum class Isa { kScalar, kAvx2 };

std::string_view isa_name(Isa isa);

// True when the running CPU and the build both support `isa`.
bool isa_available(Isa isa);

Isa active_isa();

// Overrides the dispatch target; throws if `isa` is unavailable.
void set_active_isa(Isa isa);

// Row-major matrix view: rows x cols, contiguous.
struct ConstMatrixView {
  const double* data;
  std::size_t rows;
  std::size_t cols;
};

struct MatrixView {
  double* data;
  std::size_t rows;
  std::size_t cols;
};

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // y += A x
  void (*gemv)(ConstMatrixView a, const double* x, double* y);
  // y += A^T x
  void (*gemv_t)(ConstMatrixView a, const double* x, double* y);
  // A += u v^T
  void (*ger)(MatrixView a, const double* u, const double* v);
};

const KernelTable& table(Isa isa);
const KernelTable& active();

namespace scalar {
extern const KernelTable kTable;
}
namespace avx2 {
// Null entries when the build has no AVX2 support.
extern const KernelTable kTable;
bool compiled();
}  // namespace avx2

// Convenience wrappers over the active table.
inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}

}  // namespace spreadcast::kernels
