#pragma once

#include <cstring>

#include "planx/threading.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace planx {

// Deterministic GEMM kernels. Each output element is produced by exactly one
// thread with a fixed k order, so results do not depend on the thread count.

// C[m,n] (+)= A[m,k] * B[k,n]
template <typename T>
void gemm_nn(const T* A, const T* B, T* C, int m, int k, int n, bool accumulate) {
  int nt = max_threads();
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1 && m > 1)
  for (int i = 0; i < m; ++i) {
    T* __restrict c = C + static_cast<std::size_t>(i) * n;
    if (!accumulate) std::memset(c, 0, sizeof(T) * n);
    const T* a = A + static_cast<std::size_t>(i) * k;
    for (int s = 0; s < k; ++s) {
      T av = a[s];
      const T* __restrict b = B + static_cast<std::size_t>(s) * n;
      for (int j = 0; j < n; ++j) c[j] += av * b[j];
    }
  }
}

// C[m,n] (+)= A[m,k] * B[n,k]^T
template <typename T>
void gemm_nt(const T* A, const T* B, T* C, int m, int k, int n, bool accumulate) {
  int nt = max_threads();
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1 && m > 1)
  for (int i = 0; i < m; ++i) {
    const T* a = A + static_cast<std::size_t>(i) * k;
    T* c = C + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* __restrict b = B + static_cast<std::size_t>(j) * k;
      T acc = 0;
      for (int s = 0; s < k; ++s) acc += a[s] * b[s];
      c[j] = accumulate ? c[j] + acc : acc;
    }
  }
}

// C[m,n] (+)= A[k,m]^T * B[k,n]
template <typename T>
void gemm_tn(const T* A, const T* B, T* C, int m, int k, int n, bool accumulate) {
  int nt = max_threads();
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1 && m > 1)
  for (int i = 0; i < m; ++i) {
    T* __restrict c = C + static_cast<std::size_t>(i) * n;
    if (!accumulate) std::memset(c, 0, sizeof(T) * n);
    for (int s = 0; s < k; ++s) {
      T av = A[static_cast<std::size_t>(s) * m + i];
      const T* __restrict b = B + static_cast<std::size_t>(s) * n;
      for (int j = 0; j < n; ++j) c[j] += av * b[j];
    }
  }
}

}  // namespace planx
