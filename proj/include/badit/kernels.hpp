#pragma once

#include <cstddef>
#include <span>

namespace badit::kernels {

// Raw row-major kernels. `serial` is the reference implementation kept for
// testing; `parallel` is the OpenMP version used by the library. Both produce
// bit-identical results: parallel loops only split independent output
// elements, and `dot` sums fixed-size chunks in index order in both.

inline constexpr std::size_t kDotChunk = 1024;

namespace serial {

/// c[m×n] = a[m×k] · b[k×n]
void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n);
/// c[k×n] = a[m×k]ᵀ · b[m×n]
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
/// c[m×n] = a[m×k] · b[n×k]ᵀ
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
double dot(std::span<const double> x, std::span<const double> y);

}  // namespace serial

namespace parallel {

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
double dot(std::span<const double> x, std::span<const double> y);

}  // namespace parallel

}  // namespace badit::kernels
