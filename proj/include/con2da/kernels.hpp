#pragma once

#include <cstddef>
#include <span>

// Dense kernels behind the tensor ops. Two implementations share one signature set:
//
//   serial::   straightforward loops, kept as the reference the tests compare against.
//   parallel:: OpenMP over output rows. Every output element is reduced in the same
//              order regardless of the thread count, so results do not depend on
//              OMP_NUM_THREADS.
//
// All matrices are row-major. Outputs are overwritten, never accumulated into.
namespace con2da::kernels {

struct AdamCoefficients {
  double lr;
  double beta1;
  double beta2;
  double epsilon;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
};

// Every matmul element is a fused multiply-add chain over ascending p starting from zero,
// so the serial and parallel variants agree bit for bit.
namespace serial {

// c[m,n] = a[m,k] * b[k,n]
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
// c[m,n] = a[k,m]^T * b[k,n]
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);
// c[m,n] = a[m,k] * b[n,k]^T
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);
void adam_update(std::span<double> param, std::span<const double> grad,
                 std::span<double> first_moment, std::span<double> second_moment,
                 const AdamCoefficients& coeff);

}  // namespace serial

namespace parallel {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);
void adam_update(std::span<double> param, std::span<const double> grad,
                 std::span<double> first_moment, std::span<double> second_moment,
                 const AdamCoefficients& coeff);

int max_threads();

}  // namespace parallel

}  // namespace con2da::kernels
