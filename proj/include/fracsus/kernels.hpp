#pragma once

// Data-parallel building blocks. Every parallel kernel has a serial twin that
// the tests compare against; partitions are static and reductions are summed
// in a fixed order so results do not depend on the thread count.

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace fracsus {

enum class Exec { Serial, Parallel };

// Upper bound on worker threads for Exec::Parallel (0 = runtime default).
void set_thread_limit(int n);
int thread_limit();

struct CsrMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::uint32_t> col;
  std::vector<double> val;

  std::size_t nnz() const noexcept { return val.size(); }
  double row_sum(std::size_t i) const noexcept;
  CsrMatrix transposed() const;
};

using RowEntries = std::vector<std::pair<std::uint32_t, double>>;

namespace detail {
CsrMatrix assemble(std::size_t rows, std::size_t cols, std::vector<RowEntries>&& rows_data);
}

// Builds a CSR matrix row by row; fill(i, out) appends (column, value) pairs
// in increasing column order.
template <class RowFn>
CsrMatrix build_csr(std::size_t rows, std::size_t cols, RowFn&& fill, Exec exec) {
  std::vector<RowEntries> data(rows);
  const auto n = static_cast<std::ptrdiff_t>(rows);
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 64) num_threads(thread_limit())
    for (std::ptrdiff_t i = 0; i < n; ++i) fill(static_cast<std::size_t>(i), data[static_cast<std::size_t>(i)]);
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) fill(static_cast<std::size_t>(i), data[static_cast<std::size_t>(i)]);
  }
  return detail::assemble(rows, cols, std::move(data));
}

// y = A x by row gathers.
void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y, Exec exec);

// y = A^T x. The serial reference scatters along rows of A; the parallel
// version gathers along rows of the precomputed transpose.
void spmv_transpose_serial(const CsrMatrix& a, std::span<const double> x, std::span<double> y);
void spmv_transpose(const CsrMatrix& at, std::span<const double> x, std::span<double> y, Exec exec);

// out[i] = f(i) for i in [0, n).
template <class F>
std::vector<double> tabulate(std::size_t n, F&& f, Exec exec) {
  std::vector<double> out(n);
  const auto m = static_cast<std::ptrdiff_t>(n);
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 16) num_threads(thread_limit())
    for (std::ptrdiff_t i = 0; i < m; ++i) out[static_cast<std::size_t>(i)] = f(static_cast<std::size_t>(i));
  } else {
    for (std::ptrdiff_t i = 0; i < m; ++i) out[static_cast<std::size_t>(i)] = f(static_cast<std::size_t>(i));
  }
  return out;
}

// Dot product and L1 distance with a fixed blocked summation order.
double dot(std::span<const double> a, std::span<const double> b, Exec exec);
double l1_distance(std::span<const double> a, std::span<const double> b, Exec exec);

}  // namespace fracsus
