#include "fracsus/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include <omp.h>

#include "fracsus/errors.hpp"

namespace fracsus {

namespace {
std::atomic<int> g_thread_limit{0};
constexpr std::size_t kBlock = 1024;
}  // namespace

void set_thread_limit(int n) {
  if (n < 0) throw ValidationError("thread limit must be >= 0");
  g_thread_limit = n;
}

int thread_limit() {
  const int n = g_thread_limit.load();
  return n > 0 ? n : omp_get_max_threads();
}

double CsrMatrix::row_sum(std::size_t i) const noexcept {
  double s = 0.0;
  for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += val[k];
  return s;
}

CsrMatrix CsrMatrix::transposed() const {
  CsrMatrix t;
  t.rows = cols;
  t.cols = rows;
  t.row_ptr.assign(cols + 1, 0);
  for (auto c : col) ++t.row_ptr[c + 1];
  for (std::size_t i = 0; i < cols; ++i) t.row_ptr[i + 1] += t.row_ptr[i];
  t.col.resize(nnz());
  t.val.resize(nnz());
  std::vector<std::size_t> next(t.row_ptr.begin(), t.row_ptr.end() - 1);
  // Rows visited in order, so each transposed row ends up column-sorted.
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
      const std::size_t dst = next[col[k]]++;
      t.col[dst] = static_cast<std::uint32_t>(i);
      t.val[dst] = val[k];
    }
  }
  return t;
}

namespace detail {

CsrMatrix assemble(std::size_t rows, std::size_t cols, std::vector<RowEntries>&& data) {
  CsrMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.row_ptr.assign(rows + 1, 0);
  for (std::size_t i = 0; i < rows; ++i) m.row_ptr[i + 1] = m.row_ptr[i] + data[i].size();
  m.col.reserve(m.row_ptr.back());
  m.val.reserve(m.row_ptr.back());
  for (auto& row : data) {
    for (const auto& [c, v] : row) {
      if (c >= cols) throw DomainError("build_csr: column index out of range");
      m.col.push_back(c);
      m.val.push_back(v);
    }
    RowEntries().swap(row);
  }
  return m;
}

}  // namespace detail

namespace {

void check_sizes(std::size_t need_x, std::size_t need_y, std::size_t x, std::size_t y) {
  if (x != need_x || y != need_y) throw DomainError("spmv: dimension mismatch");
}

inline double row_dot(const CsrMatrix& a, std::size_t i, std::span<const double> x) {
  double s = 0.0;
  for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) s += a.val[k] * x[a.col[k]];
  return s;
}

}  // namespace

void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y, Exec exec) {
  check_sizes(a.cols, a.rows, x.size(), y.size());
  const auto n = static_cast<std::ptrdiff_t>(a.rows);
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static) num_threads(thread_limit())
    for (std::ptrdiff_t i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = row_dot(a, static_cast<std::size_t>(i), x);
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = row_dot(a, static_cast<std::size_t>(i), x);
  }
}

void spmv_transpose_serial(const CsrMatrix& a, std::span<const double> x, std::span<double> y) {
  check_sizes(a.rows, a.cols, x.size(), y.size());
  std::fill(y.begin(), y.end(), 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double xi = x[i];
    for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) y[a.col[k]] += a.val[k] * xi;
  }
}

void spmv_transpose(const CsrMatrix& at, std::span<const double> x, std::span<double> y,
                    Exec exec) {
  spmv(at, x, y, exec);
}

namespace {

template <class Op>
double blocked_sum(std::size_t n, Op op, Exec exec) {
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  std::vector<double> partial(blocks, 0.0);
  auto run = [&](std::size_t b) {
    double s = 0.0;
    const std::size_t end = std::min(n, (b + 1) * kBlock);
    for (std::size_t i = b * kBlock; i < end; ++i) s += op(i);
    partial[b] = s;
  };
  const auto nb = static_cast<std::ptrdiff_t>(blocks);
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static) num_threads(thread_limit())
    for (std::ptrdiff_t b = 0; b < nb; ++b) run(static_cast<std::size_t>(b));
  } else {
    for (std::ptrdiff_t b = 0; b < nb; ++b) run(static_cast<std::size_t>(b));
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b, Exec exec) {
  if (a.size() != b.size()) throw DomainError("dot: size mismatch");
  return blocked_sum(a.size(), [&](std::size_t i) { return a[i] * b[i]; }, exec);
}

double l1_distance(std::span<const double> a, std::span<const double> b, Exec exec) {
  if (a.size() != b.size()) throw DomainError("l1_distance: size mismatch");
  return blocked_sum(a.size(), [&](std::size_t i) { return std::abs(a[i] - b[i]); }, exec);
}

}  // namespace fracsus
