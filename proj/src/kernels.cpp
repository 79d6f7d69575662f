#include "nephro/kernels.hpp"

#include <atomic>
#include <exception>
#include <mutex>

#ifdef NEPHRO_HAVE_OPENMP
#include <omp.h>
#endif

namespace nephro::kernels {

namespace {

std::atomic<Mode> g_mode{Mode::kParallel};

Matrix coalition_batch(Row row, const Matrix& background, std::uint64_t mask) {
  Matrix batch = background;
  for (Eigen::Index j = 0; j < batch.cols(); ++j) {
    if ((mask >> j) & 1ULL) batch.col(j).setConstant(row[static_cast<std::size_t>(j)]);
  }
  return batch;
}

}  // namespace

Mode default_mode() { return g_mode.load(std::memory_order_relaxed); }

void set_default_mode(Mode mode) { g_mode.store(mode, std::memory_order_relaxed); }

int max_threads() {
#ifdef NEPHRO_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void for_each_index(std::size_t n, const std::function<void(std::size_t)>& fn, Mode mode) {
  if (mode == Mode::kSerial || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  // Exceptions cannot cross the OpenMP region; the first one is rethrown.
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

Vector score_rows(const std::function<double(Row)>& fn, const Matrix& x, Mode mode) {
  Vector out(x.rows());
  constexpr std::size_t kBlock = 64;
  const std::size_t n = static_cast<std::size_t>(x.rows());
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  for_each_index(
      blocks,
      [&](std::size_t b) {
        const std::size_t end = std::min(n, (b + 1) * kBlock);
        for (std::size_t r = b * kBlock; r < end; ++r) {
          out(static_cast<Eigen::Index>(r)) = fn(row_of(x, static_cast<Eigen::Index>(r)));
        }
      },
      mode);
  return out;
}

std::vector<double> coalition_values(const BatchModel& f, Row row, const Matrix& background,
                                     std::span<const std::uint64_t> masks, Mode mode) {
  std::vector<double> out(masks.size());
  for_each_index(
      masks.size(), [&](std::size_t i) { out[i] = f(coalition_batch(row, background, masks[i])).mean(); }, mode);
  return out;
}

Vector pdp_curve(const BatchModel& f, const Matrix& x, std::size_t feature, std::span<const double> grid,
                 Mode mode) {
  Vector out(static_cast<Eigen::Index>(grid.size()));
  for_each_index(
      grid.size(),
      [&](std::size_t g) {
        Matrix batch = x;
        batch.col(static_cast<Eigen::Index>(feature)).setConstant(grid[g]);
        out(static_cast<Eigen::Index>(g)) = f(batch).mean();
      },
      mode);
  return out;
}

namespace serial {

Vector score_rows(const std::function<double(Row)>& fn, const Matrix& x) {
  Vector out(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) out(r) = fn(row_of(x, r));
  return out;
}

std::vector<double> coalition_values(const BatchModel& f, Row row, const Matrix& background,
                                     std::span<const std::uint64_t> masks) {
  std::vector<double> out;
  out.reserve(masks.size());
  for (std::uint64_t mask : masks) {
    Matrix batch = background;
    for (Eigen::Index r = 0; r < batch.rows(); ++r) {
      for (Eigen::Index j = 0; j < batch.cols(); ++j) {
        if ((mask >> j) & 1ULL) batch(r, j) = row[static_cast<std::size_t>(j)];
      }
    }
    out.push_back(f(batch).mean());
  }
  return out;
}

Vector pdp_curve(const BatchModel& f, const Matrix& x, std::size_t feature, std::span<const double> grid) {
  Vector out(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t g = 0; g < grid.size(); ++g) {
    Matrix batch = x;
    for (Eigen::Index r = 0; r < batch.rows(); ++r) batch(r, static_cast<Eigen::Index>(feature)) = grid[g];
    out(static_cast<Eigen::Index>(g)) = f(batch).mean();
  }
  return out;
}

}  // namespace serial

}  // namespace nephro::kernels
