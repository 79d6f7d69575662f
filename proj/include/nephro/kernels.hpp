#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "nephro/common.hpp"

namespace nephro {

// Batch model output: one value per row of the input matrix.
using BatchModel = std::function<Vector(const Matrix&)>;

namespace kernels {

enum class Mode { kParallel, kSerial };

// Process-wide default used by callers that do not pass a mode explicitly.
Mode default_mode();
void set_default_mode(Mode mode);
int max_threads();

// Calls fn(i) for i in [0, n). Iterations must write disjoint outputs.
void for_each_index(std::size_t n, const std::function<void(std::size_t)>& fn, Mode mode = default_mode());

// Per-row model evaluation in blocks; results land by row index.
Vector score_rows(const std::function<double(Row)>& fn, const Matrix& x, Mode mode = default_mode());

// v(S) for each coalition mask: mean of f over background rows whose
// features in S are replaced by `row`.
std::vector<double> coalition_values(const BatchModel& f, Row row, const Matrix& background,
                                     std::span<const std::uint64_t> masks, Mode mode = default_mode());

// Mean of f over x with `feature` set to each grid value.
Vector pdp_curve(const BatchModel& f, const Matrix& x, std::size_t feature, std::span<const double> grid,
                 Mode mode = default_mode());

// Straight loops with no blocking or threading; the parallel kernels must
// match these exactly.
namespace serial {

Vector score_rows(const std::function<double(Row)>& fn, const Matrix& x);
std::vector<double> coalition_values(const BatchModel& f, Row row, const Matrix& background,
                                     std::span<const std::uint64_t> masks);
Vector pdp_curve(const BatchModel& f, const Matrix& x, std::size_t feature, std::span<const double> grid);

}  // namespace serial

}  // namespace kernels

}  // namespace nephro
