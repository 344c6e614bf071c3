#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sfnn/matrix.hpp"

namespace sfnn {

/// A multivariate series as read from disk: T rows (time) by N columns (series).
struct RawSeriesTable {
  std::vector<std::string> names;
  std::vector<std::string> timestamps;  // empty when the file has no "date" column
  Matrix values;

  std::size_t length() const noexcept { return values.rows(); }
  std::size_t n_series() const noexcept { return values.cols(); }
};

/// Reads a comma-separated file with a header row. An optional first column
/// named "date" is kept as timestamps; every other column must be numeric.
RawSeriesTable load_csv(const std::filesystem::path& path);
RawSeriesTable parse_csv(std::istream& in, const std::string& source = "<stream>");
void write_csv(const std::filesystem::path& path, const RawSeriesTable& table);

/// Train/validation/test ratios, e.g. 6:2:2 or 7:1:2.
struct SplitSpec {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;

  /// Parses "a:b:c" (any positive numbers, normalized to sum to one).
  static SplitSpec parse(const std::string& text);
  std::string to_string() const;
};

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

/// train = [0, train_end), val = [train_end, val_end), test = [val_end, total).
struct SplitBoundaries {
  std::size_t train_end = 0;
  std::size_t val_end = 0;
  std::size_t total = 0;
  friend bool operator==(const SplitBoundaries&, const SplitBoundaries&) = default;
};

/// floor(T * train), floor(T * (train + val)); remainder goes to test.
/// Throws InvalidSplit when a fraction is non-positive or a segment is empty.
SplitBoundaries compute_boundaries(std::size_t total, const SplitSpec& split);

/// Per-series z-scored values with the training statistics used to produce them.
struct NormalizedDataset {
  std::shared_ptr<const Matrix> values;
  std::vector<double> train_means;
  std::vector<double> train_stds;  // population std, all > 1e-8
  SplitBoundaries boundaries;
  SplitSpec split;
  std::vector<std::string> names;

  std::size_t length() const noexcept { return values->rows(); }
  std::size_t n_series() const noexcept { return values->cols(); }
  /// Maps normalized values (any row count, N columns) back to raw units.
  Matrix denormalize(const Matrix& normalized) const;
};

/// Fits mean and population std on the training rows only and applies them to all rows.
/// Throws DegenerateSeries when a series has training std <= 1e-8.
NormalizedDataset zscore_fit_transform(const RawSeriesTable& table, const SplitSpec& split);

/// Wraps values that are already normalized (synthetic fixtures, tests).
NormalizedDataset dataset_from_normalized(Matrix values, const SplitSpec& split);

/// A contiguous range of rows of a shared value matrix. Rows before `range.begin`
/// remain reachable as input context for windowing.
struct SegmentView {
  std::shared_ptr<const Matrix> values;
  IndexRange range;

  std::size_t length() const noexcept { return range.size(); }
  Matrix materialize() const { return values->slice_rows(range.begin, range.end); }
};

struct ChronologicalSplit {
  SegmentView train;
  SegmentView val;
  SegmentView test;
};

ChronologicalSplit split_chronological(const NormalizedDataset& dataset);

/// Out-of-sample K-fold: the range is cut into K+1 equal blocks (remainder to
/// the last); fold j trains on blocks 1..j and validates on block j+1.
struct Fold {
  IndexRange train;
  IndexRange val;
};
std::vector<Fold> kfold_oos_splits(const IndexRange& range, std::size_t k);

/// Sliding windows over a segment. Window i has input rows
/// [origin - lookback, origin) and target rows [origin, origin + horizon).
/// Inputs and targets are gathered on demand rather than stored.
struct WindowBatch {
  std::shared_ptr<const Matrix> values;
  std::size_t lookback = 0;
  std::size_t horizon = 0;
  std::vector<std::size_t> origins;

  std::size_t count() const noexcept { return origins.size(); }
  std::size_t n_series() const noexcept { return values->cols(); }
  Matrix input(std::size_t i) const;   // lookback x N
  Matrix target(std::size_t i) const;  // horizon x N

  /// Packs the selected windows side by side: lookback x (N * picks.size()),
  /// column w * N + s holds series s of window picks[w].
  Matrix gather_inputs(std::span<const std::size_t> picks) const;
  Matrix gather_targets(std::span<const std::size_t> picks) const;
};

/// With allow_context the first input may reach up to `lookback` rows before the
/// segment (never before row 0), so every origin inside the segment with a full
/// horizon is emitted. Targets always stay inside the segment.
WindowBatch make_windows(const SegmentView& segment, std::size_t lookback, std::size_t horizon,
                         bool allow_context);

}  // namespace sfnn
