#include "sfnn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "sfnn/error.hpp"

namespace sfnn {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n\"");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\"");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

// Numeric labels (epoch seconds, step indices) compare by value; anything else, e.g. ISO dates, by text.
bool precedes(const std::string& a, const std::string& b) {
  double x = 0, y = 0;
  const auto ra = std::from_chars(a.data(), a.data() + a.size(), x);
  const auto rb = std::from_chars(b.data(), b.data() + b.size(), y);
  if (ra.ec == std::errc{} && ra.ptr == a.data() + a.size() && rb.ec == std::errc{} && rb.ptr == b.data() + b.size()) {
    return x < y;
  }
  return a < b;
}

bool is_date_header(const std::string& name) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  return lower == "date";
}

}  // namespace

RawSeriesTable parse_csv(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  // Skip a UTF-8 byte order mark and blank leading lines.
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw EmptyFile(source + " has no header row");

  const auto header = split_fields(line);
  const bool has_date = is_date_header(header.front());
  const std::size_t first_value = has_date ? 1 : 0;
  if (header.size() <= first_value) throw ParseError(source + ": header has no series columns");

  RawSeriesTable table;
  table.names.assign(header.begin() + static_cast<std::ptrdiff_t>(first_value), header.end());
  const std::size_t n = table.names.size();
  std::vector<double> values;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw RaggedRows(source + ": row " + std::to_string(line_no) + " has " +
                       std::to_string(fields.size()) + " fields, header has " +
                       std::to_string(header.size()));
    }
    if (has_date) {
      if (!table.timestamps.empty() && !precedes(table.timestamps.back(), fields[0])) {
        throw ParseError(source + ": row " + std::to_string(line_no) + " timestamp '" + fields[0] +
                         "' does not increase");
      }
      table.timestamps.push_back(fields[0]);
    }
    for (std::size_t c = first_value; c < fields.size(); ++c) {
      const std::string& cell = fields[c];
      double v = 0.0;
      const char* begin = cell.data();
      const char* end = begin + cell.size();
      if (!cell.empty() && *begin == '+') ++begin;
      const auto [ptr, ec] = std::from_chars(begin, end, v);
      if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw NonNumericCell(source + ": row " + std::to_string(line_no) + ", column '" +
                             header[c] + "': cannot parse '" + cell + "' as a real number");
      }
      values.push_back(v);
    }
  }

  const std::size_t t = values.size() / n;
  if (t == 0) throw EmptyFile(source + " has a header but no data rows");
  if (t < 2) throw TooShort(source + " needs at least 2 data rows");
  table.values = Matrix(t, n, std::move(values));
  return table;
}

RawSeriesTable load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": no such file or unreadable");
  return parse_csv(in, path.string());
}

void write_csv(const std::filesystem::path& path, const RawSeriesTable& table) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  const bool has_date = !table.timestamps.empty();
  if (has_date) out << "date";
  for (std::size_t i = 0; i < table.names.size(); ++i) out << ((i || has_date) ? "," : "") << table.names[i];
  out << '\n' << std::setprecision(17);
  for (std::size_t r = 0; r < table.values.rows(); ++r) {
    if (has_date) out << table.timestamps[r];
    for (std::size_t c = 0; c < table.values.cols(); ++c) out << ((c || has_date) ? "," : "") << table.values(r, c);
    out << '\n';
  }
}

SplitSpec SplitSpec::parse(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ':')) {
    double v = 0.0;
    const auto t = trim(tok);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !(v > 0)) {
      throw InvalidSplit("cannot parse split '" + text + "'; expected e.g. 7:1:2");
    }
    parts.push_back(v);
  }
  if (parts.size() != 3) throw InvalidSplit("split '" + text + "' needs three parts");
  const double sum = parts[0] + parts[1] + parts[2];
  return SplitSpec{parts[0] / sum, parts[1] / sum, parts[2] / sum};
}

std::string SplitSpec::to_string() const {
  std::ostringstream os;
  os << train << ':' << val << ':' << test;
  return os.str();
}

SplitBoundaries compute_boundaries(std::size_t total, const SplitSpec& split) {
  if (!(split.train > 0 && split.val > 0 && split.test > 0) ||
      std::abs(split.train + split.val + split.test - 1.0) > 1e-9) {
    throw InvalidSplit("fractions must be positive and sum to 1, got " + split.to_string());
  }
  // The small epsilon keeps e.g. 10 * 0.7 from flooring to 6 through rounding.
  const auto floor_at = [&](double f) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(total) * f + 1e-9));
  };
  SplitBoundaries b{floor_at(split.train), floor_at(split.train + split.val), total};
  if (b.train_end < 1 || b.val_end <= b.train_end || b.val_end >= total) {
    throw InvalidSplit("split " + split.to_string() + " leaves an empty segment for T=" +
                       std::to_string(total));
  }
  return b;
}

Matrix NormalizedDataset::denormalize(const Matrix& normalized) const {
  if (normalized.cols() != n_series()) throw ShapeMismatch("denormalize: wrong series count");
  Matrix out = normalized;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = out(r, c) * train_stds[c] + train_means[c];
  return out;
}

NormalizedDataset zscore_fit_transform(const RawSeriesTable& table, const SplitSpec& split) {
  const std::size_t t = table.length(), n = table.n_series();
  NormalizedDataset ds;
  ds.boundaries = compute_boundaries(t, split);
  ds.split = split;
  ds.names = table.names;
  ds.train_means.assign(n, 0.0);
  ds.train_stds.assign(n, 0.0);
  const std::size_t m = ds.boundaries.train_end;

  Matrix values = table.values;
  for (std::size_t c = 0; c < n; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < m; ++r) mean += values(r, c);
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t r = 0; r < m; ++r) var += (values(r, c) - mean) * (values(r, c) - mean);
    const double sd = std::sqrt(var / static_cast<double>(m));
    if (!(sd > 1e-8)) {
      const std::string name = c < table.names.size() ? table.names[c] : std::to_string(c);
      throw DegenerateSeries("series " + std::to_string(c) + " ('" + name +
                             "') has zero variance over the training segment");
    }
    ds.train_means[c] = mean;
    ds.train_stds[c] = sd;
    for (std::size_t r = 0; r < t; ++r) values(r, c) = (values(r, c) - mean) / sd;
  }
  ds.values = std::make_shared<const Matrix>(std::move(values));
  return ds;
}

NormalizedDataset dataset_from_normalized(Matrix values, const SplitSpec& split) {
  NormalizedDataset ds;
  ds.boundaries = compute_boundaries(values.rows(), split);
  ds.split = split;
  for (std::size_t c = 0; c < values.cols(); ++c) ds.names.push_back("s" + std::to_string(c));
  ds.train_means.assign(values.cols(), 0.0);
  ds.train_stds.assign(values.cols(), 1.0);
  ds.values = std::make_shared<const Matrix>(std::move(values));
  return ds;
}

ChronologicalSplit split_chronological(const NormalizedDataset& dataset) {
  const auto& b = dataset.boundaries;
  return {SegmentView{dataset.values, {0, b.train_end}},
          SegmentView{dataset.values, {b.train_end, b.val_end}},
          SegmentView{dataset.values, {b.val_end, b.total}}};
}

std::vector<Fold> kfold_oos_splits(const IndexRange& range, std::size_t k) {
  if (k < 1) throw InvalidConfig("kfold_oos_splits: k must be >= 1");
  const std::size_t block = range.size() / (k + 1);
  if (block == 0) {
    throw TooShort("kfold_oos_splits: " + std::to_string(range.size()) + " rows cannot form " +
                   std::to_string(k + 1) + " blocks");
  }
  std::vector<Fold> folds;
  for (std::size_t j = 1; j <= k; ++j) {
    const std::size_t split = range.begin + j * block;
    const std::size_t val_end = (j == k) ? range.end : split + block;
    folds.push_back(Fold{{range.begin, split}, {split, val_end}});
  }
  return folds;
}

Matrix WindowBatch::input(std::size_t i) const {
  const std::size_t o = origins.at(i);
  return values->slice_rows(o - lookback, o);
}

Matrix WindowBatch::target(std::size_t i) const {
  const std::size_t o = origins.at(i);
  return values->slice_rows(o, o + horizon);
}

namespace {

Matrix gather(const Matrix& values, std::span<const std::size_t> origins,
              std::span<const std::size_t> picks, std::size_t rows, std::ptrdiff_t offset) {
  const std::size_t n = values.cols();
  Matrix out(rows, n * picks.size());
  for (std::size_t w = 0; w < picks.size(); ++w) {
    const auto start = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(origins[picks[w]]) + offset);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto src = values.row(start + r);
      std::copy(src.begin(), src.end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(w * n));
    }
  }
  return out;
}

}  // namespace

Matrix WindowBatch::gather_inputs(std::span<const std::size_t> picks) const {
  return gather(*values, origins, picks, lookback, -static_cast<std::ptrdiff_t>(lookback));
}

Matrix WindowBatch::gather_targets(std::span<const std::size_t> picks) const {
  return gather(*values, origins, picks, horizon, 0);
}

WindowBatch make_windows(const SegmentView& segment, std::size_t lookback, std::size_t horizon,
                         bool allow_context) {
  if (lookback == 0 || horizon == 0) throw InvalidConfig("make_windows: lookback and horizon must be >= 1");
  const auto& r = segment.range;
  const std::size_t context_floor = allow_context ? 0 : r.begin;
  const std::size_t first_origin = std::max(r.begin, context_floor + lookback);
  if (r.end < horizon || first_origin > r.end - horizon) {
    throw TooShort("segment [" + std::to_string(r.begin) + ", " + std::to_string(r.end) +
                   ") cannot hold a window with lookback " + std::to_string(lookback) +
                   " and horizon " + std::to_string(horizon));
  }
  WindowBatch batch{segment.values, lookback, horizon, {}};
  for (std::size_t o = first_origin; o + horizon <= r.end; ++o) batch.origins.push_back(o);
  return batch;
}

}  // namespace sfnn
