#include "vmg/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>

namespace vmg {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_line(std::string_view line, char delimiter) {
  std::vector<std::string_view> cells;
  if (delimiter == ' ') {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      if (i == line.size()) break;
      std::size_t j = i;
      while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
      cells.push_back(line.substr(i, j - i));
      i = j;
    }
    return cells;
  }
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delimiter, start);
    cells.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

std::optional<double> parse_number(std::string_view cell) {
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) return std::nullopt;
  return v;
}

std::string unquote(std::string_view s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError(path.string() + ": truncated IDX header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

std::vector<std::uint32_t> read_idx_header(std::istream& in, const std::filesystem::path& path,
                                           std::uint32_t expected_dims) {
  const std::uint32_t magic = read_be32(in, path);
  if ((magic >> 8) != 0x08 || (magic & 0xff) != expected_dims) {
    throw DataError(path.string() + ": expected an unsigned-byte IDX file with " + std::to_string(expected_dims) +
                    " dimensions");
  }
  std::vector<std::uint32_t> dims(expected_dims);
  for (auto& d : dims) d = read_be32(in, path);
  return dims;
}

}  // namespace

ColumnStats column_stats(const Tensor& m) {
  if (m.rank() != 2 || m.rows() == 0) throw ShapeError("column_stats: need a non-empty matrix");
  const std::size_t n = m.rows(), d = m.cols();
  ColumnStats s{Tensor({1, d}), Tensor({1, d}), {}};
  for (std::size_t j = 0; j < d; ++j) {
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += m(i, j);
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (m(i, j) - mu) * (m(i, j) - mu);
    var /= static_cast<double>(n);
    s.mean[j] = mu;
    if (var > 0.0 && std::sqrt(var) > 1e-12 * std::max(1.0, std::abs(mu))) {
      s.std[j] = std::sqrt(var);
    } else {
      s.std[j] = 1.0;
      s.constant_columns.push_back(j);
    }
  }
  return s;
}

Tensor standardize(const Tensor& m, const ColumnStats& stats) {
  if (m.rank() != 2 || m.cols() != stats.mean.size()) throw ShapeError("standardize: column count mismatch");
  Tensor out = m;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = (m(i, j) - stats.mean[j]) / stats.std[j];
  return out;
}

Tensor unstandardize(const Tensor& m, const ColumnStats& stats) {
  if (m.rank() != 2 || m.cols() != stats.mean.size()) throw ShapeError("unstandardize: column count mismatch");
  Tensor out = m;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j) * stats.std[j] + stats.mean[j];
  return out;
}

Dataset load_delimited(const std::filesystem::path& path, std::span<const int> target_columns, char delimiter,
                       TableInfo* info, std::size_t skip_lines) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  const std::string where = path.string();

  TableInfo table;
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no <= skip_lines || trim(line).empty()) continue;
    const auto cells = split_line(line, delimiter);
    if (table.columns == 0) {
      table.columns = cells.size();
      bool numeric = true;
      for (auto c : cells) numeric = numeric && parse_number(c).has_value();
      if (!numeric) {
        table.header = true;
        for (auto c : cells) table.names.push_back(unquote(c));
        continue;
      }
    } else if (cells.size() != table.columns) {
      throw DataError(where + ":" + std::to_string(line_no) + ": expected " + std::to_string(table.columns) +
                      " columns, found " + std::to_string(cells.size()));
    }
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const auto v = parse_number(cells[j]);
      if (!v || !std::isfinite(*v)) {
        throw DataError(where + ":" + std::to_string(line_no) + ": column " + std::to_string(j + 1) +
                        ": '" + std::string(cells[j]) + (v ? "' is not finite" : "' is not a number"));
      }
      values.push_back(*v);
    }
    ++table.rows;
  }
  if (table.rows == 0) throw DataError(where + ": no data rows");

  const auto cols = static_cast<int>(table.columns);
  std::vector<bool> is_target(table.columns, false);
  for (int t : target_columns) {
    const int idx = t < 0 ? cols + t : t;
    if (idx < 0 || idx >= cols) {
      throw DataError(where + ": target column " + std::to_string(t) + " is outside the " +
                      std::to_string(cols) + " columns");
    }
    if (is_target[idx]) throw DataError(where + ": target column " + std::to_string(t) + " listed twice");
    is_target[idx] = true;
    table.target_columns.push_back(static_cast<std::size_t>(idx));
  }
  for (std::size_t j = 0; j < table.columns; ++j) {
    if (!is_target[j]) table.feature_columns.push_back(j);
  }
  if (table.feature_columns.empty()) throw DataError(where + ": need at least one feature column");

  Dataset data{Tensor({table.rows, table.feature_columns.size()}), Tensor({table.rows, table.target_columns.size()})};
  for (std::size_t i = 0; i < table.rows; ++i) {
    const double* row = values.data() + i * table.columns;
    for (std::size_t j = 0; j < table.feature_columns.size(); ++j) data.x(i, j) = row[table.feature_columns[j]];
    for (std::size_t j = 0; j < table.target_columns.size(); ++j) data.y(i, j) = row[table.target_columns[j]];
  }
  if (info) *info = std::move(table);
  return data;
}

void write_delimited(const std::filesystem::path& path, const Dataset& data, char delimiter) {
  if (data.x.rows() != data.y.rows()) throw ShapeError("write_delimited: X and Y row counts differ");
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  char buf[64];
  auto put = [&](double v) {
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, end - buf);
  };
  for (std::size_t i = 0; i < data.x.rows(); ++i) {
    for (std::size_t j = 0; j < data.x.cols(); ++j) {
      if (j > 0) out.put(delimiter);
      put(data.x(i, j));
    }
    for (std::size_t j = 0; j < data.y.cols(); ++j) {
      out.put(delimiter);
      put(data.y(i, j));
    }
    out.put('\n');
  }
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<Split> make_splits(std::size_t n, const SplitPlan& plan) {
  if (n < 10) throw std::invalid_argument("make_splits: need at least 10 points, got " + std::to_string(n));
  if (!(plan.train_fraction > 0.0 && plan.train_fraction < 1.0)) {
    throw std::invalid_argument("make_splits: train fraction must lie in (0, 1)");
  }
  const auto n_train = static_cast<std::size_t>(std::ceil(plan.train_fraction * static_cast<double>(n) - 1e-9));
  Rng rng(plan.seed);
  std::vector<Split> splits;
  for (std::size_t r = 0; r < plan.repetitions; ++r) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    splits.push_back({{perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train)},
                      {perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end()}});
  }
  return splits;
}

Dataset subset(const Dataset& data, std::span<const std::size_t> rows) {
  const std::size_t dx = data.x.cols(), dy = data.y.cols();
  Dataset out{Tensor({rows.size(), dx}), Tensor({rows.size(), dy})};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= data.size()) throw std::out_of_range("subset: row " + std::to_string(rows[i]) + " out of range");
    std::copy_n(data.x.data() + rows[i] * dx, dx, out.x.data() + i * dx);
    std::copy_n(data.y.data() + rows[i] * dy, dy, out.y.data() + i * dy);
  }
  return out;
}

ToyData toy_cubic(Rng& rng, bool with_noise) {
  constexpr std::size_t n = 20;
  std::uniform_real_distribution<double> ux(-4.0, 4.0);
  std::normal_distribution<double> eps(0.0, 3.0);
  ToyData t{{Tensor({n, 1}), Tensor({n, 1})}, Tensor({n, 1})};
  for (std::size_t i = 0; i < n; ++i) t.data.x[i] = ux(rng);
  for (std::size_t i = 0; i < n; ++i) {
    t.noise[i] = with_noise ? eps(rng) : 0.0;
    t.data.y[i] = t.data.x[i] * t.data.x[i] * t.data.x[i] + t.noise[i];
  }
  return t;
}

double toy_sine_target(double x, double eps) {
  const double z = x + eps;
  return z + std::sin(4.0 * z) + std::sin(13.0 * z);
}

ToyData toy_sine(Rng& rng, bool with_noise) {
  constexpr std::size_t n_left = 12, n_right = 8, n = n_left + n_right;
  std::uniform_real_distribution<double> left(0.0, 0.6), right(0.8, 1.0);
  std::normal_distribution<double> eps(0.0, 0.03);
  ToyData t{{Tensor({n, 1}), Tensor({n, 1})}, Tensor({n, 1})};
  for (std::size_t i = 0; i < n; ++i) t.data.x[i] = i < n_left ? left(rng) : right(rng);
  for (std::size_t i = 0; i < n; ++i) {
    t.noise[i] = with_noise ? eps(rng) : 0.0;
    t.data.y[i] = toy_sine_target(t.data.x[i], t.noise[i]);
  }
  return t;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, std::size_t offset,
                 std::size_t limit) {
  std::ifstream img(images, std::ios::binary), lab(labels, std::ios::binary);
  if (!img) throw DataError("cannot open " + images.string());
  if (!lab) throw DataError("cannot open " + labels.string());
  const auto idims = read_idx_header(img, images, 3);
  const auto ldims = read_idx_header(lab, labels, 1);
  if (idims[0] != ldims[0]) {
    throw DataError(images.string() + ": " + std::to_string(idims[0]) + " images but " + std::to_string(ldims[0]) +
                    " labels");
  }
  const std::size_t total = idims[0], pixels = std::size_t{idims[1]} * idims[2];
  if (offset > total) throw DataError(images.string() + ": offset beyond the " + std::to_string(total) + " items");
  const std::size_t n = std::min(limit, total - offset);

  Dataset data{Tensor({n, pixels}), Tensor({n, 1})};
  std::vector<unsigned char> buf(n * pixels);
  img.seekg(static_cast<std::streamoff>(16 + offset * pixels));
  if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
    throw DataError(images.string() + ": truncated pixel data");
  }
  for (std::size_t i = 0; i < buf.size(); ++i) data.x[i] = buf[i] / 255.0;
  std::vector<unsigned char> lbuf(n);
  lab.seekg(static_cast<std::streamoff>(8 + offset));
  if (!lab.read(reinterpret_cast<char*>(lbuf.data()), static_cast<std::streamsize>(n))) {
    throw DataError(labels.string() + ": truncated label data");
  }
  for (std::size_t i = 0; i < n; ++i) data.y[i] = lbuf[i];
  return data;
}

double rmse(const Tensor& prediction, const Tensor& truth) {
  if (prediction.shape() != truth.shape()) {
    throw ShapeError("rmse: shapes " + shape_str(prediction.shape()) + " and " + shape_str(truth.shape()));
  }
  if (truth.empty()) throw std::invalid_argument("rmse: no points");
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) s += (prediction[i] - truth[i]) * (prediction[i] - truth[i]);
  return std::sqrt(s / static_cast<double>(truth.size()));
}

double avg_predictive_loglik(std::span<const double> per_point) {
  if (per_point.empty()) throw std::invalid_argument("avg_predictive_loglik: no points");
  return std::accumulate(per_point.begin(), per_point.end(), 0.0) / static_cast<double>(per_point.size());
}

double classification_error(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw ShapeError("classification_error: label counts differ");
  if (truth.empty()) throw std::invalid_argument("classification_error: no points");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) wrong += predicted[i] != truth[i];
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(truth.size());
}

std::vector<int> labels_of(const Tensor& y) {
  std::vector<int> out(y.rows());
  for (std::size_t i = 0; i < y.rows(); ++i) out[i] = static_cast<int>(std::lround(y[i]));
  return out;
}

}  // namespace vmg
