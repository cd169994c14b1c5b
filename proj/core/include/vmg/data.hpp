#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "vmg/random.hpp"
#include "vmg/tensor.hpp"

namespace vmg {

struct Dataset {
  Tensor x;  ///< N x D_x
  Tensor y;  ///< N x D_y

  std::size_t size() const noexcept { return x.rows(); }
};

/// Thrown for malformed input files. The message names the file and, for
/// table files, the 1-based line and column.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-column mean and population standard deviation. Constant columns get
/// std 1 and are listed in `constant_columns`.
struct ColumnStats {
  Tensor mean;  ///< 1 x D
  Tensor std;   ///< 1 x D
  std::vector<std::size_t> constant_columns;
};

ColumnStats column_stats(const Tensor& m);
Tensor standardize(const Tensor& m, const ColumnStats& stats);
Tensor unstandardize(const Tensor& m, const ColumnStats& stats);

struct TableInfo {
  std::size_t rows = 0;
  std::size_t columns = 0;
  bool header = false;
  std::vector<std::string> names;  ///< empty without a header
  std::vector<std::size_t> feature_columns;
  std::vector<std::size_t> target_columns;
};

/// Reads a rectangular numeric table. Negative target indices count from the
/// end (-1 is the last column); with none, y has zero columns. A first row that does not parse as numbers
/// is taken as a header. A space delimiter splits on any run of whitespace.
/// `skip_lines` leading lines are ignored before any of this, for preambles
/// such as a row/column count.
Dataset load_delimited(const std::filesystem::path& path, std::span<const int> target_columns, char delimiter = ',',
                       TableInfo* info = nullptr, std::size_t skip_lines = 0);

/// Writes features then targets, shortest round-trip formatting, no header.
void write_delimited(const std::filesystem::path& path, const Dataset& data, char delimiter = ',');

struct SplitPlan {
  double train_fraction = 0.9;
  std::size_t repetitions = 20;
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// One seeded permutation per repetition; the first ceil(f N) indices train.
std::vector<Split> make_splits(std::size_t n, const SplitPlan& plan);

Dataset subset(const Dataset& data, std::span<const std::size_t> rows);

struct ToyData {
  Dataset data;
  Tensor noise;  ///< the epsilon drawn for each point, N x 1
};

/// 20 points, x ~ U[-4, 4], y = x^3 + eps with eps ~ N(0, 9).
ToyData toy_cubic(Rng& rng, bool with_noise = true);
/// 12 points from U[0, 0.6] and 8 from U[0.8, 1], eps ~ N(0, 0.0009),
/// y = x + eps + sin(4 (x + eps)) + sin(13 (x + eps)).
ToyData toy_sine(Rng& rng, bool with_noise = true);
double toy_sine_target(double x, double eps);

/// IDX image and label files; pixels scaled to [0, 1], labels N x 1.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, std::size_t offset = 0,
                 std::size_t limit = std::numeric_limits<std::size_t>::max());

double rmse(const Tensor& prediction, const Tensor& truth);
double avg_predictive_loglik(std::span<const double> per_point);
/// Percentage of mismatched labels.
double classification_error(std::span<const int> predicted, std::span<const int> truth);
/// Class indices stored in an N x 1 target matrix.
std::vector<int> labels_of(const Tensor& y);

}  // namespace vmg
