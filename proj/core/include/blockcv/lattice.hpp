#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <utility>
#include <vector>

namespace blockcv {

using Index = Eigen::Index;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class Scheme { rook, queen };

std::string_view to_string(Scheme scheme);
Scheme parse_scheme(std::string_view name);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Regular grid of unit cells indexed row-major. Cell i sits at
/// (i mod cols, i div cols).
class Lattice {
public:
  Lattice(int rows, int cols);

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  Index size() const noexcept { return static_cast<Index>(rows_) * cols_; }

  Index index(int row, int col) const noexcept {
    return static_cast<Index>(row) * cols_ + col;
  }
  int row_of(Index i) const noexcept { return static_cast<int>(i / cols_); }
  int col_of(Index i) const noexcept { return static_cast<int>(i % cols_); }
  Point centroid(Index i) const noexcept {
    return {static_cast<double>(col_of(i)), static_cast<double>(row_of(i))};
  }

  /// One-step neighbours of cell i under the given scheme.
  std::vector<Index> neighbours(Index i, Scheme scheme) const;

  friend bool operator==(const Lattice&, const Lattice&) = default;

private:
  int rows_;
  int cols_;
};

Lattice build_grid(int rows, int cols);

/// Sparse non-negative spatial weights with zero diagonal.
class AdjacencyMatrix {
public:
  AdjacencyMatrix(SparseMatrix entries, Scheme scheme, int order, bool standardized);

  Index size() const noexcept { return entries_.rows(); }
  const SparseMatrix& entries() const noexcept { return entries_; }
  Scheme scheme() const noexcept { return scheme_; }
  int order() const noexcept { return order_; }
  bool standardized() const noexcept { return standardized_; }

  /// Number of stored neighbours in row i.
  Index degree(Index i) const;
  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(entries_); }

private:
  SparseMatrix entries_;
  Scheme scheme_;
  int order_;
  bool standardized_;
};

/// W[i][j] = 1 iff j != i is reachable from i in at most `order` steps of
/// the scheme's one-step graph.
AdjacencyMatrix contiguity(const Lattice& lattice, Scheme scheme, int order = 1);

/// Divide each non-empty row by its sum. Zero rows stay zero.
AdjacencyMatrix row_standardize(const AdjacencyMatrix& w);

/// Cells within `order` graph steps of any seed cell, excluding the seeds.
std::vector<Index> halo(const Lattice& lattice, const std::vector<Index>& seeds,
                        Scheme scheme, int order);

using DistanceMatrix = Eigen::MatrixXd;

/// Dense Euclidean distances between centroids.
DistanceMatrix distances(const Lattice& lattice);

/// Debug dump, one "i j weight" triple per line.
void write_edge_list(std::ostream& out, const AdjacencyMatrix& w);

} // namespace blockcv
