#include "blockcv/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>
#include <stdexcept>
#include <string>

namespace blockcv {

std::string_view to_string(Scheme scheme) {
  return scheme == Scheme::rook ? "rook" : "queen";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "rook")
    return Scheme::rook;
  if (name == "queen")
    return Scheme::queen;
  throw std::invalid_argument("unknown contiguity scheme '" + std::string(name) + "'");
}

Lattice::Lattice(int rows, int cols) : rows_(rows), cols_(cols) {
  if (rows < 1 || cols < 1)
    throw std::invalid_argument("lattice dimensions must be positive, got " +
                                std::to_string(rows) + "x" + std::to_string(cols));
}

std::vector<Index> Lattice::neighbours(Index i, Scheme scheme) const {
  std::vector<Index> out;
  out.reserve(8);
  const int r = row_of(i);
  const int c = col_of(i);
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -1; dc <= 1; ++dc) {
      if (dr == 0 && dc == 0)
        continue;
      if (scheme == Scheme::rook && dr != 0 && dc != 0)
        continue;
      const int rr = r + dr;
      const int cc = c + dc;
      if (rr < 0 || rr >= rows_ || cc < 0 || cc >= cols_)
        continue;
      out.push_back(index(rr, cc));
    }
  }
  return out;
}

Lattice build_grid(int rows, int cols) { return Lattice(rows, cols); }

AdjacencyMatrix::AdjacencyMatrix(SparseMatrix entries, Scheme scheme, int order,
                                 bool standardized)
    : entries_(std::move(entries)), scheme_(scheme), order_(order),
      standardized_(standardized) {
  if (entries_.rows() != entries_.cols())
    throw std::invalid_argument("adjacency matrix must be square");
  entries_.makeCompressed();
}

Index AdjacencyMatrix::degree(Index i) const {
  return entries_.outerIndexPtr()[i + 1] - entries_.outerIndexPtr()[i];
}

namespace {

// Breadth-first search to depth `order`; returns cells at distance 1..order.
std::vector<Index> reach(const Lattice& lattice, const std::vector<Index>& seeds,
                         Scheme scheme, int order) {
  const Index n = lattice.size();
  std::vector<int> depth(static_cast<std::size_t>(n), -1);
  std::deque<Index> queue;
  for (Index s : seeds) {
    if (s < 0 || s >= n)
      throw std::invalid_argument("seed cell out of range");
    if (depth[s] < 0) {
      depth[s] = 0;
      queue.push_back(s);
    }
  }
  std::vector<Index> found;
  while (!queue.empty()) {
    const Index v = queue.front();
    queue.pop_front();
    if (depth[v] >= order)
      continue;
    for (Index u : lattice.neighbours(v, scheme)) {
      if (depth[u] >= 0)
        continue;
      depth[u] = depth[v] + 1;
      found.push_back(u);
      queue.push_back(u);
    }
  }
  std::sort(found.begin(), found.end());
  return found;
}

} // namespace

std::vector<Index> halo(const Lattice& lattice, const std::vector<Index>& seeds,
                        Scheme scheme, int order) {
  if (order < 0)
    throw std::invalid_argument("halo order must be non-negative");
  return reach(lattice, seeds, scheme, order);
}

AdjacencyMatrix contiguity(const Lattice& lattice, Scheme scheme, int order) {
  if (order < 1)
    throw std::invalid_argument("contiguity order must be at least 1");
  const Index n = lattice.size();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(n) * (scheme == Scheme::rook ? 4 : 8) *
                   static_cast<std::size_t>(order));
  for (Index i = 0; i < n; ++i)
    for (Index j : reach(lattice, {i}, scheme, order))
      triplets.emplace_back(i, j, 1.0);
  SparseMatrix w(n, n);
  w.setFromTriplets(triplets.begin(), triplets.end());
  return AdjacencyMatrix(std::move(w), scheme, order, false);
}

AdjacencyMatrix row_standardize(const AdjacencyMatrix& w) {
  if (w.standardized())
    return w;
  SparseMatrix entries = w.entries();
  for (Index i = 0; i < entries.outerSize(); ++i) {
    double sum = 0.0;
    for (SparseMatrix::InnerIterator it(entries, i); it; ++it)
      sum += it.value();
    if (sum <= 0.0)
      continue;
    for (SparseMatrix::InnerIterator it(entries, i); it; ++it)
      it.valueRef() /= sum;
  }
  return AdjacencyMatrix(std::move(entries), w.scheme(), w.order(), true);
}

DistanceMatrix distances(const Lattice& lattice) {
  const Index n = lattice.size();
  DistanceMatrix d(n, n);
  for (Index i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    const Point a = lattice.centroid(i);
    for (Index j = i + 1; j < n; ++j) {
      const Point b = lattice.centroid(j);
      d(i, j) = d(j, i) = std::hypot(a.x - b.x, a.y - b.y);
    }
  }
  return d;
}

void write_edge_list(std::ostream& out, const AdjacencyMatrix& w) {
  const auto& e = w.entries();
  for (Index i = 0; i < e.outerSize(); ++i)
    for (SparseMatrix::InnerIterator it(e, i); it; ++it)
      out << i << ' ' << it.col() << ' ' << it.value() << '\n';
}

} // namespace blockcv
