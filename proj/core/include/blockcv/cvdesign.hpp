#pragma once

#include "blockcv/lattice.hpp"
#include "blockcv/random.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace blockcv {

/// Disjoint, sorted index sets covering the lattice.
struct Fold {
  std::vector<Index> test;
  std::vector<Index> buffer;
  std::vector<Index> train;

  Index missing_count() const noexcept {
    return static_cast<Index>(buffer.size() + test.size());
  }
};

struct BlockedDesign {
  int size = 1;
  int halo_order = 1;
  Scheme scheme = Scheme::rook;
};

struct ClusteredDesign {
  int clusters = 2;
  int buffer_order = 1;
  Scheme scheme = Scheme::rook;
};

using DesignSpec = std::variant<BlockedDesign, ClusteredDesign>;

std::string describe(const DesignSpec& design);

class FoldPlan {
public:
  FoldPlan(Lattice lattice, DesignSpec design, std::vector<Fold> folds);

  const Lattice& lattice() const noexcept { return lattice_; }
  const DesignSpec& design() const noexcept { return design_; }
  const std::vector<Fold>& folds() const noexcept { return folds_; }
  std::size_t size() const noexcept { return folds_.size(); }
  const Fold& operator[](std::size_t k) const { return folds_[k]; }

private:
  Lattice lattice_;
  DesignSpec design_;
  std::vector<Fold> folds_;
};

/// Square s x s test tiles with a contiguity halo of `halo_order` steps.
/// Throws InvalidDesignError if s does not divide both lattice dimensions
/// or a fold would have no training cells.
FoldPlan blocked_folds(const Lattice& lattice, int s, int halo_order, Scheme scheme);

/// Lloyd k-means (k-means++ seeding) on centroids; each cluster is one test
/// set, buffered like blocked_folds.
FoldPlan clustered_folds(const Lattice& lattice, int k, int buffer_order, Scheme scheme,
                         Stream& rng);

FoldPlan build_plan(const Lattice& lattice, const DesignSpec& design, Stream& rng);

/// Cluster labels in [0, k) for the given points.
std::vector<int> kmeans_labels(const std::vector<Point>& points, int k, Stream& rng,
                               int max_iterations = 100, int max_attempts = 5);

/// Data reordered as (train, buffer, test).
struct PartitionViews {
  std::vector<Index> order; ///< order[i] = original index of position i
  Index n_train = 0;
  Index n_buffer = 0;
  Index n_test = 0;
  Eigen::VectorXd y;                ///< permuted observations
  std::optional<Eigen::MatrixXd> x; ///< permuted design rows

  Eigen::VectorXd y_train() const { return y.head(n_train); }
  Eigen::VectorXd y_test() const { return y.tail(n_test); }
};

PartitionViews partition_views(const Fold& fold, const Eigen::VectorXd& y,
                               const std::optional<Eigen::MatrixXd>& x = std::nullopt);

/// Undo a permutation: out[order[i]] = v[i].
Eigen::VectorXd restore_order(const std::vector<Index>& order, const Eigen::VectorXd& v);

/// Checks the Fold invariants against a lattice of n cells; throws
/// std::invalid_argument on overlap, gaps or out-of-range indices.
void validate_fold(const Fold& fold, Index n);

/// JSON document: design, lattice and per-fold index arrays.
std::string to_json(const FoldPlan& plan, int indent = -1);

/// Character map of one fold: T test, B buffer, · train.
std::string render_ascii(const FoldPlan& plan, std::size_t fold);

} // namespace blockcv
