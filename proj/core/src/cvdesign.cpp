#include "blockcv/cvdesign.hpp"

#include "blockcv/errors.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace blockcv {

namespace {

Fold make_fold(const Lattice& lattice, std::vector<Index> test, int order, Scheme scheme) {
  std::sort(test.begin(), test.end());
  Fold fold;
  fold.buffer = halo(lattice, test, scheme, order);
  std::vector<char> taken(static_cast<std::size_t>(lattice.size()), 0);
  for (Index i : test)
    taken[i] = 1;
  for (Index i : fold.buffer)
    taken[i] = 1;
  for (Index i = 0; i < lattice.size(); ++i)
    if (!taken[i])
      fold.train.push_back(i);
  fold.test = std::move(test);
  return fold;
}

void require_train(const std::vector<Fold>& folds) {
  for (std::size_t k = 0; k < folds.size(); ++k)
    if (folds[k].train.empty())
      throw InvalidDesignError(fmt::format("fold {} has an empty training set", k));
}

double squared_distance(const Point& a, const Point& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

} // namespace

std::string describe(const DesignSpec& design) {
  if (const auto* b = std::get_if<BlockedDesign>(&design))
    return fmt::format("s={}", b->size);
  const auto& c = std::get<ClusteredDesign>(design);
  return fmt::format("k={}", c.clusters);
}

FoldPlan::FoldPlan(Lattice lattice, DesignSpec design, std::vector<Fold> folds)
    : lattice_(lattice), design_(design), folds_(std::move(folds)) {}

FoldPlan blocked_folds(const Lattice& lattice, int s, int halo_order, Scheme scheme) {
  if (s < 1)
    throw InvalidDesignError(fmt::format("block size must be positive, got {}", s));
  if (halo_order < 0)
    throw InvalidDesignError("halo order must be non-negative");
  if (lattice.rows() % s != 0 || lattice.cols() % s != 0)
    throw InvalidDesignError(fmt::format("block size {} does not divide the {}x{} lattice", s,
                                         lattice.rows(), lattice.cols()));
  std::vector<Fold> folds;
  folds.reserve(static_cast<std::size_t>(lattice.size() / (s * s)));
  for (int br = 0; br < lattice.rows(); br += s) {
    for (int bc = 0; bc < lattice.cols(); bc += s) {
      std::vector<Index> test;
      test.reserve(static_cast<std::size_t>(s * s));
      for (int r = br; r < br + s; ++r)
        for (int c = bc; c < bc + s; ++c)
          test.push_back(lattice.index(r, c));
      folds.push_back(make_fold(lattice, std::move(test), halo_order, scheme));
    }
  }
  require_train(folds);
  return FoldPlan(lattice, BlockedDesign{s, halo_order, scheme}, std::move(folds));
}

std::vector<int> kmeans_labels(const std::vector<Point>& points, int k, Stream& rng,
                               int max_iterations, int max_attempts) {
  const std::size_t n = points.size();
  if (k < 1 || static_cast<std::size_t>(k) > n)
    throw InvalidDesignError(fmt::format("cannot form {} clusters from {} points", k, n));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    // k-means++ seeding.
    std::vector<Point> centres;
    centres.reserve(static_cast<std::size_t>(k));
    centres.push_back(points[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
    std::vector<double> d2(n);
    while (centres.size() < static_cast<std::size_t>(k)) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (const Point& c : centres)
          best = std::min(best, squared_distance(points[i], c));
        d2[i] = best;
        total += best;
      }
      if (!(total > 0.0))
        break;
      double target = unit(rng) * total;
      std::size_t pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0)
          continue;
        target -= d2[i];
        if (target < 0.0) {
          pick = i;
          break;
        }
      }
      centres.push_back(points[pick]);
    }
    if (centres.size() < static_cast<std::size_t>(k))
      continue;

    std::vector<int> labels(n, -1);
    for (int iter = 0; iter < max_iterations; ++iter) {
      bool changed = false;
      for (std::size_t i = 0; i < n; ++i) {
        int best = 0;
        double best_d = squared_distance(points[i], centres[0]);
        for (int c = 1; c < k; ++c) {
          const double d = squared_distance(points[i], centres[static_cast<std::size_t>(c)]);
          if (d < best_d) {
            best_d = d;
            best = c;
          }
        }
        if (labels[i] != best) {
          labels[i] = best;
          changed = true;
        }
      }
      std::vector<Point> sums(static_cast<std::size_t>(k));
      std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
      for (std::size_t i = 0; i < n; ++i) {
        auto c = static_cast<std::size_t>(labels[i]);
        sums[c].x += points[i].x;
        sums[c].y += points[i].y;
        ++counts[c];
      }
      for (std::size_t c = 0; c < centres.size(); ++c)
        if (counts[c] > 0)
          centres[c] = {sums[c].x / static_cast<double>(counts[c]),
                        sums[c].y / static_cast<double>(counts[c])};
      if (!changed)
        break;
    }
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (int l : labels)
      ++counts[static_cast<std::size_t>(l)];
    if (std::all_of(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }))
      return labels;
  }
  throw InvalidDesignError(
      fmt::format("k-means left an empty cluster after {} attempts", max_attempts));
}

FoldPlan clustered_folds(const Lattice& lattice, int k, int buffer_order, Scheme scheme,
                         Stream& rng) {
  if (k < 2 || k > lattice.size())
    throw InvalidDesignError(
        fmt::format("cluster count must lie in [2, {}], got {}", lattice.size(), k));
  if (buffer_order < 0)
    throw InvalidDesignError("buffer order must be non-negative");
  std::vector<Point> points;
  points.reserve(static_cast<std::size_t>(lattice.size()));
  for (Index i = 0; i < lattice.size(); ++i)
    points.push_back(lattice.centroid(i));
  const std::vector<int> labels = kmeans_labels(points, k, rng);

  std::vector<std::vector<Index>> members(static_cast<std::size_t>(k));
  for (Index i = 0; i < lattice.size(); ++i)
    members[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])].push_back(i);
  // Order folds by their first cell so the plan does not depend on label names.
  std::sort(members.begin(), members.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  std::vector<Fold> folds;
  folds.reserve(members.size());
  for (auto& m : members)
    folds.push_back(make_fold(lattice, std::move(m), buffer_order, scheme));
  require_train(folds);
  return FoldPlan(lattice, ClusteredDesign{k, buffer_order, scheme}, std::move(folds));
}

FoldPlan build_plan(const Lattice& lattice, const DesignSpec& design, Stream& rng) {
  if (const auto* b = std::get_if<BlockedDesign>(&design))
    return blocked_folds(lattice, b->size, b->halo_order, b->scheme);
  const auto& c = std::get<ClusteredDesign>(design);
  return clustered_folds(lattice, c.clusters, c.buffer_order, c.scheme, rng);
}

void validate_fold(const Fold& fold, Index n) {
  if (fold.test.empty())
    throw std::invalid_argument("fold has an empty test set");
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (const auto* set : {&fold.train, &fold.buffer, &fold.test}) {
    for (Index i : *set) {
      if (i < 0 || i >= n)
        throw std::invalid_argument(fmt::format("fold index {} out of range [0, {})", i, n));
      if (seen[i])
        throw std::invalid_argument(fmt::format("fold index {} appears twice", i));
      seen[i] = 1;
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end())
    throw std::invalid_argument("fold index sets do not cover every cell");
}

PartitionViews partition_views(const Fold& fold, const Eigen::VectorXd& y,
                               const std::optional<Eigen::MatrixXd>& x) {
  validate_fold(fold, y.size());
  if (x && x->rows() != y.size())
    throw std::invalid_argument("design rows do not match observations");
  PartitionViews v;
  v.n_train = static_cast<Index>(fold.train.size());
  v.n_buffer = static_cast<Index>(fold.buffer.size());
  v.n_test = static_cast<Index>(fold.test.size());
  v.order.reserve(static_cast<std::size_t>(y.size()));
  v.order.insert(v.order.end(), fold.train.begin(), fold.train.end());
  v.order.insert(v.order.end(), fold.buffer.begin(), fold.buffer.end());
  v.order.insert(v.order.end(), fold.test.begin(), fold.test.end());
  v.y.resize(y.size());
  for (Index i = 0; i < y.size(); ++i)
    v.y(i) = y(v.order[static_cast<std::size_t>(i)]);
  if (x) {
    Eigen::MatrixXd px(x->rows(), x->cols());
    for (Index i = 0; i < px.rows(); ++i)
      px.row(i) = x->row(v.order[static_cast<std::size_t>(i)]);
    v.x = std::move(px);
  }
  return v;
}

Eigen::VectorXd restore_order(const std::vector<Index>& order, const Eigen::VectorXd& v) {
  if (static_cast<Index>(order.size()) != v.size())
    throw std::invalid_argument("permutation length does not match vector");
  Eigen::VectorXd out(v.size());
  for (Index i = 0; i < v.size(); ++i)
    out(order[static_cast<std::size_t>(i)]) = v(i);
  return out;
}

std::string to_json(const FoldPlan& plan, int indent) {
  nlohmann::json doc;
  doc["lattice"] = {{"rows", plan.lattice().rows()}, {"cols", plan.lattice().cols()}};
  if (const auto* b = std::get_if<BlockedDesign>(&plan.design())) {
    doc["design"] = {{"type", "blocked"},
                     {"size", b->size},
                     {"halo_order", b->halo_order},
                     {"scheme", std::string(to_string(b->scheme))}};
  } else {
    const auto& c = std::get<ClusteredDesign>(plan.design());
    doc["design"] = {{"type", "clustered"},
                     {"clusters", c.clusters},
                     {"buffer_order", c.buffer_order},
                     {"scheme", std::string(to_string(c.scheme))}};
  }
  doc["K"] = plan.size();
  nlohmann::json folds = nlohmann::json::array();
  for (std::size_t k = 0; k < plan.size(); ++k) {
    const Fold& f = plan[k];
    folds.push_back(
        {{"fold", k}, {"test", f.test}, {"buffer", f.buffer}, {"train", f.train}});
  }
  doc["folds"] = std::move(folds);
  return doc.dump(indent);
}

std::string render_ascii(const FoldPlan& plan, std::size_t fold) {
  if (fold >= plan.size())
    throw std::invalid_argument(fmt::format("fold {} out of range (K = {})", fold, plan.size()));
  const Lattice& lat = plan.lattice();
  std::vector<char> role(static_cast<std::size_t>(lat.size()), '.');
  for (Index i : plan[fold].test)
    role[i] = 'T';
  for (Index i : plan[fold].buffer)
    role[i] = 'B';
  std::string out;
  for (int r = 0; r < lat.rows(); ++r) {
    for (int c = 0; c < lat.cols(); ++c) {
      const char ch = role[static_cast<std::size_t>(lat.index(r, c))];
      if (c > 0)
        out += ' ';
      out += ch == '.' ? "·" : std::string(1, ch);
    }
    out += '\n';
  }
  return out;
}

} // namespace blockcv
