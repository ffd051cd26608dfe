#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "bevcast/grid.hpp"
#include "bevcast/scene.hpp"

namespace bevcast {

// Dense row-major cost matrix.
class CostMatrix {
 public:
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

// Minimum-cost assignment (Kuhn-Munkres with potentials). Returns, for each
// row, the assigned column or nullopt; exactly min(rows, cols) entries are
// assigned.
std::vector<std::optional<std::size_t>> solve_assignment(const CostMatrix& cost);

struct Anchor {
  TrackId id;
  Point2 position;
};

struct Match {
  TrackId id;
  Point2 position;
  std::size_t extracted_index = 0;
  double cost = 0.0;
};

struct AssociationOptions {
  // Drops pairs farther apart than this after the assignment.
  std::optional<double> max_distance;
};

struct AssociationResult {
  std::vector<Match> matches;                 // in anchor order
  std::vector<TrackId> missed;                // anchors without an extraction
  std::vector<std::size_t> unmatched_extractions;
  double total_cost = 0.0;                    // summed in anchor order
};

// One-to-one matching of extracted positions to anchor vehicles minimizing the
// total Euclidean distance in meters.
AssociationResult associate(std::span<const Point2> extracted, std::span<const Anchor> anchors,
                            const AssociationOptions& options = {});

}  // namespace bevcast
