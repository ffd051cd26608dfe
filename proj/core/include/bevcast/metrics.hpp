#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bevcast/grid.hpp"

namespace bevcast {

// Per-step errors of one predicted trajectory. A step counts only when the
// truth exists; a missing prediction there is a miss.
struct TrajectoryRecord {
  std::vector<std::optional<Point2>> predicted;
  std::vector<std::optional<Point2>> truth;
};

struct AxisSeries {
  std::vector<double> x;
  std::vector<double> y;
};

struct EvalReport {
  std::vector<double> rmse_x, rmse_y;
  std::vector<double> mae_x, mae_y;
  std::vector<std::size_t> count;  // evaluated trajectories per step
  double ade_x = 0.0, ade_y = 0.0;
  double fde_x = 0.0, fde_y = 0.0;
  std::size_t n_trajectories = 0;
  std::size_t n_missed = 0;  // (trajectory, step) pairs with truth but no prediction
};

// Dense N x M inputs. Throw std::invalid_argument for N = 0 or ragged shapes.
AxisSeries rmse_per_step(std::span<const std::vector<Point2>> pred,
                         std::span<const std::vector<Point2>> truth);
AxisSeries mae_per_step(std::span<const std::vector<Point2>> pred,
                        std::span<const std::vector<Point2>> truth);

// Masked variants: a step with no evaluated pair yields NaN.
AxisSeries rmse_per_step(std::span<const TrajectoryRecord> records);
AxisSeries mae_per_step(std::span<const TrajectoryRecord> records);

struct AdeFde {
  double ade = 0.0;
  double fde = 0.0;
};

// ADE is the mean of the finite entries, FDE the last entry.
AdeFde ade_fde(std::span<const double> mae);

EvalReport evaluate(std::span<const TrajectoryRecord> records);

// step,horizon_s,count,rmse_x,rmse_y,mae_x,mae_y
void write_report_csv(std::ostream& os, const EvalReport& report, double dt);
// metric,x,y rows for ADE/FDE plus trajectory and miss counts.
void write_summary_csv(std::ostream& os, const EvalReport& report);
// Human-readable table at horizons 0.25 s, 1.0 s and 2.0 s (when present)
// followed by FDE and ADE.
void write_report_table(std::ostream& os, const EvalReport& report, double dt,
                        const std::string& title);

}  // namespace bevcast
