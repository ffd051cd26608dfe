#include "bevcast/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace bevcast {

namespace {

// Neumaier-compensated accumulator.
class Sum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

std::size_t horizon_of(std::span<const TrajectoryRecord> records) {
  if (records.empty()) throw std::invalid_argument("metrics: no trajectories");
  const std::size_t m = records.front().truth.size();
  for (const auto& r : records) {
    if (r.truth.size() != m || r.predicted.size() != m) {
      throw std::invalid_argument("metrics: trajectories have different horizons");
    }
  }
  return m;
}

template <typename Accumulate, typename Finish>
AxisSeries per_step(std::span<const TrajectoryRecord> records, Accumulate acc, Finish finish) {
  const std::size_t m = horizon_of(records);
  AxisSeries out{std::vector<double>(m), std::vector<double>(m)};
  for (std::size_t k = 0; k < m; ++k) {
    Sum sx;
    Sum sy;
    std::size_t n = 0;
    for (const auto& r : records) {
      if (!r.truth[k] || !r.predicted[k]) continue;
      sx.add(acc(r.predicted[k]->x - r.truth[k]->x));
      sy.add(acc(r.predicted[k]->y - r.truth[k]->y));
      ++n;
    }
    if (n == 0) {
      out.x[k] = out.y[k] = std::numeric_limits<double>::quiet_NaN();
    } else {
      out.x[k] = finish(sx.value() / static_cast<double>(n));
      out.y[k] = finish(sy.value() / static_cast<double>(n));
    }
  }
  return out;
}

std::vector<TrajectoryRecord> dense_records(std::span<const std::vector<Point2>> pred,
                                            std::span<const std::vector<Point2>> truth) {
  if (pred.empty()) throw std::invalid_argument("metrics: no trajectories");
  if (pred.size() != truth.size()) throw std::invalid_argument("metrics: N mismatch");
  std::vector<TrajectoryRecord> records(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].size() != truth[i].size() || pred[i].size() != pred[0].size()) {
      throw std::invalid_argument("metrics: ragged trajectories");
    }
    records[i].predicted.assign(pred[i].begin(), pred[i].end());
    records[i].truth.assign(truth[i].begin(), truth[i].end());
  }
  return records;
}

}  // namespace

AxisSeries rmse_per_step(std::span<const TrajectoryRecord> records) {
  return per_step(
      records, [](double e) { return e * e; }, [](double mean) { return std::sqrt(mean); });
}

AxisSeries mae_per_step(std::span<const TrajectoryRecord> records) {
  return per_step(
      records, [](double e) { return std::abs(e); }, [](double mean) { return mean; });
}

AxisSeries rmse_per_step(std::span<const std::vector<Point2>> pred,
                         std::span<const std::vector<Point2>> truth) {
  const auto records = dense_records(pred, truth);
  return rmse_per_step(records);
}

AxisSeries mae_per_step(std::span<const std::vector<Point2>> pred,
                        std::span<const std::vector<Point2>> truth) {
  const auto records = dense_records(pred, truth);
  return mae_per_step(records);
}

AdeFde ade_fde(std::span<const double> mae) {
  if (mae.empty()) throw std::invalid_argument("metrics: empty horizon");
  Sum s;
  std::size_t n = 0;
  for (const double v : mae) {
    if (std::isfinite(v)) {
      s.add(v);
      ++n;
    }
  }
  const double ade = n == 0 ? std::numeric_limits<double>::quiet_NaN() : s.value() / static_cast<double>(n);
  return {ade, mae.back()};
}

EvalReport evaluate(std::span<const TrajectoryRecord> records) {
  EvalReport rep;
  const auto rmse = rmse_per_step(records);
  const auto mae = mae_per_step(records);
  rep.rmse_x = rmse.x;
  rep.rmse_y = rmse.y;
  rep.mae_x = mae.x;
  rep.mae_y = mae.y;
  const std::size_t m = rep.mae_x.size();
  rep.count.assign(m, 0);
  for (const auto& r : records) {
    for (std::size_t k = 0; k < m; ++k) {
      if (!r.truth[k]) continue;
      if (r.predicted[k]) {
        ++rep.count[k];
      } else {
        ++rep.n_missed;
      }
    }
  }
  const AdeFde ax = ade_fde(rep.mae_x);
  const AdeFde ay = ade_fde(rep.mae_y);
  rep.ade_x = ax.ade;
  rep.fde_x = ax.fde;
  rep.ade_y = ay.ade;
  rep.fde_y = ay.fde;
  rep.n_trajectories = records.size();
  return rep;
}

namespace {

std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace

void write_report_csv(std::ostream& os, const EvalReport& r, double dt) {
  os << "step,horizon_s,count,rmse_x,rmse_y,mae_x,mae_y\n";
  for (std::size_t k = 0; k < r.mae_x.size(); ++k) {
    os << k + 1 << ',' << fmt(dt * static_cast<double>(k + 1), "%.4f") << ',' << r.count[k] << ','
       << fmt(r.rmse_x[k]) << ',' << fmt(r.rmse_y[k]) << ',' << fmt(r.mae_x[k]) << ','
       << fmt(r.mae_y[k]) << '\n';
  }
}

void write_summary_csv(std::ostream& os, const EvalReport& r) {
  os << "metric,x,y\n";
  os << "ade," << fmt(r.ade_x) << ',' << fmt(r.ade_y) << '\n';
  os << "fde," << fmt(r.fde_x) << ',' << fmt(r.fde_y) << '\n';
  os << "n_trajectories," << r.n_trajectories << ',' << r.n_trajectories << '\n';
  os << "n_missed," << r.n_missed << ',' << r.n_missed << '\n';
}

void write_report_table(std::ostream& os, const EvalReport& r, double dt, const std::string& title) {
  std::vector<std::size_t> cols;
  for (const double t : {0.25, 1.0, 2.0}) {
    for (std::size_t k = 0; k < r.mae_x.size(); ++k) {
      if (std::abs(dt * static_cast<double>(k + 1) - t) < 1e-9) cols.push_back(k);
    }
  }
  if (cols.empty() && !r.mae_x.empty()) cols = {0, r.mae_x.size() / 2, r.mae_x.size() - 1};

  os << title << "  (N=" << r.n_trajectories << ", missed=" << r.n_missed << ")\n";
  os << "metric      ";
  for (const auto k : cols) os << fmt(dt * static_cast<double>(k + 1), "  t=%-5.2fs      ");
  os << "  FDE             ADE\n";
  auto row = [&](const char* name, const std::vector<double>& x, const std::vector<double>& y,
                 bool summary) {
    os << name;
    for (const auto k : cols) os << "  " << fmt(x[k], "%6.3f") << " / " << fmt(y[k], "%-6.3f");
    if (summary) {
      os << "  " << fmt(r.fde_x, "%6.3f") << " / " << fmt(r.fde_y, "%-6.3f");
      os << "  " << fmt(r.ade_x, "%6.3f") << " / " << fmt(r.ade_y, "%-6.3f");
    }
    os << '\n';
  };
  row("RMSE x/y   ", r.rmse_x, r.rmse_y, false);
  row("MAE  x/y   ", r.mae_x, r.mae_y, true);
}

}  // namespace bevcast
