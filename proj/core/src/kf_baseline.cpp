#include "bevcast/kf_baseline.hpp"

#include <Eigen/Dense>

#include <stdexcept>

namespace bevcast {

Eigen::Matrix4d transition_matrix(double dt) {
  Eigen::Matrix4d a = Eigen::Matrix4d::Identity();
  a(0, 2) = dt;
  a(1, 3) = dt;
  return a;
}

namespace {

void check_covariance(Eigen::Matrix4d& p) {
  p = (0.5 * (p + p.transpose())).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(p, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-9 * std::max(1.0, p.norm())) {
    throw std::runtime_error("kalman: covariance lost positive semi-definiteness");
  }
}

}  // namespace

KfState kf_step(const KfState& s, const std::optional<Eigen::Vector4d>& obs) {
  if (obs && !obs->allFinite()) throw std::invalid_argument("kalman: non-finite observation");
  KfState next = s;
  const Eigen::Matrix4d a = transition_matrix(s.dt);
  next.x = a * s.x;
  next.P = a * s.P * a.transpose() + s.Q;
  check_covariance(next.P);
  if (!obs) return next;

  // H = I: innovation covariance S = P + R, gain K = P S^-1.
  const Eigen::Matrix4d innovation_cov = next.P + s.R;
  const Eigen::Matrix4d gain = innovation_cov.transpose().ldlt().solve(next.P.transpose()).transpose();
  next.x += gain * (*obs - next.x);
  const Eigen::Matrix4d i_k = Eigen::Matrix4d::Identity() - gain;
  // Joseph form keeps P symmetric positive semi-definite.
  next.P = i_k * next.P * i_k.transpose() + gain * s.R * gain.transpose();
  check_covariance(next.P);
  return next;
}

std::vector<Point2> predict_horizon(const VehicleTrack& track, int steps, const KfNoise& noise) {
  const auto& samples = track.samples();
  if (samples.size() < 2) throw std::invalid_argument("kalman: track needs at least two samples");
  if (steps < 0) throw std::invalid_argument("kalman: negative horizon");
  const double dt = track.dt();
  auto observe = [&](std::size_t k) {
    const auto& cur = samples[k];
    const auto& prev = samples[k - 1];
    return Eigen::Vector4d(cur.x_m, cur.y_m, (cur.x_m - prev.x_m) / dt, (cur.y_m - prev.y_m) / dt);
  };

  KfState s;
  s.dt = dt;
  s.Q = noise.Q;
  s.R = noise.R;
  s.x = observe(1);
  s.P = noise.R;
  for (std::size_t k = 2; k < samples.size(); ++k) s = kf_step(s, observe(k));

  std::vector<Point2> out;
  out.reserve(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) {
    s = kf_step(s, std::nullopt);
    out.push_back({s.x(0), s.x(1)});
  }
  return out;
}

}  // namespace bevcast
