#pragma once

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <vector>

#include "mtf/tracklet.hpp"

namespace mtf {

/// Targetness matrix (rows = measurements, columns = predicted targets) plus
/// the derived argmin/min vectors and association histograms. Entries with no
/// counterpart on the other side use index -1 and distance +inf.
struct ResidualGrid {
  Eigen::MatrixXd targetness;         // N x M pairwise Euclidean distances
  std::vector<int> nearest_target;    // per measurement: argmin over targets
  std::vector<int> nearest_meas;      // per target: argmin over measurements
  Eigen::VectorXd meas_genuinity;     // per measurement: min distance
  Eigen::VectorXd target_genuinity;   // per target: min distance
  std::vector<int> target_hits;       // histogram of nearest_target values
  std::vector<int> meas_hits;         // histogram of nearest_meas values

  int num_measurements() const { return static_cast<int>(targetness.rows()); }
  int num_targets() const { return static_cast<int>(targetness.cols()); }
};

inline ResidualGrid build_grid(const std::vector<Eigen::Vector2d>& predictions,
                               const std::vector<Eigen::Vector2d>& measurements) {
  const int m = static_cast<int>(predictions.size());
  const int n = static_cast<int>(measurements.size());
  constexpr double inf = std::numeric_limits<double>::infinity();

  ResidualGrid grid;
  grid.targetness.resize(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) grid.targetness(i, j) = (predictions[j] - measurements[i]).norm();

  grid.nearest_target.assign(n, -1);
  grid.meas_genuinity = Eigen::VectorXd::Constant(n, inf);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      if (grid.targetness(i, j) < grid.meas_genuinity[i]) {  // ties keep the lowest index
        grid.meas_genuinity[i] = grid.targetness(i, j);
        grid.nearest_target[i] = j;
      }

  grid.nearest_meas.assign(m, -1);
  grid.target_genuinity = Eigen::VectorXd::Constant(m, inf);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < n; ++i)
      if (grid.targetness(i, j) < grid.target_genuinity[j]) {
        grid.target_genuinity[j] = grid.targetness(i, j);
        grid.nearest_meas[j] = i;
      }

  grid.target_hits.assign(m, 0);
  for (int i = 0; i < n; ++i)
    if (grid.nearest_target[i] >= 0) ++grid.target_hits[grid.nearest_target[i]];
  grid.meas_hits.assign(n, 0);
  for (int j = 0; j < m; ++j)
    if (grid.nearest_meas[j] >= 0) ++grid.meas_hits[grid.nearest_meas[j]];
  return grid;
}

struct Survival {
  int target = -1;
  int measurement = -1;
  double genuinity = 0.0;
};

/// Per-step classification. Every target index lands in exactly one of
/// survivals/freezes/deaths; deaths stays empty here (track removal happens
/// in the pipeline once freezes have been applied).
struct AssociationOutcome {
  std::vector<Survival> survivals;
  std::vector<int> freezes;
  std::vector<int> deaths;
  std::vector<int> births;  // measurement indices
};

/// Classifies targets into survivals and freezes and measurements into
/// births from the residual grid.
inline AssociationOutcome associate(const ResidualGrid& grid, const std::vector<int>& maturities,
                                    const AssociationConfig& cfg) {
  const int m = grid.num_targets();
  const int n = grid.num_measurements();
  if (static_cast<int>(maturities.size()) != m)
    throw std::invalid_argument("associate: maturity vector length does not match target count");

  AssociationOutcome out;
  std::vector<char> consumed(n, 0);
  for (int j = 0; j < m; ++j) {
    const int hits = grid.target_hits[j];
    const double g = grid.target_genuinity[j];
    if ((hits == 0 && maturities[j] >= cfg.m_min) ||
        (hits >= 1 && g >= cfg.g_min && g <= cfg.g_max)) {
      // possible occluded target or association with clutter
      out.freezes.push_back(j);
    } else if (hits >= 1 && g < cfg.g_min) {
      // possible target survival
      out.survivals.push_back({j, grid.nearest_meas[j], g});
      consumed[grid.nearest_meas[j]] = 1;
    } else {
      // conditions the branch table leaves open: unassociated while immature,
      // or nearest measurement beyond g_max -- both freeze and drift to death
      out.freezes.push_back(j);
    }
  }
  for (int i = 0; i < n; ++i) {
    if (consumed[i]) continue;  // a survival already claimed this measurement
    if (grid.meas_hits[i] == 0 || grid.meas_genuinity[i] > cfg.g_max) out.births.push_back(i);
  }
  return out;
}

}  // namespace mtf
