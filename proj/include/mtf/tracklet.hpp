#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mtf {

/// Thresholds governing association, confirmation and track death.
struct AssociationConfig {
  int m_min = 2;         // maturity needed for a tuple to be reported
  int m_init = 2;        // maturity assigned at birth
  double g_min = 50.0;   // below this a measurement confirms a target
  double g_max = 120.0;  // beyond this no measurement can explain a target
  int max_batch = 10;    // patch row cap
  int m_max = 10;        // maturity ceiling, stops survival credit piling up
  int death_floor = 0;   // tuples with maturity below this are removed

  std::vector<std::string> violations(std::string_view prefix = "association") const {
    std::vector<std::string> out;
    auto field = [&prefix](std::string_view name) { return std::string(prefix) + "." + std::string(name); };
    if (!(g_min > 0.0)) out.push_back(field("g_min") + ": must be > 0");
    if (!(g_min < g_max)) out.push_back(field("g_min") + "," + field("g_max") + ": g_min must be < g_max");
    if (m_min < 0) out.push_back(field("m_min") + ": must be >= 0");
    if (m_init < m_min) out.push_back(field("m_init") + ": must be >= m_min");
    if (!(death_floor < m_min)) out.push_back(field("death_floor") + ": must be < m_min");
    if (!(m_min <= m_max)) out.push_back(field("m_max") + ": must be >= m_min");
    if (max_batch < 1) out.push_back(field("max_batch") + ": must be >= 1");
    return out;
  }
  void validate() const {
    const auto v = violations();
    if (!v.empty()) {
      std::string msg = "invalid AssociationConfig:";
      for (const auto& s : v) msg += " " + s + ";";
      throw std::invalid_argument(msg);
    }
  }
};

/// Per-target record: recent state patch (oldest row first), maturity
/// counter, genuinity error of the last association, and the freeze flag
/// (set when the tuple was last updated from its own prediction).
struct TrackletTuple {
  std::int64_t id = -1;
  Eigen::MatrixXd patch;  // M x 2
  int maturity = 0;
  double genuinity = 0.0;
  bool frozen = false;
};

inline TrackletTuple birth_tuple(const Eigen::Vector2d& z, const AssociationConfig& cfg,
                                 std::int64_t id) {
  if (!z.allFinite()) throw std::invalid_argument("birth_tuple: non-finite measurement");
  TrackletTuple t;
  t.id = id;
  t.patch.resize(1, 2);
  t.patch.row(0) = z.transpose();
  t.maturity = cfg.m_init;
  t.genuinity = 0.0;
  t.frozen = false;
  return t;
}

/// Appends `row` as the newest patch row; drops the oldest when the patch
/// would exceed max_batch.
inline TrackletTuple append_row(TrackletTuple t, const Eigen::Vector2d& row,
                                const AssociationConfig& cfg) {
  if (!row.allFinite()) throw std::invalid_argument("append_row: non-finite row");
  const Eigen::Index rows = t.patch.rows();
  if (rows < cfg.max_batch) {
    t.patch.conservativeResize(rows + 1, 2);
    t.patch.row(rows) = row.transpose();
  } else {
    const Eigen::Index keep = cfg.max_batch - 1;
    Eigen::MatrixXd next(cfg.max_batch, 2);
    next.topRows(keep) = t.patch.bottomRows(keep);
    next.row(keep) = row.transpose();
    t.patch = std::move(next);
  }
  return t;
}

/// Measurement associated: unfreeze, bump maturity (capped), record the new
/// genuinity error and append the measurement.
inline TrackletTuple apply_survival(TrackletTuple t, const Eigen::Vector2d& z, double g_new,
                                    const AssociationConfig& cfg) {
  if (g_new < 0.0) throw std::invalid_argument("apply_survival: negative genuinity");
  t.frozen = false;
  t.maturity = std::min(t.maturity + 1, cfg.m_max);
  t.genuinity = g_new;
  return append_row(std::move(t), z, cfg);
}

/// No measurement: freeze, drop maturity and append the prediction so the
/// patch keeps evolving through the occlusion. Genuinity is left as-is.
inline TrackletTuple apply_freeze(TrackletTuple t, const Eigen::Vector2d& x_hat,
                                  const AssociationConfig& cfg) {
  t.frozen = true;
  t.maturity -= 1;
  return append_row(std::move(t), x_hat, cfg);
}

inline bool is_dead(const TrackletTuple& t, const AssociationConfig& cfg) {
  return t.maturity < cfg.death_floor;
}

}  // namespace mtf
