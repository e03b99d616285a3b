#pragma once

#include <cmath>
#include <cstdlib>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sead/error.hpp"
#include "sead/format.hpp"
#include "sead/trajectory.hpp"

namespace sead {

/// Mean and sample standard deviation (0 for fewer than two values).
struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;

  double standard_error() const { return n > 0 ? sd / std::sqrt(static_cast<double>(n)) : 0.0; }
};

inline MeanSd mean_sd(std::span<const double> xs) {
  MeanSd out;
  out.n = xs.size();
  if (xs.empty()) return out;
  double s = 0.0;
  for (double x : xs) s += x;
  out.mean = s / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return out;
}

namespace detail {
inline void require_terminal(std::span<const Trajectory> trajs) {
  for (const Trajectory& t : trajs)
    if (t.outcome == DialogueOutcome::Ongoing) throw ContractViolation("metrics: trajectory not terminal");
}
}  // namespace detail

inline double completion_rate(std::span<const Trajectory> trajs) {
  if (trajs.empty()) throw ContractViolation("completion_rate: no trajectories");
  detail::require_terminal(trajs);
  std::size_t successes = 0;
  for (const Trajectory& t : trajs) successes += t.success() ? 1 : 0;
  return static_cast<double>(successes) / static_cast<double>(trajs.size());
}

/// Mean length of successful dialogues; empty when none succeeded.
inline std::optional<double> avg_turns_to_target(std::span<const Trajectory> trajs) {
  detail::require_terminal(trajs);
  long total = 0;
  long count = 0;
  for (const Trajectory& t : trajs) {
    if (!t.success()) continue;
    total += t.length();
    ++count;
  }
  if (count == 0) return std::nullopt;
  return static_cast<double>(total) / static_cast<double>(count);
}

/// Range-normalized accuracy from per-dimension mean absolute errors.
constexpr double upa_from_mae(double mae_c, double mae_e, double mae_tr) {
  return 1.0 - (1.0 / 3.0) * (mae_c / 4.0 + mae_e / 3.0 + mae_tr / 5.0);
}

/// Absolute estimate errors averaged over every turn of every dialogue.
inline double upa(std::span<const Trajectory> trajs) {
  long err_c = 0, err_e = 0, err_tr = 0, turns = 0;
  for (const Trajectory& t : trajs) {
    if (t.turns.empty()) throw ContractViolation("upa: trajectory without state estimates");
    for (const Turn& turn : t.turns) {
      err_c += std::abs(turn.estimate.c - turn.hidden.c);
      err_e += std::abs(turn.estimate.e - turn.hidden.e);
      err_tr += std::abs(turn.estimate.tr - turn.hidden.tr);
      ++turns;
    }
  }
  if (turns == 0) throw ContractViolation("upa: no trajectories");
  const double n = static_cast<double>(turns);
  return upa_from_mae(static_cast<double>(err_c) / n, static_cast<double>(err_e) / n,
                      static_cast<double>(err_tr) / n);
}

struct Improvements {
  double ei = 0.0;
  double ti = 0.0;
  double ci = 0.0;
};

/// Mean change from initial to final level per dimension.
inline Improvements improvements(std::span<const Trajectory> trajs) {
  detail::require_terminal(trajs);
  if (trajs.empty()) return {};
  long de = 0, dtr = 0, dc = 0;
  for (const Trajectory& t : trajs) {
    de += t.final_state.e - t.profile.initial.e;
    dtr += t.final_state.tr - t.profile.initial.tr;
    dc += t.final_state.c - t.profile.initial.c;
  }
  const double n = static_cast<double>(trajs.size());
  return {static_cast<double>(de) / n, static_cast<double>(dtr) / n, static_cast<double>(dc) / n};
}

/// The six service-agent metrics with across-dialogue deviations.
struct MetricBundle {
  std::size_t dialogues = 0;
  MeanSd cr;
  std::optional<MeanSd> att;
  double upa = 0.0;
  double upa_sd = 0.0;
  MeanSd ei;
  MeanSd ti;
  MeanSd ci;
};

inline double dialogue_upa(const Trajectory& t) {
  const Trajectory* one = &t;
  return upa(std::span<const Trajectory>(one, 1));
}

inline MetricBundle compute_metrics(std::span<const Trajectory> trajs) {
  MetricBundle m;
  m.dialogues = trajs.size();
  const double cr = completion_rate(trajs);
  std::vector<double> success, lengths, upas, de, dtr, dc;
  for (const Trajectory& t : trajs) {
    success.push_back(t.success() ? 1.0 : 0.0);
    if (t.success()) lengths.push_back(t.length());
    upas.push_back(dialogue_upa(t));
    de.push_back(t.final_state.e - t.profile.initial.e);
    dtr.push_back(t.final_state.tr - t.profile.initial.tr);
    dc.push_back(t.final_state.c - t.profile.initial.c);
  }
  m.cr = mean_sd(success);
  m.cr.mean = cr;
  if (const auto att = avg_turns_to_target(trajs)) {
    m.att = mean_sd(lengths);
    m.att->mean = *att;
  }
  m.upa = upa(trajs);
  m.upa_sd = mean_sd(upas).sd;
  const Improvements imp = improvements(trajs);
  m.ei = mean_sd(de);
  m.ei.mean = imp.ei;
  m.ti = mean_sd(dtr);
  m.ti.mean = imp.ti;
  m.ci = mean_sd(dc);
  m.ci.mean = imp.ci;
  return m;
}

/// Header and one row: CR(%), ATT, UPA, EI, TI, CI with deviations.
inline std::string metrics_table(const MetricBundle& m) {
  auto pm = [](double mean, double sd, int prec) { return format_fixed(mean, prec) + " ±" + format_fixed(sd, prec); };
  std::string out = "CR(%),ATT,UPA,EI,TI,CI\n";
  out += format_fixed(100.0 * m.cr.mean, 1) + ",";
  out += (m.att ? pm(m.att->mean, m.att->sd, 2) : std::string("n/a")) + ",";
  out += pm(m.upa, m.upa_sd, 3) + "," + pm(m.ei.mean, m.ei.sd, 2) + "," + pm(m.ti.mean, m.ti.sd, 2) + "," +
         pm(m.ci.mean, m.ci.sd, 2) + "\n";
  return out;
}

}  // namespace sead
