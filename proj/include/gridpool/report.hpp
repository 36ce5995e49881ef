#pragma once

// Cost comparison reports and plot-ready series.
//
// Files written into the output directory:
//   report.jsonl    header, one record per agent, system totals, market summary
//   schedules.csv   mode,agent_id,slot,p_re,p_g,p_ac,p_f,p_et,t_in
//   grid_draw.csv   agent_id,slot,standalone_p_g,coordinated_p_g
//   prices.csv      round,agent_id,lambda_0..lambda_{H-1}      (with a trace)
//   mismatch.csv    round,max_e_norm,tracking_residual,net_0..  (with a trace)
// Nothing time-dependent is written, so identical inputs give identical bytes.

#include "gridpool/consensus.hpp"
#include "gridpool/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gridpool {

inline constexpr int kReportFormatVersion = 1;

struct ReportInput {
  std::vector<std::string> ids;
  Series standalone_costs;               // empty when not run
  Series coordinated_costs;              // empty when not run
  std::vector<Schedule> standalone_schedules;
  std::vector<Schedule> coordinated_schedules;
  const RunTrace* trace = nullptr;
  std::vector<Series> final_lambda;
};

/// 100 * (1 - coordinated / standalone); empty when standalone is 0.
std::optional<double> reduction_pct(double standalone, double coordinated);
/// "20.00%" or "n/a".
std::string format_reduction(std::optional<double> pct);

/// Creates `dir` if needed. Throws DataError on inconsistent input.
void write_report(const ReportInput& input, const std::string& dir);

}  // namespace gridpool
