#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tst/config.hpp"

namespace tst::analysis {

/// Analytic cost of one forward pass on a single sample.
struct CostReport {
  /// Multiply-accumulates of every linear map (embedding, Q/K/V, output
  /// projection, MLP, head). This is the convention the published FLOPs
  /// column follows.
  std::uint64_t macs_linear = 0;
  /// Q K^T and weights * V products, reported separately.
  std::uint64_t macs_attention = 0;
  std::uint64_t params_full = 0;
  /// params_full without the class token and position encoding.
  std::uint64_t params_comparable = 0;
};

CostReport count_parameters(const TSTConfig& config);
CostReport count_linear_macs(const TSTConfig& config);
CostReport cost_report(const TSTConfig& config);

/// One row of the published hyperparameter sweep with its printed values.
struct SweepRow {
  std::string label;
  TSTConfig config;
  double flops_m;   // printed FLOPs, millions
  double params_m;  // printed parameter count, millions
};

/// Baseline plus the A-F variations, 23 rows in print order.
const std::vector<SweepRow>& table4_rows();

inline constexpr double kFlopsTolerance = 0.02;
inline constexpr double kParamsTolerance = 0.05;

struct RowReconciliation {
  SweepRow row;
  CostReport cost;
  double flops_rel_error;   // (model - printed) / printed
  double params_rel_error;
  bool flops_ok;
  bool params_ok;
};

std::vector<RowReconciliation> reconcile_table4();

/// Aligned human-readable table.
void write_cost_table(std::ostream& out, const std::vector<RowReconciliation>& rows);
/// Tab-separated with a header; one line per row.
void write_cost_tsv(std::ostream& out, const std::vector<RowReconciliation>& rows);
void write_cost_report(std::ostream& out, const TSTConfig& config, const CostReport& cost);

}  // namespace tst::analysis
