#include "tst/analysis/cost.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace tst::analysis {

CostReport count_parameters(const TSTConfig& c) {
  c.validate();
  const std::uint64_t dim = c.dim;
  const std::uint64_t inner = c.num_heads * c.key_dim;
  const std::uint64_t embedding = c.subsequence_length() * dim;
  const std::uint64_t class_token = dim;
  const std::uint64_t position = c.position_encoding == PositionEncoding::Learned1D ? c.num_tokens() * dim : 0;
  const std::uint64_t per_block = 2 * 2 * dim        // two LayerNorms
                                  + 3 * dim * inner  // Q, K, V
                                  + inner * dim      // output projection
                                  + dim * c.dim_mlp + c.dim_mlp + c.dim_mlp * dim + dim;
  const std::uint64_t head = dim * c.num_classes + c.num_classes;
  CostReport r;
  r.params_full = embedding + class_token + position + c.depth * per_block + 2 * dim + head;
  r.params_comparable = r.params_full - class_token - position;
  return r;
}

CostReport count_linear_macs(const TSTConfig& c) {
  c.validate();
  const std::uint64_t n = c.num_tokens();
  const std::uint64_t dim = c.dim;
  const std::uint64_t inner = c.num_heads * c.key_dim;
  const std::uint64_t embedding = c.num_subsequences * c.subsequence_length() * dim;
  const std::uint64_t per_block = 3 * n * dim * inner + n * inner * dim + 2 * n * dim * c.dim_mlp;
  CostReport r;
  r.macs_linear = embedding + c.depth * per_block + dim * c.num_classes;
  // QK^T plus weights*V, with d_v = d_k
  r.macs_attention = c.depth * c.num_heads * n * n * (2 * c.key_dim);
  return r;
}

CostReport cost_report(const TSTConfig& config) {
  CostReport r = count_parameters(config);
  CostReport m = count_linear_macs(config);
  r.macs_linear = m.macs_linear;
  r.macs_attention = m.macs_attention;
  return r;
}

const std::vector<SweepRow>& table4_rows() {
  static const std::vector<SweepRow> rows = [] {
    auto make = [](std::size_t ns, std::size_t dim, std::size_t dim_mlp, std::size_t dk, std::size_t h,
                   std::size_t depth, PositionEncoding pe) {
      TSTConfig c;
      c.num_subsequences = ns;
      c.dim = dim;
      c.dim_mlp = dim_mlp;
      c.key_dim = dk;
      c.num_heads = h;
      c.depth = depth;
      c.position_encoding = pe;
      return c;
    };
    const auto pe = PositionEncoding::Learned1D;
    std::vector<SweepRow> r;
    r.push_back({"Baseline", make(256, 128, 256, 64, 6, 6, pe), 405.52, 1.58});
    const std::size_t a_ns[] = {128, 64, 32, 16, 8, 4, 2, 1};
    const double a_flops[] = {203.18, 102.51, 52.17, 27.00, 14.42, 8.13, 4.98, 3.41};
    const double a_params[] = {1.58, 1.58, 1.59, 1.59, 1.61, 1.64, 1.71, 1.84};
    for (int i = 0; i < 8; ++i)
      r.push_back({"A" + std::to_string(i + 1), make(a_ns[i], 128, 256, 64, 6, 6, pe), a_flops[i], a_params[i]});
    r.push_back({"B1", make(256, 16, 32, 64, 6, 6, pe), 39.51, 0.15});
    r.push_back({"B2", make(256, 32, 64, 64, 6, 6, pe), 82.18, 0.32});
    r.push_back({"B3", make(256, 64, 128, 64, 6, 6, pe), 177.00, 0.69});
    r.push_back({"C1", make(256, 128, 256, 8, 6, 6, pe), 139.25, 0.55});
    r.push_back({"C2", make(256, 128, 256, 16, 6, 6, pe), 177.15, 0.69});
    r.push_back({"C3", make(256, 128, 256, 32, 6, 6, pe), 252.94, 0.99});
    r.push_back({"C4", make(256, 128, 256, 128, 6, 6, pe), 707.69, 2.76});
    r.push_back({"D1", make(256, 128, 256, 64, 1, 6, pe), 151.88, 0.60});
    r.push_back({"D2", make(256, 128, 256, 64, 2, 6, pe), 202.41, 0.79});
    r.push_back({"D3", make(256, 128, 256, 64, 4, 6, pe), 303.47, 1.19});
    r.push_back({"E1", make(256, 128, 256, 64, 6, 1, pe), 67.67, 0.27});
    r.push_back({"E2", make(256, 128, 256, 64, 6, 2, pe), 135.04, 0.53});
    r.push_back({"E3", make(256, 128, 256, 64, 6, 4, pe), 269.78, 1.05});
    r.push_back({"F", make(256, 128, 256, 64, 6, 6, PositionEncoding::None), 404.52, 1.55});
    return r;
  }();
  return rows;
}

std::vector<RowReconciliation> reconcile_table4() {
  std::vector<RowReconciliation> out;
  for (const auto& row : table4_rows()) {
    RowReconciliation r{row, cost_report(row.config), 0.0, 0.0, false, false};
    r.flops_rel_error = (static_cast<double>(r.cost.macs_linear) / 1e6 - row.flops_m) / row.flops_m;
    r.params_rel_error = (static_cast<double>(r.cost.params_comparable) / 1e6 - row.params_m) / row.params_m;
    r.flops_ok = std::abs(r.flops_rel_error) <= kFlopsTolerance;
    r.params_ok = std::abs(r.params_rel_error) <= kParamsTolerance;
    out.push_back(r);
  }
  return out;
}

namespace {

std::string format(const char* fmt, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

}  // namespace

void write_cost_table(std::ostream& out, const std::vector<RowReconciliation>& rows) {
  out << format("%-9s %5s %5s %5s %4s %3s %5s %4s | %10s %10s %8s | %7s %7s %7s %8s | %s\n", "label", "Ns", "L/Ns",
                "dim", "mlp", "dk", "h", "depth", "FLOPs(M)", "model(M)", "delta%", "par(M)", "model", "full",
                "delta%", "status");
  for (const auto& r : rows) {
    const auto& c = r.row.config;
    out << format("%-9s %5zu %5zu %5zu %4zu %3zu %5zu %4s | %10.2f %10.2f %+8.3f | %7.2f %7.3f %7.3f %+8.3f | %s\n",
                  r.row.label.c_str(), c.num_subsequences, c.subsequence_length(), c.dim, c.dim_mlp, c.key_dim,
                  c.num_heads, (std::to_string(c.depth) + (c.position_encoding == PositionEncoding::None ? "*" : ""))
                      .c_str(),
                  r.row.flops_m, static_cast<double>(r.cost.macs_linear) / 1e6, 100.0 * r.flops_rel_error,
                  r.row.params_m, static_cast<double>(r.cost.params_comparable) / 1e6,
                  static_cast<double>(r.cost.params_full) / 1e6, 100.0 * r.params_rel_error,
                  r.flops_ok && r.params_ok ? "ok" : "MISMATCH");
  }
  out << "(* = no position encoding; FLOPs = linear-layer MACs; par = parameters excluding class token and "
         "position encoding)\n";
}

void write_cost_tsv(std::ostream& out, const std::vector<RowReconciliation>& rows) {
  out << "label\tNs\tL_over_Ns\tdim\tdim_mlp\tkey_dim\theads\tdepth\tpos_encoding\tprinted_flops_m\tmacs_linear\t"
         "macs_attention\tflops_rel_error\tprinted_params_m\tparams_comparable\tparams_full\tparams_rel_error\tstatus\n";
  for (const auto& r : rows) {
    const auto& c = r.row.config;
    out << r.row.label << '\t' << c.num_subsequences << '\t' << c.subsequence_length() << '\t' << c.dim << '\t'
        << c.dim_mlp << '\t' << c.key_dim << '\t' << c.num_heads << '\t' << c.depth << '\t'
        << to_string(c.position_encoding) << '\t' << format("%.2f", r.row.flops_m) << '\t' << r.cost.macs_linear
        << '\t' << r.cost.macs_attention << '\t' << format("%.6f", r.flops_rel_error) << '\t'
        << format("%.2f", r.row.params_m) << '\t' << r.cost.params_comparable << '\t' << r.cost.params_full << '\t'
        << format("%.6f", r.params_rel_error) << '\t' << (r.flops_ok && r.params_ok ? "ok" : "mismatch") << '\n';
  }
}

void write_cost_report(std::ostream& out, const TSTConfig& c, const CostReport& r) {
  out << format("config: L=%zu Ns=%zu L/Ns=%zu dim=%zu dim_mlp=%zu d_k=%zu h=%zu depth=%zu pos=%s classes=%zu\n",
                c.series_length, c.num_subsequences, c.subsequence_length(), c.dim, c.dim_mlp, c.key_dim,
                c.num_heads, c.depth, to_string(c.position_encoding).c_str(), c.num_classes);
  out << format("macs_linear\t%llu\t(%.2fM)\n", static_cast<unsigned long long>(r.macs_linear), r.macs_linear / 1e6);
  out << format("macs_attention\t%llu\t(%.2fM)\n", static_cast<unsigned long long>(r.macs_attention),
                r.macs_attention / 1e6);
  out << format("params_full\t%llu\t(%.3fM)\n", static_cast<unsigned long long>(r.params_full), r.params_full / 1e6);
  out << format("params_comparable\t%llu\t(%.3fM)\n", static_cast<unsigned long long>(r.params_comparable),
                r.params_comparable / 1e6);
}

}  // namespace tst::analysis
