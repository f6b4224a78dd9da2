#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "fbsoc/benchmark_lqg.hpp"
#include "fbsoc/errors.hpp"
#include "fbsoc/optimize.hpp"
#include "fbsoc/simulate.hpp"

namespace fbsoc {

/// 17 significant digits: enough to round-trip any double, so reruns with
/// identical seeds produce byte-identical files.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class CsvFile {
 public:
  CsvFile(const std::string& path, const std::string& header) : out_(path) {
    if (!out_) throw IoError("cannot open for writing: " + path);
    out_ << header << "\n";
  }
  void raw_row(const std::string& row) { out_ << row << "\n"; }
  ~CsvFile() = default;

 private:
  std::ofstream out_;
};

struct VerifyRow {
  std::string check;
  double statistic = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::uint64_t seed = 0;
};

inline void write_verify_report(const std::string& path,
                                const std::vector<VerifyRow>& rows) {
  CsvFile csv(path, "check,statistic,tolerance,pass,seed");
  for (const auto& r : rows)
    csv.raw_row(r.check + "," + fmt17(r.statistic) + "," + fmt17(r.tolerance) +
                "," + (r.pass ? "1" : "0") + "," + std::to_string(r.seed));
}

inline void write_gradient_reports(const std::string& path,
                                   const std::vector<GradientReport>& rows) {
  CsvFile csv(path, "iter,J,J_se,grad_norm,residual,step,seed");
  for (const auto& r : rows)
    csv.raw_row(std::to_string(r.iter) + "," + fmt17(r.J) + "," +
                fmt17(r.J_se) + "," + fmt17(r.grad_norm) + "," +
                fmt17(r.residual) + "," + fmt17(r.step) + "," +
                std::to_string(r.seed));
}

inline void write_oracle_curves(const std::string& path,
                                const RiccatiOracle& oracle) {
  CsvFile csv(path, "t,P,Sigma,G");
  for (std::size_t i = 0; i <= oracle.fine_steps; ++i) {
    const double t = oracle.T * static_cast<double>(i) /
                     static_cast<double>(oracle.fine_steps);
    csv.raw_row(fmt17(t) + "," + fmt17(oracle.P[i]) + "," +
                fmt17(oracle.Sigma[i]) + "," + fmt17(oracle.G[i]));
  }
}

inline void write_path_dump(const std::string& path, const PathEnsemble& ens) {
  std::string header = "path,step,t";
  for (std::size_t c = 0; c < ens.n; ++c)
    header += ",x" + std::to_string(c);
  header += ",Y,logrho";
  for (std::size_t c = 0; c < ens.k; ++c)
    header += ",u" + std::to_string(c);
  CsvFile csv(path, header);
  for (std::size_t i = 0; i < ens.paths; ++i)
    for (std::size_t j = 0; j <= ens.grid.N; ++j) {
      std::string row = std::to_string(i) + "," + std::to_string(j) + "," +
                        fmt17(ens.grid.node(j));
      const Span x = ens.x_at(i, j);
      for (std::size_t c = 0; c < ens.n; ++c) row += "," + fmt17(x[c]);
      row += "," + fmt17(ens.Y_at(i, j)) + "," + fmt17(ens.logrho_at(i, j));
      for (std::size_t c = 0; c < ens.k; ++c)
        row += "," + (j < ens.grid.N ? fmt17(ens.u_at(i, j)[c])
                                     : std::string("nan"));
      csv.raw_row(row);
    }
}

/// Per-parameter policy row so a run can be replayed exactly.
inline void write_policy(const std::string& path, Span theta) {
  CsvFile csv(path, "index,theta");
  for (std::size_t q = 0; q < theta.size(); ++q)
    csv.raw_row(std::to_string(q) + "," + fmt17(theta[q]));
}

/// Summary statistics of the backward/adjoint solution at t = 0.
inline void write_solve_summary(const std::string& path,
                                const BackwardEnsemble& back,
                                const AdjointEnsemble& adj) {
  CsvFile csv(path, "quantity,component,mean,se");
  auto emit = [&](const std::string& name, std::size_t comps,
                  auto&& value_at) {
    for (std::size_t c = 0; c < comps; ++c) {
      std::vector<double> vals(adj.paths);
      for (std::size_t i = 0; i < adj.paths; ++i) vals[i] = value_at(i, c);
      const MeanSe ms = mean_se(vals);
      csv.raw_row(name + "," + std::to_string(c) + "," + fmt17(ms.mean) + "," +
                  fmt17(std::isnan(ms.se) ? 0.0 : ms.se));
    }
  };
  if (back.m > 0) {
    emit("y0", back.m, [&](std::size_t i, std::size_t c) { return back.y_at(i, 0)[c]; });
    emit("z1_0", back.m, [&](std::size_t i, std::size_t c) { return back.z1_at(i, 0)[c]; });
    emit("z2_0", back.m, [&](std::size_t i, std::size_t c) { return back.z2_at(i, 0)[c]; });
    emit("k0", back.m, [&](std::size_t i, std::size_t c) { return adj.k_at(i, 0)[c]; });
  }
  emit("p0", adj.n, [&](std::size_t i, std::size_t c) { return adj.p_at(i, 0)[c]; });
  emit("q1_0", adj.n, [&](std::size_t i, std::size_t c) { return adj.q1_at(i, 0)[c]; });
  emit("q2_0", adj.n, [&](std::size_t i, std::size_t c) { return adj.q2_at(i, 0)[c]; });
  emit("r0", 1, [&](std::size_t i, std::size_t) { return adj.r_at(i, 0); });
  emit("R1_0", 1, [&](std::size_t i, std::size_t) { return adj.R1_at(i, 0); });
  emit("R2_0", 1, [&](std::size_t i, std::size_t) { return adj.R2_at(i, 0); });
}

}  // namespace fbsoc
