#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "abr/errors.hpp"
#include "abr/eval_harness.hpp"

namespace abr {

class DegenerateInput : public DataError {
 public:
  using DataError::DataError;
};

class ColumnMismatch : public DataError {
 public:
  using DataError::DataError;
};

// ---------------------------------------------------------------------------
// Spearman rank correlation

// Average ranks, 1-based; tied values share the mean of their rank range.
inline std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size(), 0.0);
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    // ranks i+1 .. j+1 share their average; halves are exact in binary.
    double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

// Tie-corrected Spearman rho: Pearson correlation of the average-rank
// vectors. A constant input has no defined rank correlation and raises
// DegenerateInput rather than returning a number.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ColumnMismatch("spearman inputs differ in length");
  if (x.size() < 3) throw DegenerateInput("spearman needs at least 3 observations");
  std::vector<double> rx = average_ranks(x);
  std::vector<double> ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    double dx = rx[i] - mx;
    double dy = ry[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateInput("constant input: rank correlation undefined");
  double rho = sxy / std::sqrt(sxx * syy);
  return std::clamp(rho, -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Score matrices

// Rows are models, columns benchmark/probe names. CSV form: header row of
// benchmark names, first column the model name; "66.50%" and "66.50" both
// parse.
struct ScoreMatrix {
  std::vector<std::string> models;
  std::vector<std::string> benchmarks;
  std::vector<std::vector<double>> cells;

  static ScoreMatrix from_csv(std::istream& in) {
    ScoreMatrix m;
    std::string line;
    bool header = true;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      std::vector<std::string> fields = split_csv(line);
      if (header) {
        for (std::size_t i = 1; i < fields.size(); ++i) m.benchmarks.push_back(fields[i]);
        header = false;
        continue;
      }
      if (fields.size() != m.benchmarks.size() + 1) {
        throw ColumnMismatch("csv line " + std::to_string(line_no) + " has " + std::to_string(fields.size() - 1) +
                             " cells for " + std::to_string(m.benchmarks.size()) + " benchmarks");
      }
      m.models.push_back(fields[0]);
      std::vector<double> row;
      for (std::size_t i = 1; i < fields.size(); ++i) {
        std::string cell = fields[i];
        if (!cell.empty() && cell.back() == '%') cell.pop_back();
        try {
          row.push_back(std::stod(cell));
        } catch (const std::exception&) {
          throw DataError("csv line " + std::to_string(line_no) + ": cell '" + fields[i] + "' is not a number");
        }
      }
      m.cells.push_back(std::move(row));
    }
    if (m.benchmarks.empty() || m.models.empty()) throw DataError("score matrix is empty");
    return m;
  }

  std::size_t col_index(const std::string& name) const {
    for (std::size_t i = 0; i < benchmarks.size(); ++i) {
      if (benchmarks[i] == name) return i;
    }
    throw ColumnMismatch("no benchmark column named '" + name + "'");
  }

  std::vector<double> column(const std::string& name) const {
    std::size_t c = col_index(name);
    std::vector<double> out;
    out.reserve(cells.size());
    for (const auto& row : cells) out.push_back(row[c]);
    return out;
  }

 private:
  static std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (char c : line) {
      if (c == '"') {
        quoted = !quoted;
        continue;
      }
      if (c == ',' && !quoted) {
        out.push_back(trim(cur));
        cur.clear();
        continue;
      }
      cur.push_back(c);
    }
    out.push_back(trim(cur));
    return out;
  }

  static std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }
};

// ---------------------------------------------------------------------------
// Correlation matrix

struct CorrCell {
  bool defined = false;
  double rho = 0.0;
};

struct CorrelationReport {
  std::vector<std::string> probes;   // rows
  std::vector<std::string> targets;  // columns; last is Real_mean
  std::vector<std::vector<CorrCell>> cells;

  std::string to_csv() const {
    std::ostringstream out;
    out << "probe";
    for (const auto& t : targets) out << "," << t;
    out << "\n";
    for (std::size_t r = 0; r < probes.size(); ++r) {
      out << probes[r];
      for (const auto& cell : cells[r]) {
        if (cell.defined) {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.6f", cell.rho);
          out << "," << buf;
        } else {
          out << ",NA";
        }
      }
      out << "\n";
    }
    return out.str();
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    for (std::size_t r = 0; r < probes.size(); ++r) {
      nlohmann::ordered_json row;
      for (std::size_t c = 0; c < targets.size(); ++c) {
        if (cells[r][c].defined) {
          row[targets[c]] = cells[r][c].rho;
        } else {
          row[targets[c]] = nullptr;
        }
      }
      j[probes[r]] = std::move(row);
    }
    return j;
  }
};

// rho per (probe, target) pair plus a Real_mean target column: the per-model
// mean over the target benchmarks.
inline CorrelationReport correlation_matrix(const ScoreMatrix& m, const std::vector<std::string>& probes,
                                            const std::vector<std::string>& targets) {
  CorrelationReport report;
  report.probes = probes;
  report.targets = targets;
  report.targets.push_back("Real_mean");

  std::vector<double> real_mean(m.models.size(), 0.0);
  for (std::size_t r = 0; r < m.models.size(); ++r) {
    double sum = 0.0;
    for (const auto& t : targets) sum += m.cells[r][m.col_index(t)];
    real_mean[r] = sum / static_cast<double>(targets.size());
  }

  for (const auto& p : probes) {
    std::vector<double> px = m.column(p);
    std::vector<CorrCell> row;
    for (const auto& t : targets) {
      CorrCell cell;
      try {
        cell.rho = spearman(px, m.column(t));
        cell.defined = true;
      } catch (const DegenerateInput&) {
        cell.defined = false;
      }
      row.push_back(cell);
    }
    CorrCell mean_cell;
    try {
      mean_cell.rho = spearman(px, real_mean);
      mean_cell.defined = true;
    } catch (const DegenerateInput&) {
      mean_cell.defined = false;
    }
    row.push_back(mean_cell);
    report.cells.push_back(std::move(row));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Ablation deltas

// variant - base per cell; drops render negative.
inline std::vector<std::vector<double>> ablation_delta(const std::vector<double>& base,
                                                       const std::vector<std::vector<double>>& variants) {
  std::vector<std::vector<double>> out;
  for (const auto& v : variants) {
    if (v.size() != base.size()) throw ColumnMismatch("ablation variant has misaligned columns");
    std::vector<double> row(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) row[i] = v[i] - base[i];
    out.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Length buckets

struct LengthRecord {
  std::size_t tokens = 0;
  int correct = 0;
};

struct BucketStat {
  std::size_t lo = 0, hi = 0;  // tokens; bucket is (lo, hi]
  std::size_t total = 0;
  std::size_t correct = 0;

  bool empty() const { return total == 0; }
  std::string label() const { return "(" + std::to_string(lo / 1024) + "k," + std::to_string(hi / 1024) + "k]"; }
  std::string accuracy() const { return empty() ? std::string() : format_percent(correct, total); }
};

struct LengthBucketReport {
  std::vector<BucketStat> buckets;
  std::size_t out_of_range = 0;
};

// Fixed buckets (8k,16k] .. (64k,128k], k = 1024 tokens; upper bounds closed.
inline LengthBucketReport length_bucket_report(const std::vector<LengthRecord>& records) {
  LengthBucketReport report;
  constexpr std::size_t k = 1024;
  const std::size_t bounds[] = {8 * k, 16 * k, 32 * k, 64 * k, 128 * k};
  for (int b = 0; b < 4; ++b) report.buckets.push_back(BucketStat{bounds[b], bounds[b + 1], 0, 0});
  for (const auto& r : records) {
    bool placed = false;
    for (auto& bucket : report.buckets) {
      if (r.tokens > bucket.lo && r.tokens <= bucket.hi) {
        ++bucket.total;
        if (r.correct) ++bucket.correct;
        placed = true;
        break;
      }
    }
    if (!placed) ++report.out_of_range;
  }
  return report;
}

}  // namespace abr
