#include "protonas/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "protonas/error.hpp"

namespace protonas {

namespace {

// Number of inversions of v, sorting it in place.
long long merge_count(std::vector<double>& v, std::vector<double>& scratch, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  long long swaps = merge_count(v, scratch, lo, mid) + merge_count(v, scratch, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<long long>(mid - i);
      scratch[k++] = v[j++];
    } else {
      scratch[k++] = v[i++];
    }
  }
  while (i < mid) scratch[k++] = v[i++];
  while (j < hi) scratch[k++] = v[j++];
  std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo), scratch.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

long long tied_pairs(const std::vector<double>& sorted) {
  long long total = 0;
  std::size_t run = 1;
  for (std::size_t i = 1; i <= sorted.size(); ++i) {
    if (i < sorted.size() && sorted[i] == sorted[i - 1]) {
      ++run;
    } else {
      total += static_cast<long long>(run * (run - 1) / 2);
      run = 1;
    }
  }
  return total;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

template <typename T>
std::string int_text(T v) {
  return std::to_string(v);
}

}  // namespace

double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionMismatch("kendall_tau_b: series lengths differ");
  const std::size_t n = x.size();
  if (n < 2) throw DimensionMismatch("kendall_tau_b: need at least two observations");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] != x[b] ? x[a] < x[b] : y[a] < y[b];
  });

  const long long n0 = static_cast<long long>(n * (n - 1) / 2);
  long long n1 = 0, n3 = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && x[order[j]] == x[order[i]]) ++j;
    const auto t = static_cast<long long>(j - i);
    n1 += t * (t - 1) / 2;
    for (std::size_t a = i; a < j;) {
      std::size_t b = a;
      while (b < j && y[order[b]] == y[order[a]]) ++b;
      const auto u = static_cast<long long>(b - a);
      n3 += u * (u - 1) / 2;
      a = b;
    }
    i = j;
  }

  std::vector<double> ys(n), scratch(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
  const long long discordant = merge_count(ys, scratch, 0, n);
  const long long n2 = tied_pairs(ys);

  if (n1 == n0 || n2 == n0) throw DegenerateSeries("kendall_tau_b: a series is constant");
  const double s = static_cast<double>(n0 - n1 - n2 + n3 - 2 * discordant);
  const double tau = s / std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
  return std::clamp(tau, -1.0, 1.0);
}

std::optional<double> try_kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  try {
    return kendall_tau_b(x, y);
  } catch (const DegenerateSeries&) {
    return std::nullopt;
  }
}

TauMatrix tau_matrix(std::span<const RankSeries> series) {
  TauMatrix m;
  const std::size_t d = series.size();
  for (const auto& s : series) m.labels.push_back(s.label);
  m.tau.assign(d, std::vector<std::optional<double>>(d));
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      // Fewer than two observations leave the entry undefined.
      const bool enough = series[i].values.size() >= 2 && series[i].values.size() == series[j].values.size();
      const auto t = enough ? try_kendall_tau_b(series[i].values, series[j].values) : std::nullopt;
      m.tau[i][j] = t;
      m.tau[j][i] = t;
    }
  }
  return m;
}

std::vector<std::optional<double>> accuracy_correlation(std::span<const RankSeries> series,
                                                        const RankSeries& accuracy) {
  std::vector<std::optional<double>> out;
  out.reserve(series.size());
  for (const auto& s : series) out.push_back(try_kendall_tau_b(s.values, accuracy.values));
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw Error("not a number: '" + std::string(s) + "'");
  }
  return v;
}

std::size_t CsvTable::column(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw std::out_of_range("missing column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - header.begin());
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out << ',';
      out << csv_field(fields[i]);
    }
    out << '\n';
  };
  line(table.header);
  for (const auto& r : table.rows) line(r);
  if (!out) throw IoError(path.string(), "write failed");
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  CsvTable t;
  std::string line;
  bool first = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = parse_csv_line(line);
    if (first) {
      t.header = std::move(fields);
      first = false;
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw IoError(path.string(), "line " + std::to_string(lineno) + ": expected " +
                                       std::to_string(t.header.size()) + " fields");
    }
    t.rows.push_back(std::move(fields));
  }
  if (first) throw IoError(path.string(), "missing header line");
  return t;
}

CsvTable pareto_table(const ParetoArchive& archive) {
  CsvTable t;
  t.header = {"trial", "seed", "template", "arch_index"};
  for (int g = 0; g < kGroupCount; ++g) t.header.push_back("depth_" + std::to_string(g));
  for (int g = 0; g < kGroupCount; ++g) t.header.push_back("kernel_stride_" + std::to_string(g));
  t.header.push_back("width");
  for (int g = 0; g < kGroupCount; ++g) t.header.push_back("sparsity_" + std::to_string(g));
  for (auto name : kObjectiveNames) t.header.push_back("obj_" + std::string(name));
  for (const char* c : {"flops", "rom_bytes", "ram_bytes"}) t.header.emplace_back(c);

  for (auto idx : archive.pareto) {
    const auto& r = archive.records[idx];
    std::vector<std::string> row{int_text(r.trial_index), int_text(r.seed), r.template_id,
                                 int_text(r.genes.architecture)};
    for (int d : r.genes.group_depth) row.push_back(int_text(d));
    for (int ks : r.genes.kernel_stride) row.push_back(int_text(ks));
    row.push_back(format_double(r.genes.width_multiplier));
    for (double s : r.genes.pruning_sparsity) row.push_back(format_double(s));
    for (double o : r.objectives) row.push_back(format_double(o));
    row.push_back(int_text(r.costs.flops));
    row.push_back(int_text(r.costs.rom_bytes));
    row.push_back(int_text(r.costs.ram_bytes));
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable selection_table(const CsvTable& pareto, std::span<const std::size_t> indices) {
  CsvTable t;
  t.header.push_back("pareto_row");
  t.header.insert(t.header.end(), pareto.header.begin(), pareto.header.end());
  for (auto i : indices) {
    std::vector<std::string> row{int_text(i)};
    const auto& src = pareto.rows.at(i);
    row.insert(row.end(), src.begin(), src.end());
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable tau_table(const TauMatrix& tau) {
  CsvTable t;
  t.header.push_back("series");
  t.header.insert(t.header.end(), tau.labels.begin(), tau.labels.end());
  for (std::size_t i = 0; i < tau.labels.size(); ++i) {
    std::vector<std::string> row{tau.labels[i]};
    for (const auto& v : tau.tau[i]) row.push_back(v ? format_double(*v) : "NA");
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::vector<std::vector<double>> objective_rows(const CsvTable& table) {
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (table.header[c].starts_with("obj_")) cols.push_back(c);
  }
  if (cols.empty()) {
    cols.resize(table.header.size());
    std::iota(cols.begin(), cols.end(), std::size_t{0});
  }
  std::vector<std::vector<double>> out;
  out.reserve(table.rows.size());
  for (const auto& r : table.rows) {
    std::vector<double> v;
    v.reserve(cols.size());
    for (auto c : cols) v.push_back(parse_double(r[c]));
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<RankSeries> proxy_series(std::span<const CandidateRecord> records) {
  std::vector<RankSeries> s{{"flops", {}}, {"meco", {}}, {"zico", {}}, {"naswot", {}}, {"snip", {}}};
  for (const auto& r : records) {
    if (!r.archivable()) continue;
    s[0].values.push_back(static_cast<double>(r.costs.flops));
    s[1].values.push_back(r.proxies->meco);
    s[2].values.push_back(r.proxies->zico);
    s[3].values.push_back(r.proxies->naswot);
    s[4].values.push_back(r.proxies->snip);
  }
  return s;
}

RunSummary summarize(const ParetoArchive& archive) {
  RunSummary s;
  s.trials_logged = archive.records.size();
  for (const auto& r : archive.records) {
    if (r.evaluated) {
      ++s.evaluated;
    } else {
      ++s.failed;
    }
    if (r.archivable()) ++s.feasible;
  }
  s.pareto_size = archive.pareto.size();
  if (archive.pareto.empty()) s.notes.emplace_back("no feasible candidates");
  return s;
}

void write_summary(const std::filesystem::path& path, const RunSummary& summary) {
  nlohmann::ordered_json j;
  j["seed"] = summary.seed;
  j["config_hash"] = summary.config_hash;
  j["counts"] = {{"trials_logged", summary.trials_logged}, {"evaluated", summary.evaluated},
                 {"failed", summary.failed},               {"feasible", summary.feasible},
                 {"pareto", summary.pareto_size},          {"selected", summary.selection_size}};
  auto protocol = nlohmann::ordered_json::object();
  for (const auto& [key, value] : summary.protocol) {
    if (value == std::floor(value) && std::abs(value) < 9e15) {
      protocol[key] = static_cast<long long>(value);
    } else {
      protocol[key] = value;
    }
  }
  j["protocol"] = protocol;
  j["notes"] = summary.notes;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError(path.string(), "write failed");
}

void export_report(const ReportInputs& inputs, const std::filesystem::path& dir) {
  if (inputs.archive == nullptr) throw std::invalid_argument("export_report: no archive");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), "cannot create directory: " + ec.message());
  const auto pareto = pareto_table(*inputs.archive);
  write_csv(dir / "pareto.csv", pareto);
  write_csv(dir / "selection.csv", selection_table(pareto, inputs.selection));
  write_csv(dir / "tau.csv", tau_table(inputs.tau));
  write_summary(dir / "summary.json", inputs.summary);
}

}  // namespace protonas
