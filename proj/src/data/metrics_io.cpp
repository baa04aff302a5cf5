#include "zseg/metrics_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "zseg/errors.hpp"

namespace zseg {

namespace {

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  std::string s = buf;
  if (s == "-0.0000") s = "0.0000";
  return s;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty() || !std::isfinite(v)) {
    throw DataError(where + ": '" + s + "' is not a number");
  }
  return v;
}

}  // namespace

std::string format_metrics(const std::vector<MetricsRow>& rows) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const auto& r : rows) {
    out += r.arch + "," + (r.pretrained ? "true" : "false") + "," + r.train_regime + "," +
           r.test_dataset + "," + r.zone + "," + r.fold + "," + fixed4(r.dsc_mean) + "," +
           fixed4(r.dsc_std) + "\n";
  }
  return out;
}

void write_metrics(const std::vector<MetricsRow>& rows, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << format_metrics(rows);
  if (!out) throw DataError("cannot write " + path.string());
}

std::vector<MetricsRow> parse_metrics(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw DataError(source + ": missing or unexpected metrics header");
  }
  std::vector<MetricsRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    const auto f = split(line);
    if (f.size() != 8) throw DataError(where + ": expected 8 fields, got " + std::to_string(f.size()));
    MetricsRow r;
    r.arch = f[0];
    if (f[1] != "true" && f[1] != "false") throw DataError(where + ": pretrained must be true/false");
    r.pretrained = f[1] == "true";
    r.train_regime = f[2];
    r.test_dataset = f[3];
    r.zone = f[4];
    r.fold = f[5];
    r.dsc_mean = parse_number(f[6], where);
    r.dsc_std = parse_number(f[7], where);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<MetricsRow> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_metrics(buf.str(), path.string());
}

}  // namespace zseg
