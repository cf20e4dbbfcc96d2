#include "wbam/metrics.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "wbam/io.hpp"

namespace wbam {

void path_metrics(const std::vector<PathSample>& path, MetricsReport& r) {
  const std::size_t n = path.size();
  if (n < 4) throw DomainError("metrics: at least 4 samples required");
  double len = 0.0, gap = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0) len += (path[k].eef - path[k - 1].eef).norm();
    gap = std::min(gap, path[k].min_gap);
  }
  double acc = 0.0;
  for (std::size_t k = 0; k + 3 < n; ++k) {
    const double ds = (path[k + 3].s - path[k].s) / 3.0;
    if (!(ds > 0.0)) throw DomainError("metrics: samples must increase in s");
    const Vec2 d3 = path[k + 3].eef - 3.0 * path[k + 2].eef + 3.0 * path[k + 1].eef - path[k].eef;
    acc += d3.squaredNorm() / std::pow(ds, 6);
  }
  r.arc_length = len;
  r.min_distance = gap;
  r.jerkiness = len > 0.0 ? acc / static_cast<double>(n - 3) / len : 0.0;
}

namespace {

std::string num(double v) {
  if (std::isfinite(v)) return fmt(v);
  return "null";
}

double value(const nlohmann::json& j, const char* key, double missing) {
  if (!j.contains(key)) throw DomainError(std::string("metrics: missing field ") + key);
  const auto& v = j.at(key);
  if (v.is_null()) return missing;
  if (!v.is_number()) throw DomainError(std::string("metrics: field ") + key + " must be a number");
  return v.get<double>();
}

}  // namespace

std::string metrics_json(const MetricsReport& r) {
  std::ostringstream os;
  os << "{\n"
     << "  \"plan_time\": " << num(r.plan_time) << ",\n"
     << "  \"min_distance\": " << num(r.min_distance) << ",\n"
     << "  \"arc_length\": " << num(r.arc_length) << ",\n"
     << "  \"jerkiness\": " << num(r.jerkiness) << ",\n"
     << "  \"simulated\": " << (r.simulated ? "true" : "false") << ",\n"
     << "  \"h_co_min\": " << num(r.h_co_min) << ",\n"
     << "  \"thrust_min\": " << num(r.thrust_min) << ",\n"
     << "  \"thrust_max\": " << num(r.thrust_max) << ",\n"
     << "  \"infeasible_ticks\": " << r.infeasible_ticks << ",\n"
     << "  \"total_ticks\": " << r.total_ticks << "\n"
     << "}\n";
  return os.str();
}

MetricsReport parse_metrics(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DomainError(std::string("metrics: ") + e.what());
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  MetricsReport r;
  r.plan_time = value(j, "plan_time", 0.0);
  r.min_distance = value(j, "min_distance", inf);
  r.arc_length = value(j, "arc_length", 0.0);
  r.jerkiness = value(j, "jerkiness", 0.0);
  r.simulated = j.value("simulated", false);
  r.h_co_min = value(j, "h_co_min", inf);
  r.thrust_min = value(j, "thrust_min", inf);
  r.thrust_max = value(j, "thrust_max", -inf);
  r.infeasible_ticks = static_cast<int>(value(j, "infeasible_ticks", 0));
  r.total_ticks = static_cast<int>(value(j, "total_ticks", 0));
  return r;
}

void write_metrics(const std::string& path, const MetricsReport& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("metrics: cannot write '" + path + "'");
  out << metrics_json(r);
  if (!out) throw RuntimeFailure("metrics: write failed for '" + path + "'");
}

MetricsReport load_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("metrics: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_metrics(ss.str());
}

}  // namespace wbam
