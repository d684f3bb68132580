// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#include "m3i/harness/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "m3i/error.hpp"

namespace m3i::harness {

const std::vector<std::string>& metrics_fields() {
  static const std::vector<std::string> fields = {
      "step",   "total",     "ssp_i",    "ssp_j",       "sp_i",
      "sp_j",   "lambda",    "g_ssp_ema", "g_sp_ema",   "feature_std",
      "effective_rank", "lr"};
  return fields;
}

namespace {
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace

std::string format_metrics_line(const MetricsRow& r) {
  std::string s = "{\"step\":" + std::to_string(r.step);
  s += ",\"total\":" + fmt(r.total);
  s += ",\"ssp_i\":" + fmt(r.ssp_i);
  s += ",\"ssp_j\":" + fmt(r.ssp_j);
  s += ",\"sp_i\":" + fmt(r.sp_i);
  s += ",\"sp_j\":" + fmt(r.sp_j);
  s += ",\"lambda\":" + fmt(r.lambda);
  s += ",\"g_ssp_ema\":" + fmt(r.g_ssp_ema);
  s += ",\"g_sp_ema\":" + fmt(r.g_sp_ema);
  s += ",\"feature_std\":" + fmt(r.feature_std);
  s += ",\"effective_rank\":" + fmt(r.effective_rank);
  s += ",\"lr\":" + fmt(r.lr);
  s += "}";
  return s;
}

std::vector<MetricsRow> parse_metrics_log(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw MalformedLog("cannot open " + path);
  std::vector<MetricsRow> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw MalformedLog(path + ":" + std::to_string(lineno) + ": not a JSON object");
    const auto& fields = metrics_fields();
    for (const auto& [key, val] : j.items()) {
      bool known = false;
      for (const auto& f : fields) known = known || f == key;
      if (!known)
        throw MalformedLog(path + ":" + std::to_string(lineno) + ": unknown field '" + key + "'");
    }
    for (const auto& f : fields)
      if (!j.contains(f))
        throw MalformedLog(path + ":" + std::to_string(lineno) + ": missing field '" + f + "'");
    MetricsRow r;
    r.step = j["step"].get<int64_t>();
    r.total = j["total"].get<double>();
    r.ssp_i = j["ssp_i"].get<double>();
    r.ssp_j = j["ssp_j"].get<double>();
    r.sp_i = j["sp_i"].get<double>();
    r.sp_j = j["sp_j"].get<double>();
    r.lambda = j["lambda"].get<double>();
    r.g_ssp_ema = j["g_ssp_ema"].get<double>();
    r.g_sp_ema = j["g_sp_ema"].get<double>();
    r.feature_std = j["feature_std"].get<double>();
    r.effective_rank = j["effective_rank"].get<double>();
    r.lr = j["lr"].get<double>();
    rows.push_back(r);
  }
  return rows;
}

double feature_std(const Eigen::MatrixXd& f) {
  if (f.rows() < 1) return 0.0;
  const Eigen::RowVectorXd mean = f.colwise().mean();
  double acc = 0.0;
  for (long c = 0; c < f.cols(); ++c) {
    const double var = (f.col(c).array() - mean(c)).square().mean();
    acc += std::sqrt(var);
  }
  return acc / static_cast<double>(f.cols());
}

double effective_rank(const Eigen::MatrixXd& f) {
  if (f.rows() < 1 || f.cols() < 1) return 1.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(f);
  const Eigen::VectorXd s = svd.singularValues();
  const double total = s.sum();
  if (total <= 1e-12) return 1.0;
  double h = 0.0;
  for (long i = 0; i < s.size(); ++i) {
    const double q = s(i) / total;
    if (q > 0.0) h -= q * std::log(q);
  }
  return std::exp(h);
}

}  // namespace m3i::harness
