// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#include "m3i/harness/plots.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "m3i/error.hpp"
#include "m3i/harness/metrics.hpp"

namespace m3i::harness {

namespace fs = std::filesystem;

namespace {

constexpr int kW = 640, kH = 400, kPad = 48;
const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

struct Curve {
  std::string label;
  std::vector<double> y;
};

void write_svg(const std::string& path, const std::string& title,
               const std::vector<double>& x, const std::vector<Curve>& curves) {
  double ymin = 1e300, ymax = -1e300;
  for (const auto& c : curves)
    for (double v : c.y) {
      if (!std::isfinite(v)) continue;
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  if (ymin > ymax) {
    ymin = 0;
    ymax = 1;
  }
  if (ymax - ymin < 1e-12) {
    ymax += 0.5;
    ymin -= 0.5;
  }
  const double xmin = x.front(), xmax = std::max(x.back(), x.front() + 1e-9);

  auto px = [&](double v) { return kPad + (v - xmin) / (xmax - xmin) * (kW - 2 * kPad); };
  auto py = [&](double v) { return kH - kPad - (v - ymin) / (ymax - ymin) * (kH - 2 * kPad); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title
     << "</text>\n";
  os << "<line x1=\"" << kPad << "\" y1=\"" << kH - kPad << "\" x2=\"" << kW - kPad << "\" y2=\""
     << kH - kPad << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kPad << "\" y1=\"" << kPad << "\" x2=\"" << kPad << "\" y2=\""
     << kH - kPad << "\" stroke=\"black\"/>\n";
  std::ostringstream lo, hi;
  lo.precision(4);
  hi.precision(4);
  lo << ymin;
  hi << ymax;
  os << "<text x=\"4\" y=\"" << kH - kPad << "\" font-size=\"10\">" << lo.str() << "</text>\n";
  os << "<text x=\"4\" y=\"" << kPad << "\" font-size=\"10\">" << hi.str() << "</text>\n";

  for (size_t k = 0; k < curves.size(); ++k) {
    const auto& c = curves[k];
    os << "<polyline class=\"curve\" fill=\"none\" stroke=\"" << kColors[k % 6]
       << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < x.size(); ++i) {
      const double v = std::isfinite(c.y[i]) ? c.y[i] : ymin;
      os << px(x[i]) << "," << py(v) << " ";
    }
    os << "\"/>\n";
    os << "<text x=\"" << kW - kPad + 4 << "\" y=\"" << kPad + 14 * static_cast<int>(k)
       << "\" font-size=\"10\" fill=\"" << kColors[k % 6] << "\">" << c.label << "</text>\n";
  }
  os << "</svg>\n";

  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DiskWriteError("cannot write " + path);
  f << os.str();
}

}  // namespace

std::vector<std::string> emit_plots(const std::string& log_path, const std::string& out_dir) {
  std::vector<MetricsRow> rows = parse_metrics_log(log_path);
  std::vector<std::string> written;
  if (rows.empty()) return written;

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DiskWriteError("cannot create " + out_dir);

  std::vector<double> x;
  x.reserve(rows.size());
  for (const auto& r : rows) x.push_back(static_cast<double>(r.step));

  bool has_terms = false;
  for (const auto& r : rows)
    has_terms = has_terms || r.ssp_i != 0.0 || r.ssp_j != 0.0 || r.sp_i != 0.0 || r.sp_j != 0.0;

  std::vector<Curve> loss_curves;
  if (has_terms) {
    Curve a{"ssp_i", {}}, b{"ssp_j", {}}, c{"sp_i", {}}, d{"sp_j", {}};
    for (const auto& r : rows) {
      a.y.push_back(r.ssp_i);
      b.y.push_back(r.ssp_j);
      c.y.push_back(r.sp_i);
      d.y.push_back(r.sp_j);
    }
    loss_curves = {a, b, c, d};
  } else {
    Curve t{"total", {}};
    for (const auto& r : rows) t.y.push_back(r.total);
    loss_curves = {t};
  }
  const std::string losses = (fs::path(out_dir) / "losses.svg").string();
  write_svg(losses, "loss terms", x, loss_curves);
  written.push_back(losses);

  {
    Curve l{"lambda", {}};
    for (const auto& r : rows) l.y.push_back(r.lambda);
    const std::string p = (fs::path(out_dir) / "lambda.svg").string();
    write_svg(p, "loss weight", x, {l});
    written.push_back(p);
  }
  {
    Curve s{"feature_std", {}}, e{"effective_rank", {}};
    for (const auto& r : rows) {
      s.y.push_back(r.feature_std);
      e.y.push_back(r.effective_rank);
    }
    const std::string p = (fs::path(out_dir) / "collapse.svg").string();
    write_svg(p, "collapse diagnostics", x, {s, e});
    written.push_back(p);
  }
  return written;
}

}  // namespace m3i::harness
