#include "metagam/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "metagam/errors.hpp"

namespace metagam {

namespace {

std::string fmt(double v, int prec = 2) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string fmt_tick(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

// nice round tick step covering roughly `target` intervals
double tick_step(double lo, double hi, int target) {
  const double span = hi - lo;
  double raw = span / std::max(1, target);
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double mult : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    if (raw <= mult * mag) return mult * mag;
  }
  return 10.0 * mag;
}

}  // namespace

SvgPlot::SvgPlot(int width, int height, std::string title, std::string xlabel, std::string ylabel)
    : width_(width), height_(height), title_(std::move(title)), xlabel_(std::move(xlabel)),
      ylabel_(std::move(ylabel)) {}

const std::vector<std::string>& SvgPlot::palette() {
  static const std::vector<std::string> colors = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a",
                                                  "#66a61e", "#e6ab02", "#a6761d", "#666666"};
  return colors;
}

void SvgPlot::set_domain(double xmin, double xmax, double ymin, double ymax) {
  xmin_ = xmin;
  xmax_ = xmax;
  ymin_ = ymin;
  ymax_ = ymax;
  domain_set_ = true;
  finalize_domain();
}

void SvgPlot::include(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) continue;
    if (!has_data_) {
      xmin_ = xmax_ = x[i];
      ymin_ = ymax_ = y[i];
      has_data_ = true;
    } else {
      xmin_ = std::min(xmin_, x[i]);
      xmax_ = std::max(xmax_, x[i]);
      ymin_ = std::min(ymin_, y[i]);
      ymax_ = std::max(ymax_, y[i]);
    }
  }
}

void SvgPlot::finalize_domain() {
  if (!(xmax_ > xmin_)) xmax_ = xmin_ + 1.0;
  if (!(ymax_ > ymin_)) {
    ymin_ -= 0.5;
    ymax_ += 0.5;
  }
}

double SvgPlot::px(double x) const {
  const double w = width_ - margin_left_ - margin_right_;
  return margin_left_ + (x - xmin_) / (xmax_ - xmin_) * w;
}

double SvgPlot::py(double y) const {
  const double h = height_ - margin_top_ - margin_bottom_;
  return margin_top_ + (ymax_ - y) / (ymax_ - ymin_) * h;
}

void SvgPlot::line(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const std::string& color,
                   double width, bool dashed) {
  if (!domain_set_) {
    include(x, y);
    return line_pending_.push_back({x, y, color, width, dashed}), void();
  }
  std::string pts;
  auto flush = [&] {
    if (pts.empty()) return;
    body_ += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" + fmt(width, 1) +
             "\"";
    if (dashed) body_ += " stroke-dasharray=\"6,4\"";
    body_ += " points=\"" + pts + "\"/>\n";
    pts.clear();
  };
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
      flush();  // break the polyline at invalid points
      continue;
    }
    pts += fmt(px(x[i])) + "," + fmt(py(y[i])) + " ";
  }
  flush();
}

void SvgPlot::band(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                   const std::string& color, double opacity) {
  if (!domain_set_) {
    include(x, lo);
    include(x, hi);
    band_pending_.push_back({x, lo, hi, color, opacity});
    return;
  }
  std::string pts;
  Eigen::Index start = -1;
  auto flush = [&](Eigen::Index end) {
    if (start < 0) return;
    for (Eigen::Index i = end - 1; i >= start; --i) {
      pts += fmt(px(x[i])) + "," + fmt(py(hi[i])) + " ";
    }
    body_ += "<polygon fill=\"" + color + "\" fill-opacity=\"" + fmt(opacity) +
             "\" stroke=\"none\" points=\"" + pts + "\"/>\n";
    pts.clear();
    start = -1;
  };
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const bool ok = std::isfinite(x[i]) && std::isfinite(lo[i]) && std::isfinite(hi[i]);
    if (!ok) {
      flush(i);
      continue;
    }
    if (start < 0) start = i;
    pts += fmt(px(x[i])) + "," + fmt(py(lo[i])) + " ";
  }
  flush(x.size());
}

void SvgPlot::stacked_area(const Eigen::VectorXd& x, const Eigen::MatrixXd& fractions,
                           const std::vector<std::string>& colors) {
  if (!domain_set_) set_domain(x.minCoeff(), x.maxCoeff(), 0.0, 1.0);
  Eigen::VectorXd lower = Eigen::VectorXd::Zero(x.size());
  for (Eigen::Index m = 0; m < fractions.rows(); ++m) {
    Eigen::VectorXd upper = lower + fractions.row(m).transpose();
    band(x, lower, upper, colors[static_cast<std::size_t>(m) % colors.size()], 0.85);
    lower = upper;
  }
}

void SvgPlot::hline(double y, const std::string& color, bool dashed) {
  if (!domain_set_) return;
  body_ += "<line x1=\"" + fmt(px(xmin_)) + "\" y1=\"" + fmt(py(y)) + "\" x2=\"" +
           fmt(px(xmax_)) + "\" y2=\"" + fmt(py(y)) + "\" stroke=\"" + color +
           "\" stroke-width=\"1\"";
  if (dashed) body_ += " stroke-dasharray=\"4,4\"";
  body_ += "/>\n";
}

void SvgPlot::legend(const std::vector<std::pair<std::string, std::string>>& entries) {
  legend_ = entries;
}

std::string SvgPlot::render() const {
  SvgPlot self = *this;  // replay pending geometry once the domain is known
  if (!self.domain_set_) {
    self.domain_set_ = true;
    self.finalize_domain();
    auto lines = std::move(self.line_pending_);
    auto bands = std::move(self.band_pending_);
    self.line_pending_.clear();
    self.band_pending_.clear();
    for (const auto& b : bands) self.band(b.x, b.lo, b.hi, b.color, b.opacity);
    for (const auto& l : lines) self.line(l.x, l.y, l.color, l.width, l.dashed);
  }

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width_) +
         "\" height=\"" + std::to_string(height_) + "\" viewBox=\"0 0 " +
         std::to_string(width_) + " " + std::to_string(height_) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  const double x0 = self.margin_left_, x1 = width_ - self.margin_right_;
  const double y0 = self.margin_top_, y1 = height_ - self.margin_bottom_;
  // axes box and ticks
  out += "<rect x=\"" + fmt(x0) + "\" y=\"" + fmt(y0) + "\" width=\"" + fmt(x1 - x0) +
         "\" height=\"" + fmt(y1 - y0) + "\" fill=\"none\" stroke=\"#333333\"/>\n";
  const double xs = tick_step(self.xmin_, self.xmax_, 6);
  for (double t = std::ceil(self.xmin_ / xs) * xs; t <= self.xmax_ + 1e-12 * xs; t += xs) {
    out += "<line x1=\"" + fmt(self.px(t)) + "\" y1=\"" + fmt(y1) + "\" x2=\"" + fmt(self.px(t)) +
           "\" y2=\"" + fmt(y1 + 5) + "\" stroke=\"#333333\"/>\n";
    out += "<text x=\"" + fmt(self.px(t)) + "\" y=\"" + fmt(y1 + 18) +
           "\" font-size=\"11\" text-anchor=\"middle\" font-family=\"sans-serif\">" +
           fmt_tick(t) + "</text>\n";
  }
  const double ys = tick_step(self.ymin_, self.ymax_, 5);
  for (double t = std::ceil(self.ymin_ / ys) * ys; t <= self.ymax_ + 1e-12 * ys; t += ys) {
    out += "<line x1=\"" + fmt(x0 - 5) + "\" y1=\"" + fmt(self.py(t)) + "\" x2=\"" + fmt(x0) +
           "\" y2=\"" + fmt(self.py(t)) + "\" stroke=\"#333333\"/>\n";
    out += "<text x=\"" + fmt(x0 - 8) + "\" y=\"" + fmt(self.py(t) + 4) +
           "\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">" + fmt_tick(t) +
           "</text>\n";
  }
  out += "<text x=\"" + fmt((x0 + x1) / 2) + "\" y=\"22\" font-size=\"14\" text-anchor=\"middle\""
         " font-family=\"sans-serif\" font-weight=\"bold\">" + escape(title_) + "</text>\n";
  out += "<text x=\"" + fmt((x0 + x1) / 2) + "\" y=\"" + fmt(height_ - 14) +
         "\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\">" +
         escape(xlabel_) + "</text>\n";
  out += "<text x=\"16\" y=\"" + fmt((y0 + y1) / 2) + "\" font-size=\"12\" text-anchor=\"middle\""
         " font-family=\"sans-serif\" transform=\"rotate(-90 16 " + fmt((y0 + y1) / 2) + ")\">" +
         escape(ylabel_) + "</text>\n";

  out += "<clipPath id=\"plotarea\"><rect x=\"" + fmt(x0) + "\" y=\"" + fmt(y0) + "\" width=\"" +
         fmt(x1 - x0) + "\" height=\"" + fmt(y1 - y0) + "\"/></clipPath>\n";
  out += "<g clip-path=\"url(#plotarea)\">\n" + self.body_ + "</g>\n";

  double ly = y0 + 14;
  for (const auto& [label, color] : legend_) {
    out += "<line x1=\"" + fmt(x0 + 10) + "\" y1=\"" + fmt(ly - 4) + "\" x2=\"" + fmt(x0 + 34) +
           "\" y2=\"" + fmt(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"3\"/>\n";
    out += "<text x=\"" + fmt(x0 + 40) + "\" y=\"" + fmt(ly) +
           "\" font-size=\"11\" font-family=\"sans-serif\">" + escape(label) + "</text>\n";
    ly += 16;
  }
  out += "</svg>\n";
  return out;
}

void SvgPlot::save(const std::string& path) const { write_text_file(path, render()); }

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << content;
  if (!out) throw Error("failed writing '" + path + "'");
}

}  // namespace metagam
