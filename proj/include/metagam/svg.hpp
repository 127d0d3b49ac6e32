#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace metagam {

/// Minimal deterministic SVG line-plot writer: fixed-precision coordinates,
/// no external plotting dependency, diffable output.
class SvgPlot {
public:
  SvgPlot(int width, int height, std::string title, std::string xlabel, std::string ylabel);

  /// Fix the data domain; expands slightly if degenerate.
  void set_domain(double xmin, double xmax, double ymin, double ymax);

  /// Derive the domain from data (call before drawing).
  void include(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

  void line(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const std::string& color,
            double width = 1.5, bool dashed = false);
  void band(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
            const std::string& color, double opacity = 0.25);
  /// Stacked unit-area chart; rows of fractions are cohorts, columns grid points.
  void stacked_area(const Eigen::VectorXd& x, const Eigen::MatrixXd& fractions,
                    const std::vector<std::string>& colors);
  void hline(double y, const std::string& color, bool dashed = true);
  void legend(const std::vector<std::pair<std::string, std::string>>& entries);  // label, color

  std::string render() const;
  void save(const std::string& path) const;

  static const std::vector<std::string>& palette();

private:
  struct PendingLine {
    Eigen::VectorXd x, y;
    std::string color;
    double width;
    bool dashed;
  };
  struct PendingBand {
    Eigen::VectorXd x, lo, hi;
    std::string color;
    double opacity;
  };

  double px(double x) const;
  double py(double y) const;
  void finalize_domain();

  int width_, height_;
  int margin_left_ = 72, margin_right_ = 24, margin_top_ = 40, margin_bottom_ = 52;
  std::string title_, xlabel_, ylabel_;
  double xmin_ = 0, xmax_ = 1, ymin_ = 0, ymax_ = 1;
  bool domain_set_ = false;
  bool has_data_ = false;
  std::string body_;
  std::vector<std::pair<std::string, std::string>> legend_;
  std::vector<PendingLine> line_pending_;
  std::vector<PendingBand> band_pending_;
};

void write_text_file(const std::string& path, const std::string& content);

}  // namespace metagam
