#include "mixopt/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "mixopt/scaling_model.hpp"

namespace mixopt {
namespace svg {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22"};

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string token_label(TokenCount n) {
  if (n % 1000000 == 0 && n != 0) return std::to_string(n / 1000000) + "M";
  if (n % 1000 == 0 && n != 0) return std::to_string(n / 1000) + "k";
  return std::to_string(n);
}

/// Blue -> pale yellow -> red ramp over t in [0,1].
std::string heat_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  auto lerp = [](int a, int b, double u) { return static_cast<int>(a + (b - a) * u + 0.5); };
  int r, g, b;
  if (t < 0.5) {
    const double u = t * 2.0;
    r = lerp(0x2c, 0xff, u);
    g = lerp(0x7b, 0xff, u);
    b = lerp(0xb6, 0xbf, u);
  } else {
    const double u = (t - 0.5) * 2.0;
    r = lerp(0xff, 0xd7, u);
    g = lerp(0xff, 0x19, u);
    b = lerp(0xbf, 0x1c, u);
  }
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

std::string weights_vs_budget(std::span<const std::pair<TokenCount, OptimizationReport>> sweep,
                              std::span<const std::string> names) {
  const double width = 640, height = 420;
  const double left = 70, right = width - 150, top = 30, bottom = height - 50;

  double x_lo = 0.0, x_hi = 1.0;
  if (!sweep.empty()) {
    x_lo = std::log10(static_cast<double>(sweep.front().first));
    x_hi = std::log10(static_cast<double>(sweep.back().first));
    if (x_hi <= x_lo) {
      x_lo -= 0.5;
      x_hi += 0.5;
    }
  }
  auto x_of = [&](TokenCount budget) {
    const double t = (std::log10(static_cast<double>(budget)) - x_lo) / (x_hi - x_lo);
    return left + t * (right - left);
  };
  auto y_of = [&](double w) { return bottom - w * (bottom - top); };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + px(width) + "\" height=\"" +
         px(height) + "\" viewBox=\"0 0 " + px(width) + " " + px(height) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // Axes.
  out += "<line x1=\"" + px(left) + "\" y1=\"" + px(bottom) + "\" x2=\"" + px(right) +
         "\" y2=\"" + px(bottom) + "\" stroke=\"black\"/>\n";
  out += "<line x1=\"" + px(left) + "\" y1=\"" + px(top) + "\" x2=\"" + px(left) + "\" y2=\"" +
         px(bottom) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double w = 0.25 * i;
    out += "<line x1=\"" + px(left - 4) + "\" y1=\"" + px(y_of(w)) + "\" x2=\"" + px(left) +
           "\" y2=\"" + px(y_of(w)) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + px(left - 8) + "\" y=\"" + px(y_of(w) + 4) +
           "\" font-size=\"11\" text-anchor=\"end\">" + px(w) + "</text>\n";
  }
  for (const auto& [budget, report] : sweep) {
    (void)report;
    out += "<line x1=\"" + px(x_of(budget)) + "\" y1=\"" + px(bottom) + "\" x2=\"" +
           px(x_of(budget)) + "\" y2=\"" + px(bottom + 4) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + px(x_of(budget)) + "\" y=\"" + px(bottom + 18) +
           "\" font-size=\"11\" text-anchor=\"middle\">" + token_label(budget) + "</text>\n";
  }
  out += "<text x=\"" + px((left + right) / 2) + "\" y=\"" + px(height - 12) +
         "\" font-size=\"12\" text-anchor=\"middle\">data budget (tokens)</text>\n";
  out += "<text x=\"16\" y=\"" + px((top + bottom) / 2) +
         "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         px((top + bottom) / 2) + ")\">domain weight</text>\n";

  for (std::size_t d = 0; d < names.size(); ++d) {
    const char* color = kPalette[d % (sizeof(kPalette) / sizeof(kPalette[0]))];
    std::string pts;
    for (const auto& [budget, report] : sweep) {
      pts += px(x_of(budget)) + "," + px(y_of(report.weights[d])) + " ";
    }
    out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>\n";
    for (const auto& [budget, report] : sweep)
      out += "<circle cx=\"" + px(x_of(budget)) + "\" cy=\"" + px(y_of(report.weights[d])) +
             "\" r=\"3\" fill=\"" + color + "\"/>\n";
    const double ly = top + 18.0 * static_cast<double>(d);
    out += "<rect x=\"" + px(right + 14) + "\" y=\"" + px(ly) +
           "\" width=\"10\" height=\"10\" fill=\"" + color + "\"/>\n";
    out += "<text x=\"" + px(right + 30) + "\" y=\"" + px(ly + 9) + "\" font-size=\"12\">" +
           names[d] + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

std::string objective_surface(std::span<const DomainParams> params, TokenCount n0,
                              const GammaVector& gamma, std::span<const GridPoint> grid,
                              const WeightVector& optimum,
                              std::span<const std::string> names) {
  if (params.size() != 3)
    throw ValidationError("objective_surface: only K = 3 projects onto two free axes");

  const double width = 560, height = 560;
  const double left = 70, top = 40;
  const double plot = 440;
  const double bottom = top + plot;
  auto x_of = [&](double w1) { return left + w1 * plot; };
  auto y_of = [&](double w2) { return bottom - w2 * plot; };

  // Shade the feasible triangle on a fixed lattice; the third weight is
  // 1 - w1 - w2.
  const int cells = 50;
  const double step = 1.0 / cells;
  const double floor_w = 1e-6;
  struct Cell {
    double w1, w2, value;
  };
  std::vector<Cell> shaded;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  const double budget = static_cast<double>(n0);
  for (int i = 0; i < cells; ++i) {
    for (int j = 0; j < cells; ++j) {
      const double w1 = (i + 0.5) * step;
      const double w2 = (j + 0.5) * step;
      const double w3 = 1.0 - w1 - w2;
      if (w3 < floor_w) continue;
      double value = 0.0;
      const double w[3] = {w1, w2, w3};
      bool ok = true;
      for (int d = 0; d < 3; ++d) {
        const double base = detail::term_base(params[d], w[d], budget);
        if (base <= 0.0) {
          ok = false;
          break;
        }
        value += gamma[d] * (params[d].C * detail::pow_explicit(base, -params[d].beta) +
                             params[d].E);
      }
      if (!ok) continue;
      shaded.push_back({w1, w2, value});
      lo = std::min(lo, value);
      hi = std::max(hi, value);
    }
  }
  const double range = hi > lo ? hi - lo : 1.0;

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + px(width) + "\" height=\"" +
         px(height) + "\" viewBox=\"0 0 " + px(width) + " " + px(height) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const auto& cell : shaded) {
    out += "<rect x=\"" + px(x_of(cell.w1 - 0.5 * step)) + "\" y=\"" +
           px(y_of(cell.w2 + 0.5 * step)) + "\" width=\"" + px(plot * step) + "\" height=\"" +
           px(plot * step) + "\" fill=\"" + heat_color((cell.value - lo) / range) + "\"/>\n";
  }
  // Simplex boundary.
  out += "<polygon points=\"" + px(x_of(0)) + "," + px(y_of(0)) + " " + px(x_of(1)) + "," +
         px(y_of(0)) + " " + px(x_of(0)) + "," + px(y_of(1)) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = 0.25 * i;
    out += "<text x=\"" + px(x_of(v)) + "\" y=\"" + px(bottom + 16) +
           "\" font-size=\"11\" text-anchor=\"middle\">" + px(v) + "</text>\n";
    out += "<text x=\"" + px(left - 8) + "\" y=\"" + px(y_of(v) + 4) +
           "\" font-size=\"11\" text-anchor=\"end\">" + px(v) + "</text>\n";
  }
  out += "<text x=\"" + px(left + plot / 2) + "\" y=\"" + px(height - 12) +
         "\" font-size=\"12\" text-anchor=\"middle\">w_" + names[0] + "</text>\n";
  out += "<text x=\"18\" y=\"" + px(top + plot / 2) +
         "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         px(top + plot / 2) + ")\">w_" + names[1] + "</text>\n";

  for (const auto& pt : grid)
    out += "<circle cx=\"" + px(x_of(pt.weights[0])) + "\" cy=\"" + px(y_of(pt.weights[1])) +
           "\" r=\"3\" fill=\"black\"/>\n";

  // Star marker at the optimizer's weights.
  const double cx = x_of(optimum[0]);
  const double cy = y_of(optimum[1]);
  std::string star;
  for (int p = 0; p < 10; ++p) {
    const double r = p % 2 == 0 ? 10.0 : 4.0;
    const double angle = -1.5707963267948966 + p * 0.6283185307179586;
    star += px(cx + r * std::cos(angle)) + "," + px(cy + r * std::sin(angle)) + " ";
  }
  out += "<polygon points=\"" + star + "\" fill=\"gold\" stroke=\"black\"/>\n";
  out += "</svg>\n";
  return out;
}

}  // namespace svg
}  // namespace mixopt
