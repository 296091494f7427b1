#include "protopop/svg.hpp"

#include <algorithm>
#include <cstdio>

#include "protopop/error.hpp"

namespace protopop {

namespace {

constexpr double kWidth = 640, kHeight = 400, kMargin = 48;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string header(const std::string& title) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
         "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
         "<text x=\"" + num(kWidth / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) +
         "</text>\n";
}

}  // namespace

std::string svg_histogram(const std::string& title, std::span<const std::string> labels,
                          std::span<const double> counts) {
  if (labels.size() != counts.size()) throw ShapeError("svg_histogram: labels and counts differ in length");
  std::string out = header(title);
  const double top = counts.empty() ? 1.0 : std::max(1.0, *std::max_element(counts.begin(), counts.end()));
  const double plot_w = kWidth - 2 * kMargin, plot_h = kHeight - 2 * kMargin;
  const double bar = counts.empty() ? 0.0 : plot_w / static_cast<double>(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double h = plot_h * counts[i] / top;
    const double x = kMargin + bar * static_cast<double>(i);
    out += "<rect x=\"" + num(x + 1) + "\" y=\"" + num(kHeight - kMargin - h) + "\" width=\"" +
           num(std::max(bar - 2, 1.0)) + "\" height=\"" + num(h) + "\" fill=\"steelblue\"/>\n";
    out += "<text x=\"" + num(x + bar / 2) + "\" y=\"" + num(kHeight - kMargin + 14) +
           "\" text-anchor=\"middle\">" + escape(labels[i]) + "</text>\n";
  }
  out += "<text x=\"" + num(kMargin - 4) + "\" y=\"" + num(kMargin) + "\" text-anchor=\"end\">" + num(top) +
         "</text>\n</svg>\n";
  return out;
}

std::string svg_scatter(const std::string& title, std::span<const double> actual, std::span<const double> predicted) {
  if (actual.size() != predicted.size()) throw ShapeError("svg_scatter: lengths differ");
  std::string out = header(title);
  double lo = 0, hi = 1;
  if (!actual.empty()) {
    lo = std::min(*std::min_element(actual.begin(), actual.end()),
                  *std::min_element(predicted.begin(), predicted.end()));
    hi = std::max(*std::max_element(actual.begin(), actual.end()),
                  *std::max_element(predicted.begin(), predicted.end()));
    if (hi <= lo) hi = lo + 1;
  }
  const double plot = std::min(kWidth, kHeight) - 2 * kMargin;
  auto px = [&](double v) { return kMargin + plot * (v - lo) / (hi - lo); };
  auto py = [&](double v) { return kHeight - kMargin - plot * (v - lo) / (hi - lo); };
  out += "<line x1=\"" + num(px(lo)) + "\" y1=\"" + num(py(lo)) + "\" x2=\"" + num(px(hi)) + "\" y2=\"" +
         num(py(hi)) + "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  for (std::size_t i = 0; i < actual.size(); ++i) {
    out += "<circle cx=\"" + num(px(actual[i])) + "\" cy=\"" + num(py(predicted[i])) +
           "\" r=\"1.5\" fill=\"steelblue\" fill-opacity=\"0.5\"/>\n";
  }
  out += "<text x=\"" + num(kMargin + plot / 2) + "\" y=\"" + num(kHeight - 12) +
         "\" text-anchor=\"middle\">actual</text>\n";
  out += "<text x=\"14\" y=\"" + num(kHeight / 2) + "\" transform=\"rotate(-90 14 " + num(kHeight / 2) +
         ")\" text-anchor=\"middle\">predicted</text>\n</svg>\n";
  return out;
}

}  // namespace protopop
