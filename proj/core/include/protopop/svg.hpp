#pragma once

#include <span>
#include <string>
#include <vector>

namespace protopop {

// Bar chart of counts; labels[i] names bar i.
std::string svg_histogram(const std::string& title, std::span<const std::string> labels,
                          std::span<const double> counts);

// Predicted-vs-actual scatter with a y = x reference line.
std::string svg_scatter(const std::string& title, std::span<const double> actual, std::span<const double> predicted);

}  // namespace protopop
