#pragma once

#include <limits>
#include <string>
#include <vector>

#include "spinsight/camera.hpp"
#include "spinsight/eval.hpp"

namespace spinsight::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color;
  bool markers = false;
};

struct PlotOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 640;
  int height = 480;
  bool equal_aspect = false;
  bool flip_y = false;  // image coordinates grow downward
  // Fixed ranges; NaN means fit to the data.
  double x_min = std::numeric_limits<double>::quiet_NaN();
  double x_max = std::numeric_limits<double>::quiet_NaN();
  double y_min = std::numeric_limits<double>::quiet_NaN();
  double y_max = std::numeric_limits<double>::quiet_NaN();
};

std::string line_plot(const std::vector<Series>& series, const PlotOptions& options);

std::string roc_plot(const std::vector<RocPoint>& curve, double auc);

std::string confusion_plot(const Confusion& m);

// Observed and projected ball tracks plus table keypoints in image space.
std::string reprojection_overlay(const ImageSize& img, const std::vector<Pixel>& observed,
                                 const std::vector<Pixel>& projected,
                                 const std::vector<Pixel>& keypoints,
                                 const std::string& title);

}  // namespace spinsight::svg
