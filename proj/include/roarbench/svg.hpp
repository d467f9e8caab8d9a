/*
 * Copyright 2026 The roarbench Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Minimal SVG line charts with shaded bands.

#pragma once

#include <optional>
#include <string>
#include <vector>

namespace roarbench::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  // Optional band; both empty or both sized like y.
  std::vector<double> low;
  std::vector<double> high;
  bool dashed = false;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  double x_min = 0.0;
  double x_max = 1.0;
  double y_min = 0.0;
  double y_max = 1.0;
  std::vector<double> x_ticks;
  std::vector<double> y_ticks = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  // Tick labels as percentages.
  bool x_percent = true;
  std::vector<Series> series;
  // Horizontal reference line, drawn dotted.
  std::optional<double> rule;
  std::string rule_label;
};

std::string Render(const Chart& chart);

}  // namespace roarbench::svg
