// Copyright 2026 The dfx Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Static SVG charts for run reports.

#pragma once

#include <string>
#include <vector>

namespace dfx::cli {

struct Series {
  std::string name;
  std::vector<double> x, y;
};

/// Line chart with linear axes, tick labels and a legend. Non-finite points
/// are skipped. Throws ContractError when no series has a point.
std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series);

struct Bar {
  std::string label;
  double value = 0;
  double error = 0;  // half-length of the error bar, 0 for none
};

/// Vertical bars with optional error bars; the y axis spans [y_min, y_max].
std::string bar_chart(const std::string& title, const std::string& y_label,
                      const std::vector<Bar>& bars, double y_min, double y_max);

/// Round numbers covering [lo, hi], about n of them.
std::vector<double> nice_ticks(double lo, double hi, int n);

}  // namespace dfx::cli
