// Copyright 2026 The smfmagic Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace smfmagic {

struct Estimate {
    double value = 0.0;
    double error = 0.0;
};

/// Jackknife error from leave-one-bin-out estimates; `full` is the estimate
/// on all bins and is reported as the value.
Estimate jackknife(std::span<const double> leave_one_out, double full);

/// Mean of bin averages with its jackknife (= naive binning) error.
Estimate bin_mean(std::span<const double> bins);

/// Leave-one-out means: entry k is the mean of all bins except k.
std::vector<double> leave_one_out_means(std::span<const double> bins);

/// Fixed-width histogram over [lo, lo + width * bins).
class Histogram {
  public:
    Histogram() = default;
    Histogram(double lo, double hi, std::size_t bins);

    void add(double x);
    double lo() const { return lo_; }
    double width() const { return width_; }
    std::size_t size() const { return counts_.size(); }
    std::uint64_t total() const { return total_; }
    std::span<const std::uint64_t> counts() const { return counts_; }
    double center(std::size_t k) const { return lo_ + (static_cast<double>(k) + 0.5) * width_; }

    void merge(const Histogram& other);
    void assign(double lo, double width, std::vector<std::uint64_t> counts);

  private:
    double lo_ = 0.0;
    double width_ = 1.0;
    std::vector<std::uint64_t> counts_;
    std::uint64_t total_ = 0;
};

struct Bimodality {
    bool bimodal = false;
    double low_peak = 0.0;
    double high_peak = 0.0;
    /// Smoothed count at the deepest point between the two peaks divided by
    /// the smaller peak height.
    double dip_ratio = 1.0;
};

/// Two separated maxima of the smoothed histogram whose valley drops to at
/// most `max_dip` of the smaller one.
Bimodality detect_bimodality(const Histogram& h, double max_dip = 0.75);

struct ChiSquare {
    double statistic = 0.0;
    int dof = 0;
    double p_value = 1.0;
};

/// Pearson test of counts against probabilities; cells with expected count
/// below `min_expected` are pooled into one cell.
ChiSquare chi_square_test(std::span<const std::uint64_t> observed, std::span<const double> probabilities,
                          double min_expected = 5.0);

/// True when the first- and second-half bin means differ by more than
/// `sigmas` combined standard errors.
bool halves_disagree(std::span<const double> bins, double sigmas = 3.0);

}  // namespace smfmagic
