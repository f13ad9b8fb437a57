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

#include "smfmagic/stats.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <stdexcept>

namespace smfmagic {

Estimate jackknife(std::span<const double> leave_one_out, double full) {
    const std::size_t B = leave_one_out.size();
    if (B < 2) return {full, 0.0};
    double mean = 0.0;
    for (double v : leave_one_out) mean += v;
    mean /= static_cast<double>(B);
    double ss = 0.0;
    for (double v : leave_one_out) ss += (v - mean) * (v - mean);
    return {full, std::sqrt(ss * static_cast<double>(B - 1) / static_cast<double>(B))};
}

std::vector<double> leave_one_out_means(std::span<const double> bins) {
    const std::size_t B = bins.size();
    std::vector<double> out(B);
    if (B < 2) {
        std::copy(bins.begin(), bins.end(), out.begin());
        return out;
    }
    double total = 0.0;
    for (double v : bins) total += v;
    for (std::size_t k = 0; k < B; ++k) out[k] = (total - bins[k]) / static_cast<double>(B - 1);
    return out;
}

Estimate bin_mean(std::span<const double> bins) {
    if (bins.empty()) return {};
    double total = 0.0;
    for (double v : bins) total += v;
    auto loo = leave_one_out_means(bins);
    return jackknife(loo, total / static_cast<double>(bins.size()));
}

Histogram::Histogram(double lo, double hi, std::size_t bins) : lo_(lo), counts_(bins, 0) {
    if (bins == 0 || !(hi > lo)) throw std::invalid_argument("histogram needs hi > lo and at least one bin");
    width_ = (hi - lo) / static_cast<double>(bins);
}

void Histogram::add(double x) {
    if (counts_.empty()) throw std::logic_error("histogram not initialised");
    double pos = std::floor((x - lo_) / width_);
    std::size_t k = pos <= 0.0 ? 0 : std::min(counts_.size() - 1, static_cast<std::size_t>(pos));
    ++counts_[k];
    ++total_;
}

void Histogram::merge(const Histogram& other) {
    if (other.counts_.size() != counts_.size() || other.lo_ != lo_ || other.width_ != width_) {
        throw std::invalid_argument("histogram layouts differ");
    }
    for (std::size_t k = 0; k < counts_.size(); ++k) counts_[k] += other.counts_[k];
    total_ += other.total_;
}

void Histogram::assign(double lo, double width, std::vector<std::uint64_t> counts) {
    lo_ = lo;
    width_ = width;
    counts_ = std::move(counts);
    total_ = 0;
    for (auto c : counts_) total_ += c;
}

Bimodality detect_bimodality(const Histogram& h, double max_dip) {
    Bimodality out;
    if (h.size() < 5 || h.total() == 0) return out;
    auto raw = h.counts();
    // Short empty runs inside the support are gaps of a discrete energy
    // lattice, not dips, and are dropped before smoothing.
    std::size_t first = 0, last = raw.size() - 1;
    while (raw[first] == 0) ++first;
    while (raw[last] == 0) --last;
    std::vector<double> counts;
    std::vector<std::size_t> origin;
    for (std::size_t k = first; k <= last;) {
        if (raw[k] != 0) {
            counts.push_back(static_cast<double>(raw[k]));
            origin.push_back(k);
            ++k;
            continue;
        }
        std::size_t run = k;
        while (run <= last && raw[run] == 0) ++run;
        if (run - k > 4) {
            for (std::size_t j = k; j < run; ++j) {
                counts.push_back(0.0);
                origin.push_back(j);
            }
        }
        k = run;
    }
    const std::size_t K = counts.size();
    if (K < 5) return out;
    std::vector<double> smooth(K, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
        double s = 0.0;
        int m = 0;
        for (long d = -2; d <= 2; ++d) {
            long j = static_cast<long>(k) + d;
            if (j < 0 || j >= static_cast<long>(K)) continue;
            s += counts[static_cast<std::size_t>(j)];
            ++m;
        }
        smooth[k] = s / m;
    }
    double top = *std::max_element(smooth.begin(), smooth.end());
    std::vector<std::size_t> peaks;
    for (std::size_t k = 0; k < K; ++k) {
        double left = k > 0 ? smooth[k - 1] : -1.0;
        double right = k + 1 < K ? smooth[k + 1] : -1.0;
        if (smooth[k] >= left && smooth[k] > right && smooth[k] >= 0.05 * top) peaks.push_back(k);
    }
    double best_ratio = 1.0;
    for (std::size_t p = 0; p < peaks.size(); ++p) {
        for (std::size_t q = p + 1; q < peaks.size(); ++q) {
            std::size_t a = peaks[p], b = peaks[q];
            double valley = *std::min_element(smooth.begin() + static_cast<long>(a), smooth.begin() + static_cast<long>(b) + 1);
            double ratio = valley / std::min(smooth[a], smooth[b]);
            if (ratio < best_ratio) {
                best_ratio = ratio;
                out.low_peak = h.center(origin[a]);
                out.high_peak = h.center(origin[b]);
            }
        }
    }
    out.dip_ratio = best_ratio;
    out.bimodal = best_ratio <= max_dip;
    return out;
}

ChiSquare chi_square_test(std::span<const std::uint64_t> observed, std::span<const double> probabilities,
                          double min_expected) {
    if (observed.size() != probabilities.size()) throw std::invalid_argument("chi-square: size mismatch");
    double n = 0.0;
    for (auto c : observed) n += static_cast<double>(c);
    ChiSquare out;
    double pooled_obs = 0.0, pooled_exp = 0.0;
    int cells = 0;
    for (std::size_t k = 0; k < observed.size(); ++k) {
        double e = n * probabilities[k];
        double o = static_cast<double>(observed[k]);
        if (e < min_expected) {
            pooled_obs += o;
            pooled_exp += e;
            continue;
        }
        out.statistic += (o - e) * (o - e) / e;
        ++cells;
    }
    if (pooled_exp > 0.0) {
        out.statistic += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
        ++cells;
    }
    out.dof = std::max(1, cells - 1);
    out.p_value = boost::math::gamma_q(0.5 * out.dof, 0.5 * out.statistic);
    return out;
}

bool halves_disagree(std::span<const double> bins, double sigmas) {
    const std::size_t B = bins.size();
    if (B < 4) return false;
    auto first = bin_mean(bins.subspan(0, B / 2));
    auto second = bin_mean(bins.subspan(B / 2));
    double err = std::hypot(first.error, second.error);
    if (err == 0.0) return first.value != second.value;
    return std::abs(first.value - second.value) > sigmas * err;
}

}  // namespace smfmagic
