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
#include <span>
#include <vector>

#include "smfmagic/lattice.hpp"

namespace smfmagic {

/// The 2n replicated layers of the coupled system together with the 2n
/// leave-one-out products prod_{b != a} sigma^(b) and the cached coupled
/// energy. This is the reference representation; the Monte Carlo kernels use
/// a site-major packing and are validated against it.
class CoupledLayerState {
  public:
    CoupledLayerState(const LatticeModel& model, std::vector<SpinConfiguration> layers);
    /// All 2n layers set to +1.
    static CoupledLayerState uniform(const LatticeModel& model, int n);

    int n() const { return static_cast<int>(layers_.size() / 2); }
    std::size_t layer_count() const { return layers_.size(); }
    const LatticeModel& model() const { return *model_; }
    const SpinConfiguration& layer(std::size_t a) const { return layers_[a]; }
    const SpinConfiguration& product(std::size_t a) const { return products_[a]; }
    std::span<const SpinConfiguration> layers() const { return layers_; }

    double energy() const { return energy_; }

    /// Flips site i of layer a, updates the products and the cached energy,
    /// and returns the energy change.
    double flip(std::size_t a, std::size_t i);

    /// Recomputes products and energy from the layers; returns the drift that
    /// was removed from the cached energy.
    double recompute();

    /// True when every cached product matches a from-scratch product.
    bool products_consistent() const;

  private:
    const LatticeModel* model_;
    std::vector<SpinConfiguration> layers_;
    std::vector<SpinConfiguration> products_;
    double energy_ = 0.0;
};

/// Sum of the model energy over all 2n layers and all 2n leave-one-out
/// products. The statistical weight of a coupled state is exp(-(beta/2) E_M).
double coupled_energy(const LatticeModel& model, std::span<const SpinConfiguration> layers);

/// E_M change for flipping site i of layer a: the direct layer delta plus the
/// deltas of the 2n-1 products that contain layer a.
double coupled_delta(const LatticeModel& model, const CoupledLayerState& state, std::size_t a, std::size_t i);

/// (1/N) sum_i s^alpha_i s^beta_i.
double spin_overlap(const SpinConfiguration& alpha, const SpinConfiguration& beta);

}  // namespace smfmagic
