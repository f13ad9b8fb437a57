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

#include "smfmagic/coupled.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace smfmagic {

namespace {

void check_layers(const LatticeModel& model, std::span<const SpinConfiguration> layers) {
    if (layers.size() < 4 || layers.size() % 2 != 0) {
        throw std::invalid_argument("coupled system needs an even number (>= 4) of layers, got " +
                                    std::to_string(layers.size()));
    }
    for (const auto& l : layers) {
        if (l.size() != model.site_count()) {
            throw std::invalid_argument("layer size does not match the model");
        }
    }
}

std::vector<SpinConfiguration> leave_one_out_products(std::span<const SpinConfiguration> layers) {
    std::vector<SpinConfiguration> out;
    out.reserve(layers.size());
    for (std::size_t a = 0; a < layers.size(); ++a) {
        SpinConfiguration p(layers[0].size());
        for (std::size_t b = 0; b < layers.size(); ++b) {
            if (b != a) p *= layers[b];
        }
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace

CoupledLayerState::CoupledLayerState(const LatticeModel& model, std::vector<SpinConfiguration> layers)
    : model_(&model), layers_(std::move(layers)) {
    check_layers(model, layers_);
    recompute();
}

CoupledLayerState CoupledLayerState::uniform(const LatticeModel& model, int n) {
    if (n < 2) {
        throw std::invalid_argument("Renyi index n must be at least 2");
    }
    return CoupledLayerState(model, std::vector<SpinConfiguration>(2 * n, SpinConfiguration(model.site_count())));
}

double CoupledLayerState::flip(std::size_t a, std::size_t i) {
    double delta = coupled_delta(*model_, *this, a, i);
    layers_[a].flip(i);
    for (std::size_t c = 0; c < products_.size(); ++c) {
        if (c != a) products_[c].flip(i);
    }
    energy_ += delta;
    return delta;
}

double CoupledLayerState::recompute() {
    products_ = leave_one_out_products(layers_);
    double e = 0.0;
    for (const auto& l : layers_) e += model_->energy(l);
    for (const auto& p : products_) e += model_->energy(p);
    double drift = energy_ - e;
    energy_ = e;
    return drift;
}

bool CoupledLayerState::products_consistent() const { return products_ == leave_one_out_products(layers_); }

double coupled_energy(const LatticeModel& model, std::span<const SpinConfiguration> layers) {
    check_layers(model, layers);
    double e = 0.0;
    for (const auto& l : layers) e += model.energy(l);
    for (const auto& p : leave_one_out_products(layers)) e += model.energy(p);
    return e;
}

double coupled_delta(const LatticeModel& model, const CoupledLayerState& state, std::size_t a, std::size_t i) {
    if (a >= state.layer_count() || i >= model.site_count()) {
        throw std::out_of_range("coupled_delta: layer or site out of range");
    }
    double delta = model.delta_energy(state.layer(a), i);
    for (std::size_t c = 0; c < state.layer_count(); ++c) {
        if (c != a) delta += model.delta_energy(state.product(c), i);
    }
    return delta;
}

double spin_overlap(const SpinConfiguration& alpha, const SpinConfiguration& beta) {
    if (alpha.size() != beta.size()) {
        throw std::invalid_argument("spin_overlap: size mismatch");
    }
    if (alpha.size() == 0) return 0.0;
    long differ = 0;
    auto wa = alpha.words();
    auto wb = beta.words();
    for (std::size_t w = 0; w < wa.size(); ++w) differ += std::popcount(wa[w] ^ wb[w]);
    return 1.0 - 2.0 * static_cast<double>(differ) / static_cast<double>(alpha.size());
}

}  // namespace smfmagic
