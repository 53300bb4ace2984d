// Copyright (C) 2026 The fpfixed Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance
// with the License. You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software distributed under the License
// is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express
// or implied. See the License for the specific language governing permissions and limitations under the License.

#pragma once

#include <cmath>

#include "fpfixed/net/toy_net.hpp"

namespace fpfixed::net {

// RMSProp: acc <- decay acc + (1 - decay) g^2; p <- p - lr g / (sqrt(acc) + eps).
// Localizer blocks step with lr * loc_lr_scale.
template <typename T>
class RmsProp {
 public:
    RmsProp(const NetConfig& cfg, double learning_rate, double decay = 0.9, double epsilon = 1e-8)
        : acc_(NetParams<T>::zeros(cfg)), lr_(learning_rate), decay_(decay), eps_(epsilon) {}

    void step(NetParams<T>& params, const NetParams<T>& grads, double loc_lr_scale) {
        auto pb = params.blocks();
        auto gb = grads.blocks();
        auto ab = acc_.blocks();
        if (pb.size() != gb.size() || pb.size() != ab.size()) {
            throw ValidationError("rmsprop: parameter, gradient and state layouts differ");
        }
        for (std::size_t i = 0; i < pb.size(); ++i) {
            auto& p = pb[i].tensor->values;
            const auto& g = gb[i].tensor->values;
            auto& a = ab[i].tensor->values;
            if (p.size() != g.size() || p.size() != a.size()) {
                throw ValidationError("rmsprop: shape mismatch in block " + pb[i].name);
            }
            const double lr = pb[i].localizer ? lr_ * loc_lr_scale : lr_;
            for (std::size_t j = 0; j < p.size(); ++j) {
                const double gj = static_cast<double>(g[j]);
                const double aj = decay_ * static_cast<double>(a[j]) + (1.0 - decay_) * gj * gj;
                a[j] = static_cast<T>(aj);
                p[j] = static_cast<T>(static_cast<double>(p[j]) - lr * gj / (std::sqrt(aj) + eps_));
            }
        }
    }

    const NetParams<T>& accumulators() const { return acc_; }
    double learning_rate() const { return lr_; }

 private:
    NetParams<T> acc_;
    double lr_;
    double decay_;
    double eps_;
};

}  // namespace fpfixed::net
