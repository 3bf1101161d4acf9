#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>

#include "mfusion/param_store.hpp"

namespace mfusion::num {

// Adam with bias correction. Moment estimates live here, keyed by slot path,
// so one optimizer instance sticks with one model's ParamStore.
class Adam {
public:
    struct Config {
        double lr = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
    };

    Adam() : Adam(Config{}) {}
    explicit Adam(Config cfg) : cfg_(cfg) {}

    // Applies one update from the accumulated gradients, then zeroes them.
    void step(ParamStore& params);

    std::uint64_t steps() const { return t_; }
    const Config& config() const { return cfg_; }

private:
    struct Moments {
        Tensor m;
        Tensor v;
    };

    Config cfg_;
    std::uint64_t t_ = 0;
    std::map<std::string, Moments> moments_;
};

}  // namespace mfusion::num
