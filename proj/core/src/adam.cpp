#include "mfusion/adam.hpp"

#include <cmath>

#include "mfusion/errors.hpp"

namespace mfusion::num {

void Adam::step(ParamStore& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));

    for (auto& [path, slot] : params) {
        auto it = moments_.find(path);
        if (it == moments_.end()) {
            it = moments_.emplace(path, Moments{Tensor(slot.value.shape()),
                                                Tensor(slot.value.shape())}).first;
        }
        Moments& mom = it->second;
        if (!mom.m.same_shape(slot.value)) {
            throw ShapeError("adam: slot " + path + " changed shape from " +
                             mom.m.shape_str() + " to " + slot.value.shape_str());
        }
        for (std::size_t i = 0; i < slot.value.size(); ++i) {
            const double g = slot.grad[i];
            mom.m[i] = cfg_.beta1 * mom.m[i] + (1.0 - cfg_.beta1) * g;
            mom.v[i] = cfg_.beta2 * mom.v[i] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = mom.m[i] / bc1;
            const double vhat = mom.v[i] / bc2;
            slot.value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        slot.grad.fill(0.0);
    }
}

}  // namespace mfusion::num
